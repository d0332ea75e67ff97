#pragma once

// End-to-end scoring and reporting shared by the command-line tool and the
// review service, so both produce byte-identical documents from the same inputs.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttifair/config.hpp"
#include "ttifair/decision.hpp"
#include "ttifair/ingest.hpp"
#include "ttifair/scoring.hpp"

namespace ttifair {

inline constexpr std::string_view kToolVersion = "0.3.0";

// Deterministic provenance embedded in every score and report document.
// Input hashes cover the canonical serialization of the parsed inputs, not the
// raw file bytes, so equivalent inputs from different sources hash equally.
struct Provenance {
    std::string tool_version{kToolVersion};
    std::string config_fingerprint;
    std::uint64_t seed = 0;
    std::string records_sha256;
    std::optional<std::string> corrections_sha256;
    std::optional<std::string> confidences_sha256;
    std::string kl_scoring = "exp";  // "exp" or "literal"

    bool operator==(const Provenance&) const = default;
};

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

struct LayerScores {
    Layer layer = Layer::Model;
    DiversityScores diversity;
    ScoreTable table;
};

struct ScoreBundle {
    Provenance provenance;
    std::vector<LayerScores> layers;  // model first, then human when corrections were given

    const LayerScores* layer(Layer l) const;
};

nlohmann::json bundle_to_json(const ScoreBundle& b);
ScoreBundle bundle_from_json(const nlohmann::json& j);

struct ScoringInputs {
    std::vector<ImageRecord> records;  // model layer
    std::optional<std::vector<CorrectionEvent>> corrections;
    std::optional<std::vector<ConfidenceRecord>> confidences;
};

struct ScoringOptions {
    std::optional<std::uint64_t> seed;  // defaults to cfg.master_seed
    KlScoring kl_scoring = KlScoring::Exp;
};

struct ScoringRun {
    ScoreBundle bundle;
    std::vector<std::string> warnings;  // dangling/rejected corrections, unmatched confidences
};

// Applies confidences to the model layer, scores it, then scores the merged
// human layer when corrections are present. Personas are sampled once and
// shared by both layers.
ScoringRun run_scoring(const EvalConfig& cfg, const ScoringInputs& inputs, const ScoringOptions& opts = {});

enum class LayerSelection { Model, Human, Both };

std::optional<LayerSelection> layer_selection_from_string(std::string_view s);

struct ReportOptions {
    DiversityMetric metric = DiversityMetric::Kl;
    LayerSelection layers = LayerSelection::Both;
    std::optional<KlScoring> rescore_kl;  // recompute the KL-based score from the stored divergence
};

struct ReportDocument {
    Provenance provenance;
    std::vector<AuditReport> reports;
    Layer verdict_layer = Layer::Model;  // human when present, else model
    Verdict verdict = Verdict::Bias;

    const AuditReport& deciding() const;
};

// Throws DataError when a requested layer is missing from the bundle.
ReportDocument build_report(const EvalConfig& cfg, const ScoreBundle& bundle, const ReportOptions& opts = {});

nlohmann::json document_to_json(const ReportDocument& d);
ReportDocument document_from_json(const nlohmann::json& j);
std::string document_to_text(const ReportDocument& d);

// Stable serialized forms used for files and HTTP bodies.
std::string dump_document(const ReportDocument& d);
std::string dump_bundle(const ScoreBundle& b);

std::string records_digest(const std::vector<ImageRecord>& records);
std::string corrections_digest(const std::vector<CorrectionEvent>& events);
std::string confidences_digest(const std::vector<ConfidenceRecord>& confidences);

}  // namespace ttifair
