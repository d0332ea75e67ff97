#pragma once

// The staged representativity verdict: diversity gate, per-value inclusion
// gate, then multi-class parity on inclusion and quality.

#include <string>
#include <vector>

#include <json.hpp>

#include "ttifair/core.hpp"
#include "ttifair/ingest.hpp"
#include "ttifair/scoring.hpp"
#include "ttifair/stats.hpp"

namespace ttifair {

enum class DiversityMetric { Kl, Tvd };

std::string_view to_string(DiversityMetric m);
std::optional<DiversityMetric> metric_from_string(std::string_view s);

enum class Verdict { Fair, Bias };

std::string_view to_string(Verdict v);

struct DiversityGate {
    double score_kl = 0.0;
    double score_tvd = 0.0;
    DiversityMetric metric = DiversityMetric::Kl;
    double threshold = 0.0;
    bool passed = false;

    double score() const { return metric == DiversityMetric::Kl ? score_kl : score_tvd; }
};

struct InclusionGateEntry {
    std::string value;
    double score = 0.0;
    bool passed = false;
};

struct InclusionGate {
    std::vector<InclusionGateEntry> entries;
    double threshold = 0.0;
    bool passed = false;
    bool informational = false;  // an earlier gate already failed
};

struct ParityGate {
    ParityResult result;
    bool informational = false;
    bool passed() const { return result.passed(); }
};

struct AuditReport {
    Layer layer = Layer::Model;
    DiversityGate diversity;
    InclusionGate inclusion_gate;
    ParityGate inclusion_parity;
    ParityGate quality_parity;
    Verdict verdict = Verdict::Bias;
    std::vector<std::string> reasons;  // framework order; empty iff fair
    std::string config_fingerprint;
    std::vector<CellScores> cells;  // per-cell detail behind the marginals
};

struct DecideOptions {
    DiversityMetric metric = DiversityMetric::Kl;
    Layer layer = Layer::Model;
    std::vector<double> fair_weights;  // empty: unweighted parity expectation
    std::string config_fingerprint;
};

// Runs every gate. Gates after the first failure are still evaluated but marked
// informational; the verdict is fair only when all of them pass. Throws
// DataError when a configured value lacks an inclusion or quality marginal, or
// a diversity score is outside [0, 1].
AuditReport decide(double diversity_kl, double diversity_tvd, const ScoreTable& table, const Thresholds& thresholds,
                   const std::vector<std::string>& values, const DecideOptions& opts = {});

nlohmann::json report_to_json(const AuditReport& r);
AuditReport report_from_json(const nlohmann::json& j);

// Human-readable report: each gate with its score, threshold and outcome in
// framework order, then the verdict and reasons.
std::string render_text(const AuditReport& r);

}  // namespace ttifair
