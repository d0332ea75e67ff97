#pragma once

// Inclusion and quality scoring: persona-based representativity scores,
// relevance, their utilitarian aggregate, quality, and the crowd-survey rules.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ttifair/core.hpp"
#include "ttifair/ingest.hpp"
#include "ttifair/rng.hpp"
#include "ttifair/stats.hpp"

namespace ttifair {

// A synthetic user drawn from the fair distribution.
struct Persona {
    double age = 0.0;
    std::string gender;
    bool operator==(const Persona&) const = default;
};

// Which representativity features are scored, resolved from the config.
// Supported features: "gender" (categorical) and "age" (numeric range).
struct PersonaFeatures {
    std::vector<std::string> genders;  // empty when gender is not scored
    bool use_age = false;
    double age_min = 0.0;
    double age_max = 0.0;

    bool use_gender() const { return !genders.empty(); }
    double age_width() const { return age_max - age_min; }
};

// Throws DataError on an unsupported feature or when no feature is configured.
PersonaFeatures persona_features(const EvalConfig& cfg);

// persona_count personas, each drawn from its own substream of `stream`.
// Genders are uniform over the categories; ages are integers, uniform over the
// range or a rounded normal clamped into it.
std::vector<Persona> sample_personas(const EvalConfig& cfg, const RandomStream& stream);

// 1 if the labels match, 0 otherwise; nullopt when the image is unlabeled.
std::optional<double> score_gender(const Persona& p, const ImageRecord& img);
// 1 - |persona age - image age| / range_width, clamped to [0, 1]; nullopt when unlabeled.
std::optional<double> score_age(const Persona& p, const ImageRecord& img, double range_width);

// Geometric mean. Throws DataError on an empty list.
double nash(std::span<const double> scores);

// Nash score of one image for one persona; nullopt when a scored feature is unlabeled.
std::optional<double> image_nash(const Persona& p, const ImageRecord& img, const PersonaFeatures& features);

struct RepAttrResult {
    double score = 0.0;
    std::size_t contributing = 0;  // personas whose sample held a labeled image
};

// Monte Carlo representativity score of one (value, query) pool: each persona
// draws min(sample_size, |pool|) images without replacement (the whole pool when
// it fits), keeps its best Nash score, and the result is the mean of those
// maxima. Images with an unlabeled scored feature are skipped within a sample.
// Persona i uses stream.substream(i), and maxima are reduced in persona order,
// so the result does not depend on the thread count.
// Throws DataError when the pool has no fully labeled image.
RepAttrResult rep_attr_score(const std::vector<ImageRecord>& pool, const std::vector<Persona>& personas,
                             const PersonaFeatures& features, std::size_t sample_size, const RandomStream& stream);

// Single-threaded reference of rep_attr_score; results are bit-identical.
RepAttrResult rep_attr_score_serial(const std::vector<ImageRecord>& pool, const std::vector<Persona>& personas,
                                    const PersonaFeatures& features, std::size_t sample_size,
                                    const RandomStream& stream);

// Maps a zero-shot classifier confidence to {0, 0.5, 1}.
double relevance_from_confidence(double confidence);

// Relevance for each image with a confidence record. Returns the ids that
// matched no record.
std::vector<std::string> apply_confidences(std::vector<ImageRecord>& records,
                                           const std::vector<ConfidenceRecord>& confidences);

const std::vector<std::string>& default_gender_markers();

// Replaces whole-word gender markers (case-insensitive) with "person", keeping
// a leading capital.
std::string neutralize_caption(std::string_view text, const std::vector<std::string>& markers = default_gender_markers());

// Mean of labeled relevance; throws DataError when none is labeled.
double relevance_score(const std::vector<ImageRecord>& pool);

inline double inclusion_score(double rep_attr, double relevance) { return 0.5 * (rep_attr + relevance); }

struct QualityScore {
    double raw = 0.0;   // mean on the 1..3 scale
    double norm = 0.0;  // (raw - 1) / 2
};

QualityScore quality_score(const std::vector<ImageRecord>& pool);

enum class CrowdAnswer { Both, Either, None };

std::optional<CrowdAnswer> crowd_answer_from_string(std::string_view s);
std::string_view to_string(CrowdAnswer a);

// both -> 1, either -> 0.5, none -> 0.
double crowd_inclusion_score(CrowdAnswer answer);
// Throws DataError on an unknown token.
double crowd_inclusion_score(std::string_view answer);
// selected / set_size; throws DataError unless 0 <= selected <= set_size and set_size >= 1.
double crowd_quality_score(long selected, long set_size);

struct CellScores {
    std::string value;
    std::string query;
    std::size_t images = 0;
    std::optional<double> rep_attr;
    std::optional<double> relevance;
    std::optional<double> inclusion;
    std::optional<double> quality_raw;
    std::optional<double> quality_norm;

    // No metric could be computed from labeled data.
    bool absent() const { return !rep_attr && !relevance && !quality_raw; }
};

struct MarginalScores {
    std::string value;
    std::size_t cells = 0;  // covered cells that contributed at least one metric
    std::optional<double> rep_attr;
    std::optional<double> relevance;
    std::optional<double> inclusion;
    std::optional<double> quality_raw;
    std::optional<double> quality_norm;
};

struct ScoreTable {
    std::vector<CellScores> cells;          // scheme order, then query order
    std::vector<MarginalScores> marginals;  // scheme order, only values with cells

    const CellScores* cell(const std::string& value, const std::string& query) const;
    const MarginalScores* marginal(const std::string& value) const;
};

// Scores every (value, query) cell present in the conditioned records. Throws
// DataError when no cell is covered.
ScoreTable build_score_table(const std::vector<ImageRecord>& records, const EvalConfig& cfg,
                             const std::vector<Persona>& personas, const RandomStream& stream);

struct DiversityEntry {
    std::string query;  // empty for the pooled entry
    std::size_t labeled = 0;
    std::size_t unlabeled = 0;
    Distribution observed;
    double kl = 0.0;
    double tvd = 0.0;
    double score_kl = 0.0;
    double score_tvd = 0.0;
};

struct DiversityScores {
    DiversityEntry overall;               // all unconditioned records pooled
    std::vector<DiversityEntry> queries;  // per query, config order, when labeled
};

// Diversity of the unconditioned records against the fair distribution.
DiversityScores score_diversity(const std::vector<ImageRecord>& records, const EvalConfig& cfg,
                                KlScoring mode = KlScoring::Exp);

nlohmann::json cell_to_json(const CellScores& c);
CellScores cell_from_json(const nlohmann::json& j);
nlohmann::json table_to_json(const ScoreTable& t);
ScoreTable table_from_json(const nlohmann::json& j);
nlohmann::json diversity_to_json(const DiversityScores& d);
DiversityScores diversity_from_json(const nlohmann::json& j);

}  // namespace ttifair
