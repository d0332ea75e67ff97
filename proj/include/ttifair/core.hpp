#pragma once

// Shared domain types for the audit engine. Everything here is a plain value
// type; an EvalConfig is immutable once loaded and may be shared across threads.

#include <cstdint>
#include <string>
#include <vector>

namespace ttifair {

// The sensitive attribute under audit and its ordered value labels.
struct AttributeScheme {
    std::string name;                 // e.g. "race"
    std::vector<std::string> values;  // e.g. Asian, Black, Caucasian, ...

    // Index of `label` in `values`, or -1.
    int index_of(const std::string& label) const;
    bool operator==(const AttributeScheme&) const = default;
};

enum class FeatureKind : std::uint8_t { CategoricalMatch, NumericRange };

// One representativity attribute used for persona matching.
struct InclusionFeatureSpec {
    std::string name;                     // "gender", "age"
    FeatureKind kind = FeatureKind::CategoricalMatch;
    std::vector<std::string> categories;  // categorical only
    double min = 0.0;                     // numeric only
    double max = 0.0;                     // numeric only

    double range_width() const { return max - min; }
    bool operator==(const InclusionFeatureSpec&) const = default;
};

struct Thresholds {
    double diversity_min = 0.70;
    double inclusion_min = 0.55;
    double parity_epsilon = 0.15;
    bool operator==(const Thresholds&) const = default;
};

enum class FairKind : std::uint8_t { Uniform, Explicit };

// Reference distribution Q over the attribute values.
struct FairDistribution {
    FairKind kind = FairKind::Uniform;
    std::vector<double> weights;  // explicit only, aligned with AttributeScheme::values

    // Resolved per-value weights for an attribute with `n` values.
    std::vector<double> resolve(std::size_t n) const;
    bool operator==(const FairDistribution&) const = default;
};

enum class AgeDistributionKind : std::uint8_t { Uniform, Normal };

// How persona ages are drawn inside the age feature's range.
struct AgeDistribution {
    AgeDistributionKind kind = AgeDistributionKind::Uniform;
    double mean = 0.0;    // normal only
    double stddev = 0.0;  // normal only
    bool operator==(const AgeDistribution&) const = default;
};

struct EvalConfig {
    std::vector<std::string> queries;
    AttributeScheme attribute;
    std::vector<InclusionFeatureSpec> inclusion_features;
    FairDistribution fair_distribution;
    Thresholds thresholds;
    std::vector<std::string> prompt_templates;
    std::int64_t diversity_seeds = 19;
    std::int64_t conditioned_seeds = 3;
    std::int64_t images_per_seed = 5;
    std::int64_t persona_count = 5000;
    std::int64_t persona_sample_size = 5;
    AgeDistribution age_distribution;
    std::uint64_t master_seed = 0;

    // Feature lookup by name; nullptr when absent.
    const InclusionFeatureSpec* feature(const std::string& name) const;
    std::vector<double> fair_weights() const { return fair_distribution.resolve(attribute.values.size()); }

    bool operator==(const EvalConfig&) const = default;
};

// Probability vector over the attribute values, in scheme order.
struct Distribution {
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
    double operator[](std::size_t i) const { return weights[i]; }
    bool operator==(const Distribution&) const = default;
};

// One violated invariant: the offending field path and the rule it breaks.
struct Violation {
    std::string field;
    std::string rule;
    bool operator==(const Violation&) const = default;
};

}  // namespace ttifair
