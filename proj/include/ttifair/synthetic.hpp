#pragma once

// Deterministic synthetic annotation records laid out like a real plan's output.
// Used for demos, fixtures and benchmarks; the values carry no empirical meaning.

#include <cstdint>
#include <vector>

#include "ttifair/core.hpp"
#include "ttifair/ingest.hpp"

namespace ttifair {

struct SyntheticOptions {
    std::size_t templates = 1;       // plan templates to materialize
    std::size_t dominant_value = 0;  // attribute value over-represented in unconditioned images
    double dominant_share = 0.4;     // its share among unconditioned race labels
    double unlabeled_rate = 0.05;    // chance that a race/age/gender annotation is "-"
    std::uint64_t seed = 1;
};

// One record per planned image: image_id is "<job_id>.i<k>".
std::vector<ImageRecord> synthetic_records(const EvalConfig& cfg, const SyntheticOptions& opts = {});

}  // namespace ttifair
