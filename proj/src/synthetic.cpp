#include "ttifair/synthetic.hpp"

#include <algorithm>

#include "ttifair/plan.hpp"
#include "ttifair/rng.hpp"

namespace ttifair {

std::vector<ImageRecord> synthetic_records(const EvalConfig& cfg, const SyntheticOptions& opts) {
    const auto plan = build_plan(cfg);
    const auto* gender = cfg.feature("gender");
    const auto& values = cfg.attribute.values;
    const std::size_t dominant = std::min(opts.dominant_value, values.size() - 1);

    std::vector<ImageRecord> out;
    for (const auto& job : plan) {
        if (job.template_index >= opts.templates) continue;
        RandomStream rng = RandomStream(opts.seed, "synthetic").substream(job.job_id);
        // Each (query, value) leans towards one gender so cells differ.
        RandomStream lean = RandomStream(opts.seed, "synthetic.lean").substream(job.query + "|" + job.conditioned_value.value_or(""));
        const double p_first_gender = 0.15 + 0.7 * lean.uniform01();

        for (std::int64_t k = 0; k < job.images_per_seed; ++k) {
            ImageRecord r;
            r.image_id = job.job_id + ".i" + std::to_string(k);
            r.job_id = job.job_id;
            r.query = job.query;
            r.conditioned_value = job.conditioned_value;
            r.seed = job.seed;
            auto unlabeled = [&] { return rng.uniform01() < opts.unlabeled_rate; };

            if (!unlabeled()) {
                if (job.conditioned_value) {
                    // Conditioned prompts mostly yield the requested value.
                    r.race = rng.uniform01() < 0.9 ? *job.conditioned_value : values[rng.below(values.size())];
                } else if (rng.uniform01() < opts.dominant_share) {
                    r.race = values[dominant];
                } else {
                    r.race = values[rng.below(values.size())];
                }
            }
            if (!unlabeled()) r.age = static_cast<double>(rng.uniform_int(18, 70));
            if (gender && !unlabeled()) {
                r.gender = rng.uniform01() < p_first_gender ? gender->categories[0]
                                                            : gender->categories[1 + rng.below(gender->categories.size() - 1)];
            }
            static constexpr double kRelevance[] = {0.0, 0.5, 1.0, 1.0};
            r.relevance = kRelevance[rng.below(4)];
            r.quality = static_cast<int>(1 + rng.below(3));
            r.layer = Layer::Model;
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace ttifair
