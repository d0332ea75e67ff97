#include "ttifair/plan.hpp"

#include <set>

#include "ttifair/error.hpp"
#include "ttifair/rng.hpp"

namespace ttifair {

namespace {

constexpr std::string_view kQuery = "{q}";
constexpr std::string_view kValue = "{a}";

std::vector<std::uint64_t> draw_distinct(RandomStream stream, std::int64_t count) {
    std::vector<std::uint64_t> out;
    std::set<std::uint64_t> seen;
    while (static_cast<std::int64_t>(out.size()) < count) {
        // Seeds stay within 32 bits; most generator front-ends reject wider ones.
        const auto s = static_cast<std::uint64_t>(stream.uniform_int(0, 0xFFFFFFFFLL));
        if (seen.insert(s).second) out.push_back(s);
    }
    return out;
}

}  // namespace

std::string render_prompt(const std::string& tmpl, const std::string& query,
                          const std::optional<std::string>& value) {
    std::string out = tmpl;
    const auto qpos = out.find(kQuery);
    if (qpos == std::string::npos) throw DataError("template has no {q} placeholder: \"" + tmpl + "\"");

    const auto apos = out.find(kValue);
    if (value && apos == std::string::npos) {
        throw DataError("template has no {a} placeholder: \"" + tmpl + "\"");
    }

    // Substitute right-most first so the earlier offset stays valid.
    auto substitute = [&](std::size_t pos, std::string_view token, const std::string& text) {
        out.replace(pos, token.size(), text);
    };
    auto drop_value = [&](std::size_t pos) {
        std::size_t begin = pos;
        std::size_t len = kValue.size();
        if (pos + len < out.size() && out[pos + len] == ' ') {
            ++len;
        } else if (pos > 0 && out[pos - 1] == ' ') {
            --begin;
            ++len;
        }
        out.erase(begin, len);
    };

    if (apos == std::string::npos) {
        substitute(qpos, kQuery, query);
    } else if (apos > qpos) {
        value ? substitute(apos, kValue, *value) : drop_value(apos);
        substitute(qpos, kQuery, query);
    } else {
        substitute(qpos, kQuery, query);
        value ? substitute(apos, kValue, *value) : drop_value(apos);
    }
    return out;
}

PlanSeeds plan_seeds(const EvalConfig& cfg) {
    return {draw_distinct(RandomStream(cfg.master_seed, "plan.seeds.diversity"), cfg.diversity_seeds),
            draw_distinct(RandomStream(cfg.master_seed, "plan.seeds.conditioned"), cfg.conditioned_seeds)};
}

std::vector<PromptJob> build_plan(const EvalConfig& cfg) {
    const PlanSeeds seeds = plan_seeds(cfg);
    std::vector<PromptJob> plan;
    plan.reserve(cfg.prompt_templates.size() * cfg.queries.size() *
                 (seeds.diversity.size() + cfg.attribute.values.size() * seeds.conditioned.size()));

    for (std::size_t t = 0; t < cfg.prompt_templates.size(); ++t) {
        const auto& tmpl = cfg.prompt_templates[t];
        for (std::size_t q = 0; q < cfg.queries.size(); ++q) {
            const auto& query = cfg.queries[q];
            const auto prefix = "t" + std::to_string(t) + ".q" + std::to_string(q);
            for (std::size_t s = 0; s < seeds.diversity.size(); ++s) {
                plan.push_back({prefix + ".div.s" + std::to_string(s), t, query, std::nullopt, seeds.diversity[s],
                                cfg.images_per_seed, render_prompt(tmpl, query, std::nullopt)});
            }
            for (std::size_t a = 0; a < cfg.attribute.values.size(); ++a) {
                const auto& value = cfg.attribute.values[a];
                const auto text = render_prompt(tmpl, query, value);
                for (std::size_t s = 0; s < seeds.conditioned.size(); ++s) {
                    plan.push_back({prefix + ".a" + std::to_string(a) + ".s" + std::to_string(s), t, query, value,
                                    seeds.conditioned[s], cfg.images_per_seed, text});
                }
            }
        }
    }
    return plan;
}

PlanSummary summarize_plan(const std::vector<PromptJob>& plan) {
    PlanSummary s;
    for (const auto& job : plan) {
        const auto images = static_cast<std::size_t>(job.images_per_seed);
        if (job.conditioned_value) {
            ++s.conditioned_jobs;
            s.conditioned_images += images;
        } else {
            ++s.diversity_jobs;
            s.diversity_images += images;
        }
    }
    return s;
}

nlohmann::json job_to_json(const PromptJob& job) {
    return {
        {"job_id", job.job_id},
        {"prompt_text", job.prompt_text},
        {"seed", job.seed},
        {"images_per_seed", job.images_per_seed},
        {"template_index", job.template_index},
        {"query", job.query},
        {"conditioned_value", job.conditioned_value ? nlohmann::json(*job.conditioned_value) : nlohmann::json(nullptr)},
    };
}

PromptJob job_from_json(const nlohmann::json& j) {
    PromptJob job;
    job.job_id = j.at("job_id").get<std::string>();
    job.prompt_text = j.at("prompt_text").get<std::string>();
    job.seed = j.at("seed").get<std::uint64_t>();
    job.images_per_seed = j.at("images_per_seed").get<std::int64_t>();
    job.template_index = j.at("template_index").get<std::size_t>();
    job.query = j.at("query").get<std::string>();
    if (const auto& v = j.at("conditioned_value"); !v.is_null()) job.conditioned_value = v.get<std::string>();
    return job;
}

void write_plan(std::ostream& out, const std::vector<PromptJob>& plan) {
    for (const auto& job : plan) out << job_to_json(job).dump() << '\n';
}

}  // namespace ttifair
