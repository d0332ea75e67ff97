#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttifair/core.hpp"

namespace ttifair {

// One (prompt, seed) generation request for the external text-to-image system.
struct PromptJob {
    std::string job_id;
    std::size_t template_index = 0;
    std::string query;
    std::optional<std::string> conditioned_value;  // absent for diversity prompts
    std::uint64_t seed = 0;
    std::int64_t images_per_seed = 0;
    std::string prompt_text;

    bool operator==(const PromptJob&) const = default;
};

// Substitutes "{q}" with the query and "{a}" with the attribute value. When no
// value is given, an "{a}" placeholder is dropped together with one adjacent
// space, so a single template serves both the plain and conditioned prompt.
// Throws DataError when a required placeholder is missing.
std::string render_prompt(const std::string& tmpl, const std::string& query,
                          const std::optional<std::string>& value);

struct PlanSeeds {
    std::vector<std::uint64_t> diversity;
    std::vector<std::uint64_t> conditioned;  // shared by every attribute value
};

// Distinct seeds drawn from the "plan.seeds.*" streams of master_seed.
PlanSeeds plan_seeds(const EvalConfig& cfg);

// Jobs are ordered by template, then query; each query lists its diversity jobs
// followed by the conditioned jobs for every attribute value in scheme order.
std::vector<PromptJob> build_plan(const EvalConfig& cfg);

struct PlanSummary {
    std::size_t diversity_jobs = 0;
    std::size_t diversity_images = 0;
    std::size_t conditioned_jobs = 0;
    std::size_t conditioned_images = 0;

    std::size_t jobs() const { return diversity_jobs + conditioned_jobs; }
    std::size_t images() const { return diversity_images + conditioned_images; }
};

PlanSummary summarize_plan(const std::vector<PromptJob>& plan);

nlohmann::json job_to_json(const PromptJob& job);
PromptJob job_from_json(const nlohmann::json& j);

// One JSON object per line.
void write_plan(std::ostream& out, const std::vector<PromptJob>& plan);

}  // namespace ttifair
