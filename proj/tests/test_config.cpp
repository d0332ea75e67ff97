#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "ttifair/config.hpp"
#include "ttifair/error.hpp"

using namespace ttifair;
using namespace testsupport;
using nlohmann::json;

namespace {

bool has_violation(const std::vector<Violation>& vs, const std::string& field) {
    return std::any_of(vs.begin(), vs.end(), [&](const Violation& v) { return v.field == field; });
}

std::vector<Violation> violations_of(const json& doc) {
    try {
        config_from_json(doc);
    } catch (const ConfigError& e) {
        return e.violations();
    }
    return {};
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("shipped configs load") {
    const auto full = load_config(std::string(TTIFAIR_SOURCE_DIR) + "/configs/occupations.json");
    CHECK(full.queries.size() == 22);
    CHECK(full.prompt_templates.size() == 2);
    CHECK(full.attribute.values == kRaces);
    const auto subset = load_config(std::string(TTIFAIR_SOURCE_DIR) + "/configs/annotated-subset.json");
    CHECK(subset.queries.size() == 6);
    CHECK(subset.persona_count == 5000);
    CHECK(subset.thresholds == Thresholds{});
    CHECK(validate_config(subset).empty());
}

TEST_CASE("json round trip preserves the config and its fingerprint") {
    auto cfg = subset_config();
    cfg.fair_distribution = {FairKind::Explicit, {0.1, 0.1, 0.2, 0.2, 0.2, 0.2}};
    cfg.age_distribution = {AgeDistributionKind::Normal, 32.0, 8.0};
    const auto back = config_from_json(config_to_json(cfg));
    CHECK(back == cfg);
    CHECK(config_fingerprint(back) == config_fingerprint(cfg));
    CHECK(config_fingerprint(cfg).size() == 64);

    auto other = cfg;
    other.master_seed += 1;
    CHECK(config_fingerprint(other) != config_fingerprint(cfg));
}

TEST_CASE("defaults apply to omitted keys") {
    const json doc = {{"queries", {"doctor"}},
                      {"attribute", {{"name", "race"}, {"values", {"A", "B"}}}},
                      {"features", {{{"name", "gender"}, {"kind", "categorical"}, {"categories", {"m", "f"}}}}},
                      {"prompt_templates", {"A {a} {q}."}}};
    const auto cfg = config_from_json(doc);
    CHECK(cfg.diversity_seeds == 19);
    CHECK(cfg.conditioned_seeds == 3);
    CHECK(cfg.images_per_seed == 5);
    CHECK(cfg.persona_count == 5000);
    CHECK(cfg.fair_distribution.kind == FairKind::Uniform);
    CHECK(cfg.fair_weights() == std::vector<double>{0.5, 0.5});
}

TEST_CASE("invariant violations are all reported") {
    auto cfg = subset_config();
    cfg.queries.push_back("doctor");
    cfg.attribute.values = {"Asian"};
    cfg.thresholds.parity_epsilon = 1.5;
    cfg.prompt_templates = {"A {q}."};
    cfg.persona_count = 0;
    cfg.inclusion_features[1].min = 70;
    const auto vs = validate_config(cfg);
    CHECK(has_violation(vs, "queries[6]"));
    CHECK(has_violation(vs, "attribute.values"));
    CHECK(has_violation(vs, "thresholds.parity_epsilon"));
    CHECK(has_violation(vs, "prompt_templates[0]"));
    CHECK(has_violation(vs, "personas.count"));
    CHECK(has_violation(vs, "features[1].range"));
}

TEST_CASE("fair weights must be positive and sum to one") {
    auto cfg = subset_config();
    cfg.fair_distribution = {FairKind::Explicit, {0.5, 0.5, 0, 0, 0, 0}};
    CHECK(has_violation(validate_config(cfg), "fair_distribution.weights"));
    cfg.fair_distribution.weights = {0.2, 0.2, 0.2, 0.2, 0.2};
    CHECK(has_violation(validate_config(cfg), "fair_distribution.weights"));
    cfg.fair_distribution.weights = {0.2, 0.2, 0.2, 0.2, 0.1, 0.1};
    CHECK(validate_config(cfg).empty());
}

TEST_CASE("unlabeled marker is not a valid attribute label") {
    auto cfg = subset_config();
    cfg.attribute.values.push_back("-");
    CHECK(has_violation(validate_config(cfg), "attribute.values[6]"));
}

TEST_CASE("type errors surface as violations") {
    json doc = config_to_json(subset_config());
    doc["images_per_seed"] = "five";
    doc["queries"] = 3;
    const auto vs = violations_of(doc);
    CHECK(has_violation(vs, "images_per_seed"));
    CHECK(has_violation(vs, "queries"));
    CHECK(violations_of(json::array()).size() == 1);
}

TEST_CASE("unreadable files raise parse errors") {
    TempDir dir;
    CHECK_THROWS_AS(load_config(dir / "missing.json"), ParseError);
    write_text(dir / "broken.json", "{\"queries\": [");
    CHECK_THROWS_AS(load_config(dir / "broken.json"), ParseError);
    save_config(subset_config(), dir / "ok.json");
    CHECK(load_config(dir / "ok.json") == subset_config());
}

}
