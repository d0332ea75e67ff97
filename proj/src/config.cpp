#include "ttifair/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ttifair/error.hpp"
#include "ttifair/hash.hpp"

namespace ttifair {

using nlohmann::json;

namespace {

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

std::size_t count_occurrences(const std::string& text, const std::string& token) {
    std::size_t n = 0;
    for (auto pos = text.find(token); pos != std::string::npos; pos = text.find(token, pos + token.size())) ++n;
    return n;
}

// Collects type errors while decoding so that one bad key never hides another.
class Decoder {
public:
    explicit Decoder(std::vector<Violation>& out) : out_(out) {}

    const json* child(const json& obj, const std::string& key, const std::string& path, bool required) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) out_.push_back({path, "required key missing"});
            return nullptr;
        }
        return &*it;
    }

    template <typename T>
    void read(const json& obj, const std::string& key, const std::string& path, T& dst, bool required = false) {
        const json* v = child(obj, key, path, required);
        if (!v) return;
        try {
            dst = v->get<T>();
        } catch (const json::exception&) {
            out_.push_back({path, "wrong type (got " + std::string(v->type_name()) + ")"});
        }
    }

    void fail(const std::string& path, const std::string& rule) { out_.push_back({path, rule}); }

private:
    std::vector<Violation>& out_;
};

FeatureKind parse_feature_kind(const std::string& s, bool* ok) {
    *ok = true;
    if (s == "categorical" || s == "categorical-match") return FeatureKind::CategoricalMatch;
    if (s == "numeric" || s == "numeric-range") return FeatureKind::NumericRange;
    *ok = false;
    return FeatureKind::CategoricalMatch;
}

}  // namespace

ConfigError::ConfigError(std::vector<Violation> violations)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "invalid config (" << violations.size() << " violation" << (violations.size() == 1 ? "" : "s") << ")";
          for (const auto& v : violations) msg << "\n  " << v.field << ": " << v.rule;
          return msg.str();
      }()),
      violations_(std::move(violations)) {}

std::vector<Violation> validate_config(const EvalConfig& cfg) {
    std::vector<Violation> out;
    auto add = [&](std::string field, std::string rule) { out.push_back({std::move(field), std::move(rule)}); };

    if (cfg.queries.empty()) add("queries", "must be non-empty");
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < cfg.queries.size(); ++i) {
            const auto path = "queries[" + std::to_string(i) + "]";
            if (cfg.queries[i].empty()) add(path, "must be a non-empty string");
            if (!seen.insert(cfg.queries[i]).second) add(path, "duplicate query");
        }
    }

    if (cfg.attribute.name.empty()) add("attribute.name", "must be non-empty");
    if (cfg.attribute.values.size() < 2) add("attribute.values", "needs at least 2 values");
    {
        std::set<std::string> seen;
        for (std::size_t i = 0; i < cfg.attribute.values.size(); ++i) {
            const auto& label = cfg.attribute.values[i];
            const auto path = "attribute.values[" + std::to_string(i) + "]";
            if (label.empty() || label == "-") add(path, "label must be non-empty and not \"-\"");
            if (!seen.insert(label).second) add(path, "duplicate label");
        }
    }

    {
        std::set<std::string> names;
        for (std::size_t i = 0; i < cfg.inclusion_features.size(); ++i) {
            const auto& f = cfg.inclusion_features[i];
            const auto path = "features[" + std::to_string(i) + "]";
            if (f.name.empty()) add(path + ".name", "must be non-empty");
            if (!names.insert(f.name).second) add(path + ".name", "duplicate feature");
            if (f.kind == FeatureKind::CategoricalMatch) {
                if (f.categories.size() < 2) add(path + ".categories", "categorical feature needs at least 2 categories");
                std::set<std::string> cats(f.categories.begin(), f.categories.end());
                if (cats.size() != f.categories.size()) add(path + ".categories", "duplicate category");
            } else {
                if (!std::isfinite(f.min) || !std::isfinite(f.max) || !(f.min < f.max))
                    add(path + ".range", "numeric feature needs min < max");
            }
        }
    }

    if (cfg.fair_distribution.kind == FairKind::Explicit) {
        const auto& w = cfg.fair_distribution.weights;
        if (w.size() != cfg.attribute.values.size()) {
            add("fair_distribution.weights", "needs one weight per attribute value");
        }
        double sum = 0.0;
        bool positive = true;
        for (double x : w) {
            if (!(std::isfinite(x) && x > 0.0)) positive = false;
            sum += x;
        }
        if (!positive) add("fair_distribution.weights", "all weights must be > 0");
        if (!(std::fabs(sum - 1.0) <= 1e-9)) add("fair_distribution.weights", "weights must sum to 1");
    }

    if (!in_unit(cfg.thresholds.diversity_min)) add("thresholds.diversity_min", "must be in [0,1]");
    if (!in_unit(cfg.thresholds.inclusion_min)) add("thresholds.inclusion_min", "must be in [0,1]");
    if (!in_unit(cfg.thresholds.parity_epsilon)) add("thresholds.parity_epsilon", "must be in [0,1]");

    if (cfg.prompt_templates.empty()) add("prompt_templates", "must be non-empty");
    for (std::size_t i = 0; i < cfg.prompt_templates.size(); ++i) {
        const auto path = "prompt_templates[" + std::to_string(i) + "]";
        const auto nq = count_occurrences(cfg.prompt_templates[i], "{q}");
        const auto na = count_occurrences(cfg.prompt_templates[i], "{a}");
        if (nq != 1) add(path, "must contain exactly one {q} placeholder");
        if (na != 1) add(path, "must contain exactly one {a} placeholder");
    }

    if (cfg.diversity_seeds < 1) add("seeds.diversity", "must be >= 1");
    if (cfg.conditioned_seeds < 1) add("seeds.conditioned", "must be >= 1");
    if (cfg.images_per_seed < 1) add("images_per_seed", "must be >= 1");
    if (cfg.persona_count < 1) add("personas.count", "must be >= 1");
    if (cfg.persona_sample_size < 1) add("personas.sample_size", "must be >= 1");

    if (cfg.age_distribution.kind == AgeDistributionKind::Normal) {
        if (!std::isfinite(cfg.age_distribution.mean)) add("personas.age_distribution.mean", "must be finite");
        if (!(std::isfinite(cfg.age_distribution.stddev) && cfg.age_distribution.stddev > 0.0))
            add("personas.age_distribution.stddev", "must be > 0");
    }
    return out;
}

EvalConfig config_from_json(const json& doc) {
    std::vector<Violation> errs;
    Decoder d(errs);
    EvalConfig cfg;

    if (!doc.is_object()) throw ConfigError(std::vector<Violation>{{"<root>", "config must be an object"}});

    d.read(doc, "queries", "queries", cfg.queries, true);
    if (const json* attr = d.child(doc, "attribute", "attribute", true)) {
        d.read(*attr, "name", "attribute.name", cfg.attribute.name, true);
        d.read(*attr, "values", "attribute.values", cfg.attribute.values, true);
    }

    if (const json* feats = d.child(doc, "features", "features", false)) {
        if (!feats->is_array()) {
            d.fail("features", "must be an array");
        } else {
            for (std::size_t i = 0; i < feats->size(); ++i) {
                const json& fj = (*feats)[i];
                const auto path = "features[" + std::to_string(i) + "]";
                if (!fj.is_object()) {
                    d.fail(path, "must be an object");
                    continue;
                }
                InclusionFeatureSpec f;
                d.read(fj, "name", path + ".name", f.name, true);
                std::string kind;
                d.read(fj, "kind", path + ".kind", kind, true);
                bool ok = true;
                if (!kind.empty()) f.kind = parse_feature_kind(kind, &ok);
                if (!ok) d.fail(path + ".kind", "must be categorical or numeric");
                if (f.kind == FeatureKind::CategoricalMatch) {
                    d.read(fj, "categories", path + ".categories", f.categories, true);
                } else {
                    std::vector<double> range;
                    d.read(fj, "range", path + ".range", range, true);
                    if (range.size() == 2) {
                        f.min = range[0];
                        f.max = range[1];
                    } else if (fj.contains("range")) {
                        d.fail(path + ".range", "must be [min, max]");
                    }
                }
                cfg.inclusion_features.push_back(std::move(f));
            }
        }
    }

    if (const json* fd = d.child(doc, "fair_distribution", "fair_distribution", false)) {
        std::string kind;
        if (fd->is_string()) {
            kind = fd->get<std::string>();
        } else {
            d.read(*fd, "kind", "fair_distribution.kind", kind, true);
        }
        if (kind == "uniform") {
            cfg.fair_distribution.kind = FairKind::Uniform;
        } else if (kind == "explicit") {
            cfg.fair_distribution.kind = FairKind::Explicit;
            d.read(*fd, "weights", "fair_distribution.weights", cfg.fair_distribution.weights, true);
        } else if (!kind.empty() || fd->is_string()) {
            d.fail("fair_distribution.kind", "must be uniform or explicit");
        }
    }

    if (const json* th = d.child(doc, "thresholds", "thresholds", false)) {
        d.read(*th, "diversity_min", "thresholds.diversity_min", cfg.thresholds.diversity_min);
        d.read(*th, "inclusion_min", "thresholds.inclusion_min", cfg.thresholds.inclusion_min);
        d.read(*th, "parity_epsilon", "thresholds.parity_epsilon", cfg.thresholds.parity_epsilon);
    }

    d.read(doc, "prompt_templates", "prompt_templates", cfg.prompt_templates, true);
    if (const json* seeds = d.child(doc, "seeds", "seeds", false)) {
        d.read(*seeds, "diversity", "seeds.diversity", cfg.diversity_seeds);
        d.read(*seeds, "conditioned", "seeds.conditioned", cfg.conditioned_seeds);
    }
    d.read(doc, "images_per_seed", "images_per_seed", cfg.images_per_seed);

    if (const json* p = d.child(doc, "personas", "personas", false)) {
        d.read(*p, "count", "personas.count", cfg.persona_count);
        d.read(*p, "sample_size", "personas.sample_size", cfg.persona_sample_size);
        if (const json* ad = d.child(*p, "age_distribution", "personas.age_distribution", false)) {
            std::string kind;
            if (ad->is_string()) {
                kind = ad->get<std::string>();
            } else {
                d.read(*ad, "kind", "personas.age_distribution.kind", kind, true);
            }
            if (kind == "uniform") {
                cfg.age_distribution.kind = AgeDistributionKind::Uniform;
            } else if (kind == "normal") {
                cfg.age_distribution.kind = AgeDistributionKind::Normal;
                d.read(*ad, "mean", "personas.age_distribution.mean", cfg.age_distribution.mean, true);
                d.read(*ad, "stddev", "personas.age_distribution.stddev", cfg.age_distribution.stddev, true);
            } else {
                d.fail("personas.age_distribution.kind", "must be uniform or normal");
            }
        }
    }
    d.read(doc, "master_seed", "master_seed", cfg.master_seed);

    if (errs.empty()) errs = validate_config(cfg);
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return cfg;
}

json config_to_json(const EvalConfig& cfg) {
    json features = json::array();
    for (const auto& f : cfg.inclusion_features) {
        json fj{{"name", f.name}};
        if (f.kind == FeatureKind::CategoricalMatch) {
            fj["kind"] = "categorical";
            fj["categories"] = f.categories;
        } else {
            fj["kind"] = "numeric";
            fj["range"] = json::array({f.min, f.max});
        }
        features.push_back(std::move(fj));
    }
    json fair{{"kind", cfg.fair_distribution.kind == FairKind::Uniform ? "uniform" : "explicit"}};
    if (cfg.fair_distribution.kind == FairKind::Explicit) fair["weights"] = cfg.fair_distribution.weights;

    json age{{"kind", cfg.age_distribution.kind == AgeDistributionKind::Uniform ? "uniform" : "normal"}};
    if (cfg.age_distribution.kind == AgeDistributionKind::Normal) {
        age["mean"] = cfg.age_distribution.mean;
        age["stddev"] = cfg.age_distribution.stddev;
    }

    return json{
        {"queries", cfg.queries},
        {"attribute", {{"name", cfg.attribute.name}, {"values", cfg.attribute.values}}},
        {"features", std::move(features)},
        {"fair_distribution", std::move(fair)},
        {"thresholds",
         {{"diversity_min", cfg.thresholds.diversity_min},
          {"inclusion_min", cfg.thresholds.inclusion_min},
          {"parity_epsilon", cfg.thresholds.parity_epsilon}}},
        {"prompt_templates", cfg.prompt_templates},
        {"seeds", {{"diversity", cfg.diversity_seeds}, {"conditioned", cfg.conditioned_seeds}}},
        {"images_per_seed", cfg.images_per_seed},
        {"personas",
         {{"count", cfg.persona_count}, {"sample_size", cfg.persona_sample_size}, {"age_distribution", std::move(age)}}},
        {"master_seed", cfg.master_seed},
    };
}

EvalConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open config file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), 0, e.what());
    }
    return config_from_json(doc);
}

void save_config(const EvalConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << config_to_json(cfg).dump(2) << '\n';
}

std::string config_fingerprint(const EvalConfig& cfg) { return sha256_hex(config_to_json(cfg).dump()); }

}  // namespace ttifair
