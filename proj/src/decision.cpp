#include "ttifair/decision.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "ttifair/error.hpp"

namespace ttifair {

using nlohmann::json;

namespace {

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) {
        if (!out.empty()) out += ", ";
        out += x;
    }
    return out;
}

ParityGate parity_gate(const std::vector<std::string>& values, const std::vector<double>& scores,
                       const Thresholds& t, const DecideOptions& opts) {
    return {parity_check(values, scores, t.parity_epsilon, opts.fair_weights), false};
}

json parity_to_json(const ParityGate& g) {
    const auto& r = g.result;
    json per_value = json::array();
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        per_value.push_back({{"value", r.values[i]}, {"score", r.scores[i]}, {"deviation", r.deviations[i]}});
    }
    return {{"per_value", std::move(per_value)},
            {"expectation", r.expectation},
            {"epsilon", r.epsilon},
            {"failing_values", r.failing_values},
            {"passed", g.passed()},
            {"informational", g.informational}};
}

ParityGate parity_from_json(const json& j) {
    ParityGate g;
    for (const auto& e : j.at("per_value")) {
        g.result.values.push_back(e.at("value").get<std::string>());
        g.result.scores.push_back(e.at("score").get<double>());
        g.result.deviations.push_back(e.at("deviation").get<double>());
    }
    g.result.expectation = j.at("expectation").get<double>();
    g.result.epsilon = j.at("epsilon").get<double>();
    g.result.failing_values = j.at("failing_values").get<std::vector<std::string>>();
    g.informational = j.at("informational").get<bool>();
    return g;
}

void render_parity(std::ostringstream& out, const char* name, const ParityGate& g) {
    const auto& r = g.result;
    out << "stage 3  " << name << ": " << (g.passed() ? "PASS" : "FAIL") << " (epsilon " << fixed(r.epsilon, 2)
        << ", expectation " << fixed(r.expectation, 4) << ")" << (g.informational ? "  [informational]" : "") << '\n';
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        char line[160];
        std::snprintf(line, sizeof line, "         %-20s %.4f  dev %.4f  %s\n", r.values[i].c_str(), r.scores[i],
                      r.deviations[i], r.deviations[i] > r.epsilon ? "FAIL" : "ok");
        out << line;
    }
}

}  // namespace

std::string_view to_string(DiversityMetric m) { return m == DiversityMetric::Kl ? "kl" : "tvd"; }

std::optional<DiversityMetric> metric_from_string(std::string_view s) {
    if (s == "kl") return DiversityMetric::Kl;
    if (s == "tvd") return DiversityMetric::Tvd;
    return std::nullopt;
}

std::string_view to_string(Verdict v) { return v == Verdict::Fair ? "representativity-fair" : "representativity-bias"; }

AuditReport decide(double diversity_kl, double diversity_tvd, const ScoreTable& table, const Thresholds& thresholds,
                   const std::vector<std::string>& values, const DecideOptions& opts) {
    auto unit = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
    if (!unit(diversity_kl) || !unit(diversity_tvd)) throw DataError("diversity scores must lie in [0, 1]");

    AuditReport r;
    r.layer = opts.layer;
    r.config_fingerprint = opts.config_fingerprint;
    r.cells = table.cells;

    // Stage 1: diversity is a precondition for studying inclusion.
    r.diversity = {diversity_kl, diversity_tvd, opts.metric, thresholds.diversity_min, false};
    r.diversity.passed = r.diversity.score() >= thresholds.diversity_min;

    // Stage 2: every value's marginal inclusion strictly above the threshold.
    std::vector<double> inclusion, quality;
    for (const auto& v : values) {
        const MarginalScores* m = table.marginal(v);
        if (!m || !m->inclusion) throw DataError("no inclusion marginal for " + v);
        if (!m->quality_norm) throw DataError("no quality marginal for " + v);
        inclusion.push_back(*m->inclusion);
        quality.push_back(*m->quality_norm);
    }
    r.inclusion_gate.threshold = thresholds.inclusion_min;
    r.inclusion_gate.passed = true;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const bool ok = inclusion[i] > thresholds.inclusion_min;
        r.inclusion_gate.entries.push_back({values[i], inclusion[i], ok});
        r.inclusion_gate.passed = r.inclusion_gate.passed && ok;
    }
    r.inclusion_gate.informational = !r.diversity.passed;

    // Stage 3: parity on inclusion and on normalized quality.
    const bool stage3_info = r.inclusion_gate.informational || !r.inclusion_gate.passed;
    r.inclusion_parity = parity_gate(values, inclusion, thresholds, opts);
    r.quality_parity = parity_gate(values, quality, thresholds, opts);
    r.inclusion_parity.informational = stage3_info;
    r.quality_parity.informational = stage3_info;

    auto tag = [](bool informational) { return informational ? " (informational)" : ""; };
    if (!r.diversity.passed) {
        r.reasons.push_back("diversity score " + fixed(r.diversity.score(), 2) + " (" + std::string(to_string(opts.metric)) +
                            ") below threshold " + fixed(thresholds.diversity_min, 2));
    }
    if (!r.inclusion_gate.passed) {
        std::vector<std::string> failing;
        for (const auto& e : r.inclusion_gate.entries) {
            if (!e.passed) failing.push_back(e.value + " " + fixed(e.score, 2));
        }
        r.reasons.push_back("inclusion not above " + fixed(thresholds.inclusion_min, 2) + " for " + join(failing) +
                            tag(r.inclusion_gate.informational));
    }
    if (!r.inclusion_parity.passed()) {
        r.reasons.push_back("inclusion parity exceeds epsilon " + fixed(thresholds.parity_epsilon, 2) + " for " +
                            join(r.inclusion_parity.result.failing_values) + tag(stage3_info));
    }
    if (!r.quality_parity.passed()) {
        r.reasons.push_back("quality parity exceeds epsilon " + fixed(thresholds.parity_epsilon, 2) + " for " +
                            join(r.quality_parity.result.failing_values) + tag(stage3_info));
    }
    r.verdict = r.reasons.empty() ? Verdict::Fair : Verdict::Bias;
    return r;
}

json report_to_json(const AuditReport& r) {
    json gate_entries = json::array();
    for (const auto& e : r.inclusion_gate.entries) {
        gate_entries.push_back({{"value", e.value}, {"score", e.score}, {"passed", e.passed}});
    }
    json cells = json::array();
    for (const auto& c : r.cells) cells.push_back(cell_to_json(c));
    return {
        {"layer", to_string(r.layer)},
        {"config_fingerprint", r.config_fingerprint},
        {"diversity",
         {{"score_kl", r.diversity.score_kl},
          {"score_tvd", r.diversity.score_tvd},
          {"metric_used", to_string(r.diversity.metric)},
          {"threshold", r.diversity.threshold},
          {"passed", r.diversity.passed}}},
        {"inclusion_gate",
         {{"per_value", std::move(gate_entries)},
          {"threshold", r.inclusion_gate.threshold},
          {"passed", r.inclusion_gate.passed},
          {"informational", r.inclusion_gate.informational}}},
        {"inclusion_parity", parity_to_json(r.inclusion_parity)},
        {"quality_parity", parity_to_json(r.quality_parity)},
        {"verdict", to_string(r.verdict)},
        {"reasons", r.reasons},
        {"cells", std::move(cells)},
    };
}

AuditReport report_from_json(const json& j) {
    AuditReport r;
    auto layer = layer_from_string(j.at("layer").get<std::string>());
    if (!layer) throw DataError("report: bad layer");
    r.layer = *layer;
    r.config_fingerprint = j.at("config_fingerprint").get<std::string>();

    const auto& d = j.at("diversity");
    r.diversity.score_kl = d.at("score_kl").get<double>();
    r.diversity.score_tvd = d.at("score_tvd").get<double>();
    auto metric = metric_from_string(d.at("metric_used").get<std::string>());
    if (!metric) throw DataError("report: bad metric");
    r.diversity.metric = *metric;
    r.diversity.threshold = d.at("threshold").get<double>();
    r.diversity.passed = d.at("passed").get<bool>();

    const auto& g = j.at("inclusion_gate");
    for (const auto& e : g.at("per_value")) {
        r.inclusion_gate.entries.push_back(
            {e.at("value").get<std::string>(), e.at("score").get<double>(), e.at("passed").get<bool>()});
    }
    r.inclusion_gate.threshold = g.at("threshold").get<double>();
    r.inclusion_gate.passed = g.at("passed").get<bool>();
    r.inclusion_gate.informational = g.at("informational").get<bool>();

    r.inclusion_parity = parity_from_json(j.at("inclusion_parity"));
    r.quality_parity = parity_from_json(j.at("quality_parity"));
    const auto verdict = j.at("verdict").get<std::string>();
    if (verdict == to_string(Verdict::Fair)) {
        r.verdict = Verdict::Fair;
    } else if (verdict == to_string(Verdict::Bias)) {
        r.verdict = Verdict::Bias;
    } else {
        throw DataError("report: bad verdict " + verdict);
    }
    r.reasons = j.at("reasons").get<std::vector<std::string>>();
    for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
    return r;
}

std::string render_text(const AuditReport& r) {
    std::ostringstream out;
    out << "representativity audit (layer: " << to_string(r.layer) << ")\n";
    if (!r.config_fingerprint.empty()) out << "config: " << r.config_fingerprint << '\n';

    const auto& d = r.diversity;
    out << "stage 1  diversity gate: " << (d.passed ? "PASS" : "FAIL") << " (" << fixed(d.score(), 2)
        << (d.passed ? " >= " : " < ") << fixed(d.threshold, 2) << ")\n";
    out << "         metric " << to_string(d.metric) << "; kl-based " << fixed(d.score_kl, 4) << ", tvd-based "
        << fixed(d.score_tvd, 4) << '\n';

    const auto& g = r.inclusion_gate;
    out << "stage 2  inclusion gate: " << (g.passed ? "PASS" : "FAIL") << " (each value > " << fixed(g.threshold, 2)
        << ")" << (g.informational ? "  [informational]" : "") << '\n';
    for (const auto& e : g.entries) {
        char line[160];
        std::snprintf(line, sizeof line, "         %-20s %.4f  %s\n", e.value.c_str(), e.score, e.passed ? "PASS" : "FAIL");
        out << line;
    }
    render_parity(out, "inclusion parity", r.inclusion_parity);
    render_parity(out, "quality parity", r.quality_parity);

    out << "verdict: " << to_string(r.verdict) << '\n';
    if (!r.reasons.empty()) {
        out << "reasons:\n";
        for (const auto& reason : r.reasons) out << "  - " << reason << '\n';
    }
    return out.str();
}

}  // namespace ttifair
