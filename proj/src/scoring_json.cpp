#include "ttifair/scoring.hpp"

namespace ttifair {

using nlohmann::json;

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
    const auto& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
}

json marginal_to_json(const MarginalScores& m) {
    return {{"value", m.value},
            {"cells", m.cells},
            {"rep_attr", opt(m.rep_attr)},
            {"relevance", opt(m.relevance)},
            {"inclusion", opt(m.inclusion)},
            {"quality_raw", opt(m.quality_raw)},
            {"quality_norm", opt(m.quality_norm)}};
}

MarginalScores marginal_from_json(const json& j) {
    MarginalScores m;
    m.value = j.at("value").get<std::string>();
    m.cells = j.at("cells").get<std::size_t>();
    m.rep_attr = opt_from(j, "rep_attr");
    m.relevance = opt_from(j, "relevance");
    m.inclusion = opt_from(j, "inclusion");
    m.quality_raw = opt_from(j, "quality_raw");
    m.quality_norm = opt_from(j, "quality_norm");
    return m;
}

json entry_to_json(const DiversityEntry& e) {
    return {{"query", e.query}, {"labeled", e.labeled},   {"unlabeled", e.unlabeled}, {"observed", e.observed.weights},
            {"kl", e.kl},       {"tvd", e.tvd},           {"score_kl", e.score_kl},   {"score_tvd", e.score_tvd}};
}

DiversityEntry entry_from_json(const json& j) {
    DiversityEntry e;
    e.query = j.at("query").get<std::string>();
    e.labeled = j.at("labeled").get<std::size_t>();
    e.unlabeled = j.at("unlabeled").get<std::size_t>();
    e.observed.weights = j.at("observed").get<std::vector<double>>();
    e.kl = j.at("kl").get<double>();
    e.tvd = j.at("tvd").get<double>();
    e.score_kl = j.at("score_kl").get<double>();
    e.score_tvd = j.at("score_tvd").get<double>();
    return e;
}

}  // namespace

json cell_to_json(const CellScores& c) {
    return {{"value", c.value},
            {"query", c.query},
            {"images", c.images},
            {"rep_attr", opt(c.rep_attr)},
            {"relevance", opt(c.relevance)},
            {"inclusion", opt(c.inclusion)},
            {"quality_raw", opt(c.quality_raw)},
            {"quality_norm", opt(c.quality_norm)}};
}

CellScores cell_from_json(const json& j) {
    CellScores c;
    c.value = j.at("value").get<std::string>();
    c.query = j.at("query").get<std::string>();
    c.images = j.at("images").get<std::size_t>();
    c.rep_attr = opt_from(j, "rep_attr");
    c.relevance = opt_from(j, "relevance");
    c.inclusion = opt_from(j, "inclusion");
    c.quality_raw = opt_from(j, "quality_raw");
    c.quality_norm = opt_from(j, "quality_norm");
    return c;
}

json table_to_json(const ScoreTable& t) {
    json cells = json::array();
    for (const auto& c : t.cells) cells.push_back(cell_to_json(c));
    json marginals = json::array();
    for (const auto& m : t.marginals) marginals.push_back(marginal_to_json(m));
    return {{"cells", std::move(cells)}, {"marginals", std::move(marginals)}};
}

ScoreTable table_from_json(const json& j) {
    ScoreTable t;
    for (const auto& c : j.at("cells")) t.cells.push_back(cell_from_json(c));
    for (const auto& m : j.at("marginals")) t.marginals.push_back(marginal_from_json(m));
    return t;
}

json diversity_to_json(const DiversityScores& d) {
    json queries = json::array();
    for (const auto& e : d.queries) queries.push_back(entry_to_json(e));
    return {{"overall", entry_to_json(d.overall)}, {"queries", std::move(queries)}};
}

DiversityScores diversity_from_json(const json& j) {
    DiversityScores d;
    d.overall = entry_from_json(j.at("overall"));
    for (const auto& e : j.at("queries")) d.queries.push_back(entry_from_json(e));
    return d;
}

}  // namespace ttifair
