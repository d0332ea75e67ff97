#include "ttifair/pipeline.hpp"

#include <sstream>

#include "ttifair/error.hpp"
#include "ttifair/hash.hpp"

namespace ttifair {

using nlohmann::json;

namespace {

json opt_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> opt_string_from(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

std::string to_string(KlScoring k) { return k == KlScoring::Exp ? "exp" : "literal"; }

}  // namespace

json provenance_to_json(const Provenance& p) {
    return {{"tool_version", p.tool_version},
            {"config_fingerprint", p.config_fingerprint},
            {"seed", p.seed},
            {"inputs",
             {{"records_sha256", p.records_sha256},
              {"corrections_sha256", opt_string(p.corrections_sha256)},
              {"confidences_sha256", opt_string(p.confidences_sha256)}}},
            {"kl_scoring", p.kl_scoring}};
}

Provenance provenance_from_json(const json& j) {
    Provenance p;
    p.tool_version = j.at("tool_version").get<std::string>();
    p.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    p.seed = j.at("seed").get<std::uint64_t>();
    const auto& in = j.at("inputs");
    p.records_sha256 = in.at("records_sha256").get<std::string>();
    p.corrections_sha256 = opt_string_from(in, "corrections_sha256");
    p.confidences_sha256 = opt_string_from(in, "confidences_sha256");
    p.kl_scoring = j.at("kl_scoring").get<std::string>();
    return p;
}

const LayerScores* ScoreBundle::layer(Layer l) const {
    for (const auto& s : layers) {
        if (s.layer == l) return &s;
    }
    return nullptr;
}

json bundle_to_json(const ScoreBundle& b) {
    json layers = json::array();
    for (const auto& l : b.layers) {
        layers.push_back({{"layer", ttifair::to_string(l.layer)},
                          {"diversity", diversity_to_json(l.diversity)},
                          {"table", table_to_json(l.table)}});
    }
    return {{"manifest", provenance_to_json(b.provenance)}, {"layers", std::move(layers)}};
}

ScoreBundle bundle_from_json(const json& j) {
    ScoreBundle b;
    b.provenance = provenance_from_json(j.at("manifest"));
    for (const auto& lj : j.at("layers")) {
        LayerScores l;
        auto layer = layer_from_string(lj.at("layer").get<std::string>());
        if (!layer) throw DataError("score file: bad layer");
        l.layer = *layer;
        l.diversity = diversity_from_json(lj.at("diversity"));
        l.table = table_from_json(lj.at("table"));
        b.layers.push_back(std::move(l));
    }
    if (b.layers.empty()) throw DataError("score file: no layers");
    return b;
}

std::string records_digest(const std::vector<ImageRecord>& records) {
    std::ostringstream s;
    write_records(s, records);
    return sha256_hex(s.str());
}

std::string corrections_digest(const std::vector<CorrectionEvent>& events) {
    std::ostringstream s;
    write_corrections(s, events);
    return sha256_hex(s.str());
}

std::string confidences_digest(const std::vector<ConfidenceRecord>& confidences) {
    std::ostringstream s;
    for (const auto& c : confidences) s << json{{"image_id", c.image_id}, {"confidence", c.confidence}}.dump() << '\n';
    return sha256_hex(s.str());
}

ScoringRun run_scoring(const EvalConfig& cfg, const ScoringInputs& inputs, const ScoringOptions& opts) {
    ScoringRun run;
    const std::uint64_t seed = opts.seed.value_or(cfg.master_seed);

    Provenance& p = run.bundle.provenance;
    p.config_fingerprint = config_fingerprint(cfg);
    p.seed = seed;
    p.records_sha256 = records_digest(inputs.records);
    if (inputs.corrections) p.corrections_sha256 = corrections_digest(*inputs.corrections);
    if (inputs.confidences) p.confidences_sha256 = confidences_digest(*inputs.confidences);
    p.kl_scoring = to_string(opts.kl_scoring);

    std::vector<ImageRecord> model = inputs.records;
    if (inputs.confidences) {
        for (const auto& id : apply_confidences(model, *inputs.confidences)) {
            run.warnings.push_back("confidence for unknown image " + id);
        }
    }

    const auto personas = sample_personas(cfg, RandomStream(seed, "personas"));
    const RandomStream rep_stream(seed, "rep_attr");

    auto score_layer = [&](Layer layer, const std::vector<ImageRecord>& records) {
        LayerScores s;
        s.layer = layer;
        s.diversity = score_diversity(records, cfg, opts.kl_scoring);
        s.table = build_score_table(records, cfg, personas, rep_stream);
        for (const auto& c : s.table.cells) {
            if (c.absent()) run.warnings.push_back("no labeled data in cell " + c.value + " / " + c.query);
        }
        run.bundle.layers.push_back(std::move(s));
    };

    score_layer(Layer::Model, model);
    if (inputs.corrections) {
        MergeResult merged = merge_layers(model, *inputs.corrections);
        for (const auto& e : merged.dangling) run.warnings.push_back("correction for unknown image " + e.image_id);
        for (const auto& [e, why] : merged.rejected) {
            run.warnings.push_back("rejected correction for " + e.image_id + ": " + why);
        }
        score_layer(Layer::Human, merged.records);
    }
    return run;
}

std::optional<LayerSelection> layer_selection_from_string(std::string_view s) {
    if (s == "model") return LayerSelection::Model;
    if (s == "human") return LayerSelection::Human;
    if (s == "both") return LayerSelection::Both;
    return std::nullopt;
}

const AuditReport& ReportDocument::deciding() const {
    for (const auto& r : reports) {
        if (r.layer == verdict_layer) return r;
    }
    throw DataError("report document has no " + std::string(ttifair::to_string(verdict_layer)) + " layer");
}

ReportDocument build_report(const EvalConfig& cfg, const ScoreBundle& bundle, const ReportOptions& opts) {
    std::vector<Layer> wanted;
    switch (opts.layers) {
        case LayerSelection::Model: wanted = {Layer::Model}; break;
        case LayerSelection::Human: wanted = {Layer::Human}; break;
        case LayerSelection::Both:
            for (const auto& l : bundle.layers) wanted.push_back(l.layer);
            break;
    }

    ReportDocument doc;
    doc.provenance = bundle.provenance;
    if (opts.rescore_kl) doc.provenance.kl_scoring = to_string(*opts.rescore_kl);

    DecideOptions dopts;
    dopts.metric = opts.metric;
    dopts.config_fingerprint = bundle.provenance.config_fingerprint;
    if (cfg.fair_distribution.kind == FairKind::Explicit) dopts.fair_weights = cfg.fair_weights();

    for (Layer l : wanted) {
        const LayerScores* s = bundle.layer(l);
        if (!s) throw DataError("score file has no " + std::string(ttifair::to_string(l)) + " layer");
        dopts.layer = l;
        const auto& overall = s->diversity.overall;
        const double kl_score = opts.rescore_kl ? diversity_from_kl(overall.kl, *opts.rescore_kl) : overall.score_kl;
        doc.reports.push_back(decide(kl_score, overall.score_tvd, s->table, cfg.thresholds, cfg.attribute.values, dopts));
    }

    doc.verdict_layer = doc.reports.front().layer;
    for (const auto& r : doc.reports) {
        if (r.layer == Layer::Human) doc.verdict_layer = Layer::Human;
    }
    doc.verdict = doc.deciding().verdict;
    return doc;
}

json document_to_json(const ReportDocument& d) {
    json reports = json::array();
    for (const auto& r : d.reports) reports.push_back(report_to_json(r));
    return {{"manifest", provenance_to_json(d.provenance)},
            {"verdict", {{"layer", ttifair::to_string(d.verdict_layer)}, {"verdict", ttifair::to_string(d.verdict)}}},
            {"reports", std::move(reports)}};
}

ReportDocument document_from_json(const json& j) {
    ReportDocument d;
    d.provenance = provenance_from_json(j.at("manifest"));
    for (const auto& r : j.at("reports")) d.reports.push_back(report_from_json(r));
    if (d.reports.empty()) throw DataError("report document has no reports");
    auto layer = layer_from_string(j.at("verdict").at("layer").get<std::string>());
    if (!layer) throw DataError("report document: bad verdict layer");
    d.verdict_layer = *layer;
    d.verdict = d.deciding().verdict;
    return d;
}

std::string document_to_text(const ReportDocument& d) {
    std::ostringstream out;
    for (const auto& r : d.reports) out << render_text(r) << '\n';
    out << "final verdict (" << ttifair::to_string(d.verdict_layer) << " layer): " << ttifair::to_string(d.verdict)
        << '\n';
    return out.str();
}

std::string dump_document(const ReportDocument& d) { return document_to_json(d).dump(2) + "\n"; }

std::string dump_bundle(const ScoreBundle& b) { return bundle_to_json(b).dump(2) + "\n"; }

}  // namespace ttifair
