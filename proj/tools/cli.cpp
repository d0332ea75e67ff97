#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "ttifair/config.hpp"
#include "ttifair/error.hpp"
#include "ttifair/ingest.hpp"
#include "ttifair/pipeline.hpp"
#include "ttifair/plan.hpp"
#include "ttifair/service.hpp"
#include "ttifair/stats.hpp"
#include "ttifair/synthetic.hpp"

namespace ttifair::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config;
    std::string records;
    std::string corrections;
    std::string confidences;
    std::string scores;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::string layer = "both";
    std::string metric = "kl";
    bool eq6_literal = false;
    bool dry_run = false;
    bool no_score = false;
    std::string series_a;
    std::string series_b;
    std::size_t templates = 1;
    std::string dominant_value;
    double dominant_share = 0.4;
    double unlabeled_rate = 0.05;
};

// Raised after a problem has already been reported to the user.
struct Reported {};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f << text;
    if (!f) throw DataError("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_all(const std::string& path, ReadResult<T> (*reader)(std::istream&), std::ostream& err) {
    auto in = open_input(path);
    auto result = reader(in);
    for (const auto& e : result.errors) err << path << ":" << e.line << ": " << e.message << '\n';
    if (!result.errors.empty()) {
        err << path << ": " << result.errors.size() << " bad line(s)\n";
        throw Reported{};
    }
    return std::move(result.items);
}

ScoringInputs read_inputs(const Options& o, std::ostream& err) {
    ScoringInputs in;
    in.records = read_all<ImageRecord>(o.records, &read_records, err);
    if (!o.corrections.empty()) in.corrections = read_all<CorrectionEvent>(o.corrections, &read_corrections, err);
    if (!o.confidences.empty()) in.confidences = read_all<ConfidenceRecord>(o.confidences, &read_confidences, err);
    return in;
}

KlScoring kl_mode(const Options& o) { return o.eq6_literal ? KlScoring::Literal : KlScoring::Exp; }

ReportOptions report_options(const Options& o) {
    ReportOptions ro;
    ro.metric = *metric_from_string(o.metric);
    ro.layers = *layer_selection_from_string(o.layer);
    return ro;
}

// Run metadata that is not part of the deterministic outputs.
void write_manifest(const fs::path& dir, const std::string& command, const Options& o,
                    const std::vector<std::string>& outputs) {
    json inputs = json::object();
    auto add = [&](const char* key, const std::string& path) {
        if (!path.empty()) inputs[key] = fs::absolute(path).string();
    };
    add("config", o.config);
    add("records", o.records);
    add("corrections", o.corrections);
    add("confidences", o.confidences);
    add("scores", o.scores);
    json m = {{"tool_version", kToolVersion},
              {"command", command},
              {"created_at", utc_now_iso8601()},
              {"inputs", inputs},
              {"outputs", outputs}};
    if (o.seed) m["seed"] = *o.seed;
    write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
    for (const auto& w : warnings) err << "warning: " << w << '\n';
}

int cmd_plan(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o.config);
    const auto plan = build_plan(cfg);
    const auto s = summarize_plan(plan);
    out << "diversity: " << s.diversity_images << " images across " << s.diversity_jobs << " jobs\n";
    out << "conditioned: " << s.conditioned_images << " images across " << s.conditioned_jobs << " jobs\n";
    out << "total: " << s.images() << " images across " << s.jobs() << " jobs\n";
    if (o.dry_run) return kExitOk;
    const std::string path = o.out.empty() ? "plan.jsonl" : o.out;
    std::ostringstream text;
    write_plan(text, plan);
    write_file(path, text.str());
    out << "wrote " << path << '\n';
    return kExitOk;
}

int cmd_ingest(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load_config(o.config);
    auto in = open_input(o.records);
    auto records = read_records(in);
    for (const auto& e : records.errors) err << o.records << ":" << e.line << ": " << e.message << '\n';

    std::size_t conditioned = 0;
    for (const auto& r : records.items) conditioned += r.conditioned_value ? 1 : 0;
    const auto counts = count_labels(records.items, cfg.attribute);
    out << "records: " << records.items.size() << " (" << records.items.size() - conditioned << " unconditioned, "
        << conditioned << " conditioned)\n";
    out << cfg.attribute.name << " labeled: " << counts.labeled << ", unlabeled: " << counts.unlabeled << '\n';

    std::vector<ImageRecord> effective = records.items;
    std::size_t bad = records.errors.size();
    if (!o.corrections.empty()) {
        auto cin = open_input(o.corrections);
        auto events = read_corrections(cin);
        for (const auto& e : events.errors) err << o.corrections << ":" << e.line << ": " << e.message << '\n';
        bad += events.errors.size();
        auto merged = merge_layers(records.items, events.items);
        for (const auto& e : merged.dangling) err << "warning: correction for unknown image " << e.image_id << '\n';
        for (const auto& [e, why] : merged.rejected) err << "warning: rejected correction for " << e.image_id << ": " << why << '\n';
        out << "corrections: " << events.items.size() << " (" << merged.dangling.size() << " dangling, "
            << merged.rejected.size() << " rejected)\n";
        effective = std::move(merged.records);
    }
    if (!o.out.empty()) {
        std::ostringstream text;
        write_records(text, effective);
        write_file(o.out, text.str());
        out << "wrote " << o.out << '\n';
    }
    if (bad > 0) {
        err << bad << " bad line(s)\n";
        return kExitError;
    }
    return kExitOk;
}

int cmd_score(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load_config(o.config);
    const auto inputs = read_inputs(o, err);
    const auto run = run_scoring(cfg, inputs, {o.seed, kl_mode(o)});
    print_warnings(run.warnings, err);
    const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
    write_file(dir / "scores.json", dump_bundle(run.bundle));
    write_manifest(dir, "score", o, {"scores.json"});
    for (const auto& l : run.bundle.layers) {
        out << to_string(l.layer) << " layer: " << l.table.cells.size() << " cells, diversity kl-based "
            << l.diversity.overall.score_kl << ", tvd-based " << l.diversity.overall.score_tvd << '\n';
    }
    out << "wrote " << (dir / "scores.json").string() << '\n';
    return kExitOk;
}

int emit_report(const ReportDocument& doc, const Options& o, const std::string& command,
                std::vector<std::string> outputs, std::ostream& out) {
    const std::string text = document_to_text(doc);
    out << text;
    if (!o.out.empty()) {
        const fs::path dir(o.out);
        write_file(dir / "report.json", dump_document(doc));
        write_file(dir / "report.txt", text);
        outputs.push_back("report.json");
        outputs.push_back("report.txt");
        write_manifest(dir, command, o, outputs);
    }
    return doc.verdict == Verdict::Fair ? kExitOk : kExitBias;
}

int cmd_decide(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o.config);
    auto in = open_input(o.scores);
    ScoreBundle bundle;
    try {
        bundle = bundle_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw DataError(o.scores + ": " + e.what());
    }
    if (bundle.provenance.config_fingerprint != config_fingerprint(cfg)) {
        out << "note: score file was produced with a different config\n";
    }
    auto ro = report_options(o);
    if (o.eq6_literal) ro.rescore_kl = KlScoring::Literal;
    return emit_report(build_report(cfg, bundle, ro), o, "decide", {}, out);
}

int cmd_audit(const Options& o, std::ostream& out, std::ostream& err) {
    const auto cfg = load_config(o.config);
    const auto inputs = read_inputs(o, err);
    const auto run = run_scoring(cfg, inputs, {o.seed, kl_mode(o)});
    print_warnings(run.warnings, err);
    std::vector<std::string> outputs;
    if (!o.out.empty()) {
        write_file(fs::path(o.out) / "scores.json", dump_bundle(run.bundle));
        outputs.push_back("scores.json");
    }
    return emit_report(build_report(cfg, run.bundle, report_options(o)), o, "audit", outputs, out);
}

std::vector<double> read_series(const std::string& path) {
    auto in = open_input(path);
    std::vector<double> xs;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream tokens(line);
        std::string tok;
        while (tokens >> tok) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size()) throw ParseError(path, n, "not a number: " + tok);
            xs.push_back(x);
        }
    }
    return xs;
}

int cmd_agree(const Options& o, std::ostream& out) {
    const auto a = read_series(o.series_a);
    const auto b = read_series(o.series_b);
    if (a.size() != b.size()) {
        throw DataError("series lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    const auto r = agreement(a, b);
    char line[128];
    std::snprintf(line, sizeof line, "n=%zu pearson=%.6f spearman=%.6f\n", r.n, r.pearson, r.spearman);
    out << line;
    return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
    const auto cfg = load_config(o.config);
    SyntheticOptions so;
    so.templates = o.templates;
    so.dominant_share = o.dominant_share;
    so.unlabeled_rate = o.unlabeled_rate;
    so.seed = o.seed.value_or(cfg.master_seed);
    if (!o.dominant_value.empty()) {
        const int idx = cfg.attribute.index_of(o.dominant_value);
        if (idx < 0) throw DataError("unknown attribute value " + o.dominant_value);
        so.dominant_value = static_cast<std::size_t>(idx);
    }
    const auto records = synthetic_records(cfg, so);
    std::ostringstream text;
    write_records(text, records);
    const std::string path = o.out.empty() ? "records.jsonl" : o.out;
    write_file(path, text.str());
    out << "wrote " << records.size() << " records to " << path << '\n';
    return kExitOk;
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
    ServiceOptions so;
    so.config = load_config(o.config);
    so.records = read_all<ImageRecord>(o.records, &read_records, err);
    if (!o.confidences.empty()) so.confidences = read_all<ConfidenceRecord>(o.confidences, &read_confidences, err);
    so.image_root = env_or("TTIFAIR_IMAGE_ROOT", "images");
    so.log_path = env_or("TTIFAIR_LOG_PATH", "review-log.jsonl");
    so.token = env_or("TTIFAIR_TOKEN", "");
    so.score_on_start = !o.no_score;

    const std::string bind = env_or("TTIFAIR_BIND_ADDR", "127.0.0.1:8080");
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw DataError("TTIFAIR_BIND_ADDR must be host:port");
    const std::string host = bind.substr(0, colon);
    int port = 0;
    try {
        port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
        throw DataError("bad port in TTIFAIR_BIND_ADDR: " + bind);
    }

    ReviewState state(std::move(so));
    if (state.options().score_on_start) {
        const Reply r = state.rescore();
        if (r.status != 200) {
            err << "initial scoring failed: " << r.body;
            return kExitError;
        }
    }
    httplib::Server server;
    install_routes(server, state);
    out << "serving on " << host << ":" << port << " (log " << state.options().log_path.string() << ", "
        << state.corrections().size() << " corrections replayed)" << std::endl;
    if (!server.listen(host, port)) {
        err << "cannot bind " << bind << '\n';
        return kExitError;
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Representativity fairness audit for text-to-image systems", "ttifair"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));
    Options o;

    auto config = [&](CLI::App* c) { c->add_option("--config", o.config, "evaluation config (JSON)")->required(); };
    auto seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "master seed override"); };
    auto report_flags = [&](CLI::App* c) {
        c->add_option("--layer", o.layer, "annotation layer to report")->check(CLI::IsMember({"model", "human", "both"}));
        c->add_option("--metric", o.metric, "diversity metric used by the gate")->check(CLI::IsMember({"kl", "tvd"}));
        c->add_flag("--eq6-literal", o.eq6_literal, "score KL diversity as 1 - exp(-KL)");
    };
    auto scoring_inputs = [&](CLI::App* c) {
        c->add_option("--records", o.records, "annotation records (JSONL)")->required();
        c->add_option("--corrections", o.corrections, "human correction log (JSONL)");
        c->add_option("--confidences", o.confidences, "relevance classifier confidences (JSONL)");
    };

    auto* plan = app.add_subcommand("plan", "write the prompt plan");
    config(plan);
    plan->add_option("--out", o.out, "plan file (default plan.jsonl)");
    plan->add_flag("--dry-run", o.dry_run, "print counts only");

    auto* ingest = app.add_subcommand("ingest", "validate records and corrections");
    config(ingest);
    ingest->add_option("--records", o.records, "annotation records (JSONL)")->required();
    ingest->add_option("--corrections", o.corrections, "human correction log (JSONL)");
    ingest->add_option("--out", o.out, "write the effective layer (JSONL)");

    auto* score = app.add_subcommand("score", "compute diversity and score tables");
    config(score);
    scoring_inputs(score);
    seed(score);
    score->add_flag("--eq6-literal", o.eq6_literal, "score KL diversity as 1 - exp(-KL)");
    score->add_option("--out", o.out, "output directory (default .)");

    auto* decide = app.add_subcommand("decide", "apply the decision procedure to a score file");
    config(decide);
    decide->add_option("--scores", o.scores, "score file from `score`")->required();
    report_flags(decide);
    decide->add_option("--out", o.out, "output directory for report.json and report.txt");

    auto* audit = app.add_subcommand("audit", "score and decide in one step");
    config(audit);
    scoring_inputs(audit);
    seed(audit);
    report_flags(audit);
    audit->add_option("--out", o.out, "output directory for scores and reports");

    auto* agree = app.add_subcommand("agree", "Pearson and Spearman agreement of two series");
    agree->add_option("series_a", o.series_a, "first series file")->required();
    agree->add_option("series_b", o.series_b, "second series file")->required();

    auto* serve = app.add_subcommand("serve", "run the review service");
    config(serve);
    serve->add_option("--records", o.records, "annotation records (JSONL)")->required();
    serve->add_option("--confidences", o.confidences, "relevance classifier confidences (JSONL)");
    serve->add_flag("--no-score", o.no_score, "do not score on start");

    auto* synth = app.add_subcommand("synth", "generate synthetic annotation records");
    config(synth);
    seed(synth);
    synth->add_option("--out", o.out, "records file (default records.jsonl)");
    synth->add_option("--templates", o.templates, "templates to materialize")->check(CLI::PositiveNumber);
    synth->add_option("--dominant-value", o.dominant_value, "over-represented attribute value");
    synth->add_option("--dominant-share", o.dominant_share, "its share of unconditioned labels")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--unlabeled-rate", o.unlabeled_rate, "chance of an unlabeled annotation")->check(CLI::Range(0.0, 1.0));

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*plan) return cmd_plan(o, out);
        if (*ingest) return cmd_ingest(o, out, err);
        if (*score) return cmd_score(o, out, err);
        if (*decide) return cmd_decide(o, out);
        if (*audit) return cmd_audit(o, out, err);
        if (*agree) return cmd_agree(o, out);
        if (*serve) return cmd_serve(o, out, err);
        if (*synth) return cmd_synth(o, out);
    } catch (const ConfigError& e) {
        err << "invalid config " << o.config << ":\n";
        for (const auto& v : e.violations()) err << "  " << v.field << ": " << v.rule << '\n';
        return kExitError;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    } catch (const Reported&) {
        return kExitError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

}  // namespace ttifair::cli
