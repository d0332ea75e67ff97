#include "ttifair/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "ttifair/error.hpp"
#include "ttifair/rng.hpp"

namespace ttifair {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Reply json_reply(int status, const json& body) { return {status, body.dump() + "\n", "application/json"}; }

Reply error_reply(int status, const std::string& message) { return json_reply(status, {{"error", message}}); }

std::string lower_ext(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

const std::vector<std::pair<std::string, std::string>>& media_types() {
    static const std::vector<std::pair<std::string, std::string>> types = {
        {".png", "image/png"}, {".jpg", "image/jpeg"}, {".jpeg", "image/jpeg"}, {".webp", "image/webp"}, {".gif", "image/gif"}};
    return types;
}

bool escapes_root(const std::string& id) {
    if (id.empty() || id.front() == '.') return true;
    return id.find('/') != std::string::npos || id.find('\\') != std::string::npos ||
           id.find("..") != std::string::npos || id.find('\0') != std::string::npos;
}

struct CellKey {
    std::string kind, value, query;
    auto operator<=>(const CellKey&) const = default;
};

}  // namespace

std::string_view to_string(TaskKind k) {
    switch (k) {
        case TaskKind::AnnotationReview: return "annotation-review";
        case TaskKind::InclusionSurvey: return "inclusion-survey";
        case TaskKind::QualitySurvey: return "quality-survey";
    }
    return "annotation-review";
}

std::optional<TaskKind> task_kind_from_string(std::string_view s) {
    for (TaskKind k : {TaskKind::AnnotationReview, TaskKind::InclusionSurvey, TaskKind::QualitySurvey}) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

json task_to_json(const ReviewTask& t) {
    json j = {{"task_id", t.task_id},
              {"kind", to_string(t.kind)},
              {"image_set", t.image_set},
              {"query", t.query},
              {"conditioned_value", t.conditioned_value ? json(*t.conditioned_value) : json(nullptr)}};
    j["current_labels"] = t.current_labels ? record_to_json(*t.current_labels) : json(nullptr);
    return j;
}

json survey_to_json(const SurveyResponse& s) {
    json j = {{"respondent_id", s.respondent_id},
              {"declared_value", s.declared_value},
              {"declared_age", s.declared_age ? json(*s.declared_age) : json(nullptr)},
              {"declared_gender", s.declared_gender ? json(*s.declared_gender) : json(nullptr)},
              {"task_id", s.task_id},
              {"answer", s.answer ? json(std::string(to_string(*s.answer))) : json(nullptr)},
              {"selected_count", s.selected_count ? json(*s.selected_count) : json(nullptr)},
              {"timestamp", s.timestamp}};
    return j;
}

SurveyResponse survey_from_json(const json& j) {
    if (!j.is_object()) throw DataError("survey response must be an object");
    auto str = [&](const char* key) -> std::string {
        auto it = j.find(key);
        if (it == j.end() || !it->is_string()) throw DataError(std::string("missing or non-string field: ") + key);
        return it->get<std::string>();
    };
    auto present = [&](const char* key) {
        auto it = j.find(key);
        return it != j.end() && !it->is_null();
    };

    SurveyResponse s;
    s.respondent_id = str("respondent_id");
    s.declared_value = str("declared_value");
    s.task_id = str("task_id");
    if (present("declared_age")) {
        const auto& a = j.at("declared_age");
        if (!a.is_number()) throw DataError("declared_age must be a number");
        s.declared_age = a.get<double>();
    }
    if (present("declared_gender")) {
        if (!j.at("declared_gender").is_string()) throw DataError("declared_gender must be a string");
        s.declared_gender = j.at("declared_gender").get<std::string>();
    }
    if (present("answer")) {
        if (!j.at("answer").is_string()) throw DataError("answer must be a string");
        s.answer = crowd_answer_from_string(j.at("answer").get<std::string>());
        if (!s.answer) throw DataError("answer must be one of both, either, none");
    }
    if (present("selected_count")) {
        const auto& c = j.at("selected_count");
        if (!c.is_number_integer()) throw DataError("selected_count must be an integer");
        s.selected_count = c.get<std::int64_t>();
    }
    if (present("timestamp")) {
        s.timestamp = str("timestamp");
        if (!is_iso8601_utc(s.timestamp)) throw DataError("timestamp must be ISO-8601 UTC");
    }
    return s;
}

AppendLog::AppendLog(const fs::path& path) : path_(path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw DataError("cannot open log " + path.string() + ": " + std::strerror(errno));
}

AppendLog::~AppendLog() {
    if (fd_ >= 0) ::close(fd_);
}

void AppendLog::append(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
        const ssize_t n = ::write(fd_, p, left);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw DataError("log write failed: " + std::string(std::strerror(errno)));
        }
        p += n;
        left -= static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw DataError("log fsync failed: " + std::string(std::strerror(errno)));
}

ReviewState::ReviewState(ServiceOptions options) : opts_(std::move(options)) {
    for (std::size_t i = 0; i < opts_.records.size(); ++i) image_index_.emplace(opts_.records[i].image_id, i);
    corrections_ = std::make_shared<const std::vector<CorrectionEvent>>();
    surveys_ = std::make_shared<const std::vector<SurveyResponse>>();
    build_tasks();
    replay();
    log_ = std::make_unique<AppendLog>(opts_.log_path);
    scored_ = opts_.score_on_start;
}

void ReviewState::build_tasks() {
    const auto& cfg = opts_.config;
    for (const auto& r : opts_.records) {
        ReviewTask t;
        t.task_id = "review:" + r.image_id;
        t.kind = TaskKind::AnnotationReview;
        t.image_set = {r.image_id};
        t.query = r.query;
        t.conditioned_value = r.conditioned_value;
        t.current_labels = r;
        tasks_.push_back(std::move(t));
    }

    // One shuffle per (value, query) shared by both survey kinds, so every
    // respondent of a value sees the same sets.
    const RandomStream root(cfg.master_seed, "survey.sets");
    const auto set_size = static_cast<std::size_t>(cfg.images_per_seed);
    for (TaskKind kind : {TaskKind::InclusionSurvey, TaskKind::QualitySurvey}) {
        for (const auto& value : cfg.attribute.values) {
            for (const auto& query : cfg.queries) {
                std::vector<std::string> ids;
                for (const auto& r : filter_pool(opts_.records, query, value)) ids.push_back(r.image_id);
                if (ids.empty()) continue;
                RandomStream s = root.substream(value + "|" + query);
                for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[s.below(i)]);

                const std::size_t sets =
                    std::min<std::size_t>(static_cast<std::size_t>(cfg.conditioned_seeds), (ids.size() + set_size - 1) / set_size);
                for (std::size_t k = 0; k < sets; ++k) {
                    const std::size_t begin = k * set_size;
                    if (k > 0 && begin + set_size > ids.size()) break;
                    ReviewTask t;
                    t.task_id = std::string(to_string(kind)) + ":" + value + ":" + query + ":" + std::to_string(k);
                    t.kind = kind;
                    t.image_set.assign(ids.begin() + static_cast<std::ptrdiff_t>(begin),
                                       ids.begin() + static_cast<std::ptrdiff_t>(std::min(ids.size(), begin + set_size)));
                    t.query = query;
                    t.conditioned_value = value;
                    tasks_.push_back(std::move(t));
                }
            }
        }
    }
}

const ReviewTask* ReviewState::find_task(const std::string& id) const {
    for (const auto& t : tasks_) {
        if (t.task_id == id) return &t;
    }
    return nullptr;
}

void ReviewState::replay() {
    std::ifstream in(opts_.log_path);
    if (!in) return;
    auto corrections = std::make_shared<std::vector<CorrectionEvent>>();
    auto surveys = std::make_shared<std::vector<SurveyResponse>>();
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            const auto type = j.at("type").get<std::string>();
            j.erase("type");
            if (type == "correction") {
                corrections->push_back(correction_from_json(j));
            } else if (type == "survey") {
                surveys->push_back(survey_from_json(j));
            } else {
                throw DataError("unknown entry type " + type);
            }
        } catch (const ParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw ParseError(opts_.log_path.string(), n, e.what());
        }
    }
    corrections_ = std::move(corrections);
    surveys_ = std::move(surveys);
}

ReviewState::Snapshot ReviewState::snapshot() const {
    std::lock_guard lock(mu_);
    return {corrections_, surveys_};
}

std::vector<CorrectionEvent> ReviewState::corrections() const { return *snapshot().corrections; }

std::vector<SurveyResponse> ReviewState::surveys() const { return *snapshot().surveys; }

bool ReviewState::authorized(const std::string& bearer) const { return opts_.token.empty() || bearer == opts_.token; }

Reply ReviewState::tasks(const std::string& kind, const std::optional<std::string>& value,
                         const std::optional<std::string>& query) const {
    const auto k = task_kind_from_string(kind);
    if (!k) return error_reply(400, "unknown task kind: " + kind);
    if (value && opts_.config.attribute.index_of(*value) < 0) return error_reply(404, "unknown value: " + *value);
    const auto& qs = opts_.config.queries;
    if (query && std::find(qs.begin(), qs.end(), *query) == qs.end()) return error_reply(404, "unknown query: " + *query);

    json out = json::array();
    for (const auto& t : tasks_) {
        if (t.kind != *k) continue;
        if (value && t.conditioned_value != *value) continue;
        if (query && t.query != *query) continue;
        out.push_back(task_to_json(t));
    }
    return json_reply(200, out);
}

Reply ReviewState::post_correction(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        return error_reply(400, std::string("malformed JSON: ") + e.what());
    }
    CorrectionEvent e;
    try {
        if (j.is_object() && (!j.contains("timestamp") || j["timestamp"].is_null())) j["timestamp"] = utc_now_iso8601();
        e = correction_from_json(j);
    } catch (const std::exception& ex) {
        return error_reply(422, ex.what());
    }
    if (!image_index_.contains(e.image_id)) return error_reply(404, "unknown image: " + e.image_id);
    if (auto why = check_correction(e, &opts_.config.attribute)) return error_reply(422, *why);

    json entry = correction_to_json(e);
    entry["type"] = "correction";
    {
        std::lock_guard lock(mu_);
        log_->append(entry.dump());
        auto next = std::make_shared<std::vector<CorrectionEvent>>(*corrections_);
        next->push_back(e);
        corrections_ = std::move(next);
    }
    return json_reply(201, {{"status", "stored"}, {"event", correction_to_json(e)}});
}

Reply ReviewState::post_survey(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        return error_reply(400, std::string("malformed JSON: ") + e.what());
    }
    SurveyResponse s;
    try {
        if (j.is_object() && (!j.contains("timestamp") || j["timestamp"].is_null())) j["timestamp"] = utc_now_iso8601();
        s = survey_from_json(j);
    } catch (const std::exception& ex) {
        return error_reply(422, ex.what());
    }

    const ReviewTask* t = find_task(s.task_id);
    if (!t || t->kind == TaskKind::AnnotationReview) return error_reply(422, "not a survey task: " + s.task_id);
    if (s.declared_value != *t->conditioned_value) {
        return error_reply(422, "task " + s.task_id + " is for respondents identifying as " + *t->conditioned_value);
    }
    if (t->kind == TaskKind::InclusionSurvey) {
        if (!s.answer || s.selected_count) return error_reply(422, "inclusion-survey needs an answer and no selected_count");
    } else {
        if (!s.selected_count || s.answer) return error_reply(422, "quality-survey needs a selected_count and no answer");
        const auto size = static_cast<std::int64_t>(t->image_set.size());
        if (*s.selected_count < 0 || *s.selected_count > size) {
            return error_reply(422, "selected_count must lie in [0, " + std::to_string(size) + "]");
        }
    }

    json entry = survey_to_json(s);
    entry["type"] = "survey";
    {
        std::lock_guard lock(mu_);
        log_->append(entry.dump());
        auto next = std::make_shared<std::vector<SurveyResponse>>(*surveys_);
        next->push_back(s);
        surveys_ = std::move(next);
    }
    return json_reply(201, {{"status", "stored"}, {"response", survey_to_json(s)}});
}

Reply ReviewState::survey_summary(const std::optional<std::string>& kind,
                                  const std::optional<std::string>& value) const {
    std::optional<TaskKind> k;
    if (kind) {
        k = task_kind_from_string(*kind);
        if (!k || *k == TaskKind::AnnotationReview) return error_reply(400, "unknown survey kind: " + *kind);
    }
    if (value && opts_.config.attribute.index_of(*value) < 0) return error_reply(404, "unknown value: " + *value);

    struct Acc {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<CellKey, Acc> cells;
    const auto snap = snapshot();
    for (const auto& s : *snap.surveys) {
        const ReviewTask* t = find_task(s.task_id);
        if (!t) continue;
        if (k && t->kind != *k) continue;
        if (value && t->conditioned_value != *value) continue;
        const double score = t->kind == TaskKind::InclusionSurvey
                                 ? crowd_inclusion_score(*s.answer)
                                 : crowd_quality_score(static_cast<long>(*s.selected_count),
                                                       static_cast<long>(t->image_set.size()));
        auto& a = cells[{std::string(to_string(t->kind)), *t->conditioned_value, t->query}];
        a.sum += score;
        ++a.n;
    }

    json out = json::array();
    for (const auto& [key, a] : cells) {
        out.push_back({{"kind", key.kind},
                       {"value", key.value},
                       {"query", key.query},
                       {"mean", a.sum / static_cast<double>(a.n)},
                       {"n", a.n}});
    }
    return json_reply(200, {{"cells", std::move(out)}});
}

Reply ReviewState::export_corrections() const {
    std::ostringstream s;
    write_corrections(s, *snapshot().corrections);
    return {200, s.str(), "application/x-ndjson"};
}

Reply ReviewState::rescore() {
    const auto snap = snapshot();
    ScoringInputs in{opts_.records, *snap.corrections, opts_.confidences};
    ScoringRun run;
    try {
        run = run_scoring(opts_.config, in);
    } catch (const std::exception& e) {
        return error_reply(422, e.what());
    }
    {
        std::lock_guard lock(mu_);
        scored_ = true;
    }
    return json_reply(200, {{"status", "scored"}, {"corrections", snap.corrections->size()}, {"warnings", run.warnings}});
}

Reply ReviewState::report(const std::string& layer) const {
    const auto sel = layer_selection_from_string(layer);
    if (!sel) return error_reply(400, "layer must be model, human or both");
    std::shared_ptr<const std::vector<CorrectionEvent>> corrections;
    {
        std::lock_guard lock(mu_);
        if (!scored_) return error_reply(409, "no scoring run has completed");
        corrections = corrections_;
    }

    ScoringInputs in;
    in.records = opts_.records;
    in.confidences = opts_.confidences;
    if (*sel != LayerSelection::Model) in.corrections = *corrections;
    try {
        const auto run = run_scoring(opts_.config, in);
        ReportOptions ro;
        ro.layers = *sel;
        return {200, dump_document(build_report(opts_.config, run.bundle, ro)), "application/json"};
    } catch (const std::exception& e) {
        return error_reply(422, e.what());
    }
}

Reply ReviewState::image(const std::string& image_id, fs::path* file) const {
    if (escapes_root(image_id)) return error_reply(403, "invalid image id");
    if (!image_index_.contains(image_id)) return error_reply(404, "unknown image: " + image_id);
    if (opts_.image_root.empty()) return error_reply(404, "no image root configured");

    std::error_code ec;
    const fs::path root = fs::weakly_canonical(opts_.image_root, ec);
    if (ec) return error_reply(404, "image root unavailable");
    for (const auto& [ext, type] : media_types()) {
        const fs::path candidate = fs::weakly_canonical(root / (image_id + ext), ec);
        if (ec || !fs::is_regular_file(candidate)) continue;
        const auto rel = candidate.lexically_relative(root);
        if (rel.empty() || *rel.begin() == "..") return error_reply(403, "image outside root");
        if (lower_ext(candidate) != ext) continue;
        if (file) *file = candidate;
        return {200, "", type};
    }
    return error_reply(404, "no file for image " + image_id);
}

void install_routes(httplib::Server& server, ReviewState& state) {
    auto send = [](httplib::Response& res, const Reply& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    auto param = [](const httplib::Request& req, const char* key) -> std::optional<std::string> {
        if (!req.has_param(key)) return std::nullopt;
        return req.get_param_value(key);
    };

    server.set_pre_routing_handler([&state, send](const httplib::Request& req, httplib::Response& res) {
        if (req.path.rfind("/api/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
        std::string token;
        const auto auth = req.get_header_value("Authorization");
        if (auth.rfind("Bearer ", 0) == 0) token = auth.substr(7);
        if (token.empty() && req.path.rfind("/api/images/", 0) == 0 && req.has_param("token")) {
            token = req.get_param_value("token");
        }
        if (state.authorized(token)) return httplib::Server::HandlerResponse::Unhandled;
        send(res, error_reply(401, "missing or invalid bearer token"));
        return httplib::Server::HandlerResponse::Handled;
    });

    server.Get("/api/tasks", [&state, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, state.tasks(param(req, "kind").value_or(""), param(req, "value"), param(req, "query")));
    });
    server.Post("/api/corrections", [&state, send](const httplib::Request& req, httplib::Response& res) {
        send(res, state.post_correction(req.body));
    });
    server.Get("/api/corrections/export", [&state, send](const httplib::Request&, httplib::Response& res) {
        send(res, state.export_corrections());
    });
    server.Post("/api/surveys", [&state, send](const httplib::Request& req, httplib::Response& res) {
        send(res, state.post_survey(req.body));
    });
    server.Get("/api/surveys/summary", [&state, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, state.survey_summary(param(req, "kind"), param(req, "value")));
    });
    server.Post("/api/rescore", [&state, send](const httplib::Request&, httplib::Response& res) {
        send(res, state.rescore());
    });
    server.Get("/api/report", [&state, send, param](const httplib::Request& req, httplib::Response& res) {
        send(res, state.report(param(req, "layer").value_or("human")));
    });
    server.Get(R"(/api/images/(.+))", [&state, send](const httplib::Request& req, httplib::Response& res) {
        fs::path file;
        const Reply r = state.image(req.matches[1], &file);
        if (r.status != 200) return send(res, r);
        std::ifstream in(file, std::ios::binary);
        std::ostringstream bytes;
        bytes << in.rdbuf();
        res.status = 200;
        res.set_content(bytes.str(), r.content_type);
    });
}

}  // namespace ttifair
