#pragma once

// Review service: serves annotation-review and survey tasks, image bytes, and
// ingests corrections and survey responses into one append-only log.
//
// Writers are serialized through the log; readers work on immutable snapshots,
// so re-scoring never blocks ingestion.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttifair/core.hpp"
#include "ttifair/ingest.hpp"
#include "ttifair/pipeline.hpp"
#include "ttifair/scoring.hpp"

namespace httplib {
class Server;
}

namespace ttifair {

enum class TaskKind { AnnotationReview, InclusionSurvey, QualitySurvey };

std::string_view to_string(TaskKind k);
std::optional<TaskKind> task_kind_from_string(std::string_view s);

struct ReviewTask {
    std::string task_id;
    TaskKind kind = TaskKind::AnnotationReview;
    std::vector<std::string> image_set;
    std::string query;
    std::optional<std::string> conditioned_value;
    std::optional<ImageRecord> current_labels;  // annotation-review only
};

nlohmann::json task_to_json(const ReviewTask& t);

struct SurveyResponse {
    std::string respondent_id;
    std::string declared_value;
    std::optional<double> declared_age;
    std::optional<std::string> declared_gender;
    std::string task_id;
    std::optional<CrowdAnswer> answer;        // inclusion-survey
    std::optional<std::int64_t> selected_count;  // quality-survey
    std::string timestamp;
};

nlohmann::json survey_to_json(const SurveyResponse& s);
SurveyResponse survey_from_json(const nlohmann::json& j);

// Append-only line log. Each append is flushed and fsync'ed before returning.
class AppendLog {
public:
    explicit AppendLog(const std::filesystem::path& path);
    ~AppendLog();
    AppendLog(const AppendLog&) = delete;
    AppendLog& operator=(const AppendLog&) = delete;

    void append(const std::string& line);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    int fd_ = -1;
};

struct ServiceOptions {
    EvalConfig config;
    std::vector<ImageRecord> records;  // model layer
    std::optional<std::vector<ConfidenceRecord>> confidences;
    std::filesystem::path image_root;
    std::filesystem::path log_path;
    std::string token;  // empty: no authentication
    bool score_on_start = true;
};

// An HTTP-shaped result: status code, body, and media type.
struct Reply {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

// Transport-independent service logic; every handler is thread-safe.
class ReviewState {
public:
    // Replays the log at options.log_path (created when missing). Throws
    // ParseError on a corrupt log.
    explicit ReviewState(ServiceOptions options);

    Reply tasks(const std::string& kind, const std::optional<std::string>& value,
                const std::optional<std::string>& query) const;
    Reply post_correction(const std::string& body);
    Reply post_survey(const std::string& body);
    Reply survey_summary(const std::optional<std::string>& kind, const std::optional<std::string>& value) const;
    Reply export_corrections() const;
    Reply rescore();
    Reply report(const std::string& layer) const;
    // Resolves an image id to a file under the image root.
    Reply image(const std::string& image_id, std::filesystem::path* file) const;

    bool authorized(const std::string& bearer) const;

    std::vector<CorrectionEvent> corrections() const;
    std::vector<SurveyResponse> surveys() const;
    const ServiceOptions& options() const { return opts_; }

private:
    struct Snapshot {
        std::shared_ptr<const std::vector<CorrectionEvent>> corrections;
        std::shared_ptr<const std::vector<SurveyResponse>> surveys;
    };

    Snapshot snapshot() const;
    void replay();
    void build_tasks();
    const ReviewTask* find_task(const std::string& id) const;

    ServiceOptions opts_;
    std::map<std::string, std::size_t> image_index_;
    std::vector<ReviewTask> tasks_;  // immutable after construction

    mutable std::mutex mu_;  // guards the snapshot pointers, the log and scored_
    std::shared_ptr<const std::vector<CorrectionEvent>> corrections_;
    std::shared_ptr<const std::vector<SurveyResponse>> surveys_;
    std::unique_ptr<AppendLog> log_;
    bool scored_ = false;
};

// Registers every /api route of `state` on `server`.
void install_routes(httplib::Server& server, ReviewState& state);

}  // namespace ttifair
