#include <doctest.h>

#include <httplib.h>

#include <set>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "support.hpp"
#include "ttifair/error.hpp"
#include "ttifair/pipeline.hpp"
#include "ttifair/service.hpp"
#include "ttifair/synthetic.hpp"

using namespace ttifair;
using namespace testsupport;
using nlohmann::json;

namespace {

// A review service listening on an ephemeral local port for the lifetime of the object.
class LiveService {
public:
    explicit LiveService(ServiceOptions opts) : state_(std::move(opts)) {
        install_routes(server_, state_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LiveService() {
        server_.stop();
        thread_.join();
    }

    httplib::Client client(const std::string& token = "") const {
        httplib::Client c("127.0.0.1", port_);
        if (!token.empty()) c.set_bearer_token_auth(token);
        return c;
    }
    ReviewState& state() { return state_; }

private:
    ReviewState state_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

ServiceOptions subset_service(const TempDir& dir, bool score_on_start = true) {
    ServiceOptions o;
    o.config = subset_config();
    o.config.persona_count = 500;
    o.records = synthetic_records(o.config);
    o.image_root = dir / "images";
    o.log_path = dir / "log.jsonl";
    o.score_on_start = score_on_start;
    return o;
}

json post_json(httplib::Client& c, const std::string& path, const json& body, int* status) {
    auto res = c.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    *status = res->status;
    return json::parse(res->body);
}

int status_of(const httplib::Result& res) { return res ? res->status : -1; }

}  // namespace

TEST_SUITE("service") {

TEST_CASE("task listing") {
    TempDir dir;
    LiveService svc(subset_service(dir));
    auto c = svc.client();

    auto res = c.Get("/api/tasks?kind=annotation-review");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto review = json::parse(res->body);
    CHECK(review.size() == 1110);
    CHECK(review[0]["current_labels"]["image_id"] == review[0]["image_set"][0]);

    for (const char* kind : {"quality-survey", "inclusion-survey"}) {
        res = c.Get(std::string("/api/tasks?kind=") + kind + "&value=Middle%20Eastern");
        REQUIRE(res);
        const auto tasks = json::parse(res->body);
        CHECK(tasks.size() == 18);
        std::map<std::string, std::set<std::string>> per_query;
        for (const auto& t : tasks) {
            CHECK(t["conditioned_value"] == "Middle Eastern");
            CHECK(t["image_set"].size() == 5);
            for (const auto& id : t["image_set"]) {
                CHECK(per_query[t["query"]].insert(id.get<std::string>()).second);
            }
        }
        CHECK(per_query.size() == 6);
    }
    const auto q1 = json::parse(c.Get("/api/tasks?kind=quality-survey&value=Black")->body);
    const auto q2 = json::parse(c.Get("/api/tasks?kind=inclusion-survey&value=Black")->body);
    CHECK(q1[0]["image_set"] == q2[0]["image_set"]);

    res = c.Get("/api/tasks?kind=quality-survey&value=Black&query=baker");
    CHECK(json::parse(res->body).size() == 3);
    CHECK(status_of(c.Get("/api/tasks?kind=bogus")) == 400);
    CHECK(status_of(c.Get("/api/tasks")) == 400);
    CHECK(status_of(c.Get("/api/tasks?kind=quality-survey&value=Martian")) == 404);
    CHECK(status_of(c.Get("/api/tasks?kind=quality-survey&query=astronaut")) == 404);
}

TEST_CASE("correction ingestion") {
    TempDir dir;
    LiveService svc(subset_service(dir));
    auto c = svc.client();
    const std::string id = svc.state().options().records[0].image_id;
    int status = 0;

    auto ack = post_json(c, "/api/corrections",
                         {{"reviewer_id", "r1"}, {"image_id", id}, {"field", "race"}, {"old_value", "Asian"}, {"new_value", "Latino"}},
                         &status);
    CHECK(status == 201);
    CHECK(is_iso8601_utc(ack["event"]["timestamp"].get<std::string>()));

    post_json(c, "/api/corrections", {{"reviewer_id", "r1"}, {"image_id", id}, {"field", "gender"}, {"new_value", "-"}}, &status);
    CHECK(status == 201);
    post_json(c, "/api/corrections", {{"reviewer_id", "r1"}, {"image_id", id}, {"field", "quality"}, {"new_value", 5}}, &status);
    CHECK(status == 422);
    post_json(c, "/api/corrections", {{"reviewer_id", "r1"}, {"image_id", id}, {"field", "race"}, {"new_value", "Martian"}}, &status);
    CHECK(status == 422);
    post_json(c, "/api/corrections", {{"reviewer_id", "r1"}, {"image_id", id}, {"field", "hair"}, {"new_value", "red"}}, &status);
    CHECK(status == 422);
    post_json(c, "/api/corrections", {{"reviewer_id", "r1"}, {"image_id", "ghost"}, {"field", "age"}, {"new_value", 30}}, &status);
    CHECK(status == 404);
    CHECK(status_of(c.Post("/api/corrections", "{oops", "application/json")) == 400);

    auto res = c.Get("/api/corrections/export");
    REQUIRE(res);
    std::istringstream in(res->body);
    const auto events = read_corrections(in);
    CHECK(events.errors.empty());
    REQUIRE(events.items.size() == 2);
    CHECK(events.items[0].new_value == FieldValue(std::string("Latino")));
    CHECK(events.items[1].new_value == FieldValue(Unlabeled{}));
}

TEST_CASE("survey ingestion and aggregation") {
    TempDir dir;
    LiveService svc(subset_service(dir));
    auto c = svc.client();
    const auto inc = json::parse(c.Get("/api/tasks?kind=inclusion-survey&value=Middle%20Eastern&query=doctor")->body);
    const auto qual = json::parse(c.Get("/api/tasks?kind=quality-survey&value=Middle%20Eastern&query=doctor")->body);
    REQUIRE(inc.size() == 3);
    REQUIRE(qual.size() == 3);

    auto base = [](const json& task, const std::string& respondent) {
        return json{{"respondent_id", respondent}, {"declared_value", "Middle Eastern"}, {"declared_age", 29},
                    {"declared_gender", "female"}, {"task_id", task["task_id"]}};
    };
    int status = 0;
    const char* answers[] = {"both", "either", "none"};
    for (int i = 0; i < 3; ++i) {
        auto body = base(inc[i], "p" + std::to_string(i));
        body["answer"] = answers[i];
        post_json(c, "/api/surveys", body, &status);
        CHECK(status == 201);
    }
    const int selected[] = {0, 3, 5};
    for (int i = 0; i < 3; ++i) {
        auto body = base(qual[i], "p" + std::to_string(i));
        body["selected_count"] = selected[i];
        post_json(c, "/api/surveys", body, &status);
        CHECK(status == 201);
    }

    auto bad = base(qual[0], "x");
    bad["selected_count"] = 6;
    post_json(c, "/api/surveys", bad, &status);
    CHECK(status == 422);
    bad = base(inc[0], "x");
    bad["answer"] = "maybe";
    post_json(c, "/api/surveys", bad, &status);
    CHECK(status == 422);
    bad = base(inc[0], "x");
    bad["selected_count"] = 2;
    post_json(c, "/api/surveys", bad, &status);
    CHECK(status == 422);
    bad = base(inc[0], "x");
    bad["declared_value"] = "Asian";
    bad["answer"] = "both";
    post_json(c, "/api/surveys", bad, &status);
    CHECK(status == 422);
    bad = base(inc[0], "x");
    bad["task_id"] = "review:" + svc.state().options().records[0].image_id;
    bad["answer"] = "both";
    post_json(c, "/api/surveys", bad, &status);
    CHECK(status == 422);

    const auto summary = json::parse(c.Get("/api/surveys/summary?value=Middle%20Eastern")->body)["cells"];
    REQUIRE(summary.size() == 2);
    CHECK(summary[0]["kind"] == "inclusion-survey");
    CHECK(summary[0]["query"] == "doctor");
    CHECK(summary[0]["mean"].get<double>() == 0.5);
    CHECK(summary[0]["n"] == 3);
    CHECK(summary[1]["kind"] == "quality-survey");
    CHECK(summary[1]["mean"].get<double>() == doctest::Approx(8.0 / 15).epsilon(1e-15));
    CHECK(status_of(c.Get("/api/surveys/summary?kind=annotation-review")) == 400);
    CHECK(json::parse(c.Get("/api/surveys/summary?kind=quality-survey")->body)["cells"].size() == 1);
}

TEST_CASE("image bytes and traversal guard") {
    TempDir dir;
    auto opts = subset_service(dir);
    const std::string id = opts.records[0].image_id;
    std::filesystem::create_directories(opts.image_root);
    write_text(opts.image_root / (id + ".png"), "\x89PNG fake");
    write_text(dir / "secret.png", "top secret");
    LiveService svc(std::move(opts));
    auto c = svc.client();

    auto res = c.Get("/api/images/" + id);
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "image/png");
    CHECK(res->body == "\x89PNG fake");
    CHECK(status_of(c.Get("/api/images/" + svc.state().options().records[1].image_id)) == 404);
    CHECK(status_of(c.Get("/api/images/unknown")) == 404);
    CHECK(status_of(c.Get("/api/images/../secret")) == 403);
    CHECK(status_of(c.Get("/api/images/..%2Fsecret")) == 403);
    CHECK(status_of(c.Get("/api/images/%2E%2E%2F%2E%2E%2Fetc%2Fpasswd")) == 403);
}

TEST_CASE("report follows corrections and matches the command line") {
    TempDir dir;
    auto opts = subset_service(dir, false);
    opts.config = small_config();
    opts.records = synthetic_records(opts.config);
    const auto records = opts.records;
    const auto cfg = opts.config;
    LiveService svc(std::move(opts));
    auto c = svc.client();

    CHECK(status_of(c.Get("/api/report?layer=human")) == 409);
    CHECK(status_of(c.Post("/api/rescore", "", "application/json")) == 200);
    CHECK(status_of(c.Get("/api/report?layer=robots")) == 400);

    const auto before = json::parse(c.Get("/api/report?layer=human")->body);

    // Flip 20 unconditioned race labels to one value.
    std::vector<CorrectionEvent> fixes;
    int status = 0;
    for (const auto& r : records) {
        if (fixes.size() == 20) break;
        if (r.conditioned_value || r.race == "Asian") continue;
        post_json(c, "/api/corrections", {{"reviewer_id", "r"}, {"image_id", r.image_id}, {"field", "race"}, {"new_value", "Asian"}},
                  &status);
        REQUIRE(status == 201);
        fixes.push_back({"r", r.image_id, Field::Race, std::nullopt, std::string("Asian"), ""});
    }

    const auto human_body = c.Get("/api/report?layer=human")->body;
    const auto after = json::parse(human_body);
    const auto oracle = score_diversity(merge_layers(records, fixes).records, cfg);
    CHECK(after["reports"][0]["diversity"]["score_kl"].get<double>() == oracle.overall.score_kl);
    CHECK(after["reports"][0]["diversity"]["score_kl"] != before["reports"][0]["diversity"]["score_kl"]);

    const auto model_body = c.Get("/api/report?layer=model")->body;
    const auto model = json::parse(model_body);
    CHECK(model["reports"][0]["layer"] == "model");
    CHECK(model["reports"][0]["diversity"]["score_kl"].get<double>() == score_diversity(records, cfg).overall.score_kl);

    // Independent command-line runs on the same inputs plus the exported log.
    save_config(cfg, dir / "cfg.json");
    write_records_file(dir / "records.jsonl", records);
    write_text(dir / "exported.jsonl", c.Get("/api/corrections/export")->body);
    std::ostringstream out, err;
    cli::run({"audit", "--config", (dir / "cfg.json").string(), "--records", (dir / "records.jsonl").string(), "--corrections",
              (dir / "exported.jsonl").string(), "--layer", "human", "--out", (dir / "cli-human").string()},
             out, err);
    CHECK(read_text(dir / "cli-human" / "report.json") == human_body);
    cli::run({"audit", "--config", (dir / "cfg.json").string(), "--records", (dir / "records.jsonl").string(), "--layer", "model",
              "--out", (dir / "cli-model").string()},
             out, err);
    CHECK(read_text(dir / "cli-model" / "report.json") == model_body);
}

TEST_CASE("log replay restores state") {
    TempDir dir;
    const auto opts = subset_service(dir);
    const std::string id = opts.records[5].image_id;
    std::string task;
    {
        LiveService svc(opts);
        auto c = svc.client();
        int status = 0;
        post_json(c, "/api/corrections", {{"reviewer_id", "r"}, {"image_id", id}, {"field", "age"}, {"new_value", 44}}, &status);
        task = json::parse(c.Get("/api/tasks?kind=inclusion-survey&value=Asian")->body)[0]["task_id"];
        post_json(c, "/api/surveys",
                  {{"respondent_id", "p"}, {"declared_value", "Asian"}, {"task_id", task}, {"answer", "both"}}, &status);
        CHECK(status == 201);
    }
    ReviewState once(opts);
    CHECK(once.corrections().size() == 1);
    CHECK(once.corrections()[0].image_id == id);
    CHECK(once.surveys().size() == 1);
    CHECK(once.surveys()[0].task_id == task);
    ReviewState twice(opts);
    CHECK(twice.corrections() == once.corrections());
    CHECK(twice.export_corrections().body == once.export_corrections().body);
    CHECK(twice.report("human").body == once.report("human").body);

    write_text(dir / "bad.jsonl", "{\"type\": \"correction\"}\n");
    auto broken = opts;
    broken.log_path = dir / "bad.jsonl";
    CHECK_THROWS_AS(ReviewState{broken}, ParseError);
}

TEST_CASE("bearer token guards the api") {
    TempDir dir;
    auto opts = subset_service(dir);
    opts.token = "s3cret";
    const std::string id = opts.records[0].image_id;
    std::filesystem::create_directories(opts.image_root);
    write_text(opts.image_root / (id + ".jpg"), "jpeg");
    LiveService svc(std::move(opts));

    auto anon = svc.client();
    CHECK(status_of(anon.Get("/api/tasks?kind=annotation-review")) == 401);
    CHECK(status_of(anon.Get("/api/images/" + id)) == 401);
    CHECK(status_of(anon.Get("/api/images/" + id + "?token=s3cret")) == 200);
    CHECK(status_of(anon.Get("/api/tasks?kind=annotation-review&token=s3cret")) == 401);
    auto wrong = svc.client("nope");
    CHECK(status_of(wrong.Get("/api/tasks?kind=annotation-review")) == 401);
    auto ok = svc.client("s3cret");
    CHECK(status_of(ok.Get("/api/tasks?kind=annotation-review")) == 200);
    auto img = ok.Get("/api/images/" + id);
    CHECK(img->get_header_value("Content-Type") == "image/jpeg");
}

TEST_CASE("concurrent writers and readers") {
    TempDir dir;
    const auto opts = subset_service(dir);
    {
        LiveService svc(opts);
        const auto& records = svc.state().options().records;
        std::vector<std::thread> threads;
        std::atomic<int> created{0};
        for (int t = 0; t < 8; ++t) {
            threads.emplace_back([&, t] {
                auto c = svc.client();
                for (int i = 0; i < 25; ++i) {
                    const auto& r = records[static_cast<std::size_t>(t * 25 + i)];
                    json body{{"reviewer_id", "t" + std::to_string(t)}, {"image_id", r.image_id}, {"field", "age"}, {"new_value", 20 + i}};
                    auto res = c.Post("/api/corrections", body.dump(), "application/json");
                    if (res && res->status == 201) ++created;
                }
            });
        }
        threads.emplace_back([&] {
            auto c = svc.client();
            for (int i = 0; i < 3; ++i) CHECK(status_of(c.Get("/api/report?layer=human")) == 200);
        });
        for (auto& th : threads) th.join();
        CHECK(created == 200);
        CHECK(svc.state().corrections().size() == 200);
    }
    ReviewState restarted(opts);
    CHECK(restarted.corrections().size() == 200);
    std::set<std::string> ids;
    for (const auto& e : restarted.corrections()) ids.insert(e.image_id);
    CHECK(ids.size() == 200);
}

TEST_CASE("survey task ids parse back") {
    CHECK(task_kind_from_string("quality-survey") == TaskKind::QualitySurvey);
    CHECK_FALSE(task_kind_from_string("bogus"));
    SurveyResponse s{"p", "Asian", 30.0, std::string("male"), "t", CrowdAnswer::Either, std::nullopt, "2024-01-01T00:00:00Z"};
    const auto back = survey_from_json(survey_to_json(s));
    CHECK(back.answer == CrowdAnswer::Either);
    CHECK(back.declared_age == 30.0);
    CHECK(survey_to_json(back) == survey_to_json(s));
    CHECK_THROWS(survey_from_json(json{{"respondent_id", "p"}}));
}

}
