#include <atomic>

#include "affectloop/service.hpp"
#include "doctest.h"
#include "httplib.h"
#include "test_support.hpp"

using namespace affectloop;
using nlohmann::json;

namespace {

// 2026-10-14T00:00:00Z, a Wednesday in ISO week 42.
constexpr std::int64_t kWeek42 = 1'791'936'000'000;
constexpr std::int64_t kWeekMs = 7LL * 24 * 3600 * 1000;

struct Server {
    testsupport::TempDir dir;
    std::unique_ptr<Store> store = Store::open(dir / "data");
    std::shared_ptr<std::atomic<std::int64_t>> now = std::make_shared<std::atomic<std::int64_t>>(kWeek42);
    std::unique_ptr<Pipeline> pipeline;
    std::unique_ptr<Service> service;
    std::unique_ptr<httplib::Client> client;

    explicit Server(std::string admin_token = "") {
        auto t = now;
        pipeline = std::make_unique<Pipeline>(*store, PipelineConfig{}, [t] { return from_millis(t->load()); });
        service = std::make_unique<Service>(*pipeline, ServiceConfig{"127.0.0.1", 0, std::move(admin_token), ""});
        const int port = service->start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(10, 0);
        store->put_annotator({"A", "Alice", "tok-a", {}});
        store->put_annotator({"B", "Bo", "tok-b", {}});
        store->put_annotator({"C", "Cy", "tok-c", {}});
    }
    ~Server() { service->stop(); }

    httplib::Headers auth(const std::string& token) const { return {{"Authorization", "Bearer " + token}}; }

    void session(const std::string& id, const std::string& consent = "research_only") {
        const auto r = client->Post("/api/v1/sessions",
                                    json{{"session_id", id}, {"child_id", "c"}, {"prompt", "happy"}, {"consent", consent}}.dump(),
                                    "application/json");
        REQUIRE(r);
        REQUIRE(r->status == 201);
    }
    json post_frame(const std::string& session, int index, const std::vector<std::uint8_t>& bytes, int want_status = 201) {
        const auto r = client->Post(("/api/v1/sessions/" + session + "/frames?index=" + std::to_string(index)).c_str(),
                                    std::string(bytes.begin(), bytes.end()), "application/octet-stream");
        REQUIRE(r);
        CHECK(r->status == want_status);
        return json::parse(r->body);
    }
    void frames(int n) {
        session("s");
        for (int i = 0; i < n; ++i) {
            post_frame("s", i, testsupport::png(testsupport::emotion_style(kAllEmotions[static_cast<std::size_t>(i % 7)], i)));
        }
    }
    json get(const std::string& path, const std::string& token = "", int want_status = 200) {
        const auto r = token.empty() ? client->Get(path.c_str()) : client->Get(path.c_str(), auth(token));
        REQUIRE(r);
        CHECK(r->status == want_status);
        return json::parse(r->body);
    }
    json label(const std::string& token, const json& items) {
        const auto r = client->Post("/api/v1/labels", auth(token), json{{"labels", items}}.dump(), "application/json");
        REQUIRE(r);
        REQUIRE(r->status == 200);
        return json::parse(r->body);
    }
};

}  // namespace

TEST_CASE("batch of 24 from 50 in priority order") {
    Server s;
    s.frames(50);
    // A model trained on two styles gives the queue a nontrivial order.
    CentroidModel model;
    model.add(testsupport::emotion_style(EmotionClass::happy, 1000), EmotionClass::happy);
    model.add(testsupport::emotion_style(EmotionClass::sad, 1001), EmotionClass::sad);
    const auto v = s.pipeline->install_scorer(std::make_shared<BaselineScorer>(std::make_shared<CentroidModel>(model)));
    s.pipeline->rerank(v);

    const auto expected = s.pipeline->queue().ordered();
    const auto batch = s.get("/api/v1/batch?size=24", "tok-a");
    REQUIRE(batch.is_array());
    REQUIRE(batch.size() == 24);
    for (std::size_t i = 0; i < 24; ++i) {
        CHECK(batch[i]["frame_id"] == expected[i].frame_id);
        CHECK(batch[i]["image_url"] == "/api/v1/frames/" + expected[i].frame_id + "/image");
    }
    // The default size is 24 too.
    CHECK(s.get("/api/v1/batch", "tok-b").size() == 24);
    CHECK(s.get("/api/v1/batch?size=100", "tok-a").size() == 26);
    CHECK(s.get("/api/v1/batch", "tok-a").empty());

    CHECK(s.get("/api/v1/batch", "", 401).at("code") == "unauthorized");
    CHECK(s.get("/api/v1/batch", "wrong", 401).at("code") == "unauthorized");
    CHECK(s.get("/api/v1/batch?size=0", "tok-c", 400).at("code") == "invalid_argument");
    CHECK(s.get("/api/v1/batch?size=x", "tok-c", 400).at("code") == "invalid_argument");
}

TEST_CASE("empty queue returns an empty list") {
    Server s;
    const auto batch = s.get("/api/v1/batch", "tok-a");
    CHECK(batch == json::array());
}

TEST_CASE("label submission, duplicates and decisions") {
    Server s;
    s.frames(3);
    s.get("/api/v1/batch", "tok-a");
    const auto f = s.get("/api/v1/batch", "tok-b")[0]["frame_id"].get<std::string>();
    s.get("/api/v1/batch", "tok-c");

    auto r = s.label("tok-a", json::array({{{"frame_id", f}, {"label", "happy"}}}));
    CHECK(r["accepted"] == 1);
    CHECK(r["rejected"] == 0);
    CHECK(r["results"][0]["status"] == "accepted");
    CHECK(r["results"][0]["item_index"] == 0);
    CHECK_FALSE(r["results"][0].contains("decision"));

    // Resubmission is reported per item and the original label stays.
    r = s.label("tok-a", json::array({{{"frame_id", f}, {"label", "sad"}},
                                      {{"frame_id", "s.999999"}, {"label", "sad"}},
                                      {{"frame_id", f}, {"label", "grumpy"}},
                                      {{"frame_id", 3}}}));
    CHECK(r["accepted"] == 0);
    CHECK(r["rejected"] == 4);
    CHECK(r["results"][0]["code"] == "duplicate");
    CHECK(r["results"][1]["code"] == "not_found");
    CHECK(r["results"][2]["code"] == "invalid_argument");
    CHECK(r["results"][3]["code"] == "invalid_argument");
    CHECK(r["results"][3]["item_index"] == 3);
    CHECK(s.store->find_event("A", f)->label == AnnotationLabel::happy);

    r = s.label("tok-b", json::array({{{"frame_id", f}, {"label", "happy"}}}));
    CHECK_FALSE(r["results"][0].contains("decision"));
    r = s.label("tok-c", json::array({{{"frame_id", f}, {"label", "happy"}}}));
    REQUIRE(r["results"][0].contains("decision"));
    CHECK(r["results"][0]["decision"]["final_label"] == "happy");
    CHECK(r["results"][0]["decision"]["branch"] == "unanimous");
    CHECK(s.store->get_decision(f));

    const auto bad = s.client->Post("/api/v1/labels", s.auth("tok-a"), "{\"oops\": 1}", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    const auto unauth = s.client->Post("/api/v1/labels", "{\"labels\": []}", "application/json");
    REQUIRE(unauth);
    CHECK(unauth->status == 401);
}

TEST_CASE("leaderboard order and shared ISO-week axis") {
    Server s;
    s.frames(6);
    s.get("/api/v1/batch", "tok-a");
    const auto batch = s.get("/api/v1/batch", "tok-b");
    std::vector<std::string> ids;
    for (const auto& b : batch) ids.push_back(b["frame_id"]);

    s.label("tok-a", json::array({{{"frame_id", ids[0]}, {"label", "happy"}}}));
    s.label("tok-b", json::array({{{"frame_id", ids[0]}, {"label", "happy"}}, {{"frame_id", ids[1]}, {"label", "sad"}}}));
    s.now->store(kWeek42 + kWeekMs);
    s.label("tok-b", json::array({{{"frame_id", ids[2]}, {"label", "sad"}}}));

    const auto lb = s.get("/api/v1/leaderboard");
    REQUIRE(lb.size() == 3);
    CHECK(lb[0]["annotator_id"] == "B");
    CHECK(lb[0]["display_name"] == "Bo");
    CHECK(lb[0]["total_labels"] == 3);
    CHECK(lb[1]["annotator_id"] == "A");
    CHECK(lb[1]["total_labels"] == 1);
    CHECK(lb[2]["annotator_id"] == "C");
    CHECK(lb[2]["total_labels"] == 0);
    const json weeks_b = json::array({{{"week", "2026-W42"}, {"count", 2}}, {{"week", "2026-W43"}, {"count", 1}}});
    const json weeks_a = json::array({{{"week", "2026-W42"}, {"count", 1}}, {{"week", "2026-W43"}, {"count", 0}}});
    CHECK(lb[0]["weekly_counts"] == weeks_b);
    CHECK(lb[1]["weekly_counts"] == weeks_a);
    CHECK(lb[2]["weekly_counts"].size() == 2);

    // Totals equal the stored event counts.
    const auto counts = s.store->event_counts_by_annotator();
    for (const auto& row : lb) {
        const auto it = counts.find(row["annotator_id"]);
        CHECK(row["total_labels"] == (it == counts.end() ? 0 : it->second));
    }
}

TEST_CASE("leaderboard weeks span gaps") {
    testsupport::TempDir dir;
    auto store = Store::open(dir.path());
    store->put_session({"s", "c", EmotionClass::happy, {}, 90.0, ConsentTier::research_only});
    store->put_annotator({"A", "A", "t", {}});
    Frame f;
    f.frame_id = "s.000000";
    f.session_id = "s";
    f.image_ref = store->put_image(std::vector<std::uint8_t>{1});
    store->put_frame(f);
    f.frame_id = "s.000001";
    f.index_in_session = 1;
    store->put_frame(f);
    store->append_event({0, "A", "s.000000", AnnotationLabel::happy, from_millis(kWeek42)});
    store->append_event({0, "A", "s.000001", AnnotationLabel::happy, from_millis(kWeek42 + 3 * kWeekMs)});
    const auto rows = leaderboard(*store);
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].weekly_counts.size() == 4);
    CHECK(rows[0].weekly_counts[1].second == 0);
    CHECK(to_string(rows[0].weekly_counts[3].first) == "2026-W45");
}

TEST_CASE("session, frame and image round trip") {
    Server s;
    s.session("s1");
    const auto bytes = testsupport::png(testsupport::emotion_style(EmotionClass::angry, 5));
    const auto frame = s.post_frame("s1", 7, bytes);
    CHECK(frame["frame_id"] == "s1.000007");
    CHECK(frame["qc_status"] == "passed");

    const auto r = s.client->Get("/api/v1/frames/s1.000007/image", s.auth("tok-a"));
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(r->body == std::string(bytes.begin(), bytes.end()));
    CHECK(r->get_header_value("Content-Type") == "image/png");
    CHECK(r->get_header_value("Cache-Control").find("immutable") != std::string::npos);
    CHECK_FALSE(r->get_header_value("ETag").empty());

    const auto q = s.client->Get("/api/v1/frames/s1.000007/image?token=tok-b");
    REQUIRE(q);
    CHECK(q->status == 200);
    const auto anon = s.client->Get("/api/v1/frames/s1.000007/image");
    REQUIRE(anon);
    CHECK(anon->status == 401);
    const auto missing = s.client->Get("/api/v1/frames/s1.000099/image", s.auth("tok-a"));
    REQUIRE(missing);
    CHECK(missing->status == 404);

    s.post_frame("s1", 7, bytes, 409);
    CHECK(s.post_frame("nosuch", 0, bytes, 404)["code"] == "not_found");
    const auto no_index = s.client->Post("/api/v1/sessions/s1/frames", "x", "application/octet-stream");
    REQUIRE(no_index);
    CHECK(no_index->status == 400);
}

TEST_CASE("session registration errors") {
    Server s;
    s.session("s1");
    auto post = [&](const json& body) {
        const auto r = s.client->Post("/api/v1/sessions", body.dump(), "application/json");
        REQUIRE(r);
        return r->status;
    };
    CHECK(post({{"session_id", "s1"}, {"child_id", "c"}, {"prompt", "happy"}, {"consent", "research_only"}}) == 409);
    CHECK(post({{"session_id", "s2"}, {"child_id", "c"}, {"prompt", "happy"}, {"consent", "delete"}}) == 403);
    CHECK_FALSE(s.store->get_session("s2"));
    CHECK(post({{"session_id", "s3"}, {"child_id", "c"}, {"prompt", "bored"}, {"consent", "research_only"}}) == 400);
    const auto junk = s.client->Post("/api/v1/sessions", "{", "application/json");
    REQUIRE(junk);
    CHECK(junk->status == 400);
}

TEST_CASE("export and stats") {
    Server s;
    s.frames(2);
    auto e = s.get("/api/v1/export");
    CHECK(e["status"] == "no_exportable_frames");
    CHECK(e["message"] == "no exportable frames");

    for (const char* tok : {"tok-a", "tok-b", "tok-c"}) {
        const auto b = s.get("/api/v1/batch", tok);
        s.label(tok, json::array({{{"frame_id", b[0]["frame_id"]}, {"label", "surprised"}}}));
    }
    e = s.get("/api/v1/export?split=1&seed=3");
    CHECK(e["status"] == "ok");
    REQUIRE(e["rows"].size() == 1);
    CHECK(e["rows"][0]["final_label"] == "surprised");
    CHECK(e["rows"][0]["split"] == "train");
    CHECK(e["summary"]["rows"] == 1);
    s.get("/api/v1/export?split=2", "", 400);

    const auto st = s.get("/api/v1/stats");
    CHECK(st["frames_ingested"] == 2);
    CHECK(st["events"] == 3);
    CHECK(st["decisions"] == 1);
    CHECK(st["exportable"] == 1);
    CHECK(st["queued"] == 1);
}

TEST_CASE("admin endpoints") {
    SUBCASE("disabled without a token") {
        Server s;
        const auto r = s.client->Post("/api/v1/admin/rerank", "{}", "application/json");
        REQUIRE(r);
        CHECK(r->status == 403);
    }
    SUBCASE("guarded by the token") {
        Server s("secret");
        s.frames(2);
        s.get("/api/v1/export", "", 401);
        CHECK(s.get("/api/v1/export", "secret")["status"] == "no_exportable_frames");
        const auto denied = s.client->Post("/api/v1/admin/rerank", "{}", "application/json");
        REQUIRE(denied);
        CHECK(denied->status == 401);
        const auto ok = s.client->Post("/api/v1/admin/rerank", s.auth("secret"), "{}", "application/json");
        REQUIRE(ok);
        CHECK(ok->status == 200);
        const auto body = json::parse(ok->body);
        CHECK(body["scorer_version"] == 0);
        CHECK(body["rescored"] == 2);
        // Retraining with no decisions has nothing to export.
        const auto retrain = s.client->Post("/api/v1/admin/rerank", s.auth("secret"), "{\"retrain\": true}", "application/json");
        REQUIRE(retrain);
        CHECK(retrain->status == 409);
        const auto unknown = s.client->Post("/api/v1/admin/rerank", s.auth("secret"), "{\"scorer_version\": 9}", "application/json");
        REQUIRE(unknown);
        CHECK(unknown->status == 404);
    }
}
