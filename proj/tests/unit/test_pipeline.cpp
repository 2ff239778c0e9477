#include <atomic>

#include "affectloop/error.hpp"
#include "affectloop/pipeline.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace affectloop;
using testsupport::emotion_style;
using testsupport::png;

namespace {

Clock ticking_clock(std::int64_t start_ms = 1'790'000'000'000) {
    auto t = std::make_shared<std::atomic<std::int64_t>>(start_ms);
    return [t] { return from_millis(t->fetch_add(1000)); };
}

/// Frames are "s.000000".."s.000020": three variants of each style, style = index % 7.
struct World {
    testsupport::TempDir dir;
    std::unique_ptr<Store> store = Store::open(dir / "data");
    std::unique_ptr<Pipeline> pipeline;

    explicit World(PipelineConfig config = {}) {
        pipeline = std::make_unique<Pipeline>(*store, config, ticking_clock());
        pipeline->register_session({"s", "c", EmotionClass::happy, {}, 90.0, ConsentTier::research_only});
        for (const char* a : {"a1", "a2", "a3", "a4"}) store->put_annotator({a, a, std::string("tok-") + a, {}});
        for (int i = 0; i < 21; ++i) {
            const auto style = kAllEmotions[static_cast<std::size_t>(i % 7)];
            const auto f = pipeline->ingest_frame("s", i, png(emotion_style(style, static_cast<std::uint64_t>(i))));
            REQUIRE(f.qc_status == QcStatus::passed);
        }
    }

    void reopen(PipelineConfig config = {}) {
        pipeline.reset();
        store = Store::open(dir / "data", false);
        pipeline = std::make_unique<Pipeline>(*store, config, ticking_clock(1'800'000'000'000));
    }
};

EmotionClass style_of(const std::string& frame_id) {
    return kAllEmotions[static_cast<std::size_t>(std::stoi(frame_id.substr(frame_id.find('.') + 1)) % 7)];
}

}  // namespace

TEST_CASE("ingest scores with the prior and enqueues passed frames only") {
    World w;
    CHECK(w.pipeline->queue().size() == 21);
    CHECK(w.pipeline->scorers().current_version() == ScorerRegistry::kPriorVersion);
    for (const auto& e : w.pipeline->queue().ordered()) {
        CHECK(e.entropy.value == doctest::Approx(kMaxEntropy).epsilon(1e-12));
        CHECK(e.entropy.scorer_version == 0);
        const auto stored = w.store->latest_score(e.frame_id);
        REQUIRE(stored);
        CHECK(stored->scorer_version == 0);
    }
    const auto dark = w.pipeline->ingest_frame("s", 100, png(testsupport::constant_image(32, 32, 0)));
    CHECK(dark.qc_status == QcStatus::rejected_dark);
    const auto junk = w.pipeline->ingest_frame("s", 101, std::vector<std::uint8_t>{1, 2, 3});
    CHECK(junk.qc_status == QcStatus::rejected_decode);
    CHECK(w.pipeline->queue().size() == 21);
    CHECK_FALSE(w.pipeline->queue().contains(dark.frame_id));
}

TEST_CASE("labels flow to decisions and the queue retires frames") {
    World w;
    const auto batch = w.pipeline->next_batch("a1", 24);
    CHECK(batch.size() == 21);
    CHECK(w.pipeline->next_batch("a1", 24).empty());
    CHECK(w.pipeline->next_batch("a2", 5).size() == 5);
    CHECK_THROWS_AS(w.pipeline->next_batch("nobody", 5), Error);

    const auto f = batch.front();
    auto out = w.pipeline->submit_label("a1", f, AnnotationLabel::happy);
    CHECK(out.accepted);
    CHECK_FALSE(out.decision);

    SUBCASE("duplicate submission keeps the first label") {
        out = w.pipeline->submit_label("a1", f, AnnotationLabel::sad);
        CHECK_FALSE(out.accepted);
        CHECK(out.error == ErrorCode::duplicate);
        CHECK(w.store->find_event("a1", f)->label == AnnotationLabel::happy);
    }
    SUBCASE("labels require the frame to have been served") {
        out = w.pipeline->submit_label("a3", f, AnnotationLabel::happy);
        CHECK(out.error == ErrorCode::contract_violation);
        CHECK(w.store->event_count(f) == 1);
    }
    SUBCASE("unknown frame and annotator") {
        CHECK(w.pipeline->submit_label("a1", "s.999999", AnnotationLabel::happy).error == ErrorCode::not_found);
        CHECK(w.pipeline->submit_label("ghost", f, AnnotationLabel::happy).error == ErrorCode::not_found);
    }
    SUBCASE("the third label resolves the frame") {
        w.pipeline->next_batch("a2", 24);
        w.pipeline->next_batch("a3", 24);
        CHECK(w.pipeline->submit_label("a2", f, AnnotationLabel::happy).accepted);
        out = w.pipeline->submit_label("a3", f, AnnotationLabel::happy);
        CHECK(out.accepted);
        REQUIRE(out.decision);
        CHECK(out.decision->final_label == AnnotationLabel::happy);
        CHECK(out.decision->branch == DecisionBranch::unanimous);
        CHECK(out.decision->input_events.size() == 3);
        CHECK(w.store->get_decision(f) == out.decision);
        CHECK_FALSE(w.pipeline->queue().contains(f));
        CHECK(w.pipeline->queue().is_retired(f));
        CHECK(w.pipeline->queue().size() == 20);

        // A fourth annotator can no longer be served the decided frame.
        const auto later = w.pipeline->next_batch("a4", 24);
        CHECK(std::find(later.begin(), later.end(), f) == later.end());
    }
}

TEST_CASE("state survives reopening") {
    World w;
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->next_batch(a, 24);
    const auto order = w.pipeline->queue().ordered();
    const auto decided = order[0].frame_id;
    const auto partial = order[1].frame_id;
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->submit_label(a, decided, AnnotationLabel::sad);
    w.pipeline->submit_label("a1", partial, AnnotationLabel::angry);
    const auto v = w.pipeline->install_scorer(std::make_shared<BaselineScorer>(std::make_shared<CentroidModel>()));
    CHECK(v == 1);

    w.reopen();
    CHECK(w.pipeline->queue().size() == 20);
    CHECK_FALSE(w.pipeline->queue().contains(decided));
    REQUIRE(w.pipeline->queue().contains(partial));
    const auto e = *w.pipeline->queue().entry(partial);
    CHECK(e.labels_received == 1);
    CHECK(e.served_to == std::set<std::string>{"a1", "a2", "a3"});
    CHECK(w.pipeline->next_batch("a1", 24).empty());
    CHECK(w.pipeline->next_batch("a4", 24).size() == 20);

    // Version numbers never repeat across restarts.
    const auto v2 = w.pipeline->install_scorer(std::make_shared<BaselineScorer>(std::make_shared<CentroidModel>()));
    CHECK(v2 == 2);
}

TEST_CASE("decisions missed before a crash are made on reopening") {
    World w;
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->next_batch(a, 24);
    const auto f = w.pipeline->queue().ordered()[0].frame_id;
    // Write the events directly, as if the process died before resolving.
    for (const char* a : {"a1", "a2", "a3"}) w.store->append_event({0, a, f, AnnotationLabel::neutral, from_millis(1)});
    CHECK_FALSE(w.store->get_decision(f));
    w.reopen();
    REQUIRE(w.store->get_decision(f));
    CHECK(w.store->get_decision(f)->final_label == AnnotationLabel::neutral);
    CHECK_FALSE(w.pipeline->queue().contains(f));
}

TEST_CASE("retrain and rerank") {
    World w;
    CHECK_THROWS_AS(w.pipeline->retrain_baseline({}), Error);
    CHECK_THROWS_AS(w.pipeline->rerank(7), Error);

    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->next_batch(a, 24);
    // Label 14 frames unanimously with their style; 7 stay queued.
    std::vector<std::string> labeled;
    for (const auto& e : w.pipeline->queue().ordered()) {
        if (labeled.size() == 14) break;
        labeled.push_back(e.frame_id);
    }
    for (const auto& f : labeled) {
        for (const char* a : {"a1", "a2", "a3"}) REQUIRE(w.pipeline->submit_label(a, f, to_annotation(style_of(f))).accepted);
    }
    const auto rows = w.pipeline->export_manifest({}, 1.0, 0).rows;
    REQUIRE(rows.size() == 14);
    const auto version = w.pipeline->retrain_baseline(rows);
    CHECK(version == 1);
    CHECK(w.pipeline->scorers().current_version() == 1);
    CHECK(w.pipeline->rerank(version) == 7);

    const auto ordered = w.pipeline->queue().ordered();
    CHECK(ordered.size() == 7);
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        CHECK(ordered[i].entropy.scorer_version == version);
        const auto stored = w.store->get_score(ordered[i].frame_id, version);
        REQUIRE(stored);
        CHECK(stored->entropy == ordered[i].entropy.value);
        if (i) CHECK(ordered[i - 1].entropy.value >= ordered[i].entropy.value);
    }

    // The trained model is restored on reopening, under the same version.
    w.reopen();
    CHECK(w.pipeline->scorers().current_version() == version);
    CHECK(w.pipeline->queue().ordered().front().entropy.scorer_version == version);
}

TEST_CASE("new frames after retraining use the current scorer") {
    World w;
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->next_batch(a, 24);
    const auto f = w.pipeline->queue().ordered()[0].frame_id;
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->submit_label(a, f, to_annotation(style_of(f)));
    const auto version = w.pipeline->retrain_baseline(w.pipeline->export_manifest({}, 1.0, 0).rows);
    const auto fresh = w.pipeline->ingest_frame("s", 50, png(emotion_style(EmotionClass::sad, 99)));
    const auto e = w.pipeline->queue().entry(fresh.frame_id);
    REQUIRE(e);
    CHECK(e->entropy.scorer_version == version);
    // Only one class is trained, so every probability mass sits on it.
    CHECK(e->entropy.value == 0.0);
}

TEST_CASE("funnel counts") {
    World w;
    w.pipeline->ingest_frame("s", 200, png(testsupport::constant_image(32, 32, 255)));
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->next_batch(a, 24);
    const auto order = w.pipeline->queue().ordered();
    for (const char* a : {"a1", "a2", "a3"}) w.pipeline->submit_label(a, order[0].frame_id, AnnotationLabel::happy);
    w.pipeline->submit_label("a1", order[1].frame_id, AnnotationLabel::happy);
    w.pipeline->submit_label("a2", order[1].frame_id, AnnotationLabel::sad);
    w.pipeline->submit_label("a3", order[1].frame_id, AnnotationLabel::fearful);
    w.pipeline->submit_label("a1", order[2].frame_id, AnnotationLabel::none);

    const auto f = w.pipeline->funnel();
    CHECK(f.sessions == 1);
    CHECK(f.frames_ingested == 22);
    CHECK(f.qc_passed == 21);
    CHECK(f.qc_by_status.at(QcStatus::rejected_bright) == 1);
    CHECK(f.labeled == 3);
    CHECK(f.events == 7);
    CHECK(f.decisions == 2);
    // The second frame is exportable only if its automatic label was among the votes.
    const auto auto_label = w.store->get_frame(order[1].frame_id)->automatic_label;
    const bool fallback = auto_label == EmotionClass::happy || auto_label == EmotionClass::sad ||
                          auto_label == EmotionClass::fearful;
    CHECK(f.consensus_final == (fallback ? 2u : 1u));
    CHECK(f.discarded == (fallback ? 0u : 1u));
    CHECK(f.exportable == f.consensus_final);
    CHECK(f.queued == 19);

    const auto j = to_json(f);
    CHECK(j["qc_by_status"]["rejected_bright"] == 1);
    CHECK(render_funnel(f).find("frames ingested") != std::string::npos);
}
