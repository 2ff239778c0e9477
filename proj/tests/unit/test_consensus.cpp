#include <algorithm>

#include "affectloop/consensus.hpp"
#include "affectloop/error.hpp"
#include "affectloop/store.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace affectloop;
using AL = AnnotationLabel;

namespace {

std::vector<int> codes(const std::vector<AnnotationLabel>& labels) {
    std::vector<int> out;
    for (auto l : labels) out.push_back(static_cast<int>(code(l)));
    return out;
}

bool matches_oracle(const std::vector<AnnotationLabel>& labels, EmotionClass automatic) {
    const auto r = resolve(labels, automatic);
    const auto want = testsupport::oracle::consensus(codes(labels), static_cast<int>(code(automatic)));
    const std::optional<int> got_code = r.final_label ? std::optional<int>(static_cast<int>(code(*r.final_label))) : std::nullopt;
    return got_code == want.final_code && to_string(r.branch) == want.branch &&
           branch_invariants_hold(r, labels, automatic);
}

struct StoreFixture {
    testsupport::TempDir dir;
    std::unique_ptr<Store> store = Store::open(dir.path());

    StoreFixture() {
        store->put_session({"s", "c", EmotionClass::sad, {}, 90.0, ConsentTier::research_only});
        for (const char* a : {"a1", "a2", "a3", "a4"}) store->put_annotator({a, a, std::string("t-") + a, {}});
    }
    void add_frame(const std::string& id, EmotionClass automatic = EmotionClass::sad) {
        Frame f;
        f.frame_id = id;
        f.session_id = "s";
        f.index_in_session = static_cast<std::int64_t>(store->list_frames().size());
        f.image_ref = store->put_image(std::vector<std::uint8_t>{1, 2, 3});
        f.automatic_label = automatic;
        f.qc_status = QcStatus::passed;
        store->put_frame(f);
    }
    void label(const std::string& annotator, const std::string& frame, AL l, std::int64_t at = 100) {
        store->append_event({0, annotator, frame, l, from_millis(at)});
    }
};

}  // namespace

TEST_CASE("rule examples") {
    const std::vector<AL> hhh{AL::happy, AL::happy, AL::happy};
    auto r = resolve(hhh, EmotionClass::sad);
    CHECK(r.final_label == AL::happy);
    CHECK(r.branch == DecisionBranch::unanimous);

    const std::vector<AL> hs{AL::happy, AL::sad};
    r = resolve(hs, EmotionClass::sad);
    CHECK(r.final_label == AL::sad);
    CHECK(r.branch == DecisionBranch::automatic_fallback);

    r = resolve(hs, EmotionClass::fearful);
    CHECK_FALSE(r.final_label);
    CHECK(r.branch == DecisionBranch::discarded_no_support);

    const std::vector<AL> none{AL::none};
    r = resolve(none, EmotionClass::happy);
    CHECK(r.final_label == AL::none);
    CHECK(r.branch == DecisionBranch::unanimous);

    // The prompt wins even against a two-to-one majority.
    const std::vector<AL> aab{AL::angry, AL::angry, AL::disgust};
    r = resolve(aab, EmotionClass::disgust);
    CHECK(r.final_label == AL::disgust);
    CHECK(r.branch == DecisionBranch::automatic_fallback);

    CHECK_THROWS_AS(resolve(std::vector<AL>{}, EmotionClass::happy), Error);
}

TEST_CASE("exhaustive equivalence with the rule oracle over every multiset") {
    std::size_t cases = 0, mismatches = 0;
    const auto& L = kAllAnnotationLabels;
    for (auto automatic : kAllEmotions) {
        for (std::size_t i = 0; i < L.size(); ++i) {
            mismatches += !matches_oracle({L[i]}, automatic);
            ++cases;
            for (std::size_t j = i; j < L.size(); ++j) {
                mismatches += !matches_oracle({L[i], L[j]}, automatic);
                ++cases;
                for (std::size_t k = j; k < L.size(); ++k) {
                    mismatches += !matches_oracle({L[i], L[j], L[k]}, automatic);
                    ++cases;
                }
            }
        }
    }
    CHECK(cases == 285 * 7);
    CHECK(mismatches == 0);
}

TEST_CASE("resolve is order invariant over every ordered label list") {
    std::size_t cases = 0;
    const auto& L = kAllAnnotationLabels;
    for (auto automatic : kAllEmotions) {
        for (auto a : L) {
            for (auto b : L) {
                for (auto c : L) {
                    std::vector<AL> labels{a, b, c};
                    std::vector<AL> sorted = labels;
                    std::sort(sorted.begin(), sorted.end());
                    CHECK(resolve(labels, automatic) == resolve(sorted, automatic));
                    CHECK(matches_oracle(labels, automatic));
                    ++cases;
                }
            }
        }
    }
    CHECK(cases == 7000);
}

TEST_CASE("non-emotion labels take part in unanimity") {
    for (auto extra : {AL::none, AL::unknown, AL::contempt}) {
        const std::vector<AL> all{extra, extra, extra};
        CHECK(resolve(all, EmotionClass::happy).final_label == extra);
        const std::vector<AL> mixed{extra, AL::happy, extra};
        CHECK(resolve(mixed, EmotionClass::happy).final_label == AL::happy);
        CHECK_FALSE(resolve(mixed, EmotionClass::sad).final_label);
    }
}

TEST_CASE_FIXTURE(StoreFixture, "resolve_all") {
    SUBCASE("no eligible frames") {
        add_frame("s.000000");
        label("a1", "s.000000", AL::happy);
        CHECK(resolve_all(*store, 3, from_millis(1000)).empty());
        CHECK(store->list_decisions().empty());
    }
    SUBCASE("one eligible frame, then idempotent") {
        add_frame("s.000000");
        label("a1", "s.000000", AL::happy);
        label("a2", "s.000000", AL::sad);
        label("a3", "s.000000", AL::happy);
        const auto first = resolve_all(*store, 3, from_millis(1000));
        REQUIRE(first.size() == 1);
        CHECK(first[0].final_label == AL::sad);
        CHECK(first[0].branch == DecisionBranch::automatic_fallback);
        CHECK(first[0].input_events.size() == 3);
        CHECK(to_millis(first[0].decided_at) == 1000);
        CHECK(*store->get_decision("s.000000") == first[0]);
        CHECK(resolve_all(*store, 3, from_millis(2000)).empty());
    }
    SUBCASE("late labels never alter a decision") {
        add_frame("s.000000");
        label("a1", "s.000000", AL::fearful);
        const auto d = resolve_all(*store, 1, from_millis(1000));
        REQUIRE(d.size() == 1);
        label("a2", "s.000000", AL::angry, 1500);
        CHECK(resolve_all(*store, 1, from_millis(2000)).empty());
        CHECK(*store->get_decision("s.000000") == d[0]);
        CHECK(store->event_count("s.000000") == 2);
    }
    SUBCASE("events after as_of are ignored") {
        add_frame("s.000000");
        label("a1", "s.000000", AL::happy, 100);
        label("a2", "s.000000", AL::happy, 100);
        label("a3", "s.000000", AL::sad, 5000);
        CHECK(resolve_all(*store, 3, from_millis(1000)).empty());
        const auto d = resolve_all(*store, 3, from_millis(6000));
        REQUIRE(d.size() == 1);
        CHECK(d[0].final_label == AL::sad);
    }
}

TEST_CASE("resolve_all results do not depend on processing order") {
    std::mt19937_64 rng(3);
    std::vector<std::tuple<std::string, EmotionClass, std::vector<AL>>> plan;
    for (int i = 0; i < 30; ++i) {
        std::vector<AL> labels;
        for (int k = 0; k < 3; ++k) labels.push_back(kAllAnnotationLabels[rng() % 4]);
        plan.emplace_back("s.0000" + std::to_string(10 + i), kAllEmotions[rng() % 3], labels);
    }
    auto run = [&](bool reversed) {
        StoreFixture fx;
        auto order = plan;
        if (reversed) std::reverse(order.begin(), order.end());
        for (const auto& [id, automatic, labels] : order) fx.add_frame(id, automatic);
        for (const auto& [id, automatic, labels] : order) {
            for (std::size_t k = 0; k < labels.size(); ++k) fx.label("a" + std::to_string(k + 1), id, labels[k]);
        }
        std::map<std::string, Resolution> out;
        for (const auto& d : resolve_all(*fx.store, 3, from_millis(1000))) out[d.frame_id] = {d.final_label, d.branch};
        // Every stored decision satisfies its branch invariants.
        for (const auto& d : fx.store->list_decisions()) {
            std::vector<AL> labels;
            for (const auto& e : fx.store->events_for_frame(d.frame_id)) labels.push_back(e.label);
            CHECK(branch_invariants_hold({d.final_label, d.branch}, labels, fx.store->get_frame(d.frame_id)->automatic_label));
        }
        return out;
    };
    const auto forward = run(false);
    CHECK(forward.size() == 30);
    CHECK(forward == run(true));
}

TEST_CASE("branch invariant checker rejects inconsistent resolutions") {
    const std::vector<AL> hs{AL::happy, AL::sad};
    CHECK_FALSE(branch_invariants_hold({AL::happy, DecisionBranch::unanimous}, hs, EmotionClass::sad));
    CHECK_FALSE(branch_invariants_hold({AL::happy, DecisionBranch::automatic_fallback}, hs, EmotionClass::sad));
    CHECK_FALSE(branch_invariants_hold({std::nullopt, DecisionBranch::discarded_no_support}, hs, EmotionClass::sad));
    CHECK(branch_invariants_hold({std::nullopt, DecisionBranch::discarded_no_support}, hs, EmotionClass::angry));
}
