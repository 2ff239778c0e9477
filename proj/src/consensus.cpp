#include "affectloop/consensus.hpp"

#include <algorithm>
#include <set>

#include "affectloop/error.hpp"

namespace affectloop {

Resolution resolve(std::span<const AnnotationLabel> human_labels, EmotionClass automatic_label) {
    if (human_labels.empty()) throw Error(ErrorCode::invalid_argument, "consensus needs at least one human label");

    const AnnotationLabel first = human_labels.front();
    const bool unanimous = std::all_of(human_labels.begin(), human_labels.end(),
                                       [&](AnnotationLabel l) { return l == first; });
    if (unanimous) return {first, DecisionBranch::unanimous};

    const AnnotationLabel automatic = to_annotation(automatic_label);
    if (std::find(human_labels.begin(), human_labels.end(), automatic) != human_labels.end()) {
        return {automatic, DecisionBranch::automatic_fallback};
    }
    return {std::nullopt, DecisionBranch::discarded_no_support};
}

bool branch_invariants_hold(const Resolution& r, std::span<const AnnotationLabel> labels,
                            EmotionClass automatic_label) {
    if (labels.empty()) return false;
    const auto automatic = to_annotation(automatic_label);
    const bool unanimous =
        std::all_of(labels.begin(), labels.end(), [&](AnnotationLabel l) { return l == labels.front(); });
    const bool supported = std::find(labels.begin(), labels.end(), automatic) != labels.end();
    switch (r.branch) {
        case DecisionBranch::unanimous:
            return unanimous && r.final_label == labels.front();
        case DecisionBranch::automatic_fallback:
            return !unanimous && supported && r.final_label == automatic;
        case DecisionBranch::discarded_no_support:
            return !unanimous && !supported && !r.final_label;
    }
    return false;
}

std::optional<ConsensusDecision> resolve_frame(Store& store, const std::string& frame_id,
                                               std::size_t required_labels, Timestamp as_of) {
    std::optional<ConsensusDecision> out;
    store.transaction([&] {
        if (store.get_decision(frame_id)) return;
        const auto frame = store.get_frame(frame_id);
        if (!frame) throw Error(ErrorCode::not_found, "unknown frame " + frame_id);

        std::vector<AnnotationLabel> labels;
        std::vector<std::int64_t> refs;
        for (const auto& e : store.events_for_frame(frame_id)) {
            if (e.at > as_of) continue;
            labels.push_back(e.label);
            refs.push_back(e.seq);
        }
        if (labels.empty() || labels.size() < required_labels) return;

        const Resolution r = resolve(labels, frame->automatic_label);
        ConsensusDecision d;
        d.frame_id = frame_id;
        d.final_label = r.final_label;
        d.branch = r.branch;
        d.decided_at = as_of;
        d.input_events = std::move(refs);
        store.put_decision(d);
        out = std::move(d);
    });
    return out;
}

std::vector<ConsensusDecision> resolve_all(Store& store, std::size_t required_labels, Timestamp as_of) {
    std::vector<ConsensusDecision> out;
    store.transaction([&] {
        std::set<std::string> candidates;
        for (const auto& e : store.list_events()) candidates.insert(e.frame_id);
        for (const auto& id : candidates) {
            if (auto d = resolve_frame(store, id, required_labels, as_of)) out.push_back(std::move(*d));
        }
    });
    return out;
}

}  // namespace affectloop
