#pragma once

#include <optional>
#include <span>
#include <vector>

#include "affectloop/store.hpp"
#include "affectloop/types.hpp"

namespace affectloop {

struct Resolution {
    std::optional<AnnotationLabel> final_label;  // nullopt: discarded
    DecisionBranch branch = DecisionBranch::discarded_no_support;

    bool operator==(const Resolution&) const = default;
};

/// Final-label rule:
///  1. every human label identical -> that label (whatever the automatic label is);
///  2. otherwise, the automatic label if at least one human chose it;
///  3. otherwise the frame is discarded.
/// Throws invalid_argument for an empty label list.
Resolution resolve(std::span<const AnnotationLabel> human_labels, EmotionClass automatic_label);

/// Checks the branch invariants of a resolution against its inputs.
bool branch_invariants_hold(const Resolution& r, std::span<const AnnotationLabel> human_labels,
                            EmotionClass automatic_label);

/// Resolves one frame from its stored events (those at or before `as_of`) and persists the
/// decision. Returns nullopt when fewer than `required_labels` events exist or a decision is
/// already stored; existing decisions are never altered.
std::optional<ConsensusDecision> resolve_frame(Store& store, const std::string& frame_id,
                                               std::size_t required_labels, Timestamp as_of);

/// resolve_frame over every undecided frame, in frame-id order.
std::vector<ConsensusDecision> resolve_all(Store& store, std::size_t required_labels, Timestamp as_of);

}  // namespace affectloop
