#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affectloop/labels.hpp"
#include "affectloop/timeutil.hpp"

namespace affectloop {

enum class ConsentTier : std::uint8_t { delete_video, research_only, public_share };

std::string_view to_string(ConsentTier tier);
std::optional<ConsentTier> parse_consent(std::string_view name);

inline constexpr double kDefaultSessionSeconds = 90.0;

struct Session {
    std::string session_id;
    std::string child_id;
    EmotionClass prompt = EmotionClass::neutral;
    Timestamp started_at{};
    double duration_s = kDefaultSessionSeconds;
    ConsentTier consent = ConsentTier::research_only;

    bool operator==(const Session&) const = default;
};

enum class QcStatus : std::uint8_t {
    pending,
    passed,
    rejected_dark,
    rejected_bright,
    rejected_blur,
    rejected_decode,
};

std::string_view to_string(QcStatus status);
std::optional<QcStatus> parse_qc_status(std::string_view name);

struct Frame {
    std::string frame_id;
    std::string session_id;
    std::int64_t index_in_session = 0;
    Timestamp ingested_at{};
    std::string image_ref;
    // Zero for frames whose payload did not decode.
    int width_px = 0;
    int height_px = 0;
    EmotionClass automatic_label = EmotionClass::neutral;
    QcStatus qc_status = QcStatus::pending;

    bool operator==(const Frame&) const = default;
};

struct Annotator {
    std::string annotator_id;
    std::string display_name;
    std::string token;
    Timestamp created_at{};

    bool operator==(const Annotator&) const = default;
};

struct AnnotationEvent {
    std::int64_t seq = 0;  // assigned by the store
    std::string annotator_id;
    std::string frame_id;
    AnnotationLabel label = AnnotationLabel::none;
    Timestamp at{};

    bool operator==(const AnnotationEvent&) const = default;
};

enum class DecisionBranch : std::uint8_t { unanimous, automatic_fallback, discarded_no_support };

std::string_view to_string(DecisionBranch branch);
std::optional<DecisionBranch> parse_branch(std::string_view name);

struct ConsensusDecision {
    std::string frame_id;
    std::optional<AnnotationLabel> final_label;  // nullopt: discarded
    DecisionBranch branch = DecisionBranch::discarded_no_support;
    Timestamp decided_at{};
    std::vector<std::int64_t> input_events;

    bool discarded() const noexcept { return !final_label.has_value(); }
    bool operator==(const ConsensusDecision&) const = default;
};

struct StoredScore {
    std::string frame_id;
    std::int64_t scorer_version = 0;
    std::array<double, kEmotionCount> probs{};
    double entropy = 0.0;

    bool operator==(const StoredScore&) const = default;
};

}  // namespace affectloop
