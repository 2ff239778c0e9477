#include "affectloop/labels.hpp"

#include "affectloop/error.hpp"

namespace affectloop {

namespace {

constexpr std::array<std::string_view, kAnnotationLabelCount> kLabelNames{
    "happy", "sad", "surprised", "fearful", "angry",
    "disgust", "neutral", "none", "unknown", "contempt",
};

}  // namespace

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::duplicate: return "duplicate";
        case ErrorCode::integrity: return "integrity";
        case ErrorCode::consent_refused: return "consent_refused";
        case ErrorCode::untrained_scorer: return "untrained_scorer";
        case ErrorCode::scoring_failure: return "scoring_failure";
        case ErrorCode::contract_violation: return "contract_violation";
        case ErrorCode::no_exportable_frames: return "no_exportable_frames";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

std::string_view to_string(EmotionClass e) { return kLabelNames[code(e)]; }

std::string_view to_string(AnnotationLabel l) { return kLabelNames[code(l)]; }

std::optional<AnnotationLabel> parse_annotation_label(std::string_view name) {
    for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
        if (kLabelNames[i] == name) return kAllAnnotationLabels[i];
    }
    return std::nullopt;
}

std::optional<EmotionClass> parse_emotion(std::string_view name) {
    if (auto label = parse_annotation_label(name)) return as_emotion(*label);
    return std::nullopt;
}

std::optional<EmotionClass> emotion_from_code(long long value) {
    if (value < 0 || value >= static_cast<long long>(kEmotionCount)) return std::nullopt;
    return static_cast<EmotionClass>(value);
}

}  // namespace affectloop
