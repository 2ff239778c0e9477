#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace affectloop {

inline constexpr std::size_t kEmotionCount = 7;
inline constexpr std::size_t kAnnotationLabelCount = 10;

/// The seven training emotions. Integer codes are part of the serialized format.
enum class EmotionClass : std::uint8_t {
    happy = 0,
    sad = 1,
    surprised = 2,
    fearful = 3,
    angry = 4,
    disgust = 5,
    neutral = 6,
};

/// What an annotator may answer. Codes 0..6 coincide with EmotionClass.
enum class AnnotationLabel : std::uint8_t {
    happy = 0,
    sad = 1,
    surprised = 2,
    fearful = 3,
    angry = 4,
    disgust = 5,
    neutral = 6,
    none = 7,
    unknown = 8,
    contempt = 9,
};

inline constexpr std::array<EmotionClass, kEmotionCount> kAllEmotions{
    EmotionClass::happy,   EmotionClass::sad,   EmotionClass::surprised, EmotionClass::fearful,
    EmotionClass::angry,   EmotionClass::disgust, EmotionClass::neutral,
};

inline constexpr std::array<AnnotationLabel, kAnnotationLabelCount> kAllAnnotationLabels{
    AnnotationLabel::happy,   AnnotationLabel::sad,     AnnotationLabel::surprised,
    AnnotationLabel::fearful, AnnotationLabel::angry,   AnnotationLabel::disgust,
    AnnotationLabel::neutral, AnnotationLabel::none,    AnnotationLabel::unknown,
    AnnotationLabel::contempt,
};

constexpr std::size_t code(EmotionClass e) { return static_cast<std::size_t>(e); }
constexpr std::size_t code(AnnotationLabel l) { return static_cast<std::size_t>(l); }

constexpr AnnotationLabel to_annotation(EmotionClass e) {
    return static_cast<AnnotationLabel>(static_cast<std::uint8_t>(e));
}

/// nullopt for none/unknown/contempt, which never become training labels.
constexpr std::optional<EmotionClass> as_emotion(AnnotationLabel l) {
    if (code(l) < kEmotionCount) return static_cast<EmotionClass>(code(l));
    return std::nullopt;
}

std::string_view to_string(EmotionClass e);
std::string_view to_string(AnnotationLabel l);

std::optional<EmotionClass> parse_emotion(std::string_view name);
std::optional<AnnotationLabel> parse_annotation_label(std::string_view name);
std::optional<EmotionClass> emotion_from_code(long long value);

}  // namespace affectloop
