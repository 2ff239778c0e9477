#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "affectloop/labels.hpp"
#include "json.hpp"

namespace affectloop {

/// 7x7 counts; rows are the true class, columns the predicted class.
class ConfusionMatrix {
public:
    using Counts = std::array<std::array<std::uint64_t, kEmotionCount>, kEmotionCount>;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(const Counts& counts) : counts_(counts) {}

    std::uint64_t at(EmotionClass truth, EmotionClass pred) const { return counts_[code(truth)][code(pred)]; }
    std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts_[truth][pred]; }
    void add(EmotionClass truth, EmotionClass pred, std::uint64_t n = 1) { counts_[code(truth)][code(pred)] += n; }

    std::uint64_t row_sum(std::size_t truth) const;
    std::uint64_t col_sum(std::size_t pred) const;
    std::uint64_t total() const;
    const Counts& counts() const noexcept { return counts_; }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    Counts counts_{};
};

/// Throws invalid_argument on length mismatch or empty input.
ConfusionMatrix confusion(std::span<const EmotionClass> truth, std::span<const EmotionClass> pred);

struct ClassMetrics {
    EmotionClass label = EmotionClass::happy;
    double precision = 0.0;  // 0 when the class is never predicted
    double recall = 0.0;     // 0 when the class has no true samples
    double f1 = 0.0;         // 0 when precision + recall = 0
    std::uint64_t support = 0;
};

ClassMetrics class_metrics(const ConfusionMatrix& cm, EmotionClass c);

/// Mean recall over classes with a nonzero row. Throws invalid_argument when every row is zero.
double balanced_accuracy(const ConfusionMatrix& cm);
/// Unweighted mean F1 over classes with a nonzero row.
double macro_f1(const ConfusionMatrix& cm);
/// Pooled F1; equals accuracy for single-label classification.
double micro_f1(const ConfusionMatrix& cm);
/// Support-weighted mean F1.
double weighted_f1(const ConfusionMatrix& cm);

struct EvalReport {
    ConfusionMatrix confusion;
    double balanced_accuracy = 0.0;
    double macro_f1 = 0.0;
    double micro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::array<ClassMetrics, kEmotionCount> per_class{};
    std::vector<EmotionClass> classes_excluded;
};

EvalReport evaluate(const ConfusionMatrix& cm);

struct AgreementSample {
    double agreement_pct = 0.0;
    bool correct = false;
};

struct DifficultyBin {
    double lo = 0.0;
    double hi = 0.0;
    bool closed_top = false;  // only the last bin, [90,100]
    std::uint64_t count = 0;
    std::optional<double> accuracy;  // nullopt for empty bins
};

struct DifficultyBinReport {
    std::array<DifficultyBin, 10> bins{};
    std::uint64_t total() const;
};

/// Bin index: floor(pct / 10), with 100 folded into the top bin.
std::size_t difficulty_bin_index(double agreement_pct);

/// Throws invalid_argument when any agreement lies outside [0,100].
DifficultyBinReport difficulty_bins(std::span<const AgreementSample> samples);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const DifficultyBinReport& report);
std::string render_table(const EvalReport& report);
std::string render_table(const DifficultyBinReport& report);

}  // namespace affectloop
