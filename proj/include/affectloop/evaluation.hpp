#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affectloop/metrics.hpp"
#include "json.hpp"

namespace affectloop {

/// One line of a prediction file: {id, true_label, pred_label, probs?[7], agreement_pct?}.
struct PredictionRecord {
    std::string id;
    std::optional<EmotionClass> true_label;
    EmotionClass pred_label = EmotionClass::neutral;
    std::optional<std::array<double, kEmotionCount>> probs;
    std::optional<double> agreement_pct;
};

/// Accepts names ("happy"), common dataset spellings ("anger", "surprise", "fear") and
/// integer codes 0..6.
std::optional<EmotionClass> parse_eval_label(const nlohmann::json& value);

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
/// JSON Lines of {id, true_label}.
std::map<std::string, EmotionClass> read_truth(const std::filesystem::path& path);
/// JSON Lines of {id, agreement_pct}.
std::map<std::string, double> read_agreement(const std::filesystem::path& path);

struct EvaluationOutcome {
    EvalReport report;
    std::optional<DifficultyBinReport> difficulty;
    std::size_t samples = 0;
};

/// Truth comes from `truth` when given (ids must match the predictions exactly), else from
/// each record's true_label. Agreement comes from `agreement` when given (ids must be known),
/// else from records' agreement_pct. Id problems raise invalid_argument listing the ids.
EvaluationOutcome evaluate_predictions(const std::vector<PredictionRecord>& records,
                                       const std::optional<std::map<std::string, EmotionClass>>& truth,
                                       const std::optional<std::map<std::string, double>>& agreement);

nlohmann::json to_json(const EvaluationOutcome& outcome);

}  // namespace affectloop
