#include "affectloop/evaluation.hpp"

#include <fstream>
#include <functional>
#include <set>

#include "affectloop/error.hpp"

namespace affectloop {

namespace fs = std::filesystem;

namespace {

void for_each_json_line(const fs::path& path, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            throw Error(ErrorCode::invalid_argument,
                        path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
        }
        fn(j, line_no);
    }
}

std::string record_id(const nlohmann::json& j, const fs::path& path, std::size_t line_no) {
    if (!j.contains("id")) throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(line_no) + ": missing id");
    const auto& id = j["id"];
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
    throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(line_no) + ": id must be a string");
}

EmotionClass require_label(const nlohmann::json& j, const char* key, const fs::path& path, std::size_t line_no) {
    const auto label = j.contains(key) ? parse_eval_label(j[key]) : std::nullopt;
    if (!label) {
        throw Error(ErrorCode::invalid_argument,
                    path.string() + ":" + std::to_string(line_no) + ": " + key + " is missing or not an emotion");
    }
    return *label;
}

double require_agreement(const nlohmann::json& v, const fs::path& path, std::size_t line_no) {
    if (!v.is_number()) {
        throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(line_no) + ": agreement_pct must be a number");
    }
    return v.get<double>();
}

std::string list_ids(const std::vector<std::string>& ids) {
    std::string out;
    const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) out += (i ? ", " : "") + ids[i];
    if (ids.size() > shown) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
}

}  // namespace

std::optional<EmotionClass> parse_eval_label(const nlohmann::json& value) {
    if (value.is_number_integer()) return emotion_from_code(value.get<long long>());
    if (!value.is_string()) return std::nullopt;
    std::string name = value.get<std::string>();
    for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static const std::map<std::string, EmotionClass> kAliases{
        {"anger", EmotionClass::angry},      {"surprise", EmotionClass::surprised},
        {"fear", EmotionClass::fearful},     {"disgusted", EmotionClass::disgust},
        {"happiness", EmotionClass::happy},  {"sadness", EmotionClass::sad},
    };
    if (const auto it = kAliases.find(name); it != kAliases.end()) return it->second;
    return parse_emotion(name);
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
    std::vector<PredictionRecord> out;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
        PredictionRecord r;
        r.id = record_id(j, path, line_no);
        if (j.contains("true_label") && !j["true_label"].is_null()) r.true_label = require_label(j, "true_label", path, line_no);
        r.pred_label = require_label(j, "pred_label", path, line_no);
        if (j.contains("probs") && !j["probs"].is_null()) {
            const auto& p = j["probs"];
            if (!p.is_array() || p.size() != kEmotionCount) {
                throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(line_no) + ": probs must hold 7 numbers");
            }
            r.probs = p.get<std::array<double, kEmotionCount>>();
        }
        if (j.contains("agreement_pct") && !j["agreement_pct"].is_null()) {
            r.agreement_pct = require_agreement(j["agreement_pct"], path, line_no);
        }
        out.push_back(std::move(r));
    });
    return out;
}

std::map<std::string, EmotionClass> read_truth(const fs::path& path) {
    std::map<std::string, EmotionClass> out;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
        const auto id = record_id(j, path, line_no);
        if (!out.emplace(id, require_label(j, "true_label", path, line_no)).second) {
            throw Error(ErrorCode::invalid_argument, path.string() + ": duplicate id " + id);
        }
    });
    return out;
}

std::map<std::string, double> read_agreement(const fs::path& path) {
    std::map<std::string, double> out;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
        const auto id = record_id(j, path, line_no);
        if (!j.contains("agreement_pct")) {
            throw Error(ErrorCode::invalid_argument, path.string() + ":" + std::to_string(line_no) + ": missing agreement_pct");
        }
        if (!out.emplace(id, require_agreement(j["agreement_pct"], path, line_no)).second) {
            throw Error(ErrorCode::invalid_argument, path.string() + ": duplicate id " + id);
        }
    });
    return out;
}

EvaluationOutcome evaluate_predictions(const std::vector<PredictionRecord>& records,
                                       const std::optional<std::map<std::string, EmotionClass>>& truth,
                                       const std::optional<std::map<std::string, double>>& agreement) {
    std::set<std::string> ids;
    std::vector<std::string> duplicates;
    for (const auto& r : records) {
        if (!ids.insert(r.id).second) duplicates.push_back(r.id);
    }
    if (!duplicates.empty()) {
        throw Error(ErrorCode::invalid_argument, "duplicate prediction ids: " + list_ids(duplicates));
    }

    if (truth) {
        std::vector<std::string> missing_truth;
        std::vector<std::string> missing_pred;
        for (const auto& id : ids) {
            if (!truth->contains(id)) missing_truth.push_back(id);
        }
        for (const auto& [id, label] : *truth) {
            if (!ids.contains(id)) missing_pred.push_back(id);
        }
        if (!missing_truth.empty() || !missing_pred.empty()) {
            std::string msg = "prediction ids do not match truth ids";
            if (!missing_truth.empty()) msg += "; without truth: " + list_ids(missing_truth);
            if (!missing_pred.empty()) msg += "; without prediction: " + list_ids(missing_pred);
            throw Error(ErrorCode::invalid_argument, msg);
        }
    }
    if (agreement) {
        std::vector<std::string> unknown;
        for (const auto& [id, pct] : *agreement) {
            if (!ids.contains(id)) unknown.push_back(id);
        }
        if (!unknown.empty()) throw Error(ErrorCode::invalid_argument, "agreement ids without prediction: " + list_ids(unknown));
    }

    std::vector<EmotionClass> truth_labels;
    std::vector<EmotionClass> pred_labels;
    std::vector<AgreementSample> samples;
    std::vector<std::string> unlabeled;
    for (const auto& r : records) {
        std::optional<EmotionClass> t = truth ? std::optional(truth->at(r.id)) : r.true_label;
        if (!t) {
            unlabeled.push_back(r.id);
            continue;
        }
        truth_labels.push_back(*t);
        pred_labels.push_back(r.pred_label);
        std::optional<double> pct = r.agreement_pct;
        if (agreement) {
            const auto it = agreement->find(r.id);
            pct = it == agreement->end() ? std::nullopt : std::optional(it->second);
        }
        if (pct) samples.push_back({*pct, *t == r.pred_label});
    }
    if (!unlabeled.empty()) throw Error(ErrorCode::invalid_argument, "records without true_label: " + list_ids(unlabeled));

    EvaluationOutcome out;
    out.report = evaluate(confusion(truth_labels, pred_labels));
    out.samples = truth_labels.size();
    if (agreement || !samples.empty()) out.difficulty = difficulty_bins(samples);
    return out;
}

nlohmann::json to_json(const EvaluationOutcome& o) {
    nlohmann::json j = to_json(o.report);
    j["samples"] = o.samples;
    j["difficulty_bins"] = o.difficulty ? to_json(*o.difficulty) : nlohmann::json(nullptr);
    return j;
}

}  // namespace affectloop
