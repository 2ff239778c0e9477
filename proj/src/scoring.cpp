#include "affectloop/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "affectloop/error.hpp"

namespace affectloop {

ProbabilityVector::ProbabilityVector(const Values& raw, std::int64_t scorer_version)
    : version_(scorer_version) {
    double total = 0.0;
    for (double v : raw) {
        if (!std::isfinite(v) || v < 0.0) {
            throw Error(ErrorCode::invalid_argument, "probabilities must be finite and nonnegative");
        }
        total += v;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw Error(ErrorCode::invalid_argument, "probability vector cannot be normalized");
    }
    for (std::size_t i = 0; i < kEmotionCount; ++i) probs_[i] = std::min(1.0, raw[i] / total);
}

ProbabilityVector ProbabilityVector::uniform(std::int64_t scorer_version) {
    Values v;
    v.fill(1.0);
    return ProbabilityVector(v, scorer_version);
}

EmotionClass ProbabilityVector::argmax() const {
    const auto it = std::max_element(probs_.begin(), probs_.end());
    return static_cast<EmotionClass>(std::distance(probs_.begin(), it));
}

double entropy(const ProbabilityVector& p) {
    double h = 0.0;
    for (double v : p.values()) {
        if (v > 0.0) h -= v * std::log(v);
    }
    return std::clamp(h, 0.0, kMaxEntropy);
}

EntropyScore entropy_score(const std::string& frame_id, const ProbabilityVector& p) {
    return {entropy(p), frame_id, p.scorer_version()};
}

CentroidModel::Features CentroidModel::features(const Raster& image) {
    if (image.empty()) throw Error(ErrorCode::invalid_argument, "cannot featurize an empty image");
    const GrayImage gray = to_grayscale(image);
    Features out{};
    for (int cy = 0; cy < kSide; ++cy) {
        int y0 = cy * gray.height / kSide;
        int y1 = std::max(y0 + 1, (cy + 1) * gray.height / kSide);
        for (int cx = 0; cx < kSide; ++cx) {
            int x0 = cx * gray.width / kSide;
            int x1 = std::max(x0 + 1, (cx + 1) * gray.width / kSide);
            std::uint64_t sum = 0;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) sum += gray.at(x, y);
            }
            out[static_cast<std::size_t>(cy * kSide + cx)] =
                static_cast<double>(sum) / static_cast<double>((y1 - y0) * (x1 - x0));
        }
    }
    return out;
}

void CentroidModel::add(const Raster& image, EmotionClass label) { add_features(features(image), label); }

void CentroidModel::add_features(const Features& f, EmotionClass label) {
    auto& sum = sums_[code(label)];
    for (std::size_t i = 0; i < kFeatureCount; ++i) sum[i] += f[i];
    ++counts_[code(label)];
}

bool CentroidModel::empty() const noexcept {
    return std::all_of(counts_.begin(), counts_.end(), [](std::size_t n) { return n == 0; });
}

CentroidModel::Features CentroidModel::centroid(EmotionClass c) const {
    const std::size_t n = counts_[code(c)];
    if (n == 0) throw Error(ErrorCode::not_found, "class has no training examples");
    Features out = sums_[code(c)];
    for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

nlohmann::json CentroidModel::to_json() const {
    nlohmann::json classes = nlohmann::json::array();
    for (EmotionClass c : kAllEmotions) {
        classes.push_back({{"class", std::string(to_string(c))},
                           {"count", counts_[code(c)]},
                           {"sums", sums_[code(c)]}});
    }
    return {{"kind", "centroid16"}, {"classes", classes}};
}

CentroidModel CentroidModel::from_json(const nlohmann::json& j) {
    CentroidModel m;
    for (const auto& entry : j.at("classes")) {
        const auto c = parse_emotion(entry.at("class").get<std::string>());
        if (!c) throw Error(ErrorCode::invalid_argument, "model file names an unknown class");
        m.counts_[code(*c)] = entry.at("count").get<std::size_t>();
        m.sums_[code(*c)] = entry.at("sums").get<Features>();
    }
    return m;
}

ProbabilityVector baseline_score(const Raster& image, const CentroidModel& model, double temperature,
                                 std::int64_t scorer_version) {
    if (model.empty()) throw Error(ErrorCode::untrained_scorer, "untrained scorer: model has no examples");
    if (!(temperature > 0.0)) throw Error(ErrorCode::invalid_argument, "temperature must be positive");

    const auto f = CentroidModel::features(image);
    std::array<double, kEmotionCount> logits{};
    double best = -std::numeric_limits<double>::infinity();
    for (EmotionClass c : kAllEmotions) {
        if (!model.has_class(c)) continue;
        const auto centroid = model.centroid(c);
        double d2 = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double diff = f[i] - centroid[i];
            d2 += diff * diff;
        }
        logits[code(c)] = -std::sqrt(d2) / temperature;
        best = std::max(best, logits[code(c)]);
    }
    std::array<double, kEmotionCount> weights{};
    for (EmotionClass c : kAllEmotions) {
        if (model.has_class(c)) weights[code(c)] = std::exp(logits[code(c)] - best);
    }
    return ProbabilityVector(weights, scorer_version);
}

BaselineScorer::BaselineScorer(std::shared_ptr<const CentroidModel> model, double temperature)
    : model_(std::move(model)), temperature_(temperature) {
    if (!model_) throw Error(ErrorCode::invalid_argument, "baseline scorer needs a model");
}

ProbabilityVector BaselineScorer::score(const ScoringInput& input) {
    return baseline_score(input.decoded, *model_, temperature_);
}

std::string BaselineScorer::describe() const { return "baseline-centroid16"; }

std::int64_t ScorerRegistry::install(std::shared_ptr<Scorer> scorer) {
    std::lock_guard lock(mutex_);
    const std::int64_t version = (scorers_.empty() ? kPriorVersion : scorers_.rbegin()->first) + 1;
    scorers_[version] = std::move(scorer);
    current_ = version;
    return version;
}

void ScorerRegistry::install_at(std::int64_t version, std::shared_ptr<Scorer> scorer) {
    if (version <= kPriorVersion) throw Error(ErrorCode::invalid_argument, "scorer versions start at 1");
    std::lock_guard lock(mutex_);
    scorers_[version] = std::move(scorer);
    current_ = std::max(current_, version);
}

std::int64_t ScorerRegistry::current_version() const {
    std::lock_guard lock(mutex_);
    return current_;
}

bool ScorerRegistry::has_version(std::int64_t version) const {
    std::lock_guard lock(mutex_);
    return version == kPriorVersion || scorers_.contains(version);
}

std::shared_ptr<Scorer> ScorerRegistry::find(std::int64_t version) const {
    std::lock_guard lock(mutex_);
    const auto it = scorers_.find(version);
    return it == scorers_.end() ? nullptr : it->second;
}

ProbabilityVector ScorerRegistry::score(std::int64_t version, const ScoringInput& input) const {
    if (version == kPriorVersion) return ProbabilityVector::uniform(kPriorVersion);
    const auto scorer = find(version);
    if (!scorer) throw Error(ErrorCode::not_found, "unknown scorer version " + std::to_string(version));
    return scorer->score(input);
}

}  // namespace affectloop
