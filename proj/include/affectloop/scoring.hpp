#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "affectloop/image.hpp"
#include "affectloop/labels.hpp"
#include "json.hpp"

namespace affectloop {

/// ln 7: the entropy of the uniform 7-class distribution.
inline constexpr double kMaxEntropy = 1.9459101490553132;

/// A normalized 7-class distribution indexed by EmotionClass code.
class ProbabilityVector {
public:
    using Values = std::array<double, kEmotionCount>;

    /// Normalizes `raw` to sum to 1. Throws invalid_argument on negative, non-finite or
    /// all-zero input.
    explicit ProbabilityVector(const Values& raw, std::int64_t scorer_version = 0);

    static ProbabilityVector uniform(std::int64_t scorer_version = 0);

    const Values& values() const noexcept { return probs_; }
    double operator[](EmotionClass c) const { return probs_[code(c)]; }
    std::int64_t scorer_version() const noexcept { return version_; }
    EmotionClass argmax() const;

private:
    Values probs_{};
    std::int64_t version_ = 0;
};

/// Shannon entropy in nats, with 0 ln 0 taken as 0.
double entropy(const ProbabilityVector& p);

struct EntropyScore {
    double value = 0.0;
    std::string frame_id;
    std::int64_t scorer_version = 0;
};

EntropyScore entropy_score(const std::string& frame_id, const ProbabilityVector& p);

/// Nearest-centroid model over 16x16 grayscale thumbnails.
class CentroidModel {
public:
    static constexpr int kSide = 16;
    static constexpr std::size_t kFeatureCount = kSide * kSide;
    using Features = std::array<double, kFeatureCount>;

    /// Box-averaged 16x16 grayscale thumbnail, flattened row-major.
    static Features features(const Raster& image);

    void add(const Raster& image, EmotionClass label);
    void add_features(const Features& f, EmotionClass label);

    bool empty() const noexcept;
    bool has_class(EmotionClass c) const { return counts_[code(c)] > 0; }
    std::size_t count(EmotionClass c) const { return counts_[code(c)]; }
    Features centroid(EmotionClass c) const;

    nlohmann::json to_json() const;
    static CentroidModel from_json(const nlohmann::json& j);

private:
    std::array<Features, kEmotionCount> sums_{};
    std::array<std::size_t, kEmotionCount> counts_{};
};

inline constexpr double kDefaultTemperature = 10.0;

/// softmax(-d_c / T) over trained classes; untrained classes get probability 0.
/// Throws untrained_scorer when the model holds no examples.
ProbabilityVector baseline_score(const Raster& image, const CentroidModel& model,
                                 double temperature = kDefaultTemperature,
                                 std::int64_t scorer_version = 0);

struct ScoringInput {
    std::string frame_id;
    std::span<const std::uint8_t> encoded;
    const Raster& decoded;
};

class Scorer {
public:
    virtual ~Scorer() = default;
    /// Throws Error(scoring_failure or untrained_scorer) when no vector can be produced.
    virtual ProbabilityVector score(const ScoringInput& input) = 0;
    virtual std::string describe() const = 0;
};

class BaselineScorer final : public Scorer {
public:
    explicit BaselineScorer(std::shared_ptr<const CentroidModel> model,
                            double temperature = kDefaultTemperature);

    ProbabilityVector score(const ScoringInput& input) override;
    std::string describe() const override;
    const CentroidModel& model() const { return *model_; }

private:
    std::shared_ptr<const CentroidModel> model_;
    double temperature_;
};

/// Installed scorers keyed by a monotonically increasing local version. Version 0 is the
/// uninformed prior (uniform distribution) used before any scorer is installed.
class ScorerRegistry {
public:
    static constexpr std::int64_t kPriorVersion = 0;

    /// Installs `scorer` under the next version, which becomes current.
    std::int64_t install(std::shared_ptr<Scorer> scorer);
    /// Restores a previously assigned version (used when reopening a data directory).
    void install_at(std::int64_t version, std::shared_ptr<Scorer> scorer);

    std::int64_t current_version() const;
    bool has_version(std::int64_t version) const;
    /// nullptr for the prior version.
    std::shared_ptr<Scorer> find(std::int64_t version) const;

    /// Scores with the given version; the prior version yields the uniform vector.
    ProbabilityVector score(std::int64_t version, const ScoringInput& input) const;

private:
    mutable std::mutex mutex_;
    std::map<std::int64_t, std::shared_ptr<Scorer>> scorers_;
    std::int64_t current_ = kPriorVersion;
};

}  // namespace affectloop
