#pragma once

#include <cstdint>

#include "affectloop/image.hpp"
#include "json.hpp"

namespace affectloop {

struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    bool operator==(const ParamRange&) const = default;
};

struct AugmentParams {
    double rotation_deg = 0.0;  // positive turns content clockwise on screen (y points down)
    double zoom = 1.0;          // > 1 magnifies about the centre
    double shift_x_frac = 0.0;  // fraction of width, positive moves content right
    double shift_y_frac = 0.0;  // fraction of height, positive moves content down
    double brightness = 1.0;
    bool hflip = false;

    bool operator==(const AugmentParams&) const = default;
};

struct AugmentConfig {
    ParamRange rotation_deg{-15.0, 15.0};
    ParamRange zoom{0.85, 1.15};
    ParamRange shift_x_frac{-0.1, 0.1};
    ParamRange shift_y_frac{-0.1, 0.1};
    ParamRange brightness{0.8, 1.2};
    double hflip_prob = 0.5;
    Rgb fill_value{0, 0, 0};
    std::uint64_t seed = 0;

    /// Every range ordered (lo == hi collapses it), zoom and brightness positive,
    /// hflip_prob in [0,1].
    void validate() const;
    bool admits(const AugmentParams& p) const;

    /// The augmentation block of the training configuration.
    nlohmann::json to_json() const;
    static AugmentConfig from_json(const nlohmann::json& j);
};

/// Draw `draw_index` of the stream identified by (config.seed, worker_index). Each draw is
/// independent of every other, so workers can sample in any order.
AugmentParams sample_params(const AugmentConfig& config, std::uint64_t draw_index,
                            std::uint64_t worker_index = 0);

/// Sequential convenience wrapper over sample_params.
class ParamSampler {
public:
    explicit ParamSampler(AugmentConfig config, std::uint64_t worker_index = 0);
    AugmentParams next();
    std::uint64_t draws() const noexcept { return next_index_; }

private:
    AugmentConfig config_;
    std::uint64_t worker_index_;
    std::uint64_t next_index_ = 0;
};

/// Rotate about the centre, zoom about the centre, shift (one bilinear resample for the
/// three), then brightness scale with clamping, then the optional horizontal flip.
/// Output pixels that map outside the source take `fill`. Dimensions are preserved.
Raster apply(const Raster& image, const AugmentParams& params, Rgb fill = {});

}  // namespace affectloop
