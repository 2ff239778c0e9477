#include "affectloop/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "affectloop/error.hpp"

namespace affectloop {

namespace {

void check_range(const ParamRange& r, const char* name) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
        throw Error(ErrorCode::invalid_argument, std::string("augmentation range '") + name + "' is not ordered");
    }
}

nlohmann::json range_json(const ParamRange& r) { return nlohmann::json::array({r.lo, r.hi}); }

ParamRange range_from(const nlohmann::json& j, const char* key, ParamRange fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) {
        throw Error(ErrorCode::invalid_argument, std::string("augmentation.") + key + " must be [lo, hi]");
    }
    return {v[0].get<double>(), v[1].get<double>()};
}

// Uniform double in [0, 1) from the top 53 bits.
double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double draw(std::mt19937_64& gen, const ParamRange& r) {
    const double u = unit(gen);
    if (r.lo == r.hi) return r.lo;
    return std::min(r.hi, r.lo + u * (r.hi - r.lo));
}

double snap(double v) {
    const double r = std::round(v);
    return std::abs(v - r) < 1e-9 ? r : v;
}

std::uint8_t to_byte(double v) {
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

}  // namespace

void AugmentConfig::validate() const {
    check_range(rotation_deg, "rotation_deg");
    check_range(zoom, "zoom");
    check_range(shift_x_frac, "shift_x_frac");
    check_range(shift_y_frac, "shift_y_frac");
    check_range(brightness, "brightness");
    if (zoom.lo <= 0.0) throw Error(ErrorCode::invalid_argument, "zoom factors must be positive");
    if (brightness.lo < 0.0) throw Error(ErrorCode::invalid_argument, "brightness factors must be nonnegative");
    if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) {
        throw Error(ErrorCode::invalid_argument, "hflip_prob must lie in [0,1]");
    }
}

bool AugmentConfig::admits(const AugmentParams& p) const {
    return rotation_deg.contains(p.rotation_deg) && zoom.contains(p.zoom) &&
           shift_x_frac.contains(p.shift_x_frac) && shift_y_frac.contains(p.shift_y_frac) &&
           brightness.contains(p.brightness) && (hflip_prob > 0.0 || !p.hflip);
}

nlohmann::json AugmentConfig::to_json() const {
    // Shifts are symmetric in every direction, so only their magnitudes are written.
    return {
        {"rotation_deg", range_json(rotation_deg)},
        {"zoom", range_json(zoom)},
        {"shift_frac", nlohmann::json::array({shift_x_frac.hi, shift_y_frac.hi})},
        {"brightness", range_json(brightness)},
        {"hflip_prob", hflip_prob},
    };
}

AugmentConfig AugmentConfig::from_json(const nlohmann::json& j) {
    AugmentConfig c;
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "augmentation must be an object");
    c.rotation_deg = range_from(j, "rotation_deg", c.rotation_deg);
    c.zoom = range_from(j, "zoom", c.zoom);
    c.brightness = range_from(j, "brightness", c.brightness);
    if (j.contains("shift_frac")) {
        const auto& s = j.at("shift_frac");
        if (!s.is_array() || s.size() != 2) throw Error(ErrorCode::invalid_argument, "shift_frac must be [x, y]");
        const double sx = std::abs(s[0].get<double>());
        const double sy = std::abs(s[1].get<double>());
        c.shift_x_frac = {-sx, sx};
        c.shift_y_frac = {-sy, sy};
    }
    if (j.contains("hflip_prob")) c.hflip_prob = j.at("hflip_prob").get<double>();
    if (j.contains("fill_value")) {
        const auto rgb = j.at("fill_value").get<std::array<int, 3>>();
        for (int v : rgb) {
            if (v < 0 || v > 255) throw Error(ErrorCode::invalid_argument, "fill_value channels must be 0..255");
        }
        c.fill_value = {static_cast<std::uint8_t>(rgb[0]), static_cast<std::uint8_t>(rgb[1]),
                        static_cast<std::uint8_t>(rgb[2])};
    }
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
}

AugmentParams sample_params(const AugmentConfig& config, std::uint64_t draw_index, std::uint64_t worker_index) {
    config.validate();
    auto split = [](std::uint64_t v) {
        return std::array<std::uint32_t, 2>{static_cast<std::uint32_t>(v >> 32), static_cast<std::uint32_t>(v)};
    };
    const auto s = split(config.seed);
    const auto w = split(worker_index);
    const auto d = split(draw_index);
    std::seed_seq seq{s[0], s[1], w[0], w[1], d[0], d[1]};
    std::mt19937_64 gen(seq);

    AugmentParams p;
    p.rotation_deg = draw(gen, config.rotation_deg);
    p.zoom = draw(gen, config.zoom);
    p.shift_x_frac = draw(gen, config.shift_x_frac);
    p.shift_y_frac = draw(gen, config.shift_y_frac);
    p.brightness = draw(gen, config.brightness);
    p.hflip = unit(gen) < config.hflip_prob;
    return p;
}

ParamSampler::ParamSampler(AugmentConfig config, std::uint64_t worker_index)
    : config_(std::move(config)), worker_index_(worker_index) {
    config_.validate();
}

AugmentParams ParamSampler::next() { return sample_params(config_, next_index_++, worker_index_); }

Raster apply(const Raster& image, const AugmentParams& params, Rgb fill) {
    if (image.empty()) throw Error(ErrorCode::invalid_argument, "cannot augment a zero-sized image");
    if (!(params.zoom > 0.0)) throw Error(ErrorCode::invalid_argument, "zoom must be positive");
    const int w = image.width();
    const int h = image.height();

    Raster warped;
    if (params.rotation_deg == 0.0 && params.zoom == 1.0 && params.shift_x_frac == 0.0 &&
        params.shift_y_frac == 0.0) {
        warped = image;
    } else {
        warped = Raster(w, h);
        const double cx = (w - 1) / 2.0;
        const double cy = (h - 1) / 2.0;
        const double theta = params.rotation_deg * std::numbers::pi / 180.0;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        const double tx = params.shift_x_frac * w;
        const double ty = params.shift_y_frac * h;

        auto sample = [&](int x, int y) -> Rgb {
            return (x < 0 || y < 0 || x >= w || y >= h) ? fill : image.at(x, y);
        };
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                // Invert: undo the shift, then the zoom, then the rotation.
                const double u = (x - cx - tx) / params.zoom;
                const double v = (y - cy - ty) / params.zoom;
                const double xs = snap(c * u + s * v + cx);
                const double ys = snap(-s * u + c * v + cy);
                const double fx0 = std::floor(xs);
                const double fy0 = std::floor(ys);
                if (fx0 < -1.0 || fy0 < -1.0 || fx0 > w || fy0 > h) {
                    warped.set(x, y, fill);
                    continue;
                }
                const int x0 = static_cast<int>(fx0);
                const int y0 = static_cast<int>(fy0);
                const double ax = xs - fx0;
                const double ay = ys - fy0;
                const Rgb p00 = sample(x0, y0);
                const Rgb p10 = sample(x0 + 1, y0);
                const Rgb p01 = sample(x0, y0 + 1);
                const Rgb p11 = sample(x0 + 1, y0 + 1);
                auto mix = [&](std::uint8_t a, std::uint8_t b, std::uint8_t cc, std::uint8_t d) {
                    return to_byte((1 - ax) * (1 - ay) * a + ax * (1 - ay) * b + (1 - ax) * ay * cc + ax * ay * d);
                };
                warped.set(x, y, {mix(p00.r, p10.r, p01.r, p11.r), mix(p00.g, p10.g, p01.g, p11.g),
                                  mix(p00.b, p10.b, p01.b, p11.b)});
            }
        }
    }

    if (params.brightness != 1.0) {
        for (auto& v : warped.bytes()) v = to_byte(params.brightness * v);
    }

    if (!params.hflip) return warped;
    Raster flipped(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) flipped.set(x, y, warped.at(w - 1 - x, y));
    }
    return flipped;
}

}  // namespace affectloop
