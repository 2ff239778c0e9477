#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "affectloop/image.hpp"
#include "affectloop/store.hpp"
#include "affectloop/timeutil.hpp"
#include "affectloop/types.hpp"
#include "json.hpp"

namespace affectloop {

struct QcConfig {
    double min_mean_brightness = 20.0;
    double max_mean_brightness = 235.0;
    double min_laplacian_variance = 25.0;

    /// Throws invalid_argument when bounds are outside [0,255] or not ordered.
    void validate() const;
};

struct QcMeasurements {
    double mean_brightness = 0.0;
    // Population variance of the 4-neighbour Laplacian over interior pixels.
    double laplacian_variance = 0.0;
};

QcMeasurements measure_quality(const GrayImage& gray);

/// First failing check in the order dark, bright, blur; otherwise passed.
QcStatus classify_quality(const QcMeasurements& m, const QcConfig& config);

struct Region {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;
};

/// Chooses the part of a frame that QC looks at (e.g. a detected face).
class RegionOfInterestProvider {
public:
    virtual ~RegionOfInterestProvider() = default;
    virtual Region region(const Raster& image) const = 0;
};

class FullFrameRegion final : public RegionOfInterestProvider {
public:
    Region region(const Raster& image) const override {
        return {0, 0, image.width(), image.height()};
    }
};

Raster crop(const Raster& image, Region region);

/// Identifiers are 1..128 characters from [A-Za-z0-9_.-].
bool valid_identifier(std::string_view id);

/// "<session_id>.<index, zero-padded to 6 digits>"; injective because the index is always
/// the component after the last '.'.
std::string make_frame_id(std::string_view session_id, std::int64_t index);

Session session_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Session& session);
nlohmann::json to_json(const Frame& frame);

class Ingestor {
public:
    explicit Ingestor(Store& store, Clock clock = system_clock(),
                      std::shared_ptr<const RegionOfInterestProvider> roi =
                          std::make_shared<FullFrameRegion>());

    /// Persists the session. consent=delete raises consent_refused and stores nothing.
    std::string register_session(const Session& session);

    /// Stores the payload and records a pending frame, or a rejected_decode frame when the
    /// payload is not a PNG/JPEG raster.
    Frame ingest_frame(const std::string& session_id, std::int64_t index,
                       std::span<const std::uint8_t> image_bytes);

    /// Settles a pending frame's QC status. Frames that already left pending keep theirs.
    QcStatus run_qc(const std::string& frame_id, const QcConfig& config);

private:
    Store& store_;
    Clock clock_;
    std::shared_ptr<const RegionOfInterestProvider> roi_;
};

}  // namespace affectloop
