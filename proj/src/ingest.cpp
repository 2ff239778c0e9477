#include "affectloop/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "affectloop/error.hpp"

namespace affectloop {

void QcConfig::validate() const {
    auto in_range = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 255.0; };
    if (!in_range(min_mean_brightness) || !in_range(max_mean_brightness)) {
        throw Error(ErrorCode::invalid_argument, "brightness bounds must lie in [0,255]");
    }
    if (!(min_mean_brightness < max_mean_brightness)) {
        throw Error(ErrorCode::invalid_argument, "min_mean_brightness must be below max_mean_brightness");
    }
    if (!std::isfinite(min_laplacian_variance) || min_laplacian_variance < 0.0) {
        throw Error(ErrorCode::invalid_argument, "min_laplacian_variance must be nonnegative");
    }
}

QcMeasurements measure_quality(const GrayImage& gray) {
    QcMeasurements m;
    if (gray.pixels.empty()) return m;

    std::uint64_t sum = 0;
    for (auto p : gray.pixels) sum += p;
    m.mean_brightness = static_cast<double>(sum) / static_cast<double>(gray.pixels.size());

    if (gray.width < 3 || gray.height < 3) return m;
    // The sums are of small integers, which long double holds exactly at any accepted size.
    long double lap_sum = 0;
    long double lap_sq = 0;
    std::uint64_t n = 0;
    for (int y = 1; y + 1 < gray.height; ++y) {
        for (int x = 1; x + 1 < gray.width; ++x) {
            const long v = static_cast<long>(gray.at(x - 1, y)) + gray.at(x + 1, y) +
                           gray.at(x, y - 1) + gray.at(x, y + 1) - 4L * gray.at(x, y);
            lap_sum += v;
            lap_sq += static_cast<long double>(v) * v;
            ++n;
        }
    }
    const long double mean = lap_sum / n;
    m.laplacian_variance = static_cast<double>(std::max<long double>(0, lap_sq / n - mean * mean));
    return m;
}

QcStatus classify_quality(const QcMeasurements& m, const QcConfig& config) {
    if (m.mean_brightness < config.min_mean_brightness) return QcStatus::rejected_dark;
    if (m.mean_brightness > config.max_mean_brightness) return QcStatus::rejected_bright;
    if (m.laplacian_variance < config.min_laplacian_variance) return QcStatus::rejected_blur;
    return QcStatus::passed;
}

Raster crop(const Raster& image, Region r) {
    const int x0 = std::clamp(r.x, 0, image.width());
    const int y0 = std::clamp(r.y, 0, image.height());
    const int x1 = std::clamp(r.x + r.width, x0, image.width());
    const int y1 = std::clamp(r.y + r.height, y0, image.height());
    if (x0 == 0 && y0 == 0 && x1 == image.width() && y1 == image.height()) return image;
    Raster out(x1 - x0, y1 - y0);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) out.set(x - x0, y - y0, image.at(x, y));
    }
    return out;
}

bool valid_identifier(std::string_view id) {
    if (id.empty() || id.size() > 128) return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
               c == '_' || c == '-' || c == '.';
    });
}

std::string make_frame_id(std::string_view session_id, std::int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ".%06lld", static_cast<long long>(index));
    return std::string(session_id) + buf;
}

Session session_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "session must be a JSON object");
    auto require_string = [&](const char* key) -> std::string {
        if (!j.contains(key) || !j[key].is_string()) {
            throw Error(ErrorCode::invalid_argument, std::string("session field '") + key + "' must be a string");
        }
        return j[key].get<std::string>();
    };

    Session s;
    s.session_id = require_string("session_id");
    s.child_id = require_string("child_id");
    const std::string prompt = require_string("prompt");
    const auto emotion = parse_emotion(prompt);
    if (!emotion) throw Error(ErrorCode::invalid_argument, "prompt is not one of the seven emotions: " + prompt);
    s.prompt = *emotion;

    const std::string consent = require_string("consent");
    const auto tier = parse_consent(consent);
    if (!tier) throw Error(ErrorCode::invalid_argument, "unknown consent tier: " + consent);
    s.consent = *tier;

    if (j.contains("started_at")) {
        if (!j["started_at"].is_number_integer()) {
            throw Error(ErrorCode::invalid_argument, "started_at must be integer milliseconds since epoch");
        }
        s.started_at = from_millis(j["started_at"].get<std::int64_t>());
    }
    if (j.contains("duration_s")) {
        if (!j["duration_s"].is_number()) throw Error(ErrorCode::invalid_argument, "duration_s must be a number");
        s.duration_s = j["duration_s"].get<double>();
    }
    return s;
}

nlohmann::json to_json(const Session& s) {
    return {
        {"session_id", s.session_id},
        {"child_id", s.child_id},
        {"prompt", std::string(to_string(s.prompt))},
        {"started_at", to_millis(s.started_at)},
        {"duration_s", s.duration_s},
        {"consent", std::string(to_string(s.consent))},
    };
}

nlohmann::json to_json(const Frame& f) {
    return {
        {"frame_id", f.frame_id},
        {"session_id", f.session_id},
        {"index_in_session", f.index_in_session},
        {"ingested_at", to_millis(f.ingested_at)},
        {"image_ref", f.image_ref},
        {"width_px", f.width_px},
        {"height_px", f.height_px},
        {"automatic_label", std::string(to_string(f.automatic_label))},
        {"qc_status", std::string(to_string(f.qc_status))},
    };
}

Ingestor::Ingestor(Store& store, Clock clock, std::shared_ptr<const RegionOfInterestProvider> roi)
    : store_(store), clock_(std::move(clock)), roi_(std::move(roi)) {}

std::string Ingestor::register_session(const Session& session) {
    if (!valid_identifier(session.session_id)) {
        throw Error(ErrorCode::invalid_argument, "invalid session id '" + session.session_id + "'");
    }
    if (!(session.duration_s > 0.0) || !std::isfinite(session.duration_s)) {
        throw Error(ErrorCode::invalid_argument, "session duration must be positive");
    }
    if (session.consent == ConsentTier::delete_video) {
        throw Error(ErrorCode::consent_refused, "consent refused: session " + session.session_id + " not stored");
    }
    store_.put_session(session);
    return session.session_id;
}

Frame Ingestor::ingest_frame(const std::string& session_id, std::int64_t index,
                             std::span<const std::uint8_t> image_bytes) {
    if (index < 0) throw Error(ErrorCode::invalid_argument, "frame index must be nonnegative");
    const auto session = store_.get_session(session_id);
    if (!session) throw Error(ErrorCode::not_found, "unknown session " + session_id);

    Frame frame;
    frame.frame_id = make_frame_id(session_id, index);
    if (store_.get_frame(frame.frame_id)) {
        throw Error(ErrorCode::duplicate, "frame " + frame.frame_id + " already exists");
    }
    frame.session_id = session_id;
    frame.index_in_session = index;
    frame.ingested_at = clock_();
    frame.automatic_label = session->prompt;

    if (const auto raster = decode_image(image_bytes)) {
        frame.width_px = raster->width();
        frame.height_px = raster->height();
        frame.qc_status = QcStatus::pending;
    } else {
        frame.qc_status = QcStatus::rejected_decode;
    }

    // A racing duplicate still fails at the insert; the image file it leaves behind is
    // content-addressed and harmless.
    frame.image_ref = store_.put_image(image_bytes);
    store_.put_frame(frame);
    return frame;
}

QcStatus Ingestor::run_qc(const std::string& frame_id, const QcConfig& config) {
    config.validate();
    const auto frame = store_.get_frame(frame_id);
    if (!frame) throw Error(ErrorCode::not_found, "unknown frame " + frame_id);
    if (frame->qc_status != QcStatus::pending) return frame->qc_status;

    const auto bytes = store_.read_image(frame->image_ref);
    const auto raster = decode_image(bytes);
    if (!raster) return store_.settle_qc_status(frame_id, QcStatus::rejected_decode);

    const Raster region = crop(*raster, roi_->region(*raster));
    const QcStatus status = classify_quality(measure_quality(to_grayscale(region)), config);
    return store_.settle_qc_status(frame_id, status);
}

}  // namespace affectloop
