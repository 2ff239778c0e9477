#include "affectloop/image.hpp"

#include <algorithm>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "affectloop/error.hpp"

namespace affectloop {

Raster::Raster(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw Error(ErrorCode::invalid_argument, "negative raster size");
    data_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

GrayImage to_grayscale(const Raster& image) {
    GrayImage gray;
    gray.width = image.width();
    gray.height = image.height();
    gray.pixels.resize(static_cast<std::size_t>(gray.width) * static_cast<std::size_t>(gray.height));
    const auto src = image.bytes();
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        gray.pixels[i] = luma({src[3 * i], src[3 * i + 1], src[3 * i + 2]});
    }
    return gray;
}

ImageFormat sniff_format(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= sizeof kPng && std::equal(std::begin(kPng), std::end(kPng), bytes.begin())) {
        return ImageFormat::png;
    }
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
        return ImageFormat::jpeg;
    }
    return ImageFormat::unknown;
}

std::string_view content_type(ImageFormat format) {
    switch (format) {
        case ImageFormat::png: return "image/png";
        case ImageFormat::jpeg: return "image/jpeg";
        case ImageFormat::unknown: break;
    }
    return "application/octet-stream";
}

std::string_view file_extension(ImageFormat format) {
    switch (format) {
        case ImageFormat::png: return ".png";
        case ImageFormat::jpeg: return ".jpg";
        case ImageFormat::unknown: break;
    }
    return ".bin";
}

std::optional<Raster> decode_image(std::span<const std::uint8_t> bytes) {
    // Only PNG and JPEG are accepted payloads, whatever else the codec could read.
    if (sniff_format(bytes) == ImageFormat::unknown) return std::nullopt;
    cv::Mat decoded;
    try {
        const cv::Mat buffer(1, static_cast<int>(bytes.size()), CV_8UC1,
                             const_cast<std::uint8_t*>(bytes.data()));
        decoded = cv::imdecode(buffer, cv::IMREAD_COLOR | cv::IMREAD_IGNORE_ORIENTATION);
    } catch (const cv::Exception&) {
        return std::nullopt;
    }
    if (decoded.empty() || decoded.type() != CV_8UC3) return std::nullopt;

    Raster out(decoded.cols, decoded.rows);
    for (int y = 0; y < decoded.rows; ++y) {
        const auto* row = decoded.ptr<cv::Vec3b>(y);
        for (int x = 0; x < decoded.cols; ++x) {
            out.set(x, y, {row[x][2], row[x][1], row[x][0]});
        }
    }
    return out;
}

std::vector<std::uint8_t> encode_png(const Raster& image) {
    if (image.empty()) throw Error(ErrorCode::invalid_argument, "cannot encode an empty image");
    cv::Mat bgr(image.height(), image.width(), CV_8UC3);
    for (int y = 0; y < image.height(); ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width(); ++x) {
            const Rgb p = image.at(x, y);
            row[x] = {p.b, p.g, p.r};
        }
    }
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) throw Error(ErrorCode::io, "PNG encoding failed");
    return out;
}

}  // namespace affectloop
