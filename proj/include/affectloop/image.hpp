#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace affectloop {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    bool operator==(const Rgb&) const = default;
};

/// Interleaved 8-bit RGB, row-major, no padding.
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, Rgb fill = {});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return width_ == 0 || height_ == 0; }

    Rgb at(int x, int y) const {
        const auto* p = &data_[offset(x, y)];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb v) {
        auto* p = &data_[offset(x, y)];
        p[0] = v.r;
        p[1] = v.g;
        p[2] = v.b;
    }

    std::span<const std::uint8_t> bytes() const noexcept { return data_; }
    std::span<std::uint8_t> bytes() noexcept { return data_; }

    bool operator==(const Raster&) const = default;

private:
    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x)) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Single-channel 8-bit image.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int x, int y) const {
        return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
                      static_cast<std::size_t>(x)];
    }
};

/// round(0.299 R + 0.587 G + 0.114 B), computed in exact integer arithmetic.
constexpr std::uint8_t luma(Rgb p) {
    return static_cast<std::uint8_t>((299u * p.r + 587u * p.g + 114u * p.b + 500u) / 1000u);
}

GrayImage to_grayscale(const Raster& image);

enum class ImageFormat { png, jpeg, unknown };

ImageFormat sniff_format(std::span<const std::uint8_t> bytes);
std::string_view content_type(ImageFormat format);
std::string_view file_extension(ImageFormat format);

/// Decodes PNG or JPEG into RGB. nullopt when the payload is not a decodable image.
std::optional<Raster> decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Raster& image);

}  // namespace affectloop
