#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vizgrad {

// Row-major RGBA raster, 4 doubles per pixel. Image values live in [0,1];
// the same layout is used for per-pixel cotangents (ImageGradient).
template <class Tag>
class Raster {
public:
    static constexpr std::size_t channels = 4;

    Raster() = default;
    Raster(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width), height_(height), data_(width * height * channels, fill) {}

    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::size_t pixel_count() const noexcept { return width_ * height_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    double& at(std::size_t x, std::size_t y, std::size_t c) { return data_[(y * width_ + x) * channels + c]; }
    [[nodiscard]] double at(std::size_t x, std::size_t y, std::size_t c) const {
        return data_[(y * width_ + x) * channels + c];
    }
    // Channel c of the i-th pixel in row-major order.
    double& px(std::size_t i, std::size_t c) { return data_[i * channels + c]; }
    [[nodiscard]] double px(std::size_t i, std::size_t c) const { return data_[i * channels + c]; }

    [[nodiscard]] bool same_shape(std::size_t w, std::size_t h) const noexcept { return w == width_ && h == height_; }

    bool operator==(const Raster&) const = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

struct ImageTag {};
struct GradientTag {};

using Image = Raster<ImageTag>;
using ImageGradient = Raster<GradientTag>;

// Throws NumericError if any channel is non-finite or outside [0,1].
void check_image(const Image& img);

// Fill every pixel with (r, g, b, a).
Image solid_image(std::size_t width, std::size_t height, std::array<double, 4> rgba);

// 8-bit RGBA PNG, channel byte = round(value * 255).
std::vector<std::uint8_t> encode_png(const Image& img);
void write_png(const Image& img, const std::string& path);

// Raw float image: "VGIMG1\0\0", width u32 LE, height u32 LE, then
// width*height*4 float64 LE values in row-major RGBA order.
std::vector<std::uint8_t> encode_vgimg(const Image& img);
Image decode_vgimg(std::span<const std::uint8_t> bytes);
void write_vgimg(const Image& img, const std::string& path);
Image read_vgimg(const std::string& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);

void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file(const std::string& path, std::string_view text);
std::vector<std::uint8_t> read_file(const std::string& path);

}  // namespace vizgrad
