#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "genmix/errors.hpp"

namespace genmix {

struct Size {
    int height = 0;
    int width = 0;

    friend bool operator==(const Size&, const Size&) = default;
};

inline std::string to_string(Size s) {
    return std::to_string(s.width) + "x" + std::to_string(s.height);
}

/// Row-major H x W x 3 image with channel values in [0, 1].
class Image {
public:
    static constexpr int channels = 3;

    Image() = default;
    Image(int height, int width, float fill = 0.0f) : size_{height, width} {
        if (height <= 0 || width <= 0)
            throw ImageError("image dimensions must be positive, got " + to_string(size_));
        data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
    }
    explicit Image(Size size, float fill = 0.0f) : Image(size.height, size.width, fill) {}

    int height() const noexcept { return size_.height; }
    int width() const noexcept { return size_.width; }
    Size size() const noexcept { return size_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(size_.height) * size_.width; }

    float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<float> values() noexcept { return data_; }
    std::span<const float> values() const noexcept { return data_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * size_.width + x) * channels + c;
    }

    Size size_{};
    std::vector<float> data_;
};

inline void require_same_size(Size a, Size b, const char* what) {
    if (a != b) throw DomainError(std::string(what) + ": dimension mismatch " + to_string(a) + " vs " + to_string(b));
}

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

/// 8-bit level for a [0,1] value: clamp, scale by 255, round half to even.
inline std::uint8_t quantize_channel(float v) {
    double scaled = std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::nearbyint(scaled));
}

inline std::vector<std::uint8_t> to_rgb8(const Image& image) {
    std::vector<std::uint8_t> out(image.values().size());
    std::transform(image.values().begin(), image.values().end(), out.begin(), quantize_channel);
    return out;
}

inline Image from_rgb8(std::span<const std::uint8_t> rgb, int height, int width) {
    Image image(height, width);
    if (rgb.size() != image.values().size()) throw ImageError("rgb buffer size does not match dimensions");
    std::transform(rgb.begin(), rgb.end(), image.values().begin(),
                   [](std::uint8_t v) { return static_cast<float>(v) / 255.0f; });
    return image;
}

/// Snap every channel onto the 8-bit grid, i.e. what a PNG round trip yields.
inline Image snap_to_8bit(const Image& image) {
    return from_rgb8(to_rgb8(image), image.height(), image.width());
}

/// Bilinear resize with half-pixel centers; edge samples are clamped.
/// Returns the input unchanged when the size already matches.
inline Image resize_bilinear(const Image& src, Size target) {
    if (src.size() == target) return src;
    Image dst(target);
    const double sy = static_cast<double>(src.height()) / target.height;
    const double sx = static_cast<double>(src.width()) / target.width;
    for (int y = 0; y < target.height; ++y) {
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height() - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src.height() - 1);
        double wy = fy - y0;
        for (int x = 0; x < target.width; ++x) {
            double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width() - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src.width() - 1);
            double wx = fx - x0;
            for (int c = 0; c < Image::channels; ++c) {
                double top = src.at(y0, x0, c) * (1.0 - wx) + src.at(y0, x1, c) * wx;
                double bottom = src.at(y1, x0, c) * (1.0 - wx) + src.at(y1, x1, c) * wx;
                dst.at(y, x, c) = clamp01(top * (1.0 - wy) + bottom * wy);
            }
        }
    }
    return dst;
}

}  // namespace genmix
