#pragma once

// Seamless concatenation and fractal interpolation.
//
// The mask weights the edited image: H = E*M + O*(1-M). All arithmetic runs
// in double and is rounded once to float, which keeps every output a convex
// combination of its float inputs.

#include <string>

#include "genmix/errors.hpp"
#include "genmix/image.hpp"
#include "genmix/mask.hpp"

namespace genmix {

struct HybridImage {
    Image image;
    MaskKind mask_kind = MaskKind::hor;
    std::string source_id;
    std::string prompt_id;
};

inline void require_lambda(double lambda) {
    if (!(lambda >= 0.0 && lambda < 1.0))
        throw DomainError("lambda must lie in [0, 1), got " + std::to_string(lambda));
}

/// H = edited * M + original * (1 - M), the mask broadcast over channels.
inline Image concat_images(const Image& original, const Image& edited, const Mask& mask) {
    require_same_size(original.size(), edited.size(), "concat_hybrid");
    require_same_size(original.size(), mask.size(), "concat_hybrid");
    Image out(original.size());
    auto o = original.values();
    auto e = edited.values();
    auto h = out.values();
    for (std::size_t p = 0; p < original.pixel_count(); ++p) {
        const double m = mask.weights[p];
        const double keep = 1.0f - mask.weights[p];
        for (std::size_t c = 0; c < Image::channels; ++c) {
            const std::size_t i = p * Image::channels + c;
            h[i] = static_cast<float>(e[i] * m + o[i] * keep);
        }
    }
    return out;
}

inline HybridImage concat_hybrid(const Image& original, const Image& edited, const Mask& mask,
                                 std::string source_id = {}, std::string prompt_id = {}) {
    return {concat_images(original, edited, mask), mask.kind, std::move(source_id), std::move(prompt_id)};
}

/// A = lambda * F + (1 - lambda) * H.
inline Image interpolate_fractal(const Image& hybrid, const Image& fractal, double lambda) {
    require_lambda(lambda);
    require_same_size(hybrid.size(), fractal.size(), "interpolate_fractal");
    Image out(hybrid.size());
    auto h = hybrid.values();
    auto f = fractal.values();
    auto a = out.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<float>(lambda * f[i] + (1.0 - lambda) * h[i]);
    return out;
}

/// Fused single pass: A = (1 - lambda) * (E*M + O*(1-M)) + lambda * F.
inline Image genmix_single(const Image& original, const Image& edited, const Mask& mask, const Image& fractal,
                           double lambda) {
    require_lambda(lambda);
    require_same_size(original.size(), edited.size(), "genmix_single");
    require_same_size(original.size(), mask.size(), "genmix_single");
    require_same_size(original.size(), fractal.size(), "genmix_single");
    Image out(original.size());
    auto o = original.values();
    auto e = edited.values();
    auto f = fractal.values();
    auto a = out.values();
    for (std::size_t p = 0; p < original.pixel_count(); ++p) {
        const double m = mask.weights[p];
        const double keep = 1.0f - mask.weights[p];
        for (std::size_t c = 0; c < Image::channels; ++c) {
            const std::size_t i = p * Image::channels + c;
            a[i] = static_cast<float>((1.0 - lambda) * (e[i] * m + o[i] * keep) + lambda * f[i]);
        }
    }
    return out;
}

}  // namespace genmix
