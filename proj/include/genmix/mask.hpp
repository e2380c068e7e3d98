#pragma once

// Blend masks for seamless concatenation.
//
// A smooth mask is [zeros | ramp | ones] along its seam axis and constant
// across the other axis. "ver" masks vary along x (a vertical seam), "hor"
// masks vary along y. Flip variants reverse the seam axis. PatchSwap masks are
// a rectangle of ones with a ramped border, and its exact complement.

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "genmix/errors.hpp"
#include "genmix/image.hpp"
#include "genmix/mask_kind.hpp"
#include "genmix/random.hpp"

namespace genmix {

struct Mask {
    int height = 0;
    int width = 0;
    std::vector<float> weights;  // row-major, one weight per pixel
    MaskKind kind = MaskKind::hor;
    int blend_width = 0;

    Size size() const noexcept { return {height, width}; }
    float at(int y, int x) const { return weights[static_cast<std::size_t>(y) * width + x]; }
};

struct PatchRect {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const PatchRect&, const PatchRect&) = default;
};

/// Interior ramp values (k+1)/(b+1), k = 0..b-1. Plateau values 0 and 1 are never repeated.
inline std::vector<float> blend_ramp(int b) {
    if (b < 0) throw DomainError("blend width must be non-negative");
    std::vector<float> ramp(static_cast<std::size_t>(b));
    for (int k = 0; k < b; ++k) ramp[k] = static_cast<float>(static_cast<double>(k + 1) / (b + 1));
    return ramp;
}

/// Per-pixel 1 - w. Exact: the sum with the original weight rounds back to 1.
inline std::vector<float> complement(std::span<const float> weights) {
    std::vector<float> out(weights.size());
    std::transform(weights.begin(), weights.end(), out.begin(), [](float w) { return 1.0f - w; });
    return out;
}

/// Seam-axis profile: floor((L-b)/2) zeros, the ramp, ceil((L-b)/2) ones.
inline std::vector<float> seam_profile(int length, int b, bool flipped) {
    if (b < 0) throw DomainError("blend width must be non-negative");
    if (b >= length - 1)
        throw DomainError("blend width exceeds image: b=" + std::to_string(b) + " for seam axis of " +
                          std::to_string(length) + " px");
    const int zeros = (length - b) / 2;
    std::vector<float> profile(static_cast<std::size_t>(length), 1.0f);
    std::fill_n(profile.begin(), zeros, 0.0f);
    auto ramp = blend_ramp(b);
    std::copy(ramp.begin(), ramp.end(), profile.begin() + zeros);
    if (flipped) std::reverse(profile.begin(), profile.end());
    return profile;
}

inline Mask build_smooth_mask(int height, int width, int b, MaskKind kind) {
    if (height < 1 || width < 1) throw DomainError("mask dimensions must be positive");
    if (is_patchswap(kind)) throw DomainError("build_smooth_mask: patchswap kinds need a rectangle");
    const bool along_x = kind == MaskKind::ver || kind == MaskKind::ver_flip;
    const bool flipped = kind == MaskKind::hor_flip || kind == MaskKind::ver_flip;
    auto profile = seam_profile(along_x ? width : height, b, flipped);

    Mask mask{height, width, std::vector<float>(static_cast<std::size_t>(height) * width), kind, b};
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            mask.weights[static_cast<std::size_t>(y) * width + x] = along_x ? profile[x] : profile[y];
    return mask;
}

inline void validate_rect(int height, int width, const PatchRect& r) {
    if (r.width < 1 || r.height < 1 || r.x < 0 || r.y < 0 || r.x + r.width > width || r.y + r.height > height) {
        std::ostringstream msg;
        msg << "patch rectangle (" << r.x << "," << r.y << "," << r.width << "," << r.height
            << ") outside " << width << "x" << height << " image";
        throw DomainError(msg.str());
    }
    if (static_cast<long long>(r.width) * r.height >= static_cast<long long>(width) * height)
        throw DomainError("patch rectangle must cover less than the whole image");
}

/// (patchswap_in, patchswap_out). The in-mask is 1 on the rectangle shrunk by b,
/// 0 outside the rectangle, and min(ramp_x, ramp_y) on the border band.
inline std::pair<Mask, Mask> build_patchswap_masks(int height, int width, const PatchRect& rect, int b) {
    validate_rect(height, width, rect);
    if (b < 0 || 2 * b > std::min(rect.width, rect.height))
        throw DomainError("patchswap blend width " + std::to_string(b) + " exceeds half the patch extent");

    auto ramp = blend_ramp(b);
    auto edge_weight = [&](int distance) { return distance >= b ? 1.0f : ramp[distance]; };

    Mask in{height, width, std::vector<float>(static_cast<std::size_t>(height) * width, 0.0f),
            MaskKind::patchswap_in, b};
    for (int y = rect.y; y < rect.y + rect.height; ++y) {
        const int dy = std::min(y - rect.y, rect.y + rect.height - 1 - y);
        for (int x = rect.x; x < rect.x + rect.width; ++x) {
            const int dx = std::min(x - rect.x, rect.x + rect.width - 1 - x);
            in.weights[static_cast<std::size_t>(y) * width + x] = std::min(edge_weight(dx), edge_weight(dy));
        }
    }
    Mask out{height, width, complement(in.weights), MaskKind::patchswap_out, b};
    return {std::move(in), std::move(out)};
}

/// Blend width actually used on a seam axis of `length` pixels. Axes of 64 px
/// or more use the requested width; smaller ones cap it at max(2, L/10).
inline int effective_blend_width(int length, int requested) {
    if (length >= 64) return requested;
    int capped = std::min(requested, std::max(2, static_cast<int>(std::lround(length / 10.0))));
    return std::max(0, std::min(capped, length - 2));
}

/// Random rectangle with side ratios uniform in [0.4, 0.8] and a uniform
/// position that keeps it inside the image.
inline PatchRect sample_patch_rect(RngStream& rng, int height, int width) {
    auto side = [&](int extent) {
        int s = static_cast<int>(std::lround(rng.uniform(0.4, 0.8) * extent));
        return std::clamp(s, 1, std::max(1, extent - 1));
    };
    PatchRect r;
    r.width = side(width);
    r.height = side(height);
    r.x = static_cast<int>(rng.uniform_int(0, width - r.width));
    r.y = static_cast<int>(rng.uniform_int(0, height - r.height));
    return r;
}

/// Uniform draw over the enabled kinds; `b` is the requested blend width.
inline Mask sample_mask(RngStream& rng, int height, int width, int b, std::span<const MaskKind> enabled) {
    if (enabled.empty()) throw DomainError("no mask kinds enabled");
    const MaskKind kind = enabled[rng.uniform_index(enabled.size())];
    if (!is_patchswap(kind)) {
        const bool along_x = kind == MaskKind::ver || kind == MaskKind::ver_flip;
        return build_smooth_mask(height, width, effective_blend_width(along_x ? width : height, b), kind);
    }
    const PatchRect rect = sample_patch_rect(rng, height, width);
    const int patch_b = std::min(b, std::min(rect.width, rect.height) / 2);
    auto [in, out] = build_patchswap_masks(height, width, rect, patch_b);
    return kind == MaskKind::patchswap_in ? std::move(in) : std::move(out);
}

/// Parse the --masks list: comma separated names; "patchswap" enables both patch variants.
inline std::vector<MaskKind> parse_mask_list(std::string_view list) {
    std::vector<MaskKind> kinds;
    auto push = [&](MaskKind k) {
        if (std::find(kinds.begin(), kinds.end(), k) == kinds.end()) kinds.push_back(k);
    };
    std::size_t start = 0;
    while (start <= list.size()) {
        std::size_t comma = list.find(',', start);
        std::string_view token = list.substr(start, comma == std::string_view::npos ? list.npos : comma - start);
        while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
        while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
        if (token == "patchswap") {
            push(MaskKind::patchswap_in);
            push(MaskKind::patchswap_out);
        } else if (!token.empty()) {
            push(mask_kind_from_string(token));
        }
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (kinds.empty()) throw DomainError("mask list is empty");
    // Canonical order so that the same set always samples identically.
    std::sort(kinds.begin(), kinds.end());
    return kinds;
}

}  // namespace genmix
