#pragma once

#include <array>
#include <string>
#include <string_view>

#include "genmix/errors.hpp"

namespace genmix {

enum class MaskKind { hor, ver, hor_flip, ver_flip, patchswap_in, patchswap_out };

inline constexpr std::array<MaskKind, 6> all_mask_kinds{MaskKind::hor,      MaskKind::ver,
                                                       MaskKind::hor_flip, MaskKind::ver_flip,
                                                       MaskKind::patchswap_in, MaskKind::patchswap_out};

inline constexpr std::array<MaskKind, 4> smooth_mask_kinds{MaskKind::hor, MaskKind::ver, MaskKind::hor_flip,
                                                          MaskKind::ver_flip};

inline constexpr std::string_view to_string(MaskKind kind) {
    switch (kind) {
        case MaskKind::hor: return "hor";
        case MaskKind::ver: return "ver";
        case MaskKind::hor_flip: return "hor_flip";
        case MaskKind::ver_flip: return "ver_flip";
        case MaskKind::patchswap_in: return "patchswap_in";
        case MaskKind::patchswap_out: return "patchswap_out";
    }
    return "?";
}

inline MaskKind mask_kind_from_string(std::string_view name) {
    for (MaskKind k : all_mask_kinds)
        if (to_string(k) == name) return k;
    throw DomainError("unknown mask kind '" + std::string(name) + "'");
}

inline constexpr bool is_patchswap(MaskKind kind) {
    return kind == MaskKind::patchswap_in || kind == MaskKind::patchswap_out;
}

}  // namespace genmix
