#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <sodium.h>

#include "genmix/errors.hpp"
#include "genmix/hashing.hpp"

namespace genmix {

inline std::string base64_encode(std::span<const unsigned char> bytes) {
    ensure_sodium();
    const std::size_t len = sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    std::string out(len, '\0');
    sodium_bin2base64(out.data(), len, bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    out.resize(len - 1);  // drop the terminator
    return out;
}

/// Strict standard-alphabet decoding with padding. Throws ProtocolError.
inline std::vector<unsigned char> base64_decode(std::string_view text) {
    ensure_sodium();
    std::vector<unsigned char> out(text.size() / 4 * 3 + 3);
    std::size_t written = 0;
    const char* end = nullptr;
    if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &written, &end,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        end != text.data() + text.size())
        throw ProtocolError("invalid base64 payload");
    out.resize(written);
    return out;
}

}  // namespace genmix
