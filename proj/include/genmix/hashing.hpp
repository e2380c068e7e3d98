#pragma once

// Stable, platform-independent hashing built on BLAKE2b (libsodium).
//
// Every value is serialized in a tagged, length-prefixed little-endian form
// before hashing, so hash("ab", "c") != hash("a", "bc") and results never
// depend on host endianness or std::hash.

#include <array>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <sodium.h>

#include "genmix/errors.hpp"

namespace genmix {

inline void ensure_sodium() {
    static const bool ready = [] { return sodium_init() >= 0; }();
    if (!ready) throw Error("libsodium failed to initialize");
}

class HashWriter {
public:
    HashWriter& add(std::uint64_t value) {
        bytes_.push_back('u');
        append_le(value);
        return *this;
    }
    HashWriter& add(std::int64_t value) {
        bytes_.push_back('i');
        append_le(static_cast<std::uint64_t>(value));
        return *this;
    }
    HashWriter& add(std::string_view text) {
        bytes_.push_back('s');
        append_le(text.size());
        bytes_.insert(bytes_.end(), text.begin(), text.end());
        return *this;
    }
    HashWriter& add(const char* text) { return add(std::string_view(text)); }
    HashWriter& add(const std::string& text) { return add(std::string_view(text)); }
    template <typename T>
        requires(std::is_integral_v<T> && !std::is_same_v<T, bool>)
    HashWriter& add(T value) {
        if constexpr (std::is_signed_v<T>)
            return add(static_cast<std::int64_t>(value));
        else
            return add(static_cast<std::uint64_t>(value));
    }

    template <std::size_t N>
    std::array<unsigned char, N> digest() const {
        static_assert(N >= crypto_generichash_BYTES_MIN && N <= crypto_generichash_BYTES_MAX);
        ensure_sodium();
        std::array<unsigned char, N> out{};
        crypto_generichash(out.data(), N, bytes_.data(), bytes_.size(), nullptr, 0);
        return out;
    }

    std::uint64_t digest64() const {
        // BLAKE2b's minimum output is 16 bytes; fold the first 8.
        auto d = digest<16>();
        return load_le64(d.data());
    }

    static std::uint64_t load_le64(const unsigned char* p) {
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
        return v;
    }
    static std::uint32_t load_le32(const unsigned char* p) {
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }

private:
    void append_le(std::uint64_t value) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(value >> (8 * i)));
    }

    std::vector<unsigned char> bytes_;
};

/// Stable 64-bit hash of a heterogeneous tuple of integers and strings.
template <typename... Args>
std::uint64_t stable_hash(const Args&... args) {
    HashWriter w;
    (w.add(args), ...);
    return w.digest64();
}

/// Lowercase hex SHA-256 of a byte buffer.
inline std::string sha256_hex(std::span<const unsigned char> bytes) {
    ensure_sodium();
    std::array<unsigned char, crypto_hash_sha256_BYTES> out{};
    crypto_hash_sha256(out.data(), bytes.data(), bytes.size());
    std::string hex(out.size() * 2, '0');
    sodium_bin2hex(hex.data(), hex.size() + 1, out.data(), out.size());
    return hex;
}

}  // namespace genmix
