#pragma once

// Prompt-guided image editing behind one contract, with mock, directory and
// HTTP implementations.
//
// Every backend's output is resized (bilinear) to the source dimensions and
// clamped to [0, 1] by EditBackend::edit, whatever the implementation returns.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "genmix/base64.hpp"
#include "genmix/errors.hpp"
#include "genmix/hashing.hpp"
#include "genmix/http.hpp"
#include "genmix/image.hpp"
#include "genmix/image_io.hpp"
#include "genmix/log.hpp"

namespace genmix {

struct EditRequest {
    Image image;
    std::string instruction;
    std::uint64_t seed = 0;
    // Lookup keys; the directory backend resolves edits by them.
    std::string source_id;
    std::string prompt_id;
};

struct EditedImage {
    Image image;
    std::string backend_id;
    std::string prompt_id;
    std::string source_id;
};

class EditBackend {
public:
    virtual ~EditBackend() = default;

    virtual std::string id() const = 0;
    virtual bool healthy() const { return true; }

    EditedImage edit(const EditRequest& req) {
        if (req.instruction.empty()) throw DomainError("edit request has an empty instruction");
        if (req.image.empty()) throw DomainError("edit request has an empty image");
        Image out = do_edit(req);
        if (out.size() != req.image.size()) {
            logger()->warn("{}: edited image for ({}, {}) is {}, resizing to {}", id(), req.source_id, req.prompt_id,
                           to_string(out.size()), to_string(req.image.size()));
            out = resize_bilinear(out, req.image.size());
        }
        for (float& v : out.values()) v = clamp01(v);
        return {std::move(out), id(), req.prompt_id, req.source_id};
    }

protected:
    virtual Image do_edit(const EditRequest& req) = 0;
};

/// Per-channel affine map v' = clamp(scale[c] * v + offset[c]).
struct ChannelAffine {
    std::array<double, 3> scale{1.0, 1.0, 1.0};
    std::array<double, 3> offset{0.0, 0.0, 0.0};
};

/// Mock transform parameters keyed by (instruction, seed).
///
/// d = BLAKE2b-256 of the tagged serialization ("genmix/mock_edit/v1",
/// instruction, seed). For channel c, with u(k) = le32(d[4k..4k+4]) / 2^32:
/// scale = 0.6 + 0.8 * u(2c), offset = -0.2 + 0.4 * u(2c + 1).
inline ChannelAffine mock_edit_params(std::string_view instruction, std::uint64_t seed) {
    HashWriter w;
    w.add("genmix/mock_edit/v1").add(instruction).add(seed);
    const auto d = w.digest<32>();
    ChannelAffine p;
    for (int c = 0; c < 3; ++c) {
        const double u_scale = HashWriter::load_le32(d.data() + 8 * c) * 0x1.0p-32;
        const double u_offset = HashWriter::load_le32(d.data() + 8 * c + 4) * 0x1.0p-32;
        p.scale[c] = 0.6 + 0.8 * u_scale;
        p.offset[c] = -0.2 + 0.4 * u_offset;
    }
    return p;
}

inline Image apply_channel_affine(const Image& image, const ChannelAffine& p) {
    Image out = image;
    auto v = out.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t c = i % Image::channels;
        v[i] = clamp01(p.scale[c] * v[i] + p.offset[c]);
    }
    return out;
}

/// Deterministic stand-in for a diffusion editor: a global colour transform
/// that leaves image structure untouched.
inline Image mock_edit(const Image& image, std::string_view instruction, std::uint64_t seed) {
    return apply_channel_affine(image, mock_edit_params(instruction, seed));
}

class MockEditBackend final : public EditBackend {
public:
    std::string id() const override { return "mock"; }

protected:
    Image do_edit(const EditRequest& req) override { return mock_edit(req.image, req.instruction, req.seed); }
};

/// Precomputed edits laid out as {root}/{source_id}/{prompt_id}.png.
class DirectoryEditBackend final : public EditBackend {
public:
    explicit DirectoryEditBackend(std::filesystem::path root) : root_(std::move(root)) {}

    std::string id() const override { return "dir:" + root_.string(); }
    bool healthy() const override { return std::filesystem::is_directory(root_); }

    std::filesystem::path path_for(const std::string& source_id, const std::string& prompt_id) const {
        return root_ / source_id / (prompt_id + ".png");
    }

protected:
    Image do_edit(const EditRequest& req) override {
        auto path = path_for(req.source_id, req.prompt_id);
        if (!std::filesystem::is_regular_file(path)) throw MissingEdit(req.source_id, req.prompt_id);
        return load_image(path);
    }

private:
    std::filesystem::path root_;
};

/// Remote editor speaking the v1 protocol:
///   POST {endpoint}/v1/edit {"image": b64 PNG, "instruction": str, "seed": int}
///   -> 200 {"image": b64 PNG, "model": str};  GET {endpoint}/healthz -> 200.
class HttpEditBackend final : public EditBackend {
public:
    explicit HttpEditBackend(const std::string& url, HttpOptions options = {})
        : client_(Endpoint::parse(url), options) {}

    std::string id() const override { return "http:" + client_.endpoint().base + client_.endpoint().prefix; }
    bool healthy() const override { return client_.healthy(); }

    /// Model name reported by the last successful response.
    std::string last_model() const {
        std::lock_guard lock(model_mutex_);
        return model_;
    }

protected:
    Image do_edit(const EditRequest& req) override {
        const auto png = encode_png(req.image);
        nlohmann::json body{{"image", base64_encode(png)}, {"instruction", req.instruction}, {"seed", req.seed}};
        auto response = client_.post("/v1/edit", body);
        auto it = response.find("image");
        if (it == response.end() || !it->is_string()) throw ProtocolError("edit response lacks an 'image' string");
        Image out;
        try {
            auto bytes = base64_decode(it->get_ref<const std::string&>());
            out = decode_image(bytes);
        } catch (const ImageError& e) {
            throw ProtocolError(std::string("edit response image does not decode: ") + e.what());
        }
        if (auto m = response.find("model"); m != response.end() && m->is_string()) {
            std::lock_guard lock(model_mutex_);
            model_ = m->get<std::string>();
        }
        return out;
    }

private:
    JsonHttpClient client_;
    mutable std::mutex model_mutex_;
    std::string model_;
};

/// Parse "mock", "dir:PATH" or "http:URL" (URL may itself start with http://).
inline std::shared_ptr<EditBackend> make_edit_backend(const std::string& spec, HttpOptions options = {}) {
    if (spec == "mock") return std::make_shared<MockEditBackend>();
    if (spec.rfind("dir:", 0) == 0) return std::make_shared<DirectoryEditBackend>(spec.substr(4));
    if (spec.rfind("http://", 0) == 0) return std::make_shared<HttpEditBackend>(spec, options);
    if (spec.rfind("http:", 0) == 0) return std::make_shared<HttpEditBackend>(spec.substr(5), options);
    throw DomainError("unknown edit backend '" + spec + "' (expected mock, dir:PATH or http:URL)");
}

}  // namespace genmix
