#pragma once

// PNG / JPEG decoding and lossless PNG encoding.
//
// Decoded images are always 3-channel: grayscale is replicated into RGB and
// any alpha channel is discarded (not composited).

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "genmix/errors.hpp"
#include "genmix/image.hpp"

namespace genmix {

namespace detail {

inline bool is_png(std::span<const unsigned char> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

inline bool is_jpeg(std::span<const unsigned char> bytes) {
    return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF;
}

inline Image decode_png(std::span<const unsigned char> bytes) {
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
        throw ImageError(std::string("png decode failed: ") + png.message);
    if (png.width == 0 || png.height == 0) {
        png_image_free(&png);
        throw ImageError("png has zero dimension");
    }
    // Read as RGBA so that alpha is dropped rather than blended onto a background.
    png.format = PNG_FORMAT_RGBA;
    std::vector<unsigned char> rgba(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, rgba.data(), 0, nullptr))
        throw ImageError(std::string("png decode failed: ") + png.message);

    const int h = static_cast<int>(png.height);
    const int w = static_cast<int>(png.width);
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(h) * w * 3);
    for (std::size_t p = 0, n = static_cast<std::size_t>(h) * w; p < n; ++p) {
        rgb[3 * p + 0] = rgba[4 * p + 0];
        rgb[3 * p + 1] = rgba[4 * p + 1];
        rgb[3 * p + 2] = rgba[4 * p + 2];
    }
    return from_rgb8(rgb, h, w);
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

extern "C" inline void genmix_jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline Image decode_jpeg(std::span<const unsigned char> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = genmix_jpeg_error_exit;
    err.message[0] = '\0';

    // Only trivially destructible state lives between setjmp and longjmp.
    std::vector<std::uint8_t>* rgb = new std::vector<std::uint8_t>();
    int h = 0;
    int w = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        delete rgb;
        throw ImageError(std::string("jpeg decode failed: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    h = static_cast<int>(cinfo.output_height);
    w = static_cast<int>(cinfo.output_width);
    rgb->resize(static_cast<std::size_t>(h) * w * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb->data() + static_cast<std::size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);

    std::vector<std::uint8_t> owned = std::move(*rgb);
    delete rgb;
    if (h == 0 || w == 0) throw ImageError("jpeg has zero dimension");
    return from_rgb8(owned, h, w);
}

}  // namespace detail

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Decode PNG or JPEG bytes into a normalized image (v / 255).
inline Image decode_image(std::span<const unsigned char> bytes) {
    if (detail::is_png(bytes)) return detail::decode_png(bytes);
    if (detail::is_jpeg(bytes)) return detail::decode_jpeg(bytes);
    throw ImageError("unrecognized image format (expected PNG or JPEG)");
}

inline Image load_image(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    try {
        return decode_image(bytes);
    } catch (const ImageError& e) {
        throw ImageError(path.string() + ": " + e.what());
    }
}

/// Read only the header and return the dimensions. Throws ImageError when the
/// file is missing, of an unknown format or has a zero dimension.
inline Size probe_image(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    if (detail::is_png(bytes)) {
        png_image png;
        std::memset(&png, 0, sizeof png);
        png.version = PNG_IMAGE_VERSION;
        if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size()))
            throw ImageError(path.string() + ": " + png.message);
        Size s{static_cast<int>(png.height), static_cast<int>(png.width)};
        png_image_free(&png);
        if (s.height == 0 || s.width == 0) throw ImageError(path.string() + ": zero dimension");
        return s;
    }
    if (detail::is_jpeg(bytes)) return load_image(path).size();
    throw ImageError(path.string() + ": unrecognized image format");
}

/// Lossless 8-bit RGB PNG encoding.
inline std::vector<unsigned char> encode_png(const Image& image) {
    if (image.empty()) throw ImageError("cannot encode an empty image");
    auto rgb = to_rgb8(image);
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_RGB;

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, rgb.data(), 0, nullptr))
        throw ImageError(std::string("png encode failed: ") + png.message);
    std::vector<unsigned char> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, rgb.data(), 0, nullptr))
        throw ImageError(std::string("png encode failed: ") + png.message);
    out.resize(size);
    return out;
}

/// Write a PNG via a temporary file and rename, so a crash never leaves a
/// truncated output behind.
inline void write_png(const Image& image, const std::filesystem::path& path) {
    auto bytes = encode_png(image);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ImageError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw ImageError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace genmix
