#pragma once

// Helpers and independent oracles for the test suites. Nothing here calls the
// library code path it is used to check.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "genmix/image.hpp"
#include "genmix/image_io.hpp"

namespace genmix::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "genmix") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                (tag + "_" + std::to_string(rd()) + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Image constant_image(int h, int w, float r, float g, float b) {
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    return img;
}

/// Values drawn from the 8-bit grid so PNG round trips are exact.
inline Image random_image(int h, int w, std::uint32_t seed) {
    std::mt19937 gen(seed);
    Image img(h, w);
    for (float& v : img.values()) v = static_cast<float>(gen() % 256) / 255.0f;
    return img;
}

/// Smooth image: bilinear blend of four random corner colours, on the 8-bit grid.
inline Image corner_blend_image(int h, int w, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    float corner[4][3];
    for (auto& c : corner)
        for (float& v : c) v = u(gen);
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float fy = h > 1 ? static_cast<float>(y) / (h - 1) : 0.0f;
            const float fx = w > 1 ? static_cast<float>(x) / (w - 1) : 0.0f;
            for (int c = 0; c < 3; ++c) {
                const float top = corner[0][c] * (1 - fx) + corner[1][c] * fx;
                const float bottom = corner[2][c] * (1 - fx) + corner[3][c] * fx;
                img.at(y, x, c) = static_cast<float>(quantize_channel(top * (1 - fy) + bottom * fy)) / 255.0f;
            }
        }
    return img;
}

/// Horizontal ramp v(x) = x / (w - 1) in every channel and row.
inline Image horizontal_gradient(int h, int w) {
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(x) / (w - 1);
    return img;
}

/// Expected value of a resized horizontal gradient at destination column x:
/// the gradient evaluated at the half-pixel-centre source coordinate, clamped
/// to the source extent. Bilinear interpolation reproduces linear data exactly.
inline double resized_gradient_oracle(int x, int src_w, int dst_w) {
    double sx = (x + 0.5) * static_cast<double>(src_w) / dst_w - 0.5;
    sx = std::min(std::max(sx, 0.0), static_cast<double>(src_w - 1));
    return sx / (src_w - 1);
}

struct BruteStats {
    double mu;
    double sigma;
    double tau;
    std::size_t pairs;
};

/// All-pairs cosine statistics in long double, two-pass mean / variance.
inline BruteStats brute_force_stats(const std::vector<std::vector<double>>& vs) {
    std::vector<long double> sims;
    for (std::size_t i = 0; i < vs.size(); ++i)
        for (std::size_t j = i + 1; j < vs.size(); ++j) {
            long double dot = 0, ni = 0, nj = 0;
            for (std::size_t k = 0; k < vs[i].size(); ++k) {
                dot += static_cast<long double>(vs[i][k]) * vs[j][k];
                ni += static_cast<long double>(vs[i][k]) * vs[i][k];
                nj += static_cast<long double>(vs[j][k]) * vs[j][k];
            }
            sims.push_back(dot / (std::sqrt(ni) * std::sqrt(nj)));
        }
    long double mean = 0;
    for (auto s : sims) mean += s;
    mean /= sims.size();
    long double var = 0;
    for (auto s : sims) var += (s - mean) * (s - mean);
    var /= sims.size();
    const double sigma = static_cast<double>(std::sqrt(var));
    return {static_cast<double>(mean), sigma, static_cast<double>(mean) - 2.0 * sigma, sims.size()};
}

/// Box-counting dimension of a square occupancy grid: least-squares slope of
/// log N(s) against log(1/s) over box sizes s = 2, 4, ..., max_box.
inline double box_counting_dimension(const std::vector<bool>& occupied, int size, int min_box = 2, int max_box = 64) {
    std::vector<double> xs, ys;
    for (int s = min_box; s <= max_box; s *= 2) {
        const int cells = (size + s - 1) / s;
        std::vector<bool> hit(static_cast<std::size_t>(cells) * cells, false);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c)
                if (occupied[static_cast<std::size_t>(r) * size + c])
                    hit[static_cast<std::size_t>(r / s) * cells + c / s] = true;
        std::size_t n = 0;
        for (bool h : hit) n += h;
        xs.push_back(std::log(1.0 / s));
        ys.push_back(std::log(static_cast<double>(n)));
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= xs.size();
    my /= ys.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

inline std::vector<unsigned char> file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::trunc);
    out << text;
}

}  // namespace genmix::testing
