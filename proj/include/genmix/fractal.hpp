#pragma once

// Self-similar fractal images: chaos-game rendering of iterated function
// systems, a built-in catalogue, and loading of user-supplied fractal images.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "genmix/errors.hpp"
#include "genmix/image.hpp"
#include "genmix/image_io.hpp"
#include "genmix/log.hpp"
#include "genmix/random.hpp"

namespace genmix {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// (x, y) -> (a x + b y + e, c x + d y + f)
struct AffineMap {
    double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;

    Point operator()(Point p) const { return {a * p.x + b * p.y + e, c * p.x + d * p.y + f}; }

    /// Largest singular value of the linear part.
    double operator_norm() const {
        const double s = a * a + b * b + c * c + d * d;
        const double det = a * d - b * c;
        return std::sqrt(0.5 * (s + std::sqrt(std::max(0.0, s * s - 4.0 * det * det))));
    }

    /// Solution of (I - A) p = t. Contractive maps always have one.
    Point fixed_point() const {
        const double m00 = 1.0 - a, m01 = -b, m10 = -c, m11 = 1.0 - d;
        const double det = m00 * m11 - m01 * m10;
        return {(m11 * e - m01 * f) / det, (m00 * f - m10 * e) / det};
    }
};

using Rgb = std::array<float, 3>;

/// Three-stop colour ramp for tone mapping (low density, mid, high).
struct Palette {
    std::array<Rgb, 3> stops{};

    Rgb operator()(double t) const {
        t = std::clamp(t, 0.0, 1.0);
        const int seg = t < 0.5 ? 0 : 1;
        const double u = t < 0.5 ? t * 2.0 : (t - 0.5) * 2.0;
        Rgb out{};
        for (int ch = 0; ch < 3; ++ch)
            out[ch] = clamp01(stops[seg][ch] * (1.0 - u) + stops[seg + 1][ch] * u);
        return out;
    }
};

struct IfsSpec {
    std::string name;
    std::vector<AffineMap> maps;
    std::vector<double> weights;
    Palette palette;

    void validate() const {
        if (maps.empty()) throw DomainError("ifs '" + name + "' has no maps");
        if (weights.size() != maps.size()) throw DomainError("ifs '" + name + "' needs one weight per map");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w > 0.0)) throw DomainError("ifs '" + name + "' has a non-positive weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw DomainError("ifs '" + name + "' weights do not sum to 1");
        for (std::size_t i = 0; i < maps.size(); ++i)
            if (!(maps[i].operator_norm() < 1.0))
                throw DomainError("ifs '" + name + "' map " + std::to_string(i) + " is not contractive");
    }
};

/// A disc that every map sends into itself, hence contains the attractor and
/// every chaos-game orbit started inside it. Centred on the mean fixed point c,
/// with radius max_i |w_i(c) - c| / (1 - ||A_i||).
struct BoundingDisc {
    Point center;
    double radius = 0.0;

    bool contains(Point p, double slack = 1e-9) const {
        return std::hypot(p.x - center.x, p.y - center.y) <= radius + slack;
    }
};

inline BoundingDisc attractor_bound(const IfsSpec& spec) {
    spec.validate();
    Point c;
    for (const auto& m : spec.maps) {
        Point fp = m.fixed_point();
        c.x += fp.x;
        c.y += fp.y;
    }
    c.x /= static_cast<double>(spec.maps.size());
    c.y /= static_cast<double>(spec.maps.size());
    double r = 0.0;
    for (const auto& m : spec.maps) {
        Point img = m(c);
        r = std::max(r, std::hypot(img.x - c.x, img.y - c.y) / (1.0 - m.operator_norm()));
    }
    return {c, r};
}

inline constexpr int chaos_game_burn_in = 100;

/// Chaos-game orbit: start at the first map's fixed point, apply a randomly
/// selected map each step, and keep the points after the burn-in.
inline std::vector<Point> chaos_game_points(const IfsSpec& spec, std::size_t count, std::uint64_t seed) {
    spec.validate();
    std::vector<double> cumulative(spec.weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.weights.size(); ++i) cumulative[i] = (acc += spec.weights[i]);

    RngStream rng(seed);
    Point p = spec.maps.front().fixed_point();
    std::vector<Point> points;
    points.reserve(count);
    for (long long i = -chaos_game_burn_in; i < static_cast<long long>(count); ++i) {
        const double u = rng.uniform01() * acc;
        std::size_t k = std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
        k = std::min(k, spec.maps.size() - 1);
        p = spec.maps[k](p);
        if (i >= 0) points.push_back(p);
    }
    return points;
}

/// Square hit-count histogram.
struct DensityGrid {
    int size = 0;
    std::vector<std::uint32_t> counts;  // row-major, row 0 at the top

    std::uint32_t at(int row, int col) const { return counts[static_cast<std::size_t>(row) * size + col]; }
};

/// Bin points into a size x size grid fitted to their bounding box (aspect
/// preserved, centred). The result does not depend on point order.
inline DensityGrid accumulate_density(std::span<const Point> points, int size) {
    if (size < 1) throw DomainError("density grid size must be positive");
    DensityGrid grid{size, std::vector<std::uint32_t>(static_cast<std::size_t>(size) * size, 0)};
    if (points.empty()) return grid;
    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    for (const auto& p : points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    double extent = std::max(max_x - min_x, max_y - min_y);
    if (!(extent > 0.0)) extent = 1.0;
    const double pad_x = (extent - (max_x - min_x)) / 2.0;
    const double pad_y = (extent - (max_y - min_y)) / 2.0;
    auto cell = [size](double t) { return std::clamp(static_cast<int>(std::floor(t * size)), 0, size - 1); };
    for (const auto& p : points) {
        const int col = cell((p.x - min_x + pad_x) / extent);
        const int row = size - 1 - cell((p.y - min_y + pad_y) / extent);
        ++grid.counts[static_cast<std::size_t>(row) * size + col];
    }
    return grid;
}

/// log(1 + count) normalized by the maximum, mapped through the palette.
inline Image tone_map(const DensityGrid& grid, const Palette& palette) {
    Image image(grid.size, grid.size);
    const std::uint32_t peak = grid.counts.empty() ? 0 : *std::max_element(grid.counts.begin(), grid.counts.end());
    const double scale = peak > 0 ? 1.0 / std::log1p(static_cast<double>(peak)) : 0.0;
    for (int row = 0; row < grid.size; ++row)
        for (int col = 0; col < grid.size; ++col) {
            const Rgb rgb = palette(std::log1p(static_cast<double>(grid.at(row, col))) * scale);
            for (int ch = 0; ch < 3; ++ch) image.at(row, col, ch) = rgb[ch];
        }
    return image;
}

struct FractalImage {
    Image image;
    std::string fractal_id;
};

struct IfsRender {
    FractalImage fractal;
    DensityGrid density;
};

inline constexpr std::size_t min_ifs_points = 10'000;

inline IfsRender render_ifs(const IfsSpec& spec, int size, std::size_t points, std::uint64_t seed) {
    if (points < min_ifs_points)
        throw DomainError("ifs render needs at least " + std::to_string(min_ifs_points) + " points");
    auto orbit = chaos_game_points(spec, points, seed);
    auto density = accumulate_density(orbit, size);
    Image image = tone_map(density, spec.palette);
    return {{std::move(image), spec.name + "@" + std::to_string(seed)}, std::move(density)};
}

inline FractalImage generate_ifs(const IfsSpec& spec, int size, std::size_t points, std::uint64_t seed) {
    return render_ifs(spec, size, points, seed).fractal;
}

// ---------------------------------------------------------------------------
// Built-in catalogue

namespace detail {

inline AffineMap toward(double scale, double vx, double vy) {
    return {scale, 0, 0, scale, (1.0 - scale) * vx, (1.0 - scale) * vy};
}

inline std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0 / n); }

// Random contractive maps with operator norm in [0.3, 0.7]; weights follow |det|.
inline IfsSpec random_affine_family(std::string name, std::uint64_t seed, std::size_t n_maps, Palette palette) {
    RngStream rng(stable_hash("genmix/ifs/random_affine", seed));
    IfsSpec spec{std::move(name), {}, {}, palette};
    double total = 0.0;
    for (std::size_t i = 0; i < n_maps; ++i) {
        AffineMap m{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1),
                    rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double target = rng.uniform(0.3, 0.7);
        const double k = target / m.operator_norm();
        m.a *= k;
        m.b *= k;
        m.c *= k;
        m.d *= k;
        const double w = std::max(std::abs(m.a * m.d - m.b * m.c), 0.02);
        spec.maps.push_back(m);
        spec.weights.push_back(w);
        total += w;
    }
    for (double& w : spec.weights) w /= total;
    return spec;
}

}  // namespace detail

inline std::vector<IfsSpec> builtin_ifs_specs() {
    std::vector<IfsSpec> specs;
    // Vertices chosen so the sub-triangles align with dyadic pixel grids.
    specs.push_back({"sierpinski",
                     {detail::toward(0.5, 0, 0), detail::toward(0.5, 1, 0), detail::toward(0.5, 0.5, 1)},
                     detail::uniform_weights(3),
                     {{Rgb{0.05f, 0.02f, 0.15f}, Rgb{0.80f, 0.15f, 0.55f}, Rgb{1.00f, 0.90f, 0.30f}}}});
    specs.push_back({"barnsley_fern",
                     {{0.00, 0.00, 0.00, 0.16, 0.0, 0.00},
                      {0.85, 0.04, -0.04, 0.85, 0.0, 1.60},
                      {0.20, -0.26, 0.23, 0.22, 0.0, 1.60},
                      {-0.15, 0.28, 0.26, 0.24, 0.0, 0.44}},
                     {0.01, 0.85, 0.07, 0.07},
                     {{Rgb{0.02f, 0.05f, 0.02f}, Rgb{0.10f, 0.55f, 0.15f}, Rgb{0.75f, 1.00f, 0.55f}}}});
    specs.push_back({"dragon",
                     {{0.5, -0.5, 0.5, 0.5, 0.0, 0.0}, {-0.5, -0.5, 0.5, -0.5, 1.0, 0.0}},
                     detail::uniform_weights(2),
                     {{Rgb{0.10f, 0.02f, 0.02f}, Rgb{0.85f, 0.30f, 0.05f}, Rgb{1.00f, 0.95f, 0.70f}}}});
    specs.push_back(detail::random_affine_family(
        "random_affine_a", 1, 3, {{Rgb{0.02f, 0.04f, 0.12f}, Rgb{0.10f, 0.45f, 0.85f}, Rgb{0.85f, 0.97f, 1.00f}}}));
    specs.push_back(detail::random_affine_family(
        "random_affine_b", 2, 4, {{Rgb{0.08f, 0.02f, 0.10f}, Rgb{0.55f, 0.20f, 0.75f}, Rgb{1.00f, 0.80f, 0.95f}}}));
    const double third = 1.0 / 3.0;
    specs.push_back({"vicsek",
                     {detail::toward(third, 0, 0), detail::toward(third, 1, 0), detail::toward(third, 0, 1),
                      detail::toward(third, 1, 1), detail::toward(third, 0.5, 0.5)},
                     detail::uniform_weights(5),
                     {{Rgb{0.00f, 0.00f, 0.00f}, Rgb{0.20f, 0.60f, 0.55f}, Rgb{0.90f, 1.00f, 0.85f}}}});
    return specs;
}

inline IfsSpec builtin_ifs(std::string_view name) {
    for (auto& spec : builtin_ifs_specs())
        if (spec.name == name) return spec;
    throw DomainError("unknown built-in fractal '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Fractal sets

struct FractalSet {
    std::vector<FractalImage> fractals;
    std::vector<std::string> warnings;

    bool empty() const noexcept { return fractals.empty(); }
    std::size_t size() const noexcept { return fractals.size(); }
};

inline FractalSet builtin_fractal_set(int size = 256, std::size_t points = 200'000, std::uint64_t seed = 0) {
    FractalSet set;
    for (const auto& spec : builtin_ifs_specs()) set.fractals.push_back(generate_ifs(spec, size, points, seed));
    return set;
}

/// Every decodable image in `dir`, ordered by file name. Undecodable files are
/// skipped with a warning; an empty result is an error.
inline FractalSet load_fractal_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error("fractal directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end(),
              [](const auto& l, const auto& r) { return l.filename().string() < r.filename().string(); });

    FractalSet set;
    for (const auto& path : files) {
        try {
            set.fractals.push_back({load_image(path), path.filename().string()});
        } catch (const Error& e) {
            std::string msg = "skipping " + path.filename().string() + ": " + e.what();
            logger()->warn("{}", msg);
            set.warnings.push_back(std::move(msg));
        }
    }
    if (set.empty()) throw Error("no fractal images found in " + dir.string());
    return set;
}

/// Uniform pick, bilinearly resized to the target dimensions.
inline FractalImage sample_fractal(RngStream& rng, const FractalSet& set, int height, int width) {
    if (set.empty()) throw DomainError("cannot sample from an empty fractal set");
    const auto& chosen = set.fractals[rng.uniform_index(set.size())];
    return {resize_bilinear(chosen.image, {height, width}), chosen.fractal_id};
}

}  // namespace genmix
