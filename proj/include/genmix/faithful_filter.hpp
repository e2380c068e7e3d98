#pragma once

// Label-free filtering of edited images.
//
// An edit is kept when cos(f(original), f(edited)) >= mu - 2 sigma, where mu
// and sigma are the mean and population standard deviation of the pairwise
// cosine similarities among the originals in scope.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genmix/base64.hpp"
#include "genmix/errors.hpp"
#include "genmix/hashing.hpp"
#include "genmix/http.hpp"
#include "genmix/image.hpp"
#include "genmix/image_io.hpp"
#include "genmix/parallel.hpp"
#include "genmix/random.hpp"

namespace genmix {

class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw DomainError("embedding has zero dimension");
        double sum = 0.0;
        for (double v : values_) {
            if (!std::isfinite(v)) throw DomainError("embedding has a non-finite entry");
            sum += v * v;
        }
        norm_ = std::sqrt(sum);
        if (!(norm_ > 0.0)) throw DomainError("embedding has zero norm");
    }

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dimension() const noexcept { return values_.size(); }
    double norm() const noexcept { return norm_; }

    EmbeddingVector scaled(double factor) const {
        std::vector<double> v = values_;
        for (double& x : v) x *= factor;
        return EmbeddingVector(std::move(v));
    }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension())
        throw DomainError("embedding dimension mismatch: " + std::to_string(a.dimension()) + " vs " +
                          std::to_string(b.dimension()));
    double dot = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) dot += av[i] * bv[i];
    return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

struct FilterStats {
    double mu = 0.0;
    double sigma = 0.0;
    double tau = 0.0;
    std::size_t n_pairs = 0;
};

inline nlohmann::json to_json(const FilterStats& s) {
    return {{"mu", s.mu}, {"sigma", s.sigma}, {"tau", s.tau}, {"n_pairs", s.n_pairs}};
}

namespace detail {

// Streaming mean / sum of squared deviations, mergeable across partitions.
struct Moments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double x) {
        count += 1.0;
        const double delta = x - mean;
        mean += delta / count;
        m2 += delta * (x - mean);
    }

    void merge(const Moments& other) {
        if (other.count == 0.0) return;
        if (count == 0.0) {
            *this = other;
            return;
        }
        const double total = count + other.count;
        const double delta = other.mean - mean;
        mean += delta * other.count / total;
        m2 += other.m2 + delta * delta * count * other.count / total;
        count = total;
    }
};

}  // namespace detail

/// Mean and population standard deviation over all N(N-1)/2 unordered pairs.
inline FilterStats compute_stats(std::span<const EmbeddingVector> originals, int workers = 1) {
    const std::size_t n = originals.size();
    if (n < 2) throw DomainError("faithful filter needs at least 2 originals, got " + std::to_string(n));
    for (const auto& v : originals)
        if (v.dimension() != originals[0].dimension()) throw DomainError("embedding dimension differs within a run");

    // Row i holds the pairs (i, j > i).
    std::vector<detail::Moments> rows(n - 1);
    parallel_for(n - 1, workers, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) rows[i].push(cosine_similarity(originals[i], originals[j]));
    });
    detail::Moments total;
    for (const auto& r : rows) total.merge(r);

    FilterStats stats;
    stats.n_pairs = n * (n - 1) / 2;
    stats.mu = std::clamp(total.mean, -1.0, 1.0);
    stats.sigma = std::sqrt(std::max(0.0, total.m2 / static_cast<double>(stats.n_pairs)));
    stats.tau = stats.mu - 2.0 * stats.sigma;
    return stats;
}

inline bool is_faithful(const EmbeddingVector& original, const EmbeddingVector& edited, const FilterStats& stats) {
    return cosine_similarity(original, edited) >= stats.tau;
}

enum class FilterScope { global, per_class };

inline FilterScope filter_scope_from_string(std::string_view name) {
    if (name == "global") return FilterScope::global;
    if (name == "per_class" || name == "per-class") return FilterScope::per_class;
    throw DomainError("unknown filter scope '" + std::string(name) + "'");
}

inline constexpr std::string_view to_string(FilterScope s) { return s == FilterScope::global ? "global" : "per_class"; }

/// Thresholds for a run. In per-class scope every label with at least two
/// originals gets its own statistics; unlabeled entries and singleton classes
/// fall back to the global statistics.
class ScopedThresholds {
public:
    ScopedThresholds(std::span<const std::optional<std::string>> labels, std::span<const EmbeddingVector> originals,
                     FilterScope scope, int workers = 1)
        : scope_(scope), global_(compute_stats(originals, workers)) {
        if (labels.size() != originals.size()) throw DomainError("labels and embeddings differ in length");
        if (scope != FilterScope::per_class) return;
        std::map<std::string, std::vector<EmbeddingVector>> groups;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i]) groups[*labels[i]].push_back(originals[i]);
        for (const auto& [label, members] : groups)
            if (members.size() >= 2) per_class_.emplace(label, compute_stats(members, workers));
    }

    FilterScope scope() const noexcept { return scope_; }
    const FilterStats& global() const noexcept { return global_; }
    const std::map<std::string, FilterStats>& per_class() const noexcept { return per_class_; }

    const FilterStats& for_label(const std::optional<std::string>& label) const {
        if (scope_ == FilterScope::per_class && label) {
            auto it = per_class_.find(*label);
            if (it != per_class_.end()) return it->second;
        }
        return global_;
    }

private:
    FilterScope scope_;
    FilterStats global_;
    std::map<std::string, FilterStats> per_class_;
};

/// Stats report: {mu, sigma, tau, n_pairs, n_accepted, n_rejected} plus scope details.
inline nlohmann::json stats_report(const ScopedThresholds& thresholds, std::size_t accepted, std::size_t rejected) {
    nlohmann::json j = to_json(thresholds.global());
    j["n_accepted"] = accepted;
    j["n_rejected"] = rejected;
    j["scope"] = std::string(to_string(thresholds.scope()));
    if (thresholds.scope() == FilterScope::per_class) {
        nlohmann::json classes = nlohmann::json::object();
        for (const auto& [label, s] : thresholds.per_class()) classes[label] = to_json(s);
        j["per_class"] = classes;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Embedding backends

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string id() const = 0;
    virtual bool healthy() const { return true; }
    virtual EmbeddingVector embed(const Image& image) = 0;
};

/// Mean of each cell of a grid x grid partition (nearest row/column when the
/// image is smaller than the grid). Returns grid*grid*3 values.
inline std::vector<double> cell_means(const Image& image, int grid) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(grid) * grid * Image::channels);
    auto bounds = [grid](int extent, int cell) {
        int lo = static_cast<int>(static_cast<long long>(cell) * extent / grid);
        int hi = static_cast<int>(static_cast<long long>(cell + 1) * extent / grid);
        return std::pair{lo, std::max(hi, lo + 1)};
    };
    for (int gy = 0; gy < grid; ++gy) {
        auto [y0, y1] = bounds(image.height(), gy);
        for (int gx = 0; gx < grid; ++gx) {
            auto [x0, x1] = bounds(image.width(), gx);
            for (int c = 0; c < Image::channels; ++c) {
                double sum = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) sum += image.at(y, x, c);
                out.push_back(sum / ((y1 - y0) * (x1 - x0)));
            }
        }
    }
    return out;
}

/// Deterministic stand-in for a feature extractor: 8x8 cell means (centred at
/// 0.5, plus a constant bias feature) projected by a fixed hash-seeded matrix
/// with entries uniform in [-1, 1), then L2-normalized.
class MockEmbedder final : public Embedder {
public:
    static constexpr int grid = 8;
    static constexpr std::size_t default_dimension = 384;

    explicit MockEmbedder(std::size_t dimension = default_dimension) : dimension_(dimension) {
        const std::size_t features = grid * grid * Image::channels + 1;
        projection_.resize(dimension_ * features);
        RngStream rng(stable_hash("genmix/mock_embed/v1", static_cast<std::uint64_t>(dimension_)));
        for (double& w : projection_) w = rng.uniform(-1.0, 1.0);
    }

    std::string id() const override { return "mock"; }

    EmbeddingVector embed(const Image& image) override {
        auto features = cell_means(image, grid);
        for (double& f : features) f -= 0.5;
        features.push_back(1.0);
        std::vector<double> v(dimension_, 0.0);
        for (std::size_t r = 0; r < dimension_; ++r) {
            const double* row = projection_.data() + r * features.size();
            double acc = 0.0;
            for (std::size_t k = 0; k < features.size(); ++k) acc += row[k] * features[k];
            v[r] = acc;
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        return EmbeddingVector(std::move(v));
    }

private:
    std::size_t dimension_;
    std::vector<double> projection_;
};

/// POST {endpoint}/v1/embed {"image": b64 PNG} -> {"vector": [d floats], "model": str}.
/// The dimension of the first response is pinned for the rest of the run.
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(const std::string& url, HttpOptions options = {}) : client_(Endpoint::parse(url), options) {}

    std::string id() const override { return "http:" + client_.endpoint().base + client_.endpoint().prefix; }
    bool healthy() const override { return client_.healthy(); }

    EmbeddingVector embed(const Image& image) override {
        auto response = client_.post("/v1/embed", {{"image", base64_encode(encode_png(image))}});
        auto it = response.find("vector");
        if (it == response.end() || !it->is_array() || it->empty())
            throw ProtocolError("embed response lacks a non-empty 'vector' array");
        std::vector<double> values;
        values.reserve(it->size());
        for (const auto& x : *it) {
            if (!x.is_number()) throw ProtocolError("embed vector has a non-numeric entry");
            values.push_back(x.get<double>());
        }
        {
            std::lock_guard lock(mutex_);
            if (dimension_ == 0) dimension_ = values.size();
            if (values.size() != dimension_)
                throw ProtocolError("embed dimension changed from " + std::to_string(dimension_) + " to " +
                                    std::to_string(values.size()));
        }
        try {
            return EmbeddingVector(std::move(values));
        } catch (const DomainError& e) {
            throw ProtocolError(std::string("embed vector rejected: ") + e.what());
        }
    }

private:
    JsonHttpClient client_;
    std::mutex mutex_;
    std::size_t dimension_ = 0;
};

inline std::shared_ptr<Embedder> make_embedder(const std::string& spec, HttpOptions options = {}) {
    if (spec == "mock") return std::make_shared<MockEmbedder>();
    if (spec.rfind("http://", 0) == 0) return std::make_shared<HttpEmbedder>(spec, options);
    if (spec.rfind("http:", 0) == 0) return std::make_shared<HttpEmbedder>(spec.substr(5), options);
    throw DomainError("unknown embed backend '" + spec + "' (expected mock or http:URL)");
}

}  // namespace genmix
