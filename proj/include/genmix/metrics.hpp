#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genmix/errors.hpp"
#include "genmix/manifest.hpp"

namespace genmix {

/// Relative extra cost in percent: (t_aug - t_van) / t_van * 100.
/// Negative values are allowed (augmented run faster than baseline).
inline double augmentation_overhead(double t_aug, double t_van) {
    if (!(t_van > 0.0)) throw DomainError("baseline time must be positive");
    if (!(t_aug >= 0.0)) throw DomainError("augmented time must be non-negative");
    return (t_aug - t_van) * 100.0 / t_van;
}

struct OverheadReport {
    double t_aug = 0.0;
    double t_van = 0.0;
    double a_o = 0.0;

    static OverheadReport compute(double t_aug, double t_van) { return {t_aug, t_van, augmentation_overhead(t_aug, t_van)}; }

    nlohmann::json to_json() const {
        nlohmann::json j{{"t_aug", t_aug}, {"t_van", t_van}, {"a_o", a_o}};
        if (a_o < 0.0) j["note"] = "negative overhead: augmented time below baseline";
        return j;
    }
};

/// Seconds from a timing report written by `run` ({"wall_seconds": ...}).
inline double read_timing_seconds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open timing report " + path.string());
    try {
        return nlohmann::json::parse(in).at("wall_seconds").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("invalid timing report " + path.string() + ": " + e.what());
    }
}

struct RunStats {
    std::size_t total = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t errors = 0;
    std::map<std::string, std::size_t> per_prompt;
    std::map<std::string, std::size_t> per_mask;
    std::optional<double> wall_seconds;
    std::optional<nlohmann::json> filter;

    nlohmann::json to_json() const {
        nlohmann::json j{{"total", total},       {"accepted", accepted},     {"rejected", rejected},
                         {"errors", errors},     {"per_prompt", per_prompt}, {"per_mask", per_mask}};
        if (wall_seconds) j["wall_seconds"] = *wall_seconds;
        if (filter) j["filter"] = *filter;
        return j;
    }
};

/// Counts per prompt, mask kind and verdict. Error records count as neither
/// accepted nor rejected; every record lands in exactly one prompt and one mask bucket.
inline RunStats run_stats(const std::vector<AugmentedRecord>& records) {
    RunStats s;
    s.total = records.size();
    for (const auto& r : records) {
        if (r.error)
            ++s.errors;
        else if (r.accepted)
            ++s.accepted;
        else
            ++s.rejected;
        ++s.per_prompt[r.prompt_id];
        ++s.per_mask[std::string(to_string(r.mask_kind))];
    }
    return s;
}

/// Stats for an output manifest, echoing timing.json and filter_stats.json
/// when they sit next to it.
inline RunStats run_stats(const std::filesystem::path& output_manifest) {
    RunStats s = run_stats(read_output_manifest(output_manifest));
    const auto dir = output_manifest.parent_path();
    if (auto timing = dir / "timing.json"; std::filesystem::exists(timing)) s.wall_seconds = read_timing_seconds(timing);
    if (auto filter = dir / "filter_stats.json"; std::filesystem::exists(filter)) {
        std::ifstream in(filter);
        s.filter = nlohmann::json::parse(in, nullptr, false);
        if (s.filter->is_discarded()) s.filter.reset();
    }
    return s;
}

}  // namespace genmix
