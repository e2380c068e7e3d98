#pragma once

// Line-delimited JSON manifests.
//
// Input:  {"id": ..., "path": ..., "label"?: ..., "split"?: ...}
// Output: one AugmentedRecord per line (see to_json below for the keys).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "genmix/errors.hpp"
#include "genmix/image_io.hpp"
#include "genmix/mask_kind.hpp"

namespace genmix {

namespace fs = std::filesystem;

struct ManifestEntry {
    std::string id;
    fs::path path;
    std::optional<std::string> label;
    std::optional<std::string> split;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// An entry dropped at load time, e.g. because its image does not decode.
struct EntryIssue {
    std::size_t line = 0;
    std::string id;
    std::string message;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::vector<EntryIssue> issues;

    bool empty() const noexcept { return entries.empty(); }
    std::size_t size() const noexcept { return entries.size(); }
    const ManifestEntry* find(std::string_view id) const {
        for (const auto& e : entries)
            if (e.id == id) return &e;
        return nullptr;
    }
};

struct ManifestLoadOptions {
    /// Probe each image header and move undecodable entries into the issue report.
    bool check_images = true;
};

namespace detail {

inline std::optional<std::string> optional_string(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ManifestError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

inline std::string required_string(const nlohmann::json& obj, const char* key) {
    auto value = optional_string(obj, key);
    if (!value || value->empty()) throw ManifestError(std::string("missing field '") + key + "'");
    return *value;
}

}  // namespace detail

/// Load an input manifest. Relative image paths resolve against the manifest's directory.
inline Manifest load_manifest(const fs::path& path, ManifestLoadOptions options = {}) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open manifest " + path.string());
    const fs::path base = path.parent_path();

    Manifest manifest;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ManifestEntry entry;
        try {
            auto obj = nlohmann::json::parse(line);
            if (!obj.is_object()) throw ManifestError("expected a JSON object");
            entry.id = detail::required_string(obj, "id");
            entry.path = detail::required_string(obj, "path");
            entry.label = detail::optional_string(obj, "label");
            entry.split = detail::optional_string(obj, "split");
        } catch (const nlohmann::json::exception& e) {
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": malformed line: " + e.what());
        } catch (const ManifestError& e) {
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (!seen.insert(entry.id).second)
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + entry.id + "'");
        if (entry.path.is_relative()) entry.path = base / entry.path;

        if (options.check_images) {
            try {
                probe_image(entry.path);
            } catch (const Error& e) {
                manifest.issues.push_back({line_no, entry.id, e.what()});
                continue;
            }
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

struct AugmentedRecord {
    std::string out_path;  // empty when no image was composed
    std::string source_id;
    int index = 0;  // augmentation number a in 1..m
    std::optional<std::string> label;
    std::string prompt_id;
    MaskKind mask_kind = MaskKind::hor;
    std::string fractal_id;
    double lambda = 0.0;
    int blend_width = 0;
    std::uint64_t seed = 0;
    bool accepted = true;
    std::optional<double> similarity;  // filter score, when the filter ran
    std::optional<std::string> error;  // backend failure for this item

    friend bool operator==(const AugmentedRecord&, const AugmentedRecord&) = default;
};

inline nlohmann::json to_json(const AugmentedRecord& r) {
    nlohmann::json j{{"out_path", r.out_path},
                     {"source_id", r.source_id},
                     {"index", r.index},
                     {"prompt_id", r.prompt_id},
                     {"mask_kind", std::string(to_string(r.mask_kind))},
                     {"fractal_id", r.fractal_id},
                     {"lambda", r.lambda},
                     {"blend_width", r.blend_width},
                     {"seed", r.seed},
                     {"accepted", r.accepted}};
    j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    if (r.similarity) j["similarity"] = *r.similarity;
    if (r.error) j["error"] = *r.error;
    return j;
}

inline AugmentedRecord record_from_json(const nlohmann::json& j) {
    AugmentedRecord r;
    r.out_path = j.at("out_path").get<std::string>();
    r.source_id = j.at("source_id").get<std::string>();
    r.index = j.at("index").get<int>();
    r.label = detail::optional_string(j, "label");
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.mask_kind = mask_kind_from_string(j.at("mask_kind").get<std::string>());
    r.fractal_id = j.at("fractal_id").get<std::string>();
    r.lambda = j.at("lambda").get<double>();
    r.blend_width = j.at("blend_width").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.accepted = j.at("accepted").get<bool>();
    if (auto it = j.find("similarity"); it != j.end() && !it->is_null()) r.similarity = it->get<double>();
    r.error = detail::optional_string(j, "error");
    return r;
}

/// Throws ManifestError when a record breaks its invariants.
inline void validate_record(const AugmentedRecord& r, const Manifest* sources = nullptr) {
    if (r.source_id.empty()) throw ManifestError("record has empty source_id");
    if (!(r.lambda >= 0.0 && r.lambda < 1.0))
        throw ManifestError("record " + r.source_id + ": lambda " + std::to_string(r.lambda) + " outside [0,1)");
    if (r.blend_width < 0) throw ManifestError("record " + r.source_id + ": negative blend width");
    if (r.accepted && !r.error && r.out_path.empty())
        throw ManifestError("record " + r.source_id + ": accepted record without out_path");
    if (sources && !sources->find(r.source_id))
        throw ManifestError("record references unknown source id '" + r.source_id + "'");
}

/// Validate every record, then write them all. Nothing is written if any record is invalid.
inline std::size_t write_output_manifest(const std::vector<AugmentedRecord>& records, const fs::path& path,
                                         const Manifest* sources = nullptr) {
    for (const auto& r : records) validate_record(r, sources);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ManifestError("cannot write " + path.string());
        for (const auto& r : records) out << to_json(r).dump() << '\n';
        if (!out) throw ManifestError("write failed for " + path.string());
    }
    fs::rename(tmp, path);
    return records.size();
}

inline std::vector<AugmentedRecord> read_output_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open " + path.string());
    std::vector<AugmentedRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

/// Load + normalize a source image (grayscale promoted, alpha dropped).
inline Image image_load_normalize(const fs::path& path) { return load_image(path); }

}  // namespace genmix
