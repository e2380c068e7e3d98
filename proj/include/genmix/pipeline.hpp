#pragma once

// End-to-end augmentation over a manifest.
//
// For each entry and each a in 1..m a work item seed is derived from
// (run seed, entry id, a). Independent child streams of that seed pick the
// prompt, the mask and the fractal, and the seed itself is the editor seed.
// Outputs therefore depend only on the seed and ids, never on the schedule.
//
// Edited images are snapped to the 8-bit grid before use, so the in-memory
// `run` path and the staged edit -> filter -> compose path (which stores edits
// as PNG) produce identical bytes.

#include <cctype>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genmix/compositor.hpp"
#include "genmix/edit_backend.hpp"
#include "genmix/errors.hpp"
#include "genmix/faithful_filter.hpp"
#include "genmix/fractal.hpp"
#include "genmix/hashing.hpp"
#include "genmix/image_io.hpp"
#include "genmix/log.hpp"
#include "genmix/manifest.hpp"
#include "genmix/mask.hpp"
#include "genmix/parallel.hpp"
#include "genmix/prompts.hpp"
#include "genmix/random.hpp"

namespace genmix {

inline constexpr double default_lambda = 0.20;
inline constexpr int default_blend_width = 20;
inline constexpr int default_per_image = 3;

struct PipelineConfig {
    double lambda = default_lambda;
    int blend_width = default_blend_width;
    int per_image = default_per_image;
    std::vector<MaskKind> masks{smooth_mask_kinds.begin(), smooth_mask_kinds.end()};
    PromptTask prompt_task = PromptTask::in_domain;
    std::uint64_t seed = 0;
    bool filter_enabled = true;
    FilterScope filter_scope = FilterScope::global;
    int workers = 1;
    fs::path out_dir = "genmix_out";
    fs::path out_manifest;  // empty: out_dir / "manifest.jsonl"

    fs::path manifest_path() const { return out_manifest.empty() ? out_dir / "manifest.jsonl" : out_manifest; }

    void validate() const {
        require_lambda(lambda);
        if (blend_width < 0) throw DomainError("blend width must be non-negative");
        if (per_image < 1) throw DomainError("per-image count must be at least 1");
        if (masks.empty()) throw DomainError("no mask kinds enabled");
        if (workers < 1) throw DomainError("workers must be at least 1");
    }
};

struct PipelineBackends {
    std::shared_ptr<EditBackend> editor;
    std::shared_ptr<Embedder> embedder;  // required when filtering
    std::shared_ptr<const FractalSet> fractals;
    PromptLibrary prompts;
};

inline std::uint64_t derive_item_seed(std::uint64_t run_seed, std::string_view entry_id, int index) {
    return stable_hash("genmix/item", run_seed, entry_id, index);
}

struct ItemPlan {
    std::uint64_t seed = 0;
    Prompt prompt;
};

inline ItemPlan plan_item(std::uint64_t item_seed, const PromptSet& prompts) {
    RngStream rng = RngStream(item_seed).derive("prompt");
    return {item_seed, sample_prompt(rng, prompts)};
}

inline ItemPlan plan_item(std::uint64_t run_seed, const ManifestEntry& entry, int index, const PromptSet& prompts) {
    return plan_item(derive_item_seed(run_seed, entry.id, index), prompts);
}

/// Edit with the item seed as the editor seed; the result is snapped to 8 bits.
inline Image edit_item(EditBackend& editor, const Image& original, const std::string& source_id,
                       const ItemPlan& plan) {
    EditRequest req{original, expand_prompt(plan.prompt), plan.seed, source_id, plan.prompt.id()};
    return snap_to_8bit(editor.edit(req).image);
}

struct ComposedItem {
    Image image;  // empty when composition was skipped
    MaskKind mask_kind = MaskKind::hor;
    int blend_width = 0;
    std::string fractal_id;
};

/// Mask and fractal selection for an item; composes only when `edited` is given.
inline ComposedItem compose_item(const Image& original, const Image* edited, std::uint64_t item_seed,
                                 const PipelineConfig& config, const FractalSet& fractals) {
    RngStream base(item_seed);
    RngStream mask_rng = base.derive("mask");
    RngStream fractal_rng = base.derive("fractal");
    Mask mask = sample_mask(mask_rng, original.height(), original.width(), config.blend_width, config.masks);
    FractalImage fractal = sample_fractal(fractal_rng, fractals, original.height(), original.width());
    ComposedItem out{{}, mask.kind, mask.blend_width, fractal.fractal_id};
    if (edited) out.image = genmix_single(original, *edited, mask, fractal.image, config.lambda);
    return out;
}

inline std::string sanitize_file_stem(std::string_view id) {
    std::string out(id);
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return out;
}

inline fs::path output_image_path(const fs::path& out_dir, std::string_view source_id, int index) {
    return out_dir / "images" / (sanitize_file_stem(source_id) + "_" + std::to_string(index) + ".png");
}

struct PipelineResult {
    std::vector<AugmentedRecord> records;
    std::optional<nlohmann::json> filter_report;
    std::vector<EntryIssue> issues;
    std::size_t reused = 0;
    double wall_seconds = 0.0;
};

namespace detail {

/// Embed every original. Entries whose image fails to load get no vector.
inline std::vector<std::optional<EmbeddingVector>> embed_originals(const Manifest& manifest, Embedder& embedder,
                                                                   int workers) {
    std::vector<std::optional<EmbeddingVector>> out(manifest.size());
    parallel_for(manifest.size(), workers, [&](std::size_t i) {
        try {
            out[i] = embedder.embed(load_image(manifest.entries[i].path));
        } catch (const ImageError& e) {
            logger()->error("{}: {}", manifest.entries[i].id, e.what());
        }
    });
    return out;
}

inline std::optional<ScopedThresholds> build_thresholds(const Manifest& manifest,
                                                        const std::vector<std::optional<EmbeddingVector>>& vectors,
                                                        FilterScope scope, int workers) {
    std::vector<std::optional<std::string>> labels;
    std::vector<EmbeddingVector> valid;
    for (std::size_t i = 0; i < vectors.size(); ++i)
        if (vectors[i]) {
            labels.push_back(manifest.entries[i].label);
            valid.push_back(*vectors[i]);
        }
    return ScopedThresholds(labels, valid, scope, workers);
}

inline void write_json_file(const nlohmann::json& j, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

/// Records from a previous (possibly interrupted) run that can be reused as-is.
inline std::map<std::pair<std::string, int>, AugmentedRecord> reusable_records(const fs::path& manifest_path,
                                                                                const PipelineConfig& config,
                                                                                const PromptSet& prompts) {
    std::vector<AugmentedRecord> previous;
    for (const fs::path& p : {manifest_path, fs::path(manifest_path.string() + ".partial")}) {
        if (!fs::exists(p)) continue;
        try {
            auto recs = read_output_manifest(p);
            previous.insert(previous.end(), recs.begin(), recs.end());
        } catch (const ManifestError& e) {
            logger()->warn("ignoring unreadable previous output {}: {}", p.string(), e.what());
        }
    }
    std::map<std::pair<std::string, int>, AugmentedRecord> out;
    for (auto& r : previous) {
        if (r.error) continue;
        if (r.lambda != config.lambda) continue;
        if (r.seed != derive_item_seed(config.seed, r.source_id, r.index)) continue;
        if (r.prompt_id != plan_item(r.seed, prompts).prompt.id()) continue;
        if (std::find(config.masks.begin(), config.masks.end(), r.mask_kind) == config.masks.end()) continue;
        if (r.accepted && !fs::exists(r.out_path)) continue;
        out[{r.source_id, r.index}] = std::move(r);
    }
    return out;
}

class RecordJournal {
public:
    explicit RecordJournal(fs::path path) : path_(std::move(path)) {
        if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
        out_.open(path_, std::ios::app);
    }
    void append(const AugmentedRecord& r) {
        std::lock_guard lock(mutex_);
        out_ << to_json(r).dump() << '\n';
        out_.flush();
    }
    void discard() {
        out_.close();
        std::error_code ec;
        fs::remove(path_, ec);
    }

private:
    fs::path path_;
    std::ofstream out_;
    std::mutex mutex_;
};

}  // namespace detail

/// Edit, filter, concatenate and fractal-blend every manifest entry m times.
/// Writes PNG outputs, the output manifest, filter_stats.json and timing.json
/// under config.out_dir.
inline PipelineResult run_pipeline(const Manifest& manifest, const PipelineConfig& config,
                                   PipelineBackends& backends) {
    const auto started = std::chrono::steady_clock::now();
    config.validate();
    if (manifest.empty()) throw DomainError("manifest has no entries");
    if (!backends.editor) throw DomainError("no edit backend configured");
    if (!backends.fractals || backends.fractals->empty()) throw DomainError("no fractals available");
    if (config.filter_enabled && !backends.embedder) throw DomainError("filter enabled without an embed backend");
    if (!backends.editor->healthy()) throw BackendError("edit backend " + backends.editor->id() + " is not healthy");
    if (config.filter_enabled && !backends.embedder->healthy())
        throw BackendError("embed backend " + backends.embedder->id() + " is not healthy");

    const PromptSet prompts = backends.prompts.list(config.prompt_task);
    if (prompts.prompts.empty()) throw DomainError("prompt set is empty");

    PipelineResult result;
    result.issues = manifest.issues;
    const fs::path manifest_out = config.manifest_path();
    auto reusable = detail::reusable_records(manifest_out, config, prompts);

    std::vector<std::optional<EmbeddingVector>> original_vectors;
    std::optional<ScopedThresholds> thresholds;
    if (config.filter_enabled) {
        original_vectors = detail::embed_originals(manifest, *backends.embedder, config.workers);
        thresholds = detail::build_thresholds(manifest, original_vectors, config.filter_scope, config.workers);
    }

    const std::size_t m = static_cast<std::size_t>(config.per_image);
    std::vector<AugmentedRecord> records(manifest.size() * m);
    std::vector<char> reused(records.size(), 0);
    detail::RecordJournal journal(manifest_out.string() + ".partial");

    parallel_for(manifest.size(), config.workers, [&](std::size_t e) {
        const ManifestEntry& entry = manifest.entries[e];
        std::optional<Image> original;
        std::string load_error;
        for (std::size_t k = 0; k < m; ++k) {
            const int index = static_cast<int>(k) + 1;
            AugmentedRecord& rec = records[e * m + k];
            if (auto it = reusable.find({entry.id, index}); it != reusable.end()) {
                rec = it->second;
                reused[e * m + k] = 1;
                continue;
            }
            const ItemPlan plan = plan_item(config.seed, entry, index, prompts);
            rec.source_id = entry.id;
            rec.index = index;
            rec.label = entry.label;
            rec.prompt_id = plan.prompt.id();
            rec.lambda = config.lambda;
            rec.seed = plan.seed;

            if (!original && load_error.empty()) {
                try {
                    original = load_image(entry.path);
                } catch (const ImageError& err) {
                    load_error = err.what();
                }
            }
            if (!original) {
                rec.accepted = false;
                rec.error = load_error;
                continue;
            }
            try {
                Image edited = edit_item(*backends.editor, *original, entry.id, plan);
                bool accepted = true;
                if (thresholds) {
                    if (!original_vectors[e]) throw ImageError("original has no embedding");
                    const EmbeddingVector edited_vec = backends.embedder->embed(edited);
                    const double sim = cosine_similarity(*original_vectors[e], edited_vec);
                    rec.similarity = sim;
                    accepted = sim >= thresholds->for_label(entry.label).tau;
                }
                ComposedItem composed =
                    compose_item(*original, accepted ? &edited : nullptr, plan.seed, config, *backends.fractals);
                rec.mask_kind = composed.mask_kind;
                rec.blend_width = composed.blend_width;
                rec.fractal_id = composed.fractal_id;
                rec.accepted = accepted;
                if (accepted) {
                    const fs::path out = output_image_path(config.out_dir, entry.id, index);
                    write_png(composed.image, out);
                    rec.out_path = out.string();
                }
                journal.append(rec);
            } catch (const Error& err) {
                logger()->error("{} #{}: {}", entry.id, index, err.what());
                rec.accepted = false;
                rec.out_path.clear();
                rec.error = err.what();
            }
        }
    });

    for (char r : reused) result.reused += r;
    write_output_manifest(records, manifest_out, &manifest);
    journal.discard();

    if (thresholds) {
        std::size_t accepted = 0, rejected = 0;
        for (const auto& r : records) {
            if (r.error) continue;
            (r.accepted ? accepted : rejected) += 1;
        }
        result.filter_report = stats_report(*thresholds, accepted, rejected);
        detail::write_json_file(*result.filter_report, config.out_dir / "filter_stats.json");
    }

    result.records = std::move(records);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    detail::write_json_file({{"mode", "generation"},
                             {"wall_seconds", result.wall_seconds},
                             {"records", result.records.size()},
                             {"workers", config.workers}},
                            config.out_dir / "timing.json");
    return result;
}

// ---------------------------------------------------------------------------
// Staged flow: edit -> filter -> compose, with edits persisted between stages.

/// One line of the edits manifest.
struct EditRecord {
    std::string source_id;
    int index = 0;
    std::optional<std::string> label;
    std::uint64_t seed = 0;
    std::string prompt_id;
    std::string edited_path;               // empty when the edit failed
    std::optional<bool> accepted;          // set by the filter stage
    std::optional<double> similarity;      // set by the filter stage
    std::optional<std::string> error;

    friend bool operator==(const EditRecord&, const EditRecord&) = default;
};

inline nlohmann::json to_json(const EditRecord& r) {
    nlohmann::json j{{"source_id", r.source_id}, {"index", r.index},         {"seed", r.seed},
                     {"prompt_id", r.prompt_id}, {"edited_path", r.edited_path}};
    j["label"] = r.label ? nlohmann::json(*r.label) : nlohmann::json(nullptr);
    if (r.accepted) j["accepted"] = *r.accepted;
    if (r.similarity) j["similarity"] = *r.similarity;
    if (r.error) j["error"] = *r.error;
    return j;
}

inline EditRecord edit_record_from_json(const nlohmann::json& j) {
    EditRecord r;
    r.source_id = j.at("source_id").get<std::string>();
    r.index = j.at("index").get<int>();
    r.label = detail::optional_string(j, "label");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.edited_path = j.at("edited_path").get<std::string>();
    if (auto it = j.find("accepted"); it != j.end() && !it->is_null()) r.accepted = it->get<bool>();
    if (auto it = j.find("similarity"); it != j.end() && !it->is_null()) r.similarity = it->get<double>();
    r.error = detail::optional_string(j, "error");
    return r;
}

inline void write_edit_records(const std::vector<EditRecord>& records, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ManifestError("cannot write " + path.string());
    for (const auto& r : records) out << to_json(r).dump() << '\n';
}

inline std::vector<EditRecord> read_edit_records(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ManifestError("cannot open " + path.string());
    std::vector<EditRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(edit_record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw ManifestError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

/// Generate and store every edit under out_dir/edits.
inline std::vector<EditRecord> run_edit_stage(const Manifest& manifest, const PipelineConfig& config,
                                              EditBackend& editor, const PromptLibrary& library) {
    config.validate();
    if (!editor.healthy()) throw BackendError("edit backend " + editor.id() + " is not healthy");
    const PromptSet prompts = library.list(config.prompt_task);
    const std::size_t m = static_cast<std::size_t>(config.per_image);
    std::vector<EditRecord> records(manifest.size() * m);
    parallel_for(manifest.size(), config.workers, [&](std::size_t e) {
        const ManifestEntry& entry = manifest.entries[e];
        std::optional<Image> original;
        std::string load_error;
        try {
            original = load_image(entry.path);
        } catch (const ImageError& err) {
            load_error = err.what();
        }
        for (std::size_t k = 0; k < m; ++k) {
            const int index = static_cast<int>(k) + 1;
            const ItemPlan plan = plan_item(config.seed, entry, index, prompts);
            EditRecord& rec = records[e * m + k];
            rec = {entry.id, index, entry.label, plan.seed, plan.prompt.id(), {}, {}, {}, {}};
            if (!original) {
                rec.error = load_error;
                continue;
            }
            try {
                Image edited = edit_item(editor, *original, entry.id, plan);
                const fs::path path = output_image_path(config.out_dir / "edits", entry.id, index);
                write_png(edited, path);
                rec.edited_path = path.string();
            } catch (const Error& err) {
                logger()->error("{} #{}: {}", entry.id, index, err.what());
                rec.error = err.what();
            }
        }
    });
    return records;
}

/// Score stored edits and set their `accepted` flags. Returns the stats report.
inline nlohmann::json run_filter_stage(const Manifest& manifest, std::vector<EditRecord>& edits,
                                       const PipelineConfig& config, Embedder& embedder) {
    if (!embedder.healthy()) throw BackendError("embed backend " + embedder.id() + " is not healthy");
    auto vectors = detail::embed_originals(manifest, embedder, config.workers);
    auto thresholds = detail::build_thresholds(manifest, vectors, config.filter_scope, config.workers);
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < manifest.size(); ++i) position[manifest.entries[i].id] = i;

    parallel_for(edits.size(), config.workers, [&](std::size_t i) {
        EditRecord& rec = edits[i];
        if (rec.error || rec.edited_path.empty()) return;
        auto it = position.find(rec.source_id);
        if (it == position.end() || !vectors[it->second]) {
            rec.error = "no embedding for source '" + rec.source_id + "'";
            return;
        }
        try {
            const double sim = cosine_similarity(*vectors[it->second], embedder.embed(load_image(rec.edited_path)));
            rec.similarity = sim;
            rec.accepted = sim >= thresholds->for_label(rec.label).tau;
        } catch (const Error& err) {
            rec.error = err.what();
        }
    });
    std::size_t accepted = 0, rejected = 0;
    for (const auto& r : edits)
        if (r.accepted) (*r.accepted ? accepted : rejected) += 1;
    return stats_report(*thresholds, accepted, rejected);
}

/// Compose stored edits into final outputs. Edits without a filter verdict count as accepted.
inline std::vector<AugmentedRecord> run_compose_stage(const Manifest& manifest, const std::vector<EditRecord>& edits,
                                                      const PipelineConfig& config, const FractalSet& fractals) {
    config.validate();
    std::map<std::string, const ManifestEntry*> by_id;
    for (const auto& e : manifest.entries) by_id[e.id] = &e;
    std::vector<AugmentedRecord> records(edits.size());
    parallel_for(edits.size(), config.workers, [&](std::size_t i) {
        const EditRecord& edit = edits[i];
        AugmentedRecord& rec = records[i];
        rec.source_id = edit.source_id;
        rec.index = edit.index;
        rec.label = edit.label;
        rec.prompt_id = edit.prompt_id;
        rec.lambda = config.lambda;
        rec.seed = edit.seed;
        rec.similarity = edit.similarity;
        rec.accepted = false;
        if (edit.error) {
            rec.error = edit.error;
            return;
        }
        try {
            auto it = by_id.find(edit.source_id);
            if (it == by_id.end()) throw ManifestError("unknown source id '" + edit.source_id + "'");
            Image original = load_image(it->second->path);
            const bool accepted = edit.accepted.value_or(true);
            std::optional<Image> edited;
            if (accepted) edited = load_image(edit.edited_path);
            ComposedItem composed =
                compose_item(original, edited ? &*edited : nullptr, edit.seed, config, fractals);
            rec.mask_kind = composed.mask_kind;
            rec.blend_width = composed.blend_width;
            rec.fractal_id = composed.fractal_id;
            rec.accepted = accepted;
            if (accepted) {
                const fs::path out = output_image_path(config.out_dir, edit.source_id, edit.index);
                write_png(composed.image, out);
                rec.out_path = out.string();
            }
        } catch (const Error& err) {
            rec.error = err.what();
        }
    });
    write_output_manifest(records, config.manifest_path(), &manifest);
    return records;
}

}  // namespace genmix
