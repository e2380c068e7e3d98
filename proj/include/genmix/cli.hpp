#pragma once

// Command-line front end: run, edit, filter, compose, fractal gen, overhead, stats.
//
// A JSON config file (--config) may set any flag by its long name, e.g.
// {"lambda": 0.2, "blend-width": 20, "masks": "hor,ver"}; flags given on the
// command line take precedence. Its optional "prompts" array extends the
// prompt library with {id, text, task} objects.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "genmix/edit_backend.hpp"
#include "genmix/errors.hpp"
#include "genmix/faithful_filter.hpp"
#include "genmix/fractal.hpp"
#include "genmix/image_io.hpp"
#include "genmix/log.hpp"
#include "genmix/manifest.hpp"
#include "genmix/mask.hpp"
#include "genmix/metrics.hpp"
#include "genmix/pipeline.hpp"
#include "genmix/prompts.hpp"

namespace genmix::cli {

struct Options {
    std::string config_file;
    std::string log_level = "info";

    std::string manifest;
    std::string out_dir = "genmix_out";
    std::string out_manifest;
    std::uint64_t seed = 0;
    double lambda = default_lambda;
    int blend_width = default_blend_width;
    int per_image = default_per_image;
    std::string masks = "hor,ver,hor_flip,ver_flip";
    std::string prompts = "in-domain";
    std::string edit_backend = "mock";
    std::string embed_backend = "mock";
    std::string filter = "on";
    std::string filter_scope = "global";
    int workers = 1;
    std::string fractals = "builtin";
    double timeout_seconds = 120.0;

    std::string edits;
    std::string edits_out;
    std::string stats_out;

    std::string spec = "sierpinski";
    int size = 256;
    std::size_t points = 200'000;
    std::string out;

    std::string t_aug;
    std::string t_van;
};

/// Reads a flat JSON object into CLI11 config items, routing each key to the
/// deepest selected subcommand that owns an option of that name.
class JsonConfig : public CLI::Config {
public:
    explicit JsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        nlohmann::json j;
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const auto& name = opt->get_lnames().front();
            if (opt->count() > 0)
                j[name] = opt->results().size() == 1 ? nlohmann::json(opt->results().front())
                                                     : nlohmann::json(opt->results());
            else if (default_also && !opt->get_default_str().empty())
                j[name] = opt->get_default_str();
        }
        return j.dump(2);
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(input);
        } catch (const nlohmann::json::exception& e) {
            throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");

        std::vector<const CLI::App*> chain{root_};
        std::vector<std::string> names;
        for (const CLI::App* app = root_;;) {
            auto subs = app->get_subcommands();
            if (subs.empty()) break;
            app = subs.front();
            chain.push_back(app);
            names.push_back(app->get_name());
        }

        std::vector<CLI::ConfigItem> items;
        for (const auto& [raw_key, value] : j.items()) {
            if (raw_key == "prompts") continue;
            std::string key = raw_key;
            std::replace(key.begin(), key.end(), '_', '-');
            CLI::ConfigItem item;
            item.name = key;
            for (std::size_t depth = chain.size(); depth-- > 0;) {
                if (chain[depth]->get_option_no_throw("--" + key)) {
                    item.parents.assign(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(depth));
                    break;
                }
            }
            auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
            if (value.is_array())
                for (const auto& v : value) item.inputs.push_back(scalar(v));
            else
                item.inputs.push_back(scalar(value));
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    const CLI::App* root_;
};

namespace detail {

inline void add_pipeline_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--seed", o.seed, "Run seed")->capture_default_str();
    cmd.add_option("--workers", o.workers, "Parallel workers")->capture_default_str()->check(CLI::PositiveNumber);
}

inline void add_compose_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--lambda", o.lambda, "Fractal interpolation factor in [0,1)")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--blend-width", o.blend_width, "Mask blending width in pixels")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--masks", o.masks, "Comma list from hor,ver,hor_flip,ver_flip,patchswap")->capture_default_str();
    cmd.add_option("--fractals", o.fractals, "Fractal directory or 'builtin'")->capture_default_str();
}

inline void add_edit_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--per-image", o.per_image, "Augmentations per image (m)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd.add_option("--prompts", o.prompts, "Prompt set")
        ->capture_default_str()
        ->check(CLI::IsMember({"in-domain", "domain-adaptation"}));
    cmd.add_option("--edit-backend", o.edit_backend, "mock | dir:PATH | http:URL")->capture_default_str();
    cmd.add_option("--timeout", o.timeout_seconds, "HTTP timeout in seconds")->capture_default_str();
}

inline void add_filter_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--embed-backend", o.embed_backend, "mock | http:URL")->capture_default_str();
    cmd.add_option("--filter-scope", o.filter_scope, "Threshold scope")
        ->capture_default_str()
        ->check(CLI::IsMember({"global", "per-class"}));
}

inline HttpOptions http_options(const Options& o) {
    HttpOptions h;
    h.timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout_seconds * 1000.0));
    h.max_in_flight = std::max(1, o.workers);
    return h;
}

inline PromptLibrary prompt_library(const Options& o) {
    PromptLibrary lib;
    if (o.config_file.empty()) return lib;
    std::ifstream in(o.config_file);
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_object() && j.contains("prompts")) lib.extend_from_json(j["prompts"]);
    return lib;
}

inline std::shared_ptr<const FractalSet> fractal_set(const Options& o) {
    if (o.fractals == "builtin") return std::make_shared<const FractalSet>(builtin_fractal_set());
    return std::make_shared<const FractalSet>(load_fractal_dir(o.fractals));
}

/// A number of seconds, or the path of a timing report written by `run`.
inline double seconds_or_report(const std::string& value) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    return read_timing_seconds(value);
}

inline void emit(const nlohmann::json& report, const std::string& path) {
    std::cout << report.dump(2) << std::endl;
    if (!path.empty()) {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw Error("cannot write " + path);
        out << report.dump(2) << '\n';
    }
}

}  // namespace detail

inline PipelineConfig to_pipeline_config(const Options& o) {
    PipelineConfig c;
    c.lambda = o.lambda;
    c.blend_width = o.blend_width;
    c.per_image = o.per_image;
    c.masks = parse_mask_list(o.masks);
    c.prompt_task = prompt_task_from_string(o.prompts);
    c.seed = o.seed;
    c.filter_enabled = o.filter == "on";
    c.filter_scope = filter_scope_from_string(o.filter_scope);
    c.workers = o.workers;
    c.out_dir = o.out_dir;
    c.out_manifest = o.out_manifest;
    return c;
}

/// CLI application bound to `o`. Subcommand actions run through `dispatch`.
inline std::unique_ptr<CLI::App> build_app(Options& o) {
    auto app = std::make_unique<CLI::App>("Generative data augmentation: edit, filter, concatenate, fractal-blend");
    app->fallthrough();
    app->require_subcommand(1);
    app->set_config("--config", "", "JSON config file; command-line flags override it")
        ->each([&o](const std::string& path) { o.config_file = path; });
    app->config_formatter(std::make_shared<JsonConfig>(app.get()));
    app->add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    auto* run = app->add_subcommand("run", "Full pipeline: edit, filter, compose");
    run->add_option("--manifest", o.manifest, "Input manifest (JSON lines)")->required();
    run->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
    run->add_option("--out-manifest", o.out_manifest, "Output manifest (default OUT_DIR/manifest.jsonl)");
    detail::add_pipeline_flags(*run, o);
    detail::add_edit_flags(*run, o);
    detail::add_filter_flags(*run, o);
    detail::add_compose_flags(*run, o);
    run->add_option("--filter", o.filter, "Faithful-image filter")
        ->capture_default_str()
        ->check(CLI::IsMember({"on", "off"}));

    auto* edit = app->add_subcommand("edit", "Generate edited images and an edits manifest");
    edit->add_option("--manifest", o.manifest, "Input manifest")->required();
    edit->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
    edit->add_option("--edits", o.edits, "Edits manifest to write (default OUT_DIR/edits.jsonl)");
    detail::add_pipeline_flags(*edit, o);
    detail::add_edit_flags(*edit, o);

    auto* filter = app->add_subcommand("filter", "Score stored edits against the faithful threshold");
    filter->add_option("--manifest", o.manifest, "Input manifest")->required();
    filter->add_option("--edits", o.edits, "Edits manifest to read")->required();
    filter->add_option("--edits-out", o.edits_out, "Where to write scored edits (default: overwrite --edits)");
    filter->add_option("--stats-out", o.stats_out, "Stats report path (default: next to the edits manifest)");
    filter->add_option("--workers", o.workers, "Parallel workers")->capture_default_str();
    detail::add_filter_flags(*filter, o);

    auto* compose = app->add_subcommand("compose", "Concatenate and fractal-blend stored edits");
    compose->add_option("--manifest", o.manifest, "Input manifest")->required();
    compose->add_option("--edits", o.edits, "Edits manifest to read")->required();
    compose->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
    compose->add_option("--out-manifest", o.out_manifest, "Output manifest (default OUT_DIR/manifest.jsonl)");
    compose->add_option("--workers", o.workers, "Parallel workers")->capture_default_str();
    detail::add_compose_flags(*compose, o);

    auto* fractal = app->add_subcommand("fractal", "Fractal utilities");
    fractal->require_subcommand(1);
    auto* gen = fractal->add_subcommand("gen", "Render a built-in IFS fractal to PNG");
    gen->add_option("--spec", o.spec, "Built-in fractal name")->capture_default_str();
    gen->add_option("--size", o.size, "Image side in pixels")->capture_default_str()->check(CLI::PositiveNumber);
    gen->add_option("--points", o.points, "Chaos-game points")->capture_default_str();
    gen->add_option("--seed", o.seed, "Seed")->capture_default_str();
    gen->add_option("--out", o.out, "Output PNG")->required();

    auto* overhead = app->add_subcommand("overhead", "Augmentation overhead (T_aug - T_van) / T_van * 100");
    overhead->add_option("--t-aug", o.t_aug, "Seconds, or a timing report from run")->required();
    overhead->add_option("--t-van", o.t_van, "Seconds, or a timing report from run")->required();
    overhead->add_option("--out", o.out, "Also write the report here");

    auto* stats = app->add_subcommand("stats", "Summarize an output manifest");
    stats->add_option("--manifest", o.manifest, "Output manifest")->required();
    stats->add_option("--out", o.out, "Also write the report here");
    return app;
}

/// Execute the parsed subcommand. Returns the process exit code.
inline int dispatch(const CLI::App& app, Options& o) {
    logger()->set_level(spdlog::level::from_str(o.log_level));
    const CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();

    if (name == "run") {
        PipelineConfig config = to_pipeline_config(o);
        Manifest manifest = load_manifest(o.manifest);
        for (const auto& issue : manifest.issues)
            logger()->warn("manifest line {} ({}): {}", issue.line, issue.id, issue.message);
        PipelineBackends backends{make_edit_backend(o.edit_backend, detail::http_options(o)),
                                  config.filter_enabled ? make_embedder(o.embed_backend, detail::http_options(o))
                                                        : nullptr,
                                  detail::fractal_set(o), detail::prompt_library(o)};
        PipelineResult result = run_pipeline(manifest, config, backends);
        RunStats s = run_stats(result.records);
        s.wall_seconds = result.wall_seconds;
        s.filter = result.filter_report;
        nlohmann::json report = s.to_json();
        report["manifest_issues"] = manifest.issues.size();
        report["reused"] = result.reused;
        detail::emit(report, "");
        return 0;
    }
    if (name == "edit") {
        PipelineConfig config = to_pipeline_config(o);
        Manifest manifest = load_manifest(o.manifest);
        auto editor = make_edit_backend(o.edit_backend, detail::http_options(o));
        auto records = run_edit_stage(manifest, config, *editor, detail::prompt_library(o));
        const fs::path path = o.edits.empty() ? config.out_dir / "edits.jsonl" : fs::path(o.edits);
        write_edit_records(records, path);
        std::size_t failed = 0;
        for (const auto& r : records) failed += r.error ? 1 : 0;
        detail::emit({{"edits", records.size()}, {"failed", failed}, {"edits_manifest", path.string()}}, "");
        return 0;
    }
    if (name == "filter") {
        PipelineConfig config = to_pipeline_config(o);
        Manifest manifest = load_manifest(o.manifest);
        auto edits = read_edit_records(o.edits);
        auto embedder = make_embedder(o.embed_backend, detail::http_options(o));
        auto report = run_filter_stage(manifest, edits, config, *embedder);
        write_edit_records(edits, o.edits_out.empty() ? o.edits : o.edits_out);
        const fs::path stats_path =
            o.stats_out.empty() ? fs::path(o.edits).parent_path() / "filter_stats.json" : fs::path(o.stats_out);
        detail::emit(report, stats_path.string());
        return 0;
    }
    if (name == "compose") {
        PipelineConfig config = to_pipeline_config(o);
        Manifest manifest = load_manifest(o.manifest);
        auto edits = read_edit_records(o.edits);
        auto records = run_compose_stage(manifest, edits, config, *detail::fractal_set(o));
        detail::emit(run_stats(records).to_json(), "");
        return 0;
    }
    if (name == "fractal") {
        FractalImage img = generate_ifs(builtin_ifs(o.spec), o.size, o.points, o.seed);
        write_png(img.image, o.out);
        detail::emit({{"fractal_id", img.fractal_id}, {"out", o.out}}, "");
        return 0;
    }
    if (name == "overhead") {
        auto report = OverheadReport::compute(detail::seconds_or_report(o.t_aug), detail::seconds_or_report(o.t_van));
        detail::emit(report.to_json(), o.out);
        return 0;
    }
    if (name == "stats") {
        detail::emit(run_stats(fs::path(o.manifest)).to_json(), o.out);
        return 0;
    }
    return 2;
}

inline int main(int argc, char** argv) {
    Options options;
    auto app = build_app(options);
    try {
        app->parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app->exit(e);
    }
    try {
        return dispatch(*app, options);
    } catch (const std::exception& e) {
        logger()->error("{}", e.what());
        return 1;
    }
}

}  // namespace genmix::cli
