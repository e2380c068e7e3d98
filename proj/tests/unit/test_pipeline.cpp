#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "genmix/pipeline.hpp"
#include "test_support.hpp"

using namespace genmix;
using genmix::testing::file_bytes;
using genmix::testing::TempDir;

namespace {

Manifest make_corpus(const TempDir& dir, int n, int size = 48, bool labels = false) {
    std::filesystem::create_directories(dir / "src");
    std::ofstream out(dir / "src" / "manifest.jsonl");
    for (int i = 0; i < n; ++i) {
        const std::string id = "img" + std::to_string(i);
        write_png(genmix::testing::corner_blend_image(size, size + i % 3, static_cast<std::uint32_t>(100 + i)),
                  dir / "src" / (id + ".png"));
        nlohmann::json line{{"id", id}, {"path", id + ".png"}};
        if (labels) line["label"] = i % 2 ? "odd" : "even";
        out << line.dump() << '\n';
    }
    out.close();
    return load_manifest(dir / "src" / "manifest.jsonl");
}

std::shared_ptr<const FractalSet> small_fractals() {
    static auto set = std::make_shared<const FractalSet>(builtin_fractal_set(32, 10'000, 0));
    return set;
}

PipelineBackends mock_backends() {
    return {std::make_shared<MockEditBackend>(), std::make_shared<MockEmbedder>(), small_fractals(), PromptLibrary()};
}

PipelineConfig config_for(const std::filesystem::path& out, int m = 2, int workers = 1) {
    PipelineConfig c;
    c.per_image = m;
    c.seed = 1234;
    c.workers = workers;
    c.out_dir = out;
    return c;
}

/// Everything a run wrote, keyed by path relative to its output directory.
std::map<std::string, std::vector<unsigned char>> output_pngs(const std::filesystem::path& out) {
    std::map<std::string, std::vector<unsigned char>> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(out / "images"))
        files[std::filesystem::relative(e.path(), out).string()] = file_bytes(e.path());
    return files;
}

/// Records with out_path made relative, so runs into different dirs compare equal.
std::vector<AugmentedRecord> relative(std::vector<AugmentedRecord> records, const std::filesystem::path& out) {
    for (auto& r : records)
        if (!r.out_path.empty()) r.out_path = std::filesystem::relative(r.out_path, out).string();
    return records;
}

// Originals embed to (1,0), (0,1), (1,1)/sqrt2 by their first channel; edits to
// their source's vector, except the one edit whose seed is `negate_seed`.
class ScriptedEmbedder final : public Embedder {
public:
    explicit ScriptedEmbedder(std::uint64_t negate_seed) : negate_marker_(static_cast<int>(negate_seed % 251)) {}
    std::string id() const override { return "scripted"; }
    EmbeddingVector embed(const Image& image) override {
        const int source = quantize_channel(image.at(0, 0, 0)) / 10 - 1;
        const double r = 1.0 / std::sqrt(2.0);
        const std::vector<std::vector<double>> base{{1, 0}, {0, 1}, {r, r}};
        std::vector<double> v = base.at(static_cast<std::size_t>(source));
        const bool edited = quantize_channel(image.at(0, 0, 1)) == 200;
        if (edited && quantize_channel(image.at(0, 0, 2)) == negate_marker_)
            for (double& x : v) x = -x;
        return EmbeddingVector(v);
    }

private:
    int negate_marker_;
};

class MarkingEditor final : public EditBackend {
public:
    std::string id() const override { return "marking"; }

protected:
    Image do_edit(const EditRequest& req) override {
        Image out = req.image;
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x) {
                out.at(y, x, 1) = 200.0f / 255.0f;
                out.at(y, x, 2) = static_cast<float>(req.seed % 251) / 255.0f;
            }
        return out;
    }
};

class FailingEditor final : public EditBackend {
public:
    explicit FailingEditor(std::string bad) : bad_(std::move(bad)) {}
    std::string id() const override { return "failing"; }

protected:
    Image do_edit(const EditRequest& req) override {
        if (req.source_id == bad_) throw BackendError("boom", 500);
        return mock_edit(req.image, req.instruction, req.seed);
    }

private:
    std::string bad_;
};

}  // namespace

TEST(Pipeline, ItemSeedsAreStableAndDistinct) {
    std::set<std::uint64_t> seeds;
    for (int i = 0; i < 50; ++i)
        for (int a = 1; a <= 3; ++a) seeds.insert(derive_item_seed(7, "img" + std::to_string(i), a));
    EXPECT_EQ(seeds.size(), 150u);
    EXPECT_EQ(derive_item_seed(7, "x", 1), derive_item_seed(7, "x", 1));
    EXPECT_NE(derive_item_seed(7, "x", 1), derive_item_seed(8, "x", 1));
}

TEST(Pipeline, SixRecordsInManifestOrderAndBitIdenticalAcrossRuns) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 3);
    auto backends = mock_backends();
    auto first = run_pipeline(manifest, config_for(dir / "a"), backends);
    auto second = run_pipeline(manifest, config_for(dir / "b"), backends);
    ASSERT_EQ(first.records.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(first.records[i].source_id, "img" + std::to_string(i / 2));
        EXPECT_EQ(first.records[i].index, static_cast<int>(i % 2) + 1);
        EXPECT_DOUBLE_EQ(first.records[i].lambda, 0.2);
    }
    EXPECT_EQ(relative(first.records, dir / "a"), relative(second.records, dir / "b"));
    EXPECT_EQ(output_pngs(dir / "a"), output_pngs(dir / "b"));
    EXPECT_EQ(read_output_manifest(dir / "a" / "manifest.jsonl"), first.records);
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / "filter_stats.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / "timing.json"));
    EXPECT_FALSE(std::filesystem::exists(dir / "a" / "manifest.jsonl.partial"));
}

TEST(Pipeline, WorkerCountDoesNotChangeOutputs) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 6);
    auto backends = mock_backends();
    auto one = run_pipeline(manifest, config_for(dir / "w1", 3, 1), backends);
    auto eight = run_pipeline(manifest, config_for(dir / "w8", 3, 8), backends);
    EXPECT_EQ(relative(one.records, dir / "w1"), relative(eight.records, dir / "w8"));
    EXPECT_EQ(output_pngs(dir / "w1"), output_pngs(dir / "w8"));
    EXPECT_EQ(one.filter_report->dump(), eight.filter_report->dump());
}

TEST(Pipeline, FilterRejectsTheEditBelowThreshold) {
    TempDir dir;
    std::filesystem::create_directories(dir / "src");
    std::ofstream out(dir / "src" / "m.jsonl");
    for (int i = 0; i < 3; ++i) {
        const float v = static_cast<float>((i + 1) * 10) / 255.0f;
        write_png(genmix::testing::constant_image(40, 40, v, 0.5f, 0.5f), dir / "src" / (std::to_string(i) + ".png"));
        out << nlohmann::json{{"id", "s" + std::to_string(i)}, {"path", std::to_string(i) + ".png"}}.dump() << '\n';
    }
    out.close();
    Manifest manifest = load_manifest(dir / "src" / "m.jsonl");
    PipelineConfig config = config_for(dir / "out");
    const std::uint64_t target = derive_item_seed(config.seed, "s1", 2);

    std::set<std::uint64_t> markers;
    for (const auto& e : manifest.entries)
        for (int a = 1; a <= 2; ++a) markers.insert(derive_item_seed(config.seed, e.id, a) % 251);
    ASSERT_EQ(markers.size(), 6u) << "marker collision; pick another seed";

    PipelineBackends backends{std::make_shared<MarkingEditor>(), std::make_shared<ScriptedEmbedder>(target),
                              small_fractals(), PromptLibrary()};
    auto result = run_pipeline(manifest, config, backends);
    ASSERT_EQ(result.records.size(), 6u);
    int accepted = 0;
    for (const auto& r : result.records) {
        EXPECT_FALSE(r.error);
        if (r.accepted) {
            ++accepted;
            EXPECT_TRUE(std::filesystem::exists(r.out_path));
            EXPECT_NEAR(*r.similarity, 1.0, 1e-12);
        } else {
            EXPECT_EQ(r.source_id, "s1");
            EXPECT_EQ(r.index, 2);
            EXPECT_TRUE(r.out_path.empty());
            EXPECT_FALSE(std::filesystem::exists(output_image_path(config.out_dir, "s1", 2)));
            EXPECT_NEAR(*r.similarity, -1.0, 1e-12);
        }
    }
    EXPECT_EQ(accepted, 5);
    const auto& report = *result.filter_report;
    EXPECT_NEAR(report["tau"].get<double>(), -0.19526, 1e-4);
    EXPECT_EQ(report["n_accepted"], 5);
    EXPECT_EQ(report["n_rejected"], 1);
}

TEST(Pipeline, FilterOffAcceptsEverything) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 2);
    PipelineConfig config = config_for(dir / "out");
    config.filter_enabled = false;
    PipelineBackends backends{std::make_shared<MockEditBackend>(), nullptr, small_fractals(), PromptLibrary()};
    auto result = run_pipeline(manifest, config, backends);
    for (const auto& r : result.records) {
        EXPECT_TRUE(r.accepted);
        EXPECT_FALSE(r.similarity);
    }
    EXPECT_FALSE(result.filter_report);
}

TEST(Pipeline, BackendFailureBecomesAnErrorRecord) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 3);
    PipelineBackends backends{std::make_shared<FailingEditor>("img1"), std::make_shared<MockEmbedder>(),
                              small_fractals(), PromptLibrary()};
    auto result = run_pipeline(manifest, config_for(dir / "out"), backends);
    ASSERT_EQ(result.records.size(), 6u);
    for (const auto& r : result.records) {
        if (r.source_id == "img1") {
            ASSERT_TRUE(r.error);
            EXPECT_NE(r.error->find("boom"), std::string::npos);
            EXPECT_FALSE(r.accepted);
        } else {
            EXPECT_FALSE(r.error);
        }
    }
}

TEST(Pipeline, ResumeReusesFinishedRecords) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 3);
    auto backends = mock_backends();
    auto config = config_for(dir / "out");
    auto first = run_pipeline(manifest, config, backends);
    auto bytes = output_pngs(dir / "out");

    // Interrupted run: only a partial journal with the first two records.
    std::filesystem::remove(config.manifest_path());
    {
        std::ofstream partial(config.manifest_path().string() + ".partial");
        partial << to_json(first.records[0]).dump() << '\n' << to_json(first.records[1]).dump() << '\n';
    }
    auto resumed = run_pipeline(manifest, config, backends);
    EXPECT_EQ(resumed.reused, 2u);
    EXPECT_EQ(resumed.records, first.records);
    EXPECT_EQ(output_pngs(dir / "out"), bytes);

    auto again = run_pipeline(manifest, config, backends);
    EXPECT_EQ(again.reused, 6u);

    // A changed lambda invalidates everything.
    config.lambda = 0.3;
    EXPECT_EQ(run_pipeline(manifest, config, backends).reused, 0u);
}

TEST(Pipeline, LabelsAreCopiedVerbatim) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 4, 40, true);
    auto backends = mock_backends();
    auto config = config_for(dir / "out", 1);
    config.filter_scope = FilterScope::per_class;
    auto result = run_pipeline(manifest, config, backends);
    for (std::size_t i = 0; i < result.records.size(); ++i)
        EXPECT_EQ(result.records[i].label, manifest.entries[i].label);
    EXPECT_TRUE((*result.filter_report)["per_class"].contains("odd"));
}

TEST(Pipeline, StagedFlowMatchesRun) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 4);
    auto backends = mock_backends();
    auto config = config_for(dir / "run");
    auto direct = run_pipeline(manifest, config, backends);

    auto staged_config = config_for(dir / "staged");
    MockEditBackend editor;
    MockEmbedder embedder;
    auto edits = run_edit_stage(manifest, staged_config, editor, PromptLibrary());
    write_edit_records(edits, dir / "staged" / "edits.jsonl");
    auto reloaded = read_edit_records(dir / "staged" / "edits.jsonl");
    EXPECT_EQ(reloaded, edits);
    auto report = run_filter_stage(manifest, reloaded, staged_config, embedder);
    auto composed = run_compose_stage(manifest, reloaded, staged_config, *small_fractals());

    EXPECT_EQ(relative(direct.records, dir / "run"), relative(composed, dir / "staged"));
    EXPECT_EQ(output_pngs(dir / "run"), output_pngs(dir / "staged"));
    EXPECT_EQ(report["tau"], (*direct.filter_report)["tau"]);
}

TEST(Pipeline, InvalidConfigurationsAreRejected) {
    TempDir dir;
    Manifest manifest = make_corpus(dir, 2);
    auto backends = mock_backends();
    auto config = config_for(dir / "out");
    config.lambda = 1.0;
    EXPECT_THROW(run_pipeline(manifest, config, backends), DomainError);
    config = config_for(dir / "out");
    config.masks.clear();
    EXPECT_THROW(run_pipeline(manifest, config, backends), DomainError);
    EXPECT_THROW(run_pipeline(Manifest{}, config_for(dir / "out"), backends), DomainError);
    Manifest single = make_corpus(dir, 1);
    EXPECT_THROW(run_pipeline(single, config_for(dir / "out"), backends), DomainError);
}

TEST(Pipeline, OutputPathsAreSanitized) {
    EXPECT_EQ(sanitize_file_stem("a/b c:d"), "a_b_c_d");
    EXPECT_EQ(output_image_path("out", "x/y", 2), std::filesystem::path("out/images/x_y_2.png"));
}
