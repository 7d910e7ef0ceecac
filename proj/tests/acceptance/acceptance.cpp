// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per primary criterion on stdout,
// progress on stderr. Exit status is 1 when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scenes.hpp"
#include "semsplat/checkpoint.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/evalkit.hpp"
#include "semsplat/gradcheck.hpp"
#include "semsplat/query.hpp"
#include "semsplat/service.hpp"
#include "semsplat/synthetic.hpp"
#include "semsplat/trainer.hpp"

using namespace semsplat;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

void progress(const std::string& msg) {
    std::fprintf(stderr, "[acceptance] %s\n", msg.c_str());
    std::fflush(stderr);
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void gradient_suite() {
    Stopwatch sw;
    const auto suites = gradcheck_all(GradCheckOptions{});
    const double secs = sw.seconds();
    bool ok = secs < 300.0;
    std::ostringstream detail;
    for (const GradCheckSummary& s : suites) {
        ok = ok && s.passed() && s.configs >= 100 && s.tolerance <= 1e-3;
        detail << s.name << " " << fmt("%.2e", s.max_rel_error) << " (" << s.configs << " configs) ";
    }
    detail << "in " << fmt("%.1f", secs) << " s";
    verdict(ok, "gradient-suite", detail.str());
}

void rasterizer_oracle() {
    std::mt19937_64 rng(2024);
    Stopwatch sw;
    double worst = 0.0;
    for (int scene = 0; scene < 100; ++scene) {
        const SplatSet s = testing::random_splats(rng, 1 + rng() % 200, 64, 64, 3);
        const RasterSettings r;
        const RenderOutput tiled = rasterize_forward(s, 64, 64, r);
        const RenderOutput oracle = rasterize_oracle(s, 64, 64, r);
        worst = std::max({worst, testing::max_diff(tiled.color, oracle.color),
                          testing::max_diff(tiled.depth, oracle.depth),
                          testing::max_diff(tiled.feature, oracle.feature)});
    }
    const double secs = sw.seconds();
    verdict(worst < 1e-5 && secs < 60.0, "rasterizer-oracle",
            "max abs diff " + fmt("%.2e", worst) + " over 100 scenes in " + fmt("%.2f", secs) + " s");
}

void identity_deformation() {
    const GaussianCloud cloud = testing::random_cloud(200, 9);
    SceneModel model = SceneModel::create(cloud, 16, 0);
    model.tracker = SemanticTracker::zeros(cloud.feature_dim);
    const Camera cam = testing::test_camera(64, 64);
    const RasterSettings r;
    const RenderOutput ref = render_static(cloud, cam, r);
    std::mt19937_64 rng(10);
    int identical = 0;
    for (int k = 0; k < 10; ++k) {
        const double t = std::uniform_real_distribution<double>(0, 1)(rng);
        const RenderOutput out = render_model(model, cam, t, r).output;
        if (out.color == ref.color && out.depth == ref.depth && out.feature == ref.feature) ++identical;
    }
    verdict(identical == 10, "identity-deformation", std::to_string(identical) + "/10 times pixel-identical");
}

void query_math(const QueryEngine& engine, const Dataset& dataset) {
    const std::vector<double> sym = {0.3, 0.3, 0.3, 0.3};
    const double s_sym = relevancy_from_dots(0.3, sym);
    const std::vector<double> neg = {-1.0, -1.0, -1.0, -1.0};
    const double s_two = relevancy_from_dots(1.0, neg);
    const double want_two = 1.0 / (1.0 + std::exp(-2.0));

    std::size_t checked = 0, mismatched = 0;
    for (std::size_t f : dataset.holdout_indices()) {
        QueryRequest req;
        req.prompt = dataset.manifest.classes.front();
        req.time = dataset.frames[f].timestamp;
        const QueryResult r = engine.query(req);
        for (std::size_t i = 0; i < r.mask.size(); ++i) {
            ++checked;
            if (r.mask[i] != (r.relevancy[i] >= 0.4 ? 1 : 0)) ++mismatched;
        }
    }
    const bool ok = std::abs(s_sym - 0.5) < 1e-12 && std::abs(s_two - want_two) < 1e-12 && checked > 0 &&
                    mismatched == 0;
    verdict(ok, "query-math",
            "symmetric " + fmt("%.12f", s_sym) + ", (1,-1,-1,-1) " + fmt("%.12f", s_two) + " vs " +
                fmt("%.12f", want_two) + ", mask mismatches " + std::to_string(mismatched) + "/" +
                std::to_string(checked));
}

struct FixtureRun {
    fs::path dir;
    double seconds = 0.0;
    EvalReport report;
};

fs::path manifest_of(const fs::path& dir) { return dir / "manifest.json"; }

LoadedScene load_trained(const fs::path& dir, const fs::path& checkpoint) {
    const SceneManifest m = read_manifest(manifest_of(dir));
    return load_scene(checkpoint, m.resolve(m.codec), m.resolve(m.lexicon));
}

EvalReport train_and_evaluate(const fs::path& dir, const TrainConfig& config, const fs::path& out) {
    const Dataset ds = load_dataset(manifest_of(dir));
    const TrainResult t = train_scene(ds, config, out / "log.jsonl");
    save_checkpoint(t.checkpoint, out / "checkpoint");
    const LoadedScene scene = load_trained(dir, out / "checkpoint");
    return evaluate(scene.engine, ds, ds.holdout_indices());
}

FixtureRun full_pipeline(const fs::path& dir, int iterations) {
    FixtureRun run;
    run.dir = dir;
    fs::remove_all(dir);
    Stopwatch sw;
    SyntheticSpec spec;
    spec.classes = 3;
    spec.frames = 60;
    spec.width = 128;
    spec.height = 128;
    spec.seed = 0;
    write_synthetic_dataset(spec, dir);
    progress("codec-train in " + dir.string());
    codec_train_dataset(manifest_of(dir), CodecTrainOptions{});
    progress("train " + std::to_string(iterations) + " iterations");
    TrainConfig config;
    config.iterations = iterations;
    config.seed = 0;
    run.report = train_and_evaluate(dir, config, dir / "run_seed0");
    run.seconds = sw.seconds();
    return run;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents for every regular file under `dir`.
std::vector<std::pair<std::string, std::string>> tree_bytes(const fs::path& dir) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out.emplace_back(fs::relative(e.path(), dir).string(), read_bytes(e.path()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::uint8_t> all_masks(const QueryEngine& engine, const Dataset& ds) {
    std::vector<std::uint8_t> out;
    for (std::size_t f : ds.holdout_indices()) {
        for (const std::string& cls : ds.manifest.classes) {
            QueryRequest req;
            req.prompt = cls;
            req.time = ds.frames[f].timestamp;
            const QueryResult r = engine.query(req);
            out.insert(out.end(), r.mask.begin(), r.mask.end());
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semsplat acceptance run"};
    fs::path work = fs::temp_directory_path() / "semsplat_acceptance";
    int iterations = 3000;
    app.add_option("--work", work, "scratch directory (wiped)");
    app.add_option("--iterations", iterations, "training iterations per run")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    try {
        progress("gradient suite");
        gradient_suite();
        progress("rasterizer oracle");
        rasterizer_oracle();
        identity_deformation();

        progress("end-to-end fixture");
        const FixtureRun first = full_pipeline(work / "fixture_a", iterations);
        {
            const EvalReport& r = first.report;
            bool ok = first.seconds <= 20 * 60 && r.frames.size() == 8 && r.psnr_mean >= 25.0 &&
                      r.iou.excluded.empty();
            std::ostringstream detail;
            for (std::size_t k = 0; k < r.class_names.size(); ++k) {
                const auto& v = r.iou.per_class[k];
                ok = ok && v && *v >= 70.0;
                detail << r.class_names[k] << " IoU " << (v ? fmt("%.2f", *v) : std::string("n/a")) << "%, ";
            }
            detail << "held-out PSNR " << fmt("%.2f", r.psnr_mean) << " dB on " << r.frames.size() << " frames, "
                   << fmt("%.1f", first.seconds / 60.0) << " min";
            verdict(ok, "end-to-end-fixture", detail.str());
        }

        const Dataset ds = load_dataset(manifest_of(first.dir));
        const LoadedScene scene = load_trained(first.dir, first.dir / "run_seed0" / "checkpoint");

        progress("ablation");
        {
            bool ok = true;
            std::ostringstream detail;
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                TrainConfig full;
                full.iterations = iterations;
                full.seed = seed;
                const fs::path base = first.dir / ("ablation_seed" + std::to_string(seed));
                const double p_full = seed == 0 ? first.report.psnr_mean
                                                : train_and_evaluate(first.dir, full, base / "full").psnr_mean;
                TrainConfig no_rs = full;
                no_rs.loss.region_smoothness = false;
                const double p_rs = train_and_evaluate(first.dir, no_rs, base / "no_rs").psnr_mean;
                TrainConfig no_tracker = full;
                no_tracker.tracker_enabled = false;
                const double p_tr = train_and_evaluate(first.dir, no_tracker, base / "no_tracker").psnr_mean;
                ok = ok && p_full >= p_rs && p_full >= p_tr;
                detail << "seed " << seed << ": full " << fmt("%.2f", p_full) << " noRS " << fmt("%.2f", p_rs)
                       << " noTracker " << fmt("%.2f", p_tr) << "; ";
                progress(detail.str());
            }
            verdict(ok, "ablation-direction", detail.str());
        }

        query_math(scene.engine, ds);

        progress("determinism rerun");
        {
            const FixtureRun second = full_pipeline(work / "fixture_b", iterations);
            const auto a = tree_bytes(first.dir / "run_seed0" / "checkpoint");
            const auto b = tree_bytes(second.dir / "run_seed0" / "checkpoint");
            const LoadedScene other = load_trained(second.dir, second.dir / "run_seed0" / "checkpoint");
            const Dataset ds_b = load_dataset(manifest_of(second.dir));
            const bool same_ckpt = !a.empty() && a == b;
            const bool same_masks = all_masks(scene.engine, ds) == all_masks(other.engine, ds_b);
            verdict(same_ckpt && same_masks, "determinism",
                    std::string("checkpoint files ") + (same_ckpt ? "identical" : "differ") + " (" +
                        std::to_string(a.size()) + " files), masks " + (same_masks ? "identical" : "differ"));
        }

        progress("throughput");
        {
            QueryRequest req;
            req.prompt = ds.manifest.classes.front();
            req.time = 0.5;
            const auto rows = bench_resolutions(scene.engine, req, {{64, 64}, {128, 128}, {256, 256}}, 7);
            bool monotone = true;
            std::ostringstream detail;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (i > 0 && rows[i].stats.median_ms < rows[i - 1].stats.median_ms) monotone = false;
                detail << rows[i].width << "x" << rows[i].height << " median " << fmt("%.2f", rows[i].stats.median_ms)
                       << " ms (" << fmt("%.1f", rows[i].stats.fps) << " FPS); ";
            }
            verdict(monotone && rows.size() == 3, "throughput-report", detail.str());
        }
    } catch (const std::exception& e) {
        std::printf("FAIL acceptance-run: %s\n", e.what());
        return 1;
    }
    return failures == 0 ? 0 : 1;
}
