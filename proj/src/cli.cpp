// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "semsplat/checkpoint.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/evalkit.hpp"
#include "semsplat/gradcheck.hpp"
#include "semsplat/image_io.hpp"
#include "semsplat/service.hpp"
#include "semsplat/synthetic.hpp"
#include "semsplat/trainer.hpp"

namespace semsplat {
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Codec and lexicon paths, taken from a manifest unless given explicitly.
struct SceneFiles {
    std::string checkpoint = "checkpoint";
    std::string manifest = "manifest.json";
    std::string codec;
    std::string lexicon;

    void add_flags(CLI::App* app) {
        app->add_option("--checkpoint", checkpoint, "trained checkpoint directory")->capture_default_str();
        app->add_option("--manifest", manifest, "scene manifest used to locate codec and lexicon")
            ->capture_default_str();
        app->add_option("--codec", codec, "codec directory (overrides the manifest)");
        app->add_option("--lexicon", lexicon, "lexicon file (overrides the manifest)");
    }

    void resolve() {
        if (!codec.empty() && !lexicon.empty()) return;
        if (!fs::exists(manifest)) {
            throw UsageError("--codec and --lexicon are required when --manifest '" + manifest + "' does not exist");
        }
        const SceneManifest m = read_manifest(manifest);
        if (codec.empty()) {
            if (m.codec.empty()) throw UsageError("manifest names no codec; run codec-train or pass --codec");
            codec = m.resolve(m.codec).string();
        }
        if (lexicon.empty()) {
            if (m.lexicon.empty()) throw UsageError("manifest names no lexicon; pass --lexicon");
            lexicon = m.resolve(m.lexicon).string();
        }
    }
};

fs::path sibling(const fs::path& out, const std::string& suffix) {
    fs::path p = out;
    p.replace_filename(out.stem().string() + suffix + out.extension().string());
    return p;
}

std::vector<double> parse_embedding(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw UsageError("--embedding: '" + item + "' is not a number");
        }
    }
    if (v.empty()) throw UsageError("--embedding is empty");
    return v;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::Io, "cannot write " + path.string());
    f << text << '\n';
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Dynamic semantic Gaussian splatting for surgical scenes", "semsplat"};
    app.require_subcommand(1);
    std::function<void()> action;

    // gen-synthetic
    SyntheticSpec synth;
    std::string synth_out;
    auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic labelled scene");
    gen->add_option("--out", synth_out, "output directory")->required();
    gen->add_option("--classes", synth.classes)->capture_default_str()->check(CLI::Range(2, 8));
    gen->add_option("--objects", synth.objects, "0 = one per class")->capture_default_str();
    gen->add_option("--frames", synth.frames)->capture_default_str()->check(CLI::Range(2, 100000));
    gen->add_option("--width", synth.width)->capture_default_str()->check(CLI::Range(16, 4096));
    gen->add_option("--height", synth.height)->capture_default_str()->check(CLI::Range(16, 4096));
    gen->add_option("--seed", synth.seed)->capture_default_str();
    gen->add_option("--feature-dim", synth.feature_dim, "compressed dimension")->capture_default_str();
    gen->add_option("--full-dim", synth.full_dim, "embedding dimension")->capture_default_str();
    gen->callback([&] {
        action = [&] {
            write_synthetic_dataset(synth, synth_out);
            std::printf("wrote %d frames to %s\n", synth.frames, (fs::path(synth_out) / "manifest.json").c_str());
        };
    });

    // codec-train
    CodecTrainOptions codec_opts;
    std::string codec_manifest;
    std::string codec_dir = "codec";
    auto* ct = app.add_subcommand("codec-train", "train the feature codec and cache compressed maps");
    ct->add_option("--manifest", codec_manifest, "scene manifest")->required();
    ct->add_option("--epochs", codec_opts.epochs)->capture_default_str()->check(CLI::PositiveNumber);
    ct->add_option("--lr", codec_opts.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
    ct->add_option("--batch-size", codec_opts.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
    ct->add_option("--max-samples", codec_opts.max_samples)->capture_default_str()->check(CLI::PositiveNumber);
    ct->add_option("--seed", codec_opts.seed)->capture_default_str();
    ct->add_option("--codec-dir", codec_dir, "codec directory, relative to the manifest")->capture_default_str();
    ct->callback([&] {
        action = [&] {
            const CodecStageReport r = codec_train_dataset(codec_manifest, codec_opts, codec_dir);
            std::printf("codec trained on %zu samples, final loss %.6g; compressed %zu frames\n", r.training.samples,
                        r.training.final_loss.total, r.frames);
        };
    });

    // train
    TrainConfig train_cfg;
    std::string train_manifest;
    std::string train_out = "checkpoint";
    std::string train_log;
    std::string train_resume;
    std::string train_config;
    bool no_tracker = false;
    bool no_region = false;
    std::optional<int> train_iterations;
    std::optional<std::uint64_t> train_seed;
    auto* tr = app.add_subcommand("train", "fit a dynamic semantic Gaussian scene");
    tr->add_option("--manifest", train_manifest, "scene manifest")->required();
    tr->add_option("--out", train_out, "checkpoint directory")->capture_default_str();
    tr->add_option("--config", train_config, "training configuration JSON file");
    tr->add_option("--iterations", train_iterations)->check(CLI::PositiveNumber);
    tr->add_option("--seed", train_seed);
    tr->add_flag("--no-tracker", no_tracker, "disable the semantic feature tracker");
    tr->add_flag("--no-region", no_region, "disable the region smoothness loss");
    tr->add_option("--log", train_log, "JSON-lines training log");
    tr->add_option("--resume", train_resume, "checkpoint to continue from");
    tr->callback([&] {
        action = [&] {
            if (!train_config.empty()) {
                std::ifstream f(train_config);
                if (!f) fail(ErrorCode::MissingFile, "cannot read " + train_config);
                std::stringstream ss;
                ss << f.rdbuf();
                train_cfg = TrainConfig::from_json(ss.str());
            }
            if (train_iterations) train_cfg.iterations = *train_iterations;
            if (train_seed) train_cfg.seed = *train_seed;
            if (no_tracker) train_cfg.tracker_enabled = false;
            if (no_region) train_cfg.loss.region_smoothness = false;
            train_cfg.validate();
            const Dataset ds = load_dataset(train_manifest, {.require_features = true, .load_lexicon = false,
                                                             .load_codec = false});
            if (!train_log.empty() && fs::exists(train_log) && train_resume.empty()) fs::remove(train_log);
            std::optional<Trainer> trainer;
            if (train_resume.empty()) {
                trainer.emplace(ds, train_cfg);
            } else {
                trainer.emplace(ds, train_cfg, load_checkpoint(train_resume));
            }
            trainer->set_diagnostic_dir(fs::path(train_out) / "diagnostic");
            std::ofstream log;
            if (!train_log.empty()) log.open(train_log, std::ios::app);
            trainer->run([&](const IterationRecord& r) {
                if (log.is_open()) log << record_to_json(r) << '\n';
                if (r.holdout_psnr) {
                    std::printf("iter %lld loss %.5f holdout psnr %.2f dB\n", static_cast<long long>(r.iteration),
                                r.loss.total, *r.holdout_psnr);
                    std::fflush(stdout);
                }
            });
            save_checkpoint(trainer->checkpoint(), train_out);
            std::printf("saved %s (%zu gaussians, %lld iterations)\n", train_out.c_str(),
                        trainer->model().cloud.size(), static_cast<long long>(trainer->iteration()));
        };
    });

    // render
    std::string render_ckpt = "checkpoint";
    std::string render_out;
    double render_time = 0.0;
    int render_w = 0;
    int render_h = 0;
    std::string render_depth;
    auto* rd = app.add_subcommand("render", "render colour (and optionally depth) at a time");
    rd->add_option("--checkpoint", render_ckpt)->capture_default_str();
    rd->add_option("--time", render_time, "normalized time")->required()->check(CLI::Range(0.0, 1.0));
    rd->add_option("--out", render_out, "colour image (.png/.ppm)")->required();
    rd->add_option("--depth-out", render_depth, "depth heatmap image");
    rd->add_option("--width", render_w)->check(CLI::Range(1, 4096));
    rd->add_option("--height", render_h)->check(CLI::Range(1, 4096));
    rd->callback([&] {
        action = [&] {
            if ((render_w == 0) != (render_h == 0)) throw UsageError("--width and --height go together");
            const Checkpoint ckpt = load_checkpoint(render_ckpt);
            if (ckpt.scene_json.empty()) fail(ErrorCode::Validation, "checkpoint has no scene record (camera)");
            const nlohmann::json scene = nlohmann::json::parse(ckpt.scene_json);
            Camera cam = camera_from_json(scene.at("camera").dump());
            if (render_w > 0) cam = cam.resized(render_w, render_h);
            const RenderOutput out = render_model(ckpt.model, cam, render_time, RasterSettings{}).output;
            write_image(render_out, to_image8(out.color, out.width, out.height, 3));
            if (!render_depth.empty()) {
                std::vector<double> depth = out.depth;
                const double far = *std::max_element(depth.begin(), depth.end());
                if (far > 0.0) {
                    for (double& z : depth) z /= far;
                }
                write_image(render_depth, heatmap_image(depth, out.width, out.height));
            }
            std::printf("wrote %s\n", render_out.c_str());
        };
    });

    // query
    SceneFiles query_files;
    std::string query_prompt;
    std::string query_embedding;
    std::string query_out;
    std::string query_heatmap;
    double query_time = 0.0;
    double query_threshold = kDefaultThreshold;
    auto* qu = app.add_subcommand("query", "segment the scene for a text prompt");
    query_files.add_flags(qu);
    qu->add_option("--prompt", query_prompt, "lexicon prompt");
    qu->add_option("--embedding", query_embedding, "comma-separated embedding used instead of the lexicon");
    qu->add_option("--time", query_time, "normalized time")->required()->check(CLI::Range(0.0, 1.0));
    qu->add_option("--threshold", query_threshold)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    qu->add_option("--out", query_out, "mask image")->required();
    qu->add_option("--heatmap", query_heatmap, "heatmap image (default: <out>_heatmap)");
    qu->callback([&] {
        action = [&] {
            if (query_prompt.empty() && query_embedding.empty()) throw UsageError("--prompt or --embedding is required");
            query_files.resolve();
            const LoadedScene scene = load_scene(query_files.checkpoint, query_files.codec, query_files.lexicon);
            QueryRequest req;
            req.prompt = query_prompt.empty() ? "<embedding>" : query_prompt;
            if (!query_embedding.empty()) req.embedding = parse_embedding(query_embedding);
            req.time = query_time;
            req.threshold = query_threshold;
            const QueryResult r = scene.engine.query(req);
            const fs::path heat = query_heatmap.empty() ? sibling(query_out, "_heatmap") : fs::path(query_heatmap);
            write_image(query_out, mask_image(r.mask, r.width, r.height));
            write_image(heat, heatmap_image(r.relevancy, r.width, r.height));
            std::printf("prompt '%s' t=%.3f: score min %.4f max %.4f mean %.4f, coverage %.2f%%\n", r.prompt.c_str(),
                        req.time, r.min_score(), r.max_score(), r.mean_score(), 100.0 * r.coverage());
            std::printf("wrote %s and %s\n", query_out.c_str(), heat.string().c_str());
        };
    });

    // eval
    SceneFiles eval_files;
    std::string eval_frames = "holdout";
    std::string eval_out;
    double eval_threshold = kDefaultThreshold;
    int eval_bench = 0;
    auto* ev = app.add_subcommand("eval", "mIoU, PSNR and query throughput on a scene");
    eval_files.add_flags(ev);
    ev->add_option("--frames", eval_frames, "holdout | train | all")
        ->capture_default_str()
        ->check(CLI::IsMember({"holdout", "train", "all"}));
    ev->add_option("--threshold", eval_threshold)->capture_default_str()->check(CLI::Range(0.0, 1.0));
    ev->add_option("--bench", eval_bench, "timed query repeats per class (0 = skip)")->check(CLI::NonNegativeNumber);
    ev->add_option("--out", eval_out, "report JSON file");
    ev->callback([&] {
        action = [&] {
            eval_files.resolve();
            const Dataset ds = load_dataset(eval_files.manifest, {.require_features = false});
            const LoadedScene scene = load_scene(eval_files.checkpoint, eval_files.codec, eval_files.lexicon);
            std::vector<std::size_t> frames;
            if (eval_frames == "holdout") frames = ds.holdout_indices();
            if (eval_frames == "train") frames = ds.train_indices();
            if (eval_frames == "all") {
                for (std::size_t i = 0; i < ds.frames.size(); ++i) frames.push_back(i);
            }
            EvalReport report = evaluate(scene.engine, ds, frames, eval_threshold);
            if (eval_bench > 0) {
                std::vector<QueryRequest> reqs;
                for (const std::string& c : ds.manifest.classes) {
                    QueryRequest q;
                    q.prompt = c;
                    q.time = 0.5;
                    q.threshold = eval_threshold;
                    reqs.push_back(q);
                }
                report.latency = bench_query(scene.engine, reqs, eval_bench);
            }
            report.config_echo = scene.info.config_hash;
            std::printf("%s", report.to_table().c_str());
            if (!eval_out.empty()) write_text(eval_out, report.to_json());
        };
    });

    // grad-check
    GradCheckOptions gc;
    auto* gcs = app.add_subcommand("grad-check", "compare analytic gradients with central differences");
    gcs->add_option("--seed", gc.seed)->capture_default_str();
    gcs->add_option("--configs", gc.configs, "random configurations per suite")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    int gc_status = kExitOk;
    gcs->callback([&] {
        action = [&] {
            double worst = 0.0;
            bool ok = true;
            for (const GradCheckSummary& s : gradcheck_all(gc)) {
                std::printf("%-11s configs %4d samples %6zu rejected %4zu max rel error %.3e (tol %.0e) %s\n",
                            s.name.c_str(), s.configs, s.samples, s.rejected, s.max_rel_error, s.tolerance,
                            s.passed() ? "ok" : "FAILED");
                worst = std::max(worst, s.max_rel_error);
                ok = ok && s.passed();
            }
            std::printf("max relative error: %.3e\n", worst);
            if (!ok) gc_status = kExitRuntime;
        };
    });

    // serve
    ServeConfig serve_cfg;
    SceneFiles serve_files;
    auto* sv = app.add_subcommand("serve", "HTTP render/query service");
    serve_files.add_flags(sv);
    sv->add_option("--host", serve_cfg.host)->capture_default_str();
    sv->add_option("--port", serve_cfg.port)->capture_default_str()->check(CLI::Range(0, 65535));
    sv->add_option("--max-concurrent", serve_cfg.max_concurrent)->capture_default_str()->check(CLI::PositiveNumber);
    sv->add_option("--width", serve_cfg.width, "default render width")->check(CLI::Range(1, 4096));
    sv->add_option("--height", serve_cfg.height, "default render height")->check(CLI::Range(1, 4096));
    sv->callback([&] {
        action = [&] {
            serve_files.resolve();
            serve_cfg.checkpoint = serve_files.checkpoint;
            serve_cfg.codec = serve_files.codec;
            serve_cfg.lexicon = serve_files.lexicon;
            if ((serve_cfg.width == 0) != (serve_cfg.height == 0)) throw UsageError("--width and --height go together");
            serve(serve_cfg);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }
    try {
        if (action) action();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return gc_status;
}

}  // namespace semsplat
