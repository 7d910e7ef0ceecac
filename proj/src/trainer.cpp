// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/evalkit.hpp"

namespace semsplat {
namespace {

using nlohmann::json;

std::vector<std::size_t> parameter_sizes(SceneModel& model) {
    std::vector<std::size_t> sizes;
    for (const ParameterView& p : model_parameters(model)) sizes.push_back(p.values.size());
    return sizes;
}

bool finite(const LossBreakdown& b) {
    return std::isfinite(b.total) && std::isfinite(b.color) && std::isfinite(b.depth) && std::isfinite(b.feature) &&
           std::isfinite(b.region);
}

}  // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning_rate must be > 0");
    if (iterations < 0) fail(ErrorCode::InvalidArgument, "iterations must be >= 0");
    if (basis_count < 1) fail(ErrorCode::InvalidArgument, "basis_count must be >= 1");
    if (init_stride < 1) fail(ErrorCode::InvalidArgument, "init_stride must be >= 1");
    if (sh_degree < 0 || sh_degree > kMaxShDegree) fail(ErrorCode::InvalidArgument, "sh_degree must be in [0,3]");
    if (!(init_opacity > 0.0 && init_opacity < 1.0)) fail(ErrorCode::InvalidArgument, "init_opacity must be in (0,1)");
    if (!(lr_decay_final > 0.0)) fail(ErrorCode::InvalidArgument, "lr_decay_final must be > 0");
    if (psnr_every < 1) fail(ErrorCode::InvalidArgument, "psnr_every must be >= 1");
    for (double m : lr_multipliers) {
        if (!(m >= 0.0)) fail(ErrorCode::InvalidArgument, "lr multipliers must be >= 0");
    }
    loss.validate();
}

std::string TrainConfig::to_json() const {
    json j;
    j["learning_rate"] = learning_rate;
    j["beta1"] = adam.beta1;
    j["beta2"] = adam.beta2;
    j["eps"] = adam.eps;
    j["iterations"] = iterations;
    j["lambda"] = loss.lambda;
    j["region_min_pixels"] = loss.region_min_pixels;
    j["depth_epsilon"] = loss.depth_epsilon;
    j["region_smoothness"] = loss.region_smoothness;
    j["auto_region_threshold"] = auto_region_threshold;
    j["seed"] = seed;
    json mult = json::object();
    for (int g = 0; g < kParamGroupCount; ++g) mult[param_group_name(static_cast<ParamGroup>(g))] = lr_multipliers[g];
    j["lr_multipliers"] = mult;
    j["lr_decay_final"] = lr_decay_final;
    j["sh_degree"] = sh_degree;
    j["basis_count"] = basis_count;
    j["init_stride"] = init_stride;
    j["init_opacity"] = init_opacity;
    j["tracker_enabled"] = tracker_enabled;
    j["psnr_every"] = psnr_every;
    return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    TrainConfig c;
    try {
        const json j = json::parse(text);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.adam.beta1 = j.value("beta1", c.adam.beta1);
        c.adam.beta2 = j.value("beta2", c.adam.beta2);
        c.adam.eps = j.value("eps", c.adam.eps);
        c.iterations = j.value("iterations", c.iterations);
        c.loss.lambda = j.value("lambda", c.loss.lambda);
        c.loss.region_min_pixels = j.value("region_min_pixels", c.loss.region_min_pixels);
        c.loss.depth_epsilon = j.value("depth_epsilon", c.loss.depth_epsilon);
        c.loss.region_smoothness = j.value("region_smoothness", c.loss.region_smoothness);
        c.auto_region_threshold = j.value("auto_region_threshold", c.auto_region_threshold);
        c.seed = j.value("seed", c.seed);
        if (j.contains("lr_multipliers")) {
            for (int g = 0; g < kParamGroupCount; ++g) {
                c.lr_multipliers[g] = j["lr_multipliers"].value(param_group_name(static_cast<ParamGroup>(g)),
                                                                c.lr_multipliers[g]);
            }
        }
        c.lr_decay_final = j.value("lr_decay_final", c.lr_decay_final);
        c.sh_degree = j.value("sh_degree", c.sh_degree);
        c.basis_count = j.value("basis_count", c.basis_count);
        c.init_stride = j.value("init_stride", c.init_stride);
        c.init_opacity = j.value("init_opacity", c.init_opacity);
        c.tracker_enabled = j.value("tracker_enabled", c.tracker_enabled);
        c.psnr_every = j.value("psnr_every", c.psnr_every);
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config) : dataset_(dataset), config_(config) {
    setup();
    const FrameSample& init = dataset_.frames[init_frame_];
    InitOptions opts;
    opts.stride = config_.init_stride;
    opts.sh_degree = config_.sh_degree;
    opts.initial_opacity = config_.init_opacity;
    model_ = SceneModel::create(init_from_depth(init, dataset_.camera, opts), config_.basis_count, config_.seed);
    model_.tracker_enabled = config_.tracker_enabled;
    adam_ = AdamOptimizer(parameter_sizes(model_), config_.adam);
    rng_.seed(config_.seed);
}

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config, const Checkpoint& resume)
    : dataset_(dataset), config_(config) {
    setup();
    model_ = resume.model;
    model_.check_shapes();
    if (model_.cloud.feature_dim != dataset_.frames.front().feature_dim) {
        fail(ErrorCode::ShapeMismatch, "checkpoint feature dimension does not match the dataset");
    }
    adam_ = AdamOptimizer(parameter_sizes(model_), config_.adam);
    if (!resume.moments.empty()) {
        if (resume.moments.size() != adam_.moments().size()) {
            fail(ErrorCode::ShapeMismatch, "checkpoint optimizer state does not match the model");
        }
        adam_.moments() = resume.moments;
    }
    adam_.set_steps(resume.adam_steps);
    iteration_ = resume.iteration;
    if (!resume.rng_state.empty()) {
        std::istringstream is(resume.rng_state);
        is >> rng_;
        if (!is) fail(ErrorCode::Validation, "checkpoint field 'rng_state' is malformed");
    } else {
        rng_.seed(config_.seed);
    }
}

void Trainer::setup() {
    config_.validate();
    if (dataset_.frames.empty()) fail(ErrorCode::EmptyDataset, "training needs at least one frame");
    for (const FrameSample& f : dataset_.frames) {
        if (f.feature_dim < 1 || f.features.empty()) {
            fail(ErrorCode::MissingFile, "frame '" + f.name + "' has no compressed features (run codec-train first)");
        }
    }
    if (config_.auto_region_threshold) {
        config_.loss.region_min_pixels = scaled_region_min_pixels(dataset_.manifest.width, dataset_.manifest.height);
    }
    train_frames_ = dataset_.train_indices();
    const std::vector<std::size_t> hold = dataset_.holdout_indices();
    holdout_frame_ = hold.empty() ? train_frames_.front() : hold[hold.size() / 2];
    init_frame_ = train_frames_.front();
    targets_.reserve(dataset_.frames.size());
    for (const FrameSample& f : dataset_.frames) targets_.push_back(LossTargets::from_frame(f));
}

double Trainer::current_lr() const {
    if (config_.lr_decay_final == 1.0 || config_.iterations <= 1) return config_.learning_rate;
    const double frac = std::min(1.0, static_cast<double>(iteration_) / (config_.iterations - 1));
    return config_.learning_rate * std::pow(config_.lr_decay_final, frac);
}

IterationRecord Trainer::step() {
    std::uniform_int_distribution<std::size_t> pick(0, train_frames_.size() - 1);
    const std::size_t frame = train_frames_[pick(rng_)];
    const FrameSample& f = dataset_.frames[frame];

    const ModelForward fw = render_model(model_, dataset_.camera, f.timestamp, config_.raster);
    RenderGradient upstream;
    IterationRecord rec;
    rec.frame = frame;
    rec.loss = total_loss(fw.output, targets_[frame], config_.loss, &upstream);
    if (!finite(rec.loss)) {
        if (!diagnostic_dir_.empty()) save_checkpoint(checkpoint(), diagnostic_dir_);
        fail(ErrorCode::Divergence, "non-finite loss at iteration " + std::to_string(iteration_ + 1) +
                                        (diagnostic_dir_.empty() ? "" : "; diagnostic checkpoint at " + diagnostic_dir_.string()));
    }

    SceneModel grad = model_.zeros_like();
    backward_model(model_, dataset_.camera, config_.raster, fw, upstream, grad);

    std::vector<ParameterView> params = model_parameters(model_);
    std::vector<ParameterView> grads = model_parameters(grad);
    std::vector<std::span<double>> p;
    std::vector<std::span<const double>> g;
    std::vector<double> mult;
    for (std::size_t i = 0; i < params.size(); ++i) {
        p.push_back(params[i].values);
        g.emplace_back(grads[i].values);
        mult.push_back(config_.lr_multipliers[static_cast<int>(params[i].group)]);
    }
    adam_.step(p, g, current_lr(), mult);
    model_.project_constraints();
    ++iteration_;
    rec.iteration = iteration_;
    if (iteration_ % config_.psnr_every == 0) rec.holdout_psnr = holdout_psnr();
    return rec;
}

void Trainer::run(const std::function<void(const IterationRecord&)>& on_record) {
    while (iteration_ < config_.iterations) {
        const IterationRecord rec = step();
        if (on_record) on_record(rec);
    }
}

double Trainer::holdout_psnr() const {
    const FrameSample& f = dataset_.frames[holdout_frame_];
    const RenderOutput out = render_model(model_, dataset_.camera, f.timestamp, config_.raster).output;
    return psnr_quantized(out.color, f.color);
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.model = model_;
    c.moments = adam_.moments();
    c.adam_steps = adam_.steps();
    c.iteration = iteration_;
    std::ostringstream os;
    os << rng_;
    c.rng_state = os.str();
    c.config_json = config_.to_json();
    c.config_hash = config_hash(c.config_json);
    json scene;
    scene["camera"] = json::parse(camera_to_json(dataset_.camera));
    scene["frames"] = dataset_.frames.size();
    scene["classes"] = dataset_.manifest.classes;
    c.scene_json = scene.dump();
    return c;
}

std::string record_to_json(const IterationRecord& r) {
    json j;
    j["iter"] = r.iteration;
    j["frame"] = r.frame;
    j["total"] = r.loss.total;
    j["color"] = r.loss.color;
    j["depth"] = r.loss.depth;
    j["feature"] = r.loss.feature;
    j["tv_color"] = r.loss.tv_color;
    j["tv_depth"] = r.loss.tv_depth;
    j["tv_feature"] = r.loss.tv_feature;
    j["region"] = r.loss.region;
    if (r.holdout_psnr) j["psnr"] = std::isinf(*r.holdout_psnr) ? json("inf") : json(*r.holdout_psnr);
    return j.dump();
}

TrainResult train_scene(const Dataset& dataset, const TrainConfig& config, const std::filesystem::path& log_path) {
    Trainer trainer(dataset, config);
    std::ofstream log;
    if (!log_path.empty()) {
        if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
        log.open(log_path, std::ios::trunc);
        if (!log) fail(ErrorCode::Io, "cannot write training log " + log_path.string());
    }
    TrainResult result;
    trainer.run([&](const IterationRecord& r) {
        result.history.push_back(r);
        if (log.is_open()) log << record_to_json(r) << "\n";
    });
    result.checkpoint = trainer.checkpoint();
    return result;
}

}  // namespace semsplat
