// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "semsplat/adam.hpp"
#include "semsplat/checkpoint.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/losses.hpp"
#include "semsplat/rasterizer.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

struct TrainConfig {
    double learning_rate = 1.6e-3;
    AdamConfig adam;
    int iterations = 3000;
    LossWeights loss;
    bool auto_region_threshold = true;  // rescale region_min_pixels to the frame size
    std::uint64_t seed = 0;
    /// lr multipliers indexed by ParamGroup.
    std::array<double, kParamGroupCount> lr_multipliers = {0.25, 1.0, 2.0, 20.0, 2.0, 2.0, 1.0, 1.0};
    double lr_decay_final = 1.0;  // multiplier reached at the last iteration (exponential); 1 = constant
    int sh_degree = 1;
    int basis_count = 16;
    int init_stride = 2;
    double init_opacity = 0.1;
    bool tracker_enabled = true;
    int psnr_every = 100;
    RasterSettings raster;

    void validate() const;
    /// Canonical JSON used for the checkpoint echo and hash.
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct IterationRecord {
    std::int64_t iteration = 0;  // 1-based count of completed steps
    std::size_t frame = 0;
    LossBreakdown loss;
    std::optional<double> holdout_psnr;
};

/// Owns the model and optimizer for one training session.
class Trainer {
public:
    /// Initializes the cloud from the first training frame's depth.
    Trainer(const Dataset& dataset, const TrainConfig& config);
    /// Continues from a checkpoint (model, moments, RNG state, iteration).
    Trainer(const Dataset& dataset, const TrainConfig& config, const Checkpoint& resume);

    IterationRecord step();
    /// Runs until `config.iterations` steps are done; `on_record` sees every record.
    void run(const std::function<void(const IterationRecord&)>& on_record = {});

    double holdout_psnr() const;
    Checkpoint checkpoint() const;

    const SceneModel& model() const { return model_; }
    const TrainConfig& config() const { return config_; }
    std::int64_t iteration() const { return iteration_; }
    std::size_t holdout_frame() const { return holdout_frame_; }
    std::size_t init_frame() const { return init_frame_; }
    const std::vector<std::size_t>& train_frames() const { return train_frames_; }

    /// Where a diagnostic checkpoint is written when the loss turns non-finite.
    void set_diagnostic_dir(std::filesystem::path dir) { diagnostic_dir_ = std::move(dir); }

private:
    void setup();
    double current_lr() const;

    const Dataset& dataset_;
    TrainConfig config_;
    SceneModel model_;
    AdamOptimizer adam_;
    std::mt19937_64 rng_;
    std::int64_t iteration_ = 0;
    std::vector<std::size_t> train_frames_;
    std::size_t holdout_frame_ = 0;
    std::size_t init_frame_ = 0;
    std::vector<LossTargets> targets_;
    std::filesystem::path diagnostic_dir_;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<IterationRecord> history;
};

/// Trains and optionally appends one JSON line per iteration to `log_path`.
TrainResult train_scene(const Dataset& dataset, const TrainConfig& config,
                        const std::filesystem::path& log_path = {});

std::string record_to_json(const IterationRecord& record);

}  // namespace semsplat
