// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semsplat/adam.hpp"
#include "semsplat/feature_codec.hpp"
#include "semsplat/scene_model.hpp"

namespace semsplat {

/// Trained scene plus optimizer state. Stored as a directory holding
/// checkpoint.json and one tensor container per array.
struct Checkpoint {
    static constexpr int kVersion = 1;

    SceneModel model;
    std::vector<AdamMoments> moments;  // aligned with model_parameters(); may be empty
    std::int64_t adam_steps = 0;
    std::int64_t iteration = 0;
    std::string rng_state;
    std::string config_json;  // echo of the training configuration
    std::string config_hash;  // CRC32 of config_json, hex
    std::string scene_json;   // {camera, frames, classes} of the training scene; may be empty
};

/// Session constraints checked at load; mismatches raise ShapeMismatch naming the field.
struct CheckpointExpectations {
    std::optional<int> feature_dim;
    std::optional<int> sh_degree;
    std::optional<int> basis_count;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
/// Validates everything before returning; no partially loaded state escapes.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const CheckpointExpectations& expect = {});

std::string config_hash(const std::string& config_json);

void save_codec(const FeatureCodec& codec, const std::filesystem::path& dir);
FeatureCodec load_codec(const std::filesystem::path& dir);

}  // namespace semsplat
