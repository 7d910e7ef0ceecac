// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semsplat/feature_codec.hpp"
#include "semsplat/frame.hpp"
#include "semsplat/gaussian_scene.hpp"
#include "semsplat/query.hpp"

namespace semsplat {

/// Paths are relative to the manifest's directory.
struct FrameEntry {
    std::string name;
    double timestamp = 0.0;  // seconds
    std::string color;          // u8 H x W x 3
    std::string depth;          // f32 H x W
    std::string features;       // f32 H x W x d, compressed; empty until codec-train
    std::string features_full;  // f32 H x W x D_f; optional
    std::string labels;         // u16 H x W; optional
};

struct SceneManifest {
    static constexpr int kVersion = 1;

    std::filesystem::path root;  // directory holding the manifest
    int width = 0;
    int height = 0;
    Camera camera;
    int feature_dim = 3;        // compressed d
    int full_feature_dim = 16;  // D_f
    std::string lexicon;
    std::string codec;
    std::vector<std::string> classes;
    int holdout_every = 8;
    std::vector<FrameEntry> frames;

    std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

SceneManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const SceneManifest& manifest);

struct DatasetOptions {
    bool require_features = true;  // compressed maps must exist
    bool load_lexicon = true;
    bool load_codec = true;        // when the manifest names one
};

struct Dataset {
    SceneManifest manifest;
    Camera camera;
    std::vector<FrameSample> frames;  // manifest order, timestamps normalized to [0,1]
    std::optional<QueryLexicon> lexicon;
    std::optional<FeatureCodec> codec;

    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> holdout_indices() const;
};

/// Validates every referenced file; errors name the offending frame or field.
Dataset load_dataset(const std::filesystem::path& manifest_path, const DatasetOptions& options = {});

/// (t - t_min) / (t_max - t_min); all zeros for a single frame or a zero span.
std::vector<double> normalize_timestamps(const std::vector<double>& seconds);

/// Held out when index % every == 0.
bool is_holdout(std::size_t index, int every);

/// Full-dimension feature map (H*W*D_f) of one frame.
std::vector<float> load_full_features(const SceneManifest& manifest, std::size_t frame);

struct CodecStageReport {
    CodecTrainReport training;
    std::size_t frames = 0;
};

/// Trains a codec on the full-dimension maps of every frame, writes the
/// compressed map of each frame, saves the codec under `codec_dir` (relative
/// to the manifest) and rewrites the manifest to reference both.
CodecStageReport codec_train_dataset(const std::filesystem::path& manifest_path, const CodecTrainOptions& options,
                                     const std::string& codec_dir = "codec");

/// Camera <-> JSON object {fx, fy, cx, cy, width, height, near, far, world_to_camera[16]}.
std::string camera_to_json(const Camera& camera);
Camera camera_from_json(const std::string& text);

}  // namespace semsplat
