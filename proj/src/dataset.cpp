// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/dataset.hpp"

#include <algorithm>

#include "json.hpp"
#include "semsplat/checkpoint.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/tensor_io.hpp"

namespace semsplat {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json camera_json(const Camera& c) {
    std::vector<double> m(16);
    for (int r = 0; r < 4; ++r) {
        for (int k = 0; k < 4; ++k) m[r * 4 + k] = c.world_to_camera(r, k);
    }
    return {{"fx", c.fx}, {"fy", c.fy}, {"cx", c.cx},         {"cy", c.cy},   {"width", c.width},
            {"height", c.height}, {"near", c.near}, {"far", c.far}, {"world_to_camera", m}};
}

Camera camera_parse(const json& j) {
    Camera c;
    try {
        c.fx = j.at("fx").get<double>();
        c.fy = j.at("fy").get<double>();
        c.cx = j.at("cx").get<double>();
        c.cy = j.at("cy").get<double>();
        c.width = j.at("width").get<int>();
        c.height = j.at("height").get<int>();
        c.near = j.value("near", c.near);
        c.far = j.value("far", c.far);
        if (j.contains("world_to_camera")) {
            const auto m = j.at("world_to_camera").get<std::vector<double>>();
            if (m.size() != 16) fail(ErrorCode::Validation, "camera.world_to_camera must hold 16 values");
            for (int r = 0; r < 4; ++r) {
                for (int k = 0; k < 4; ++k) c.world_to_camera(r, k) = m[r * 4 + k];
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, std::string("camera: ") + e.what());
    }
    c.validate();
    return c;
}

// Reads a tensor and checks dtype and shape; errors name the frame and field.
Tensor frame_tensor(const SceneManifest& m, const FrameEntry& f, const std::string& rel, const char* field, DType dtype,
                    const std::vector<std::uint64_t>& dims) {
    const std::string where = "frame '" + f.name + "' " + field;
    const fs::path path = m.resolve(rel);
    if (!fs::exists(path)) fail(ErrorCode::MissingFile, where + ": missing file " + path.string());
    Tensor t;
    try {
        t = read_tensor(path);
    } catch (const Error& e) {
        throw Error(e.code(), where + ": " + e.what());
    }
    if (t.dtype != dtype) {
        fail(ErrorCode::UnsupportedDtype, where + ": expected " + dtype_name(dtype) + ", got " + dtype_name(t.dtype));
    }
    if (t.dims != dims) fail(ErrorCode::ShapeMismatch, where + ": shape does not match the color image");
    return t;
}

}  // namespace

std::string camera_to_json(const Camera& camera) { return camera_json(camera).dump(); }

Camera camera_from_json(const std::string& text) {
    try {
        return camera_parse(json::parse(text));
    } catch (const json::parse_error& e) {
        fail(ErrorCode::Validation, std::string("camera: ") + e.what());
    }
}

SceneManifest read_manifest(const fs::path& path) {
    if (!fs::exists(path)) fail(ErrorCode::MissingFile, "manifest not found: " + path.string());
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, path.string() + ": malformed manifest (" + e.what() + ")");
    }
    SceneManifest m;
    m.root = path.parent_path();
    try {
        const int version = j.at("version").get<int>();
        if (version != SceneManifest::kVersion) {
            fail(ErrorCode::UnsupportedVersion, "manifest version " + std::to_string(version) + " is not supported");
        }
        m.width = j.at("width").get<int>();
        m.height = j.at("height").get<int>();
        m.camera = camera_parse(j.at("camera"));
        m.feature_dim = j.at("feature_dim").get<int>();
        m.full_feature_dim = j.at("full_feature_dim").get<int>();
        m.lexicon = j.value("lexicon", std::string());
        m.codec = j.value("codec", std::string());
        m.classes = j.value("classes", std::vector<std::string>{});
        m.holdout_every = j.value("holdout_every", 8);
        for (const json& f : j.at("frames")) {
            FrameEntry e;
            e.name = f.at("name").get<std::string>();
            e.timestamp = f.at("timestamp").get<double>();
            e.color = f.at("color").get<std::string>();
            e.depth = f.at("depth").get<std::string>();
            e.features = f.value("features", std::string());
            e.features_full = f.value("features_full", std::string());
            e.labels = f.value("labels", std::string());
            m.frames.push_back(std::move(e));
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, path.string() + ": " + e.what());
    }
    if (m.width < 1 || m.height < 1) fail(ErrorCode::Validation, "manifest: width and height must be positive");
    if (m.camera.width != m.width || m.camera.height != m.height) {
        fail(ErrorCode::ShapeMismatch, "manifest: camera size differs from the frame size");
    }
    if (m.holdout_every < 2) fail(ErrorCode::Validation, "manifest: holdout_every must be >= 2");
    return m;
}

void write_manifest(const fs::path& path, const SceneManifest& m) {
    json j;
    j["format"] = "semsplat-scene";
    j["version"] = SceneManifest::kVersion;
    j["width"] = m.width;
    j["height"] = m.height;
    j["camera"] = camera_json(m.camera);
    j["feature_dim"] = m.feature_dim;
    j["full_feature_dim"] = m.full_feature_dim;
    j["lexicon"] = m.lexicon;
    j["codec"] = m.codec;
    j["classes"] = m.classes;
    j["holdout_every"] = m.holdout_every;
    json frames = json::array();
    for (const FrameEntry& f : m.frames) {
        json e = {{"name", f.name}, {"timestamp", f.timestamp}, {"color", f.color}, {"depth", f.depth}};
        if (!f.features.empty()) e["features"] = f.features;
        if (!f.features_full.empty()) e["features_full"] = f.features_full;
        if (!f.labels.empty()) e["labels"] = f.labels;
        frames.push_back(std::move(e));
    }
    j["frames"] = frames;
    const std::string text = j.dump(2) + "\n";
    write_file_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<double> normalize_timestamps(const std::vector<double>& seconds) {
    std::vector<double> out(seconds.size(), 0.0);
    if (seconds.size() < 2) return out;
    const auto [lo, hi] = std::minmax_element(seconds.begin(), seconds.end());
    const double span = *hi - *lo;
    if (!(span > 0.0)) return out;
    for (std::size_t i = 0; i < seconds.size(); ++i) out[i] = (seconds[i] - *lo) / span;
    return out;
}

bool is_holdout(std::size_t index, int every) { return every > 0 && index % static_cast<std::size_t>(every) == 0; }

std::vector<std::size_t> Dataset::train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames.size() == 1 || !is_holdout(i, manifest.holdout_every)) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> Dataset::holdout_indices() const {
    std::vector<std::size_t> out;
    if (frames.size() < 2) return out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (is_holdout(i, manifest.holdout_every)) out.push_back(i);
    }
    return out;
}

std::vector<float> load_full_features(const SceneManifest& m, std::size_t frame) {
    const FrameEntry& f = m.frames.at(frame);
    if (f.features_full.empty()) fail(ErrorCode::MissingFile, "frame '" + f.name + "' has no full-dimension features");
    const std::vector<std::uint64_t> dims{static_cast<std::uint64_t>(m.height), static_cast<std::uint64_t>(m.width),
                                          static_cast<std::uint64_t>(m.full_feature_dim)};
    return frame_tensor(m, f, f.features_full, "features_full", DType::F32, dims).to_f32();
}

Dataset load_dataset(const fs::path& manifest_path, const DatasetOptions& options) {
    Dataset ds;
    ds.manifest = read_manifest(manifest_path);
    const SceneManifest& m = ds.manifest;
    ds.camera = m.camera;
    if (m.frames.empty()) fail(ErrorCode::EmptyDataset, "manifest lists no frames");

    if (options.load_lexicon && !m.lexicon.empty()) {
        ds.lexicon = load_lexicon(m.resolve(m.lexicon));
        if (ds.lexicon->dim != m.full_feature_dim) {
            fail(ErrorCode::ShapeMismatch, "lexicon embedding dimension differs from full_feature_dim");
        }
    }
    if (options.load_codec && !m.codec.empty()) {
        ds.codec = load_codec(m.resolve(m.codec));
        if (ds.codec->compressed_dim != m.feature_dim) {
            fail(ErrorCode::ShapeMismatch, "codec compressed dimension " + std::to_string(ds.codec->compressed_dim) +
                                               " differs from manifest feature_dim " + std::to_string(m.feature_dim));
        }
        if (ds.codec->full_dim != m.full_feature_dim) {
            fail(ErrorCode::ShapeMismatch, "codec full dimension differs from manifest full_feature_dim");
        }
    }

    const auto h = static_cast<std::uint64_t>(m.height);
    const auto w = static_cast<std::uint64_t>(m.width);
    std::vector<double> seconds;
    for (const FrameEntry& f : m.frames) {
        FrameSample s;
        s.name = f.name;
        s.width = m.width;
        s.height = m.height;
        s.color = frame_tensor(m, f, f.color, "color", DType::U8, {h, w, 3}).to_u8();
        s.depth = frame_tensor(m, f, f.depth, "depth", DType::F32, {h, w}).to_f32();
        if (!f.features.empty()) {
            s.feature_dim = m.feature_dim;
            s.features = frame_tensor(m, f, f.features, "features", DType::F32,
                                      {h, w, static_cast<std::uint64_t>(m.feature_dim)})
                             .to_f32();
        } else if (options.require_features) {
            fail(ErrorCode::MissingFile, "frame '" + f.name + "' has no compressed features (run codec-train first)");
        }
        if (!f.labels.empty()) s.labels = frame_tensor(m, f, f.labels, "labels", DType::U16, {h, w}).to_u16();
        seconds.push_back(f.timestamp);
        ds.frames.push_back(std::move(s));
    }
    const std::vector<double> t = normalize_timestamps(seconds);
    for (std::size_t i = 0; i < ds.frames.size(); ++i) ds.frames[i].timestamp = t[i];
    return ds;
}

CodecStageReport codec_train_dataset(const std::filesystem::path& manifest_path, const CodecTrainOptions& options,
                                     const std::string& codec_dir) {
    SceneManifest m = read_manifest(manifest_path);
    if (m.frames.empty()) fail(ErrorCode::EmptyDataset, "manifest lists no frames");
    const std::size_t px = static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height);
    const auto df = static_cast<std::size_t>(m.full_feature_dim);

    std::vector<double> all;
    all.reserve(px * df * m.frames.size());
    for (std::size_t f = 0; f < m.frames.size(); ++f) {
        const std::vector<float> full = load_full_features(m, f);
        all.insert(all.end(), full.begin(), full.end());
    }
    CodecStageReport report;
    FeatureCodec codec = FeatureCodec::initialized(m.full_feature_dim, m.feature_dim, options.seed);
    report.training = train_codec(codec, all, all.size() / df, options);

    const std::vector<std::uint64_t> dims{static_cast<std::uint64_t>(m.height), static_cast<std::uint64_t>(m.width),
                                          static_cast<std::uint64_t>(m.feature_dim)};
    for (std::size_t f = 0; f < m.frames.size(); ++f) {
        const std::span<const double> rows(all.data() + f * px * df, px * df);
        const std::vector<double> z = codec.encode(rows, px);
        FrameEntry& e = m.frames[f];
        e.features = "frames/" + e.name + "_features.stpg";
        std::filesystem::create_directories((m.root / e.features).parent_path());
        const std::vector<float> zf(z.begin(), z.end());
        write_tensor(m.root / e.features, Tensor::from_f32(dims, zf));
        ++report.frames;
    }
    save_codec(codec, m.root / codec_dir);
    m.codec = codec_dir;
    write_manifest(manifest_path, m);
    return report;
}

}  // namespace semsplat
