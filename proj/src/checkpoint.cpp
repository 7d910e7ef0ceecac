// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/tensor_io.hpp"

namespace semsplat {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kCodecFile = "codec.json";

void write_json(const fs::path& path, const json& doc) {
    const std::string text = doc.dump(2) + "\n";
    write_file_bytes(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

json read_json(const fs::path& path) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        fail(ErrorCode::Validation, path.filename().string() + ": malformed JSON (" + e.what() + ")");
    }
}

template <typename T>
T field(const json& doc, const char* name, const char* file) {
    if (!doc.contains(name)) fail(ErrorCode::Validation, std::string(file) + ": missing field '" + name + "'");
    try {
        return doc.at(name).get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::Validation, std::string(file) + ": field '" + name + "' has the wrong type");
    }
}

std::string tensor_file(const std::string& name) { return name + ".stpg"; }

// Reads a named f64 tensor and checks its shape; errors name the field.
std::vector<double> load_array(const fs::path& dir, const std::string& name, const std::vector<std::uint64_t>& shape) {
    Tensor t;
    try {
        t = read_tensor(dir / tensor_file(name));
    } catch (const Error& e) {
        throw Error(e.code(), "checkpoint field '" + name + "': " + e.what());
    }
    if (t.dims != shape) fail(ErrorCode::ShapeMismatch, "checkpoint field '" + name + "': shape mismatch");
    if (t.dtype != DType::F64) fail(ErrorCode::UnsupportedDtype, "checkpoint field '" + name + "': expected f64");
    return t.to_f64();
}

void check_expected(const char* name, int have, const std::optional<int>& want) {
    if (want && *want != have) {
        fail(ErrorCode::ShapeMismatch, std::string("checkpoint field '") + name + "': checkpoint has " +
                                           std::to_string(have) + ", session expects " + std::to_string(*want));
    }
}

}  // namespace

std::string config_hash(const std::string& config_json) {
    const std::uint32_t crc =
        crc32_of(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(config_json.data()), config_json.size()));
    char buf[9];
    std::snprintf(buf, sizeof(buf), "%08x", crc);
    return buf;
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& dir) {
    ckpt.model.check_shapes();
    fs::create_directories(dir);
    SceneModel model = ckpt.model;
    const std::vector<ParameterView> params = model_parameters(model);
    if (!ckpt.moments.empty() && ckpt.moments.size() != params.size()) {
        fail(ErrorCode::ShapeMismatch, "checkpoint: optimizer moments do not match the parameter list");
    }

    json manifest;
    manifest["format"] = "semsplat-checkpoint";
    manifest["version"] = Checkpoint::kVersion;
    manifest["gaussians"] = model.cloud.size();
    manifest["feature_dim"] = model.cloud.feature_dim;
    manifest["sh_degree"] = model.cloud.sh_degree;
    manifest["basis_count"] = model.deformation.mean.basis_count;
    manifest["tracker_slope"] = model.tracker.slope;
    manifest["tracker_enabled"] = model.tracker_enabled;
    manifest["iteration"] = ckpt.iteration;
    manifest["adam_steps"] = ckpt.adam_steps;
    manifest["has_moments"] = !ckpt.moments.empty();
    manifest["rng_state"] = ckpt.rng_state;
    manifest["config_hash"] = ckpt.config_hash;
    manifest["config"] = ckpt.config_json.empty() ? json::object() : json::parse(ckpt.config_json);
    if (!ckpt.scene_json.empty()) manifest["scene"] = json::parse(ckpt.scene_json);
    json tensors = json::array();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const ParameterView& p = params[i];
        write_tensor(dir / tensor_file(p.name), Tensor::from_f64(p.shape, p.values));
        tensors.push_back({{"name", p.name}, {"file", tensor_file(p.name)}, {"shape", p.shape}});
        if (!ckpt.moments.empty()) {
            write_tensor(dir / tensor_file("adam.m." + p.name), Tensor::from_f64(p.shape, ckpt.moments[i].m));
            write_tensor(dir / tensor_file("adam.v." + p.name), Tensor::from_f64(p.shape, ckpt.moments[i].v));
        }
    }
    manifest["tensors"] = tensors;
    write_json(dir / kCheckpointFile, manifest);
}

Checkpoint load_checkpoint(const fs::path& dir, const CheckpointExpectations& expect) {
    const json m = read_json(dir / kCheckpointFile);
    const char* file = kCheckpointFile;
    if (field<std::string>(m, "format", file) != "semsplat-checkpoint") {
        fail(ErrorCode::Validation, "checkpoint field 'format': not a semsplat checkpoint");
    }
    const int version = field<int>(m, "version", file);
    if (version != Checkpoint::kVersion) {
        fail(ErrorCode::UnsupportedVersion, "checkpoint field 'version': unsupported version " + std::to_string(version));
    }
    const auto n = field<std::size_t>(m, "gaussians", file);
    const int d = field<int>(m, "feature_dim", file);
    const int sh = field<int>(m, "sh_degree", file);
    const int b = field<int>(m, "basis_count", file);
    check_expected("feature_dim", d, expect.feature_dim);
    check_expected("sh_degree", sh, expect.sh_degree);
    check_expected("basis_count", b, expect.basis_count);
    if (d < 1 || sh < 0 || sh > kMaxShDegree || b < 1) fail(ErrorCode::Validation, "checkpoint: invalid dimensions");

    Checkpoint ckpt;
    ckpt.model.cloud = GaussianCloud::zeros(n, sh, d);
    ckpt.model.deformation = DeformationField::identity(n, b);
    ckpt.model.tracker = SemanticTracker::zeros(d);
    ckpt.model.tracker.slope = field<double>(m, "tracker_slope", file);
    ckpt.model.tracker_enabled = field<bool>(m, "tracker_enabled", file);
    ckpt.iteration = field<std::int64_t>(m, "iteration", file);
    ckpt.adam_steps = field<std::int64_t>(m, "adam_steps", file);
    ckpt.rng_state = field<std::string>(m, "rng_state", file);
    ckpt.config_hash = field<std::string>(m, "config_hash", file);
    ckpt.config_json = m.contains("config") ? m["config"].dump() : "{}";
    if (m.contains("scene")) ckpt.scene_json = m["scene"].dump();
    const bool has_moments = field<bool>(m, "has_moments", file);

    std::vector<ParameterView> params = model_parameters(ckpt.model);
    for (const ParameterView& p : params) {
        const std::vector<double> values = load_array(dir, p.name, p.shape);
        std::copy(values.begin(), values.end(), p.values.begin());
        if (has_moments) {
            AdamMoments mom;
            mom.m = load_array(dir, "adam.m." + p.name, p.shape);
            mom.v = load_array(dir, "adam.v." + p.name, p.shape);
            ckpt.moments.push_back(std::move(mom));
        }
    }
    ckpt.model.check_shapes();
    return ckpt;
}

void save_codec(const FeatureCodec& codec, const fs::path& dir) {
    codec.check_shapes();
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "semsplat-codec";
    manifest["version"] = 1;
    manifest["full_dim"] = codec.full_dim;
    manifest["compressed_dim"] = codec.compressed_dim;
    manifest["encoder_widths"] = FeatureCodec::encoder_widths(codec.full_dim, codec.compressed_dim);
    auto save_layers = [&](const std::vector<LinearLayer>& layers, const std::string& prefix) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const LinearLayer& l = layers[i];
            const std::string base = prefix + "." + std::to_string(i);
            const std::uint64_t out = static_cast<std::uint64_t>(l.out);
            const std::uint64_t in = static_cast<std::uint64_t>(l.in);
            write_tensor(dir / tensor_file(base + ".weights"), Tensor::from_f64({out, in}, l.weights));
            write_tensor(dir / tensor_file(base + ".bias"), Tensor::from_f64({out}, l.bias));
        }
    };
    save_layers(codec.encoder, "encoder");
    save_layers(codec.decoder, "decoder");
    write_json(dir / kCodecFile, manifest);
}

FeatureCodec load_codec(const fs::path& dir) {
    const json m = read_json(dir / kCodecFile);
    const char* file = kCodecFile;
    if (field<std::string>(m, "format", file) != "semsplat-codec") {
        fail(ErrorCode::Validation, "codec field 'format': not a semsplat codec");
    }
    const int version = field<int>(m, "version", file);
    if (version != 1) fail(ErrorCode::UnsupportedVersion, "codec field 'version': unsupported version " + std::to_string(version));
    FeatureCodec codec = FeatureCodec::zeros(field<int>(m, "full_dim", file), field<int>(m, "compressed_dim", file));
    auto load_layers = [&](std::vector<LinearLayer>& layers, const std::string& prefix) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            LinearLayer& l = layers[i];
            const std::string base = prefix + "." + std::to_string(i);
            const std::uint64_t out = static_cast<std::uint64_t>(l.out);
            const std::uint64_t in = static_cast<std::uint64_t>(l.in);
            l.weights = load_array(dir, base + ".weights", {out, in});
            l.bias = load_array(dir, base + ".bias", {out});
        }
    };
    load_layers(codec.encoder, "encoder");
    load_layers(codec.decoder, "decoder");
    return codec;
}

}  // namespace semsplat
