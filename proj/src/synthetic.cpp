// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "semsplat/dataset.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/tensor_io.hpp"

namespace semsplat {
namespace {

constexpr double kBackgroundDepth = 4.0;
constexpr double kTwoPi = 6.283185307179586;

const char* const kClassNames[] = {"liver",         "grasper",          "fat",          "gallbladder",
                                   "cystic duct",   "hepatic vein",     "connective tissue", "blood",
                                   "abdominal wall", "l-hook electrocautery", "gastrointestinal tract",
                                   "liver ligament"};

const Vec3 kAlbedo[] = {{0.72, 0.22, 0.18}, {0.62, 0.64, 0.68}, {0.93, 0.80, 0.35}, {0.35, 0.62, 0.30},
                        {0.80, 0.55, 0.60}, {0.30, 0.30, 0.75}, {0.85, 0.70, 0.62}, {0.55, 0.05, 0.08}};

// Random orthonormal vectors (Gram-Schmidt on Gaussian draws).
std::vector<std::vector<double>> orthonormal_axes(int count, int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> axes;
    while (static_cast<int>(axes.size()) < count) {
        std::vector<double> v(dim);
        for (double& x : v) x = normal(rng);
        for (const auto& a : axes) {
            double d = 0.0;
            for (int k = 0; k < dim; ++k) d += v[k] * a[k];
            for (int k = 0; k < dim; ++k) v[k] -= d * a[k];
        }
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n < 1e-6) continue;
        for (double& x : v) x /= n;
        axes.push_back(std::move(v));
    }
    return axes;
}

Vec3 background_color(const Vec3& p) {
    return {0.55 + 0.12 * std::sin(1.7 * p.x() + 0.4), 0.36 + 0.08 * std::cos(1.3 * p.y() - 0.2),
            0.30 + 0.06 * std::sin(0.9 * (p.x() + p.y()))};
}

std::string tensor_name(int frame, const char* what) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "frames/%03d_%s.stpg", frame, what);
    return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (width < 16 || height < 16) fail(ErrorCode::InvalidArgument, "synthetic resolution must be at least 16x16");
    if (classes < 2) fail(ErrorCode::InvalidArgument, "synthetic scene needs at least 2 classes");
    if (frames < 2) fail(ErrorCode::InvalidArgument, "synthetic scene needs at least 2 frames");
    if (classes + 1 > full_dim) fail(ErrorCode::InvalidArgument, "full_dim must exceed the class count");
    if (feature_dim < 1) fail(ErrorCode::InvalidArgument, "feature_dim must be positive");
    if (objects < 0) fail(ErrorCode::InvalidArgument, "object count must be non-negative");
    if (!(fps > 0.0)) fail(ErrorCode::InvalidArgument, "fps must be positive");
}

std::string SyntheticScene::class_name(int k) {
    constexpr int known = static_cast<int>(sizeof(kClassNames) / sizeof(kClassNames[0]));
    return k < known ? kClassNames[k] : "class " + std::to_string(k);
}

SyntheticScene::SyntheticScene(const SyntheticSpec& spec) : spec_(spec) {
    spec_.validate();
    camera_.width = spec.width;
    camera_.height = spec.height;
    camera_.fx = camera_.fy = static_cast<double>(spec.width);
    camera_.cx = 0.5 * (spec.width - 1);
    camera_.cy = 0.5 * (spec.height - 1);
    camera_.near = 0.1;
    camera_.far = 20.0;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    axes_ = orthonormal_axes(spec.classes + 1, spec.full_dim, rng);

    const int n = spec.object_count();
    const double ring = 0.75;
    const double angle0 = kTwoPi * uni(rng);
    for (int k = 0; k < n; ++k) {
        Motion m;
        const double angle = angle0 + kTwoPi * k / n + 0.2 * (uni(rng) - 0.5);
        const double z = 2.5 + 0.7 * uni(rng);
        m.base = Vec3(ring * std::cos(angle) * z / 3.0, ring * std::sin(angle) * z / 3.0, z);
        m.amplitude = Vec3(0.05 + 0.03 * uni(rng), 0.05 + 0.03 * uni(rng), 0.04 * uni(rng));
        m.phase = Vec3(kTwoPi * uni(rng), kTwoPi * uni(rng), kTwoPi * uni(rng));
        const double r = 0.35 + 0.2 * uni(rng);
        m.radii = Vec3(r * (0.85 + 0.3 * uni(rng)), r * (0.85 + 0.3 * uni(rng)), r);
        m.pulse_phase = kTwoPi * uni(rng);
        const int cls = k % spec.classes;
        m.albedo = kAlbedo[cls % 8];
        m.label = cls + 1;
        motion_.push_back(m);
        std::vector<double> off(spec.full_dim);
        for (double& x : off) x = spec.object_noise * normal(rng);
        object_offsets_.push_back(std::move(off));
    }
}

double SyntheticScene::frame_time(int frame) const { return static_cast<double>(frame) / (spec_.frames - 1); }

std::vector<ObjectState> SyntheticScene::objects_at(double t) const {
    std::vector<ObjectState> out;
    for (const Motion& m : motion_) {
        ObjectState s;
        for (int a = 0; a < 3; ++a) s.center[a] = m.base[a] + m.amplitude[a] * std::sin(kTwoPi * t + m.phase[a]);
        s.radii = m.radii * (1.0 + 0.04 * std::sin(kTwoPi * t + m.pulse_phase));
        s.albedo = m.albedo;
        s.label = m.label;
        out.push_back(s);
    }
    return out;
}

SyntheticScene::Hit SyntheticScene::trace(double u, double v, const std::vector<ObjectState>& objects) const {
    const Vec3 dir((u - camera_.cx) / camera_.fx, (v - camera_.cy) / camera_.fy, 1.0);
    Hit best{kBackgroundDepth, -1, Vec3(0, 0, -1)};
    for (std::size_t k = 0; k < objects.size(); ++k) {
        const ObjectState& o = objects[k];
        // |(s*dir - c) / r|^2 = 1, quadratic in the depth s.
        const Vec3 a = dir.cwiseQuotient(o.radii);
        const Vec3 b = o.center.cwiseQuotient(o.radii);
        const double qa = a.squaredNorm();
        const double qb = -2.0 * a.dot(b);
        const double qc = b.squaredNorm() - 1.0;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc < 0.0) continue;
        const double s = (-qb - std::sqrt(disc)) / (2.0 * qa);
        if (s <= camera_.near || s >= best.depth) continue;
        const Vec3 p = s * dir;
        best = {s, static_cast<int>(k), (p - o.center).cwiseQuotient(o.radii.cwiseProduct(o.radii)).normalized()};
    }
    return best;
}

Vec3 SyntheticScene::shade(const Hit& hit, double u, double v, const std::vector<ObjectState>& objects) const {
    const Vec3 dir((u - camera_.cx) / camera_.fx, (v - camera_.cy) / camera_.fy, 1.0);
    if (hit.object < 0) return background_color(hit.depth * dir);
    static const Vec3 light = Vec3(0.3, -0.4, -1.0).normalized();
    const double lambert = std::max(0.0, hit.normal.dot(light));
    return objects[static_cast<std::size_t>(hit.object)].albedo * (0.35 + 0.65 * lambert);
}

int SyntheticScene::label_at(double u, double v, double t) const {
    const std::vector<ObjectState> objects = objects_at(t);
    const Hit h = trace(u, v, objects);
    return h.object < 0 ? spec_.classes + 1 : objects[static_cast<std::size_t>(h.object)].label;
}

SyntheticFrame SyntheticScene::render(int frame) const {
    const double t = frame_time(frame);
    const std::vector<ObjectState> objects = objects_at(t);
    const int w = spec_.width;
    const int h = spec_.height;
    const int df = spec_.full_dim;
    SyntheticFrame out;
    out.color.resize(static_cast<std::size_t>(w) * h * 3);
    out.depth.resize(static_cast<std::size_t>(w) * h);
    out.labels.resize(static_cast<std::size_t>(w) * h);
    out.features_full.resize(static_cast<std::size_t>(w) * h * df);
    std::mt19937_64 rng(spec_.seed * 0x9E3779B97F4A7C15ull + 1469598103934665603ull + static_cast<std::uint64_t>(frame));
    std::normal_distribution<double> normal(0.0, spec_.pixel_noise);
    std::vector<double> e(df);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t p = static_cast<std::size_t>(y) * w + x;
            const Hit center = trace(x, y, objects);
            Vec3 rgb = Vec3::Zero();
            for (int sy = 0; sy < 2; ++sy) {
                for (int sx = 0; sx < 2; ++sx) {
                    const double u = x - 0.25 + 0.5 * sx;
                    const double v = y - 0.25 + 0.5 * sy;
                    rgb += shade(trace(u, v, objects), u, v, objects);
                }
            }
            rgb *= 0.25;
            for (int c = 0; c < 3; ++c) {
                out.color[3 * p + c] = static_cast<std::uint8_t>(std::lround(std::clamp(rgb[c], 0.0, 1.0) * 255.0));
            }
            out.depth[p] = static_cast<float>(center.depth);
            const int label = center.object < 0 ? spec_.classes + 1 : objects[static_cast<std::size_t>(center.object)].label;
            out.labels[p] = static_cast<std::uint16_t>(label);
            const std::vector<double>& a = axis(label);
            double n2 = 0.0;
            for (int k = 0; k < df; ++k) {
                e[k] = a[k] + normal(rng);
                if (center.object >= 0) e[k] += object_offsets_[static_cast<std::size_t>(center.object)][k];
                n2 += e[k] * e[k];
            }
            const double inv = 1.0 / std::sqrt(n2);
            for (int k = 0; k < df; ++k) out.features_full[p * df + k] = static_cast<float>(e[k] * inv);
        }
    }
    return out;
}

QueryLexicon SyntheticScene::lexicon() const {
    QueryLexicon lex;
    lex.dim = spec_.full_dim;
    for (int k = 0; k < spec_.classes; ++k) lex.add_prompt(class_name(k), axes_[static_cast<std::size_t>(k)]);
    // Each canonical phrase leans toward one axis but overlaps all of them, so
    // a pixel must match the prompt better than a generic description.
    const std::size_t count = axes_.size();
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> c(spec_.full_dim, 0.0);
        for (std::size_t a = 0; a < count; ++a) {
            const double weight = a == i % count ? 1.5 : 0.5;
            for (int k = 0; k < spec_.full_dim; ++k) c[k] += weight * axes_[a][k];
        }
        lex.set_canonical(QueryLexicon::kCanonicalPhrases[i], c);
    }
    return lex;
}

void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& dir) {
    const SyntheticScene scene(spec);
    std::filesystem::create_directories(dir / "frames");
    SceneManifest m;
    m.root = dir;
    m.width = spec.width;
    m.height = spec.height;
    m.camera = scene.camera();
    m.feature_dim = spec.feature_dim;
    m.full_feature_dim = spec.full_dim;
    m.lexicon = "lexicon.json";
    for (int k = 0; k < spec.classes; ++k) m.classes.push_back(SyntheticScene::class_name(k));
    const auto h = static_cast<std::uint64_t>(spec.height);
    const auto w = static_cast<std::uint64_t>(spec.width);
    for (int f = 0; f < spec.frames; ++f) {
        const SyntheticFrame frame = scene.render(f);
        FrameEntry e;
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d", f);
        e.name = name;
        e.timestamp = f / spec.fps;
        e.color = tensor_name(f, "color");
        e.depth = tensor_name(f, "depth");
        e.labels = tensor_name(f, "labels");
        e.features_full = tensor_name(f, "features_full");
        write_tensor(dir / e.color, Tensor::from_u8({h, w, 3}, frame.color));
        write_tensor(dir / e.depth, Tensor::from_f32({h, w}, frame.depth));
        write_tensor(dir / e.labels, Tensor::from_u16({h, w}, frame.labels));
        write_tensor(dir / e.features_full,
                     Tensor::from_f32({h, w, static_cast<std::uint64_t>(spec.full_dim)}, frame.features_full));
        m.frames.push_back(std::move(e));
    }
    save_lexicon(dir / m.lexicon, scene.lexicon());
    write_manifest(dir / "manifest.json", m);
}

}  // namespace semsplat
