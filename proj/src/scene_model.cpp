// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/scene_model.hpp"

#include <array>
#include <cmath>

#include "semsplat/errors.hpp"

namespace semsplat {
namespace {

void zero(std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); }

void zero(FdmParams& p) {
    zero(p.weights);
    zero(p.centers);
    zero(p.widths);
}

// Projects deformed Gaussians and shades them; shared by the static and deformed paths.
SplatSet build_splats(const GaussianCloud& cloud, std::span<const double> means, std::span<const double> rotations,
                      std::span<const double> log_scales, std::span<const double> features, const Camera& camera,
                      const RasterSettings& settings, std::vector<Vec3>* dirs, std::vector<double>* dists,
                      std::vector<std::uint8_t>* open) {
    const std::size_t n = cloud.size();
    const int d = cloud.feature_dim;
    const int k = cloud.sh_count();
    const Vec3 cam_center = camera.center();
    SplatSet set;
    set.feature_dim = d;
    set.splats.reserve(n);
    set.features.reserve(n * d);
    std::array<double, 16> basis{};
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 mean(means[3 * i], means[3 * i + 1], means[3 * i + 2]);
        const Vec4 rot(rotations[4 * i], rotations[4 * i + 1], rotations[4 * i + 2], rotations[4 * i + 3]);
        const Vec3 ls(log_scales[3 * i], log_scales[3 * i + 1], log_scales[3 * i + 2]);
        std::optional<Splat2D> s = project_gaussian(mean, rot, ls, camera, settings);
        if (!s) continue;
        const Vec3 v = mean - cam_center;
        const double dist = v.norm();
        const Vec3 dir = v / dist;
        sh_basis(cloud.sh_degree, dir, std::span<double>(basis.data(), static_cast<std::size_t>(k)));
        std::uint8_t mask = 0;
        for (int c = 0; c < 3; ++c) {
            double sum = 0.5;
            const double* coeff = &cloud.sh_coeffs[(3 * i + c) * k];
            for (int j = 0; j < k; ++j) sum += coeff[j] * basis[j];
            if (sum > 0.0 && sum < 1.0) mask |= static_cast<std::uint8_t>(1u << c);
            s->rgb[c] = std::clamp(sum, 0.0, 1.0);
        }
        s->alpha_base = sigmoid(cloud.opacity_logits[i]);
        s->source_index = static_cast<std::uint32_t>(i);
        set.splats.push_back(*s);
        for (int j = 0; j < d; ++j) set.features.push_back(features[i * d + j]);
        if (dirs) dirs->push_back(dir);
        if (dists) dists->push_back(dist);
        if (open) open->push_back(mask);
    }
    return set;
}

std::vector<double> normalized_rotations(const GaussianCloud& cloud) {
    std::vector<double> out(cloud.rotations.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        double q[4];
        double norm2 = 0.0;
        for (int k = 0; k < 4; ++k) {
            q[k] = cloud.rotations[4 * i + k] + 0.0;
            norm2 += q[k] * q[k];
        }
        const double norm = std::sqrt(norm2);
        for (int k = 0; k < 4; ++k) out[4 * i + k] = q[k] / norm;
    }
    return out;
}

}  // namespace

SceneModel SceneModel::create(GaussianCloud cloud, int basis_count, std::uint64_t tracker_seed) {
    SceneModel m;
    const std::size_t n = cloud.size();
    const int d = cloud.feature_dim;
    m.cloud = std::move(cloud);
    m.deformation = DeformationField::identity(n, basis_count);
    m.tracker = SemanticTracker::initialized(d, tracker_seed);
    return m;
}

SceneModel SceneModel::zeros_like() const {
    SceneModel g = *this;
    zero(g.cloud.means);
    zero(g.cloud.rotations);
    zero(g.cloud.log_scales);
    zero(g.cloud.opacity_logits);
    zero(g.cloud.sh_coeffs);
    zero(g.cloud.features);
    zero(g.deformation.mean);
    zero(g.deformation.rotation);
    zero(g.deformation.scale);
    zero(g.deformation.feature);
    zero(g.tracker.conv1_weights);
    zero(g.tracker.conv1_bias);
    zero(g.tracker.conv2_weights);
    zero(g.tracker.conv2_bias);
    zero(g.tracker.head_weights);
    zero(g.tracker.head_bias);
    return g;
}

void SceneModel::check_shapes() const {
    cloud.check_shapes();
    deformation.check_shapes(cloud.size());
    tracker.check_shapes();
    if (tracker.feature_dim != cloud.feature_dim) {
        fail(ErrorCode::ShapeMismatch, "tracker feature dimension does not match the cloud");
    }
}

void SceneModel::project_constraints() {
    deformation.clamp_widths();
    cloud.normalize_rotations();
}

const char* param_group_name(ParamGroup group) {
    switch (group) {
        case ParamGroup::Means: return "means";
        case ParamGroup::Rotations: return "rotations";
        case ParamGroup::Scales: return "scales";
        case ParamGroup::Opacity: return "opacity";
        case ParamGroup::Color: return "color";
        case ParamGroup::Features: return "features";
        case ParamGroup::Deformation: return "deformation";
        case ParamGroup::Tracker: return "tracker";
    }
    return "unknown";
}

std::vector<ParameterView> model_parameters(SceneModel& m) {
    using U = std::uint64_t;
    const U n = m.cloud.size();
    const U d = static_cast<U>(m.cloud.feature_dim);
    const U k = static_cast<U>(m.cloud.sh_count());
    std::vector<ParameterView> out;
    out.push_back({"cloud.means", ParamGroup::Means, {n, 3}, m.cloud.means});
    out.push_back({"cloud.rotations", ParamGroup::Rotations, {n, 4}, m.cloud.rotations});
    out.push_back({"cloud.log_scales", ParamGroup::Scales, {n, 3}, m.cloud.log_scales});
    out.push_back({"cloud.opacity_logits", ParamGroup::Opacity, {n}, m.cloud.opacity_logits});
    out.push_back({"cloud.sh_coeffs", ParamGroup::Color, {n, 3, k}, m.cloud.sh_coeffs});
    out.push_back({"cloud.features", ParamGroup::Features, {n, d}, m.cloud.features});
    auto bank = [&](const std::string& name, FdmParams& p) {
        const U b = static_cast<U>(p.basis_count);
        out.push_back({name + ".weights", ParamGroup::Deformation, {n, static_cast<U>(p.channels), b}, p.weights});
        out.push_back({name + ".centers", ParamGroup::Deformation, {b}, p.centers});
        out.push_back({name + ".widths", ParamGroup::Deformation, {b}, p.widths});
    };
    bank("deform.mean", m.deformation.mean);
    bank("deform.rotation", m.deformation.rotation);
    bank("deform.scale", m.deformation.scale);
    bank("deform.feature", m.deformation.feature);
    const U c = SemanticTracker::kChannels;
    const U kk = SemanticTracker::kKernel;
    const U len = d + 1;
    out.push_back({"tracker.conv1_weights", ParamGroup::Tracker, {c, 1, kk}, m.tracker.conv1_weights});
    out.push_back({"tracker.conv1_bias", ParamGroup::Tracker, {c}, m.tracker.conv1_bias});
    out.push_back({"tracker.conv2_weights", ParamGroup::Tracker, {c, c, kk}, m.tracker.conv2_weights});
    out.push_back({"tracker.conv2_bias", ParamGroup::Tracker, {c}, m.tracker.conv2_bias});
    out.push_back({"tracker.head_weights", ParamGroup::Tracker, {d, c * len}, m.tracker.head_weights});
    out.push_back({"tracker.head_bias", ParamGroup::Tracker, {d}, m.tracker.head_bias});
    return out;
}

ModelForward render_model(const SceneModel& model, const Camera& camera, double t, const RasterSettings& settings) {
    ModelForward fw;
    fw.t = t;
    fw.geometry = deform_gaussian(model.cloud, model.deformation, t);
    if (model.tracker_enabled) {
        fw.features = deform_feature(model.cloud, model.tracker, model.deformation.feature, t);
    } else {
        fw.features.features = model.cloud.features;
    }
    fw.splats = build_splats(model.cloud, fw.geometry.means, fw.geometry.rotations, fw.geometry.log_scales,
                             fw.features.features, camera, settings, &fw.view_dirs, &fw.view_dist, &fw.rgb_open);
    fw.output = rasterize_forward(fw.splats, camera.width, camera.height, settings, &fw.trace);
    return fw;
}

RenderOutput render_static(const GaussianCloud& cloud, const Camera& camera, const RasterSettings& settings) {
    const std::vector<double> rotations = normalized_rotations(cloud);
    const SplatSet splats = build_splats(cloud, cloud.means, rotations, cloud.log_scales, cloud.features, camera,
                                         settings, nullptr, nullptr, nullptr);
    return rasterize_forward(splats, camera.width, camera.height, settings);
}

void backward_model(const SceneModel& model, const Camera& camera, const RasterSettings& settings,
                    const ModelForward& fw, const RenderGradient& upstream, SceneModel& grad) {
    const GaussianCloud& cloud = model.cloud;
    const std::size_t n = cloud.size();
    const int d = cloud.feature_dim;
    const int k = cloud.sh_count();
    const SplatGradients sg = rasterize_backward(fw.splats, settings, fw.trace, upstream);

    std::vector<double> d_means(3 * n, 0.0), d_rot(4 * n, 0.0), d_scales(3 * n, 0.0), d_feat(n * d, 0.0);
    std::array<double, 16> basis{};
    std::array<double, 48> basis_grad{};
    for (std::size_t s = 0; s < fw.splats.size(); ++s) {
        const Splat2D& sp = fw.splats.splats[s];
        const std::size_t i = sp.source_index;
        const Vec3 mean(&fw.geometry.means[3 * i]);
        const Vec4 rot(&fw.geometry.rotations[4 * i]);
        const Vec3 ls(&fw.geometry.log_scales[3 * i]);
        const ProjectionGradient pg =
            project_gaussian_backward(mean, rot, ls, camera, sg.center[s], sg.cov2d[s], sg.view_depth[s]);
        Vec3 dm = pg.mean;

        // Color: rgb_c = clamp(sum_j coeff_cj Y_j(dir) + 0.5)
        sh_basis(cloud.sh_degree, fw.view_dirs[s], std::span<double>(basis.data(), static_cast<std::size_t>(k)),
                 std::span<double>(basis_grad.data(), static_cast<std::size_t>(3 * k)));
        Vec3 d_dir = Vec3::Zero();
        for (int c = 0; c < 3; ++c) {
            if (!(fw.rgb_open[s] & (1u << c))) continue;
            const double g = sg.rgb[s][c];
            if (g == 0.0) continue;
            double* gc = &grad.cloud.sh_coeffs[(3 * i + c) * k];
            const double* coeff = &cloud.sh_coeffs[(3 * i + c) * k];
            for (int j = 0; j < k; ++j) {
                gc[j] += g * basis[j];
                d_dir += g * coeff[j] * Vec3(basis_grad[3 * j], basis_grad[3 * j + 1], basis_grad[3 * j + 2]);
            }
        }
        const Vec3& dir = fw.view_dirs[s];
        dm += (d_dir - dir * dir.dot(d_dir)) / fw.view_dist[s];

        const double o = sp.alpha_base;
        grad.cloud.opacity_logits[i] += sg.alpha_base[s] * o * (1.0 - o);

        for (int a = 0; a < 3; ++a) {
            d_means[3 * i + a] += dm[a];
            d_scales[3 * i + a] += pg.log_scale[a];
        }
        for (int a = 0; a < 4; ++a) d_rot[4 * i + a] += pg.rotation[a];
        for (int j = 0; j < d; ++j) d_feat[i * d + j] += sg.features[s * d + j];
    }

    deform_gaussian_backward(cloud, model.deformation, fw.t, fw.geometry, d_means, d_rot, d_scales, grad.cloud,
                             grad.deformation);
    if (model.tracker_enabled) {
        deform_feature_backward(cloud, model.tracker, model.deformation.feature, fw.t, fw.features, d_feat,
                                grad.cloud, grad.tracker, grad.deformation.feature);
    } else {
        for (std::size_t j = 0; j < d_feat.size(); ++j) grad.cloud.features[j] += d_feat[j];
    }
}

}  // namespace semsplat
