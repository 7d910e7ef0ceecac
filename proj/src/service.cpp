// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "semsplat/service.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <thread>

#include <Eigen/Geometry>

#include "httplib.h"
#include "json.hpp"
#include "semsplat/checkpoint.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/errors.hpp"
#include "semsplat/image_io.hpp"

namespace semsplat {
namespace {

using nlohmann::json;

constexpr int kMaxImageSide = 4096;

/// Rejected request field; `path` is the JSON path of the offending value.
struct FieldError {
    std::string path;
    std::string message;
};

HttpReply json_reply(int status, const json& body) {
    return {status, "application/json", body.dump()};
}

HttpReply field_error(const FieldError& e) {
    return json_reply(400, {{"error", e.path.empty() ? e.message : "field '" + e.path + "': " + e.message},
                            {"field", e.path}});
}

[[noreturn]] void reject(const std::string& path, const std::string& message) { throw FieldError{path, message}; }

json parse_body(const std::string& body) {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        reject("", std::string("body is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) reject("", "body must be a JSON object");
    return j;
}

void only_fields(const json& j, const std::string& prefix, std::initializer_list<const char*> allowed) {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) reject(prefix + it.key(), "unknown field");
    }
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) reject(path, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) reject(path, "must be finite");
    return v;
}

double unit_number(const json& j, const std::string& path) {
    const double v = number(j, path);
    if (v < 0.0 || v > 1.0) reject(path, "must be in [0,1]");
    return v;
}

int image_side(const json& j, const std::string& path) {
    if (!j.is_number_integer()) reject(path, "must be an integer");
    const auto v = j.get<std::int64_t>();
    if (v < 1 || v > kMaxImageSide) reject(path, "must be in [1," + std::to_string(kMaxImageSide) + "]");
    return static_cast<int>(v);
}

Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) reject(path, "must be an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

/// Look-at override; resolution defaults to the service's.
Camera parse_camera(const json& j, const Camera& base) {
    if (!j.is_object()) reject("camera", "must be an object");
    only_fields(j, "camera.", {"eye", "target", "up", "fov", "width", "height"});
    if (!j.contains("eye")) reject("camera.eye", "is required");
    if (!j.contains("target")) reject("camera.target", "is required");
    const Vec3 eye = vec3(j["eye"], "camera.eye");
    const Vec3 target = vec3(j["target"], "camera.target");
    const Vec3 up = j.contains("up") ? vec3(j["up"], "camera.up") : Vec3(0.0, -1.0, 0.0);
    const double default_fov = 2.0 * std::atan(0.5 * base.height / base.fy) * 180.0 / M_PI;
    const double fov = j.contains("fov") ? number(j["fov"], "camera.fov") : default_fov;
    if (!(fov > 0.0 && fov < 180.0)) reject("camera.fov", "must be in (0,180) degrees");
    const int w = j.contains("width") ? image_side(j["width"], "camera.width") : base.width;
    const int h = j.contains("height") ? image_side(j["height"], "camera.height") : base.height;
    if ((target - eye).norm() < 1e-9) reject("camera.target", "must differ from camera.eye");
    if ((target - eye).normalized().cross(up).norm() < 1e-9) reject("camera.up", "must not be parallel to the view direction");
    return Camera::look_at(eye, target, up, fov, w, h, base.near, base.far);
}

std::string png_string(const Image8& image) {
    const std::vector<std::uint8_t> png = encode_png(image);
    return {png.begin(), png.end()};
}

std::pair<std::string, std::string> split_target(const std::string& target) {
    const auto q = target.find('?');
    if (q == std::string::npos) return {target, ""};
    return {target.substr(0, q), target.substr(q + 1)};
}

std::string query_param(const std::string& query, const std::string& key) {
    std::size_t pos = 0;
    while (pos <= query.size()) {
        const std::size_t end = std::min(query.find('&', pos), query.size());
        const std::string kv = query.substr(pos, end - pos);
        const auto eq = kv.find('=');
        if (kv.substr(0, eq) == key) return eq == std::string::npos ? "" : kv.substr(eq + 1);
        pos = end + 1;
    }
    return {};
}

class SlotGuard {
public:
    explicit SlotGuard(QueryService& s) : service_(s), held_(s.try_acquire()) {}
    ~SlotGuard() {
        if (held_) service_.release();
    }
    bool held() const { return held_; }

private:
    QueryService& service_;
    bool held_;
};

}  // namespace

void ServeConfig::validate() const {
    if (port < 0 || port > 65535) fail(ErrorCode::InvalidArgument, "port must be in [0,65535]");
    if (max_concurrent < 1) fail(ErrorCode::InvalidArgument, "max concurrent queries must be >= 1");
    if (width < 0 || height < 0 || (width == 0) != (height == 0)) {
        fail(ErrorCode::InvalidArgument, "render resolution needs both width and height");
    }
    if (checkpoint.empty()) fail(ErrorCode::InvalidArgument, "checkpoint path is required");
    if (lexicon.empty()) fail(ErrorCode::InvalidArgument, "lexicon path is required");
    if (codec.empty()) fail(ErrorCode::InvalidArgument, "codec path is required");
}

QueryService::QueryService(QueryEngine engine, ServiceInfo info, int max_concurrent)
    : engine_(std::make_shared<const QueryEngine>(std::move(engine))),
      info_(std::move(info)),
      max_concurrent_(max_concurrent) {
    if (max_concurrent_ < 1) fail(ErrorCode::InvalidArgument, "max concurrent queries must be >= 1");
}

LoadedScene load_scene(const std::filesystem::path& checkpoint, const std::filesystem::path& codec_dir,
                       const std::filesystem::path& lexicon_path, int width, int height) {
    Checkpoint ckpt = load_checkpoint(checkpoint);
    FeatureCodec codec = load_codec(codec_dir);
    QueryLexicon lexicon = load_lexicon(lexicon_path);
    if (ckpt.scene_json.empty()) fail(ErrorCode::Validation, "checkpoint has no scene record (camera)");
    const json scene = json::parse(ckpt.scene_json);
    if (!scene.contains("camera")) fail(ErrorCode::Validation, "checkpoint scene record has no camera");
    Camera camera = camera_from_json(scene["camera"].dump());
    if (width > 0 && height > 0) camera = camera.resized(width, height);
    if (codec.compressed_dim != ckpt.model.cloud.feature_dim) {
        fail(ErrorCode::ShapeMismatch, "codec compressed dimension " + std::to_string(codec.compressed_dim) +
                                           " differs from checkpoint feature dimension " +
                                           std::to_string(ckpt.model.cloud.feature_dim));
    }
    if (codec.full_dim != lexicon.dim) {
        fail(ErrorCode::ShapeMismatch, "lexicon dimension " + std::to_string(lexicon.dim) +
                                           " differs from codec dimension " + std::to_string(codec.full_dim));
    }
    ServiceInfo info;
    if (scene.contains("frames")) info.frames = scene["frames"].get<std::size_t>();
    if (scene.contains("classes")) info.classes = scene["classes"].get<std::vector<std::string>>();
    info.config_hash = ckpt.config_hash;
    return {QueryEngine(std::move(ckpt.model), std::move(codec), std::move(lexicon), camera), std::move(info)};
}

namespace {

QueryService load_service(const ServeConfig& config) {
    config.validate();
    LoadedScene s = load_scene(config.checkpoint, config.codec, config.lexicon, config.width, config.height);
    return QueryService(std::move(s.engine), std::move(s.info), config.max_concurrent);
}

}  // namespace

QueryService::QueryService(const ServeConfig& config) : QueryService(load_service(config)) {}

bool QueryService::try_acquire() {
    int cur = in_flight_.load();
    while (cur < max_concurrent_) {
        if (in_flight_.compare_exchange_weak(cur, cur + 1)) return true;
    }
    return false;
}

void QueryService::release() { in_flight_.fetch_sub(1); }

HttpReply QueryService::handle(const std::string& method, const std::string& target, const std::string& body) {
    const auto [path, query_string] = split_target(target);
    if (path == "/healthz") {
        if (method != "GET") return json_reply(405, {{"error", "use GET"}});
        return {200, "text/plain", "ok"};
    }
    const bool known = path == "/meta" || path == "/render" || path == "/query";
    if (!known) return json_reply(404, {{"error", "no such endpoint: " + path}});
    const char* want = path == "/meta" ? "GET" : "POST";
    if (method != want) return json_reply(405, {{"error", std::string("use ") + want}});

    SlotGuard slot(*this);
    if (!slot.held()) {
        return json_reply(429, {{"error", "too many concurrent requests"}, {"max_concurrent", max_concurrent_}});
    }
    try {
        if (path == "/meta") return meta();
        if (path == "/render") return render(body);
        return query(body, query_param(query_string, "image"));
    } catch (const FieldError& e) {
        return field_error(e);
    } catch (const UnknownPromptError& e) {
        return json_reply(404, {{"error", e.what()}, {"suggestions", e.suggestions()}});
    } catch (const std::exception& e) {
        return json_reply(500, {{"error", e.what()}});
    }
}

HttpReply QueryService::meta() const {
    const Camera& cam = engine_->camera();
    json j;
    j["frames"] = info_.frames ? json(*info_.frames) : json(nullptr);
    j["time_range"] = {0.0, 1.0};
    j["resolution"] = {{"width", cam.width}, {"height", cam.height}};
    j["prompts"] = engine_->lexicon().prompt_names();
    j["classes"] = info_.classes;
    j["gaussians"] = engine_->model().cloud.size();
    j["feature_dim"] = engine_->model().cloud.feature_dim;
    j["embedding_dim"] = engine_->lexicon().dim;
    j["default_threshold"] = kDefaultThreshold;
    j["config_hash"] = info_.config_hash;
    return json_reply(200, j);
}

HttpReply QueryService::render(const std::string& body) const {
    const json j = parse_body(body);
    only_fields(j, "", {"time", "camera"});
    if (!j.contains("time")) reject("time", "is required");
    const double t = unit_number(j["time"], "time");
    std::optional<Camera> cam;
    if (j.contains("camera")) cam = parse_camera(j["camera"], engine_->camera());
    const RenderOutput out = engine_->render(t, cam);
    return {200, "image/png", png_string(to_image8(out.color, out.width, out.height, 3))};
}

HttpReply QueryService::query(const std::string& body, const std::string& image) const {
    if (!image.empty() && image != "mask" && image != "heatmap") reject("image", "must be 'mask' or 'heatmap'");
    const json j = parse_body(body);
    only_fields(j, "", {"prompt", "embedding", "time", "threshold", "camera"});
    QueryRequest req;
    if (j.contains("prompt")) {
        if (!j["prompt"].is_string()) reject("prompt", "must be a string");
        req.prompt = j["prompt"].get<std::string>();
        if (req.prompt.empty()) reject("prompt", "must not be empty");
    }
    if (j.contains("embedding")) {
        const json& e = j["embedding"];
        const int dim = engine_->lexicon().dim;
        if (!e.is_array()) reject("embedding", "must be an array of numbers");
        if (static_cast<int>(e.size()) != dim) {
            reject("embedding", "must have " + std::to_string(dim) + " entries, got " + std::to_string(e.size()));
        }
        std::vector<double> v;
        double norm2 = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) {
            v.push_back(number(e[i], "embedding[" + std::to_string(i) + "]"));
            norm2 += v.back() * v.back();
        }
        if (norm2 <= 0.0) reject("embedding", "must not be the zero vector");
        req.embedding = std::move(v);
        if (req.prompt.empty()) req.prompt = "<embedding>";
    }
    if (!j.contains("prompt") && !j.contains("embedding")) reject("prompt", "prompt or embedding is required");
    if (!j.contains("time")) reject("time", "is required");
    req.time = unit_number(j["time"], "time");
    if (j.contains("threshold")) req.threshold = unit_number(j["threshold"], "threshold");
    if (j.contains("camera")) req.camera = parse_camera(j["camera"], engine_->camera());

    const QueryResult r = engine_->query(req);
    const std::string mask_png = png_string(mask_image(r.mask, r.width, r.height));
    const std::string heat_png = png_string(heatmap_image(r.relevancy, r.width, r.height));
    if (image == "mask") return {200, "image/png", mask_png};
    if (image == "heatmap") return {200, "image/png", heat_png};

    auto bytes = [](const std::string& s) {
        return base64_encode({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    };
    json out;
    out["prompt"] = r.prompt;
    out["time"] = req.time;
    out["threshold"] = r.threshold;
    out["width"] = r.width;
    out["height"] = r.height;
    out["scores"] = {{"min", r.min_score()}, {"max", r.max_score()}, {"mean", r.mean_score()}, {"coverage", r.coverage()}};
    out["heatmap"] = {{"content_type", "image/png"}, {"data", bytes(heat_png)}};
    out["mask"] = {{"content_type", "image/png"}, {"data", bytes(mask_png)}};
    return json_reply(200, out);
}

struct ServiceHost::Impl {
    httplib::Server server;
    std::thread thread;
};

ServiceHost::ServiceHost(QueryService& service, const std::string& host, int port) : impl_(std::make_unique<Impl>()) {
    const int workers = service.max_concurrent() + 2;
    impl_->server.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
    auto route = [&service](const httplib::Request& req, httplib::Response& res) {
        const HttpReply r = service.handle(req.method, req.target, req.body);
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    for (const char* path : {"/healthz", "/meta", "/render", "/query"}) {
        impl_->server.Get(path, route);
        impl_->server.Post(path, route);
    }
    if (port == 0) {
        port_ = impl_->server.bind_to_any_port(host);
    } else {
        port_ = impl_->server.bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) fail(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

ServiceHost::~ServiceHost() { stop(); }

void ServiceHost::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

void serve(const ServeConfig& config) {
    QueryService service(config);
    ServiceHost host(service, config.host, config.port);
    std::printf("listening on http://%s:%d\n", config.host.c_str(), host.port());
    std::fflush(stdout);
    for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

}  // namespace semsplat
