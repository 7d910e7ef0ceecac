// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semsplat/query.hpp"

namespace semsplat {

struct ServeConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path checkpoint;
    std::filesystem::path lexicon;
    std::filesystem::path codec;
    int max_concurrent = 4;
    int width = 0;  // default render resolution; 0 keeps the training camera's
    int height = 0;

    void validate() const;
};

struct HttpReply {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Scene facts reported by GET /meta.
struct ServiceInfo {
    std::optional<std::size_t> frames;
    std::vector<std::string> classes;
    std::string config_hash;
};

struct LoadedScene {
    QueryEngine engine;
    ServiceInfo info;
};

/// Checkpoint + codec + lexicon with cross-checked dimensions. The camera is
/// the one recorded at training time, optionally resized.
LoadedScene load_scene(const std::filesystem::path& checkpoint, const std::filesystem::path& codec,
                       const std::filesystem::path& lexicon, int width = 0, int height = 0);

/// Request handling without sockets. Endpoints:
///   GET  /healthz  -> "ok"
///   GET  /meta     -> frames, time range, resolution, prompts
///   POST /render   {time, camera?}                              -> PNG
///   POST /query    {prompt | embedding, time, threshold?, camera?} -> JSON with
///                  score stats and base64 PNG heatmap + mask; `?image=mask`
///                  or `?image=heatmap` returns that PNG directly.
/// camera = {eye[3], target[3], up[3]?, fov?, width?, height?}, fov in degrees.
class QueryService {
public:
    /// Loads and validates every referenced file.
    explicit QueryService(const ServeConfig& config);
    QueryService(QueryEngine engine, ServiceInfo info, int max_concurrent);

    HttpReply handle(const std::string& method, const std::string& target, const std::string& body);

    /// Concurrency slots; requests beyond `max_concurrent` get 429.
    bool try_acquire();
    void release();
    int in_flight() const { return in_flight_.load(); }
    int max_concurrent() const { return max_concurrent_; }

    const QueryEngine& engine() const { return *engine_; }

private:
    HttpReply meta() const;
    HttpReply render(const std::string& body) const;
    HttpReply query(const std::string& body, const std::string& image) const;

    std::shared_ptr<const QueryEngine> engine_;
    ServiceInfo info_;
    int max_concurrent_ = 4;
    std::atomic<int> in_flight_{0};
};

/// HTTP listener over a QueryService, running on a background thread.
class ServiceHost {
public:
    ServiceHost(QueryService& service, const std::string& host, int port);
    ~ServiceHost();
    ServiceHost(const ServiceHost&) = delete;
    ServiceHost& operator=(const ServiceHost&) = delete;

    int port() const { return port_; }
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

/// Loads, binds and blocks until the process is stopped.
void serve(const ServeConfig& config);

}  // namespace semsplat
