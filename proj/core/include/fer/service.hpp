// Copyright 2026 The fer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Session-oriented prediction service. `Service` holds the API logic and is
// transport-free; `HttpServer` exposes it over HTTP/1.1 and WebSocket.
//
// Endpoints
//   POST /api/session                 {"name"} -> {"id","name","created"}
//   POST /api/session/{id}/predict    PNG/JPEG body, optional X-Filename
//   GET  /api/session/{id}/live       WebSocket; binary frame in, JSON out
//   GET  /api/session/{id}/report     label counts and mean engagement
//   GET  /api/labels                  label names and emoji, in order
//   GET  /api/health
//   GET  /...                         static files from static_dir
//
// Every prediction is appended as one JSON line to
// <sessions_dir>/<id>.jsonl; <id>.meta.json holds the name and creation
// time. Reports are computed from the log, so they survive a restart.

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>

#include "fer/detect.hpp"
#include "fer/pipeline.hpp"

namespace fer {

struct ServiceConfig {
  std::filesystem::path weights;  // empty: requires fixture_mode
  std::filesystem::path cascade;
  double tau = kDefaultTau;
  EngagementConfig engagement{};
  DetectOptions detect{};
  std::string bind_address = "127.0.0.1";
  unsigned short port = 8080;
  // Without weights, serve a randomly initialized small network (fixed
  // seed). Predictions are meaningless but the wire contract is complete.
  bool fixture_mode = false;
  std::filesystem::path sessions_dir = "sessions";
  std::filesystem::path static_dir;  // empty: no static files

  void validate() const;
};

/// Parses the JSON config. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected. Throws InvalidArgument.
ServiceConfig parse_service_config(std::string_view json_text,
                                   const std::filesystem::path& base_dir);
ServiceConfig load_service_config(const std::filesystem::path& path);

/// FER_CONFIG when set, otherwise `requested`.
std::filesystem::path resolve_config_path(const std::filesystem::path& requested);

/// The network fixture mode serves.
ResNetConfig fixture_model_config();
inline constexpr std::uint64_t kFixtureModelSeed = 20240607;

struct HttpRequest {
  std::string method;
  std::string target;
  std::string body;
  std::string filename;  // X-Filename header
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// ISO-8601 UTC with milliseconds, e.g. 2026-10-16T09:30:00.125Z.
std::string iso_timestamp(std::chrono::system_clock::time_point t);
/// YYYY-MM-DD in UTC.
std::string iso_date(std::chrono::system_clock::time_point t);

class Service {
 public:
  Service(ServiceConfig config,
          std::shared_ptr<const EmotionClassifier> classifier,
          std::shared_ptr<const CascadeModel> cascade);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Loads weights (or builds the fixture network) and the cascade.
  static std::unique_ptr<Service> from_config(const ServiceConfig& config);

  const ServiceConfig& config() const noexcept { return config_; }

  /// Plain HTTP endpoints. Never throws for client errors.
  HttpResponse handle(const HttpRequest& request);

  /// Session id when `target` is a live-stream path of a known session.
  std::optional<std::string> live_session(std::string_view target) const;
  bool is_live_path(std::string_view target) const;

  /// Processes one live message; returns the JSON text reply. Messages of
  /// one session are serialized and numbered by a per-session seq.
  std::string live_frame(const std::string& session_id,
                         std::span<const std::uint8_t> message,
                         bool binary = true);

  std::size_t session_count() const;

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id) const;
  void load_existing_sessions();
  HttpResponse create_session(const std::string& body);
  HttpResponse predict_static(Session& session, const HttpRequest& request);
  HttpResponse report(Session& session);
  HttpResponse serve_static(const std::string& target) const;

  ServiceConfig config_;
  PredictOptions predict_options_;
  std::shared_ptr<const EmotionClassifier> classifier_;
  std::shared_ptr<const CascadeModel> cascade_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

/// Thread-per-connection HTTP/WebSocket front end for a Service.
class HttpServer {
 public:
  /// Binds immediately; port 0 picks a free port.
  HttpServer(Service& service, const std::string& address,
             unsigned short port);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  unsigned short port() const noexcept;

  /// Accepts connections on a background thread.
  void start();
  /// Blocks until stop() is called from elsewhere.
  void wait();
  /// Closes the listener and all open connections, joins every thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fer
