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

#include "fer/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <deque>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "fer/error.hpp"
#include "fer/weights_io.hpp"

namespace fer {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json error_json(const std::string& message) { return {{"error", message}}; }

HttpResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, error_json(message));
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(
      s.begin(), s.end(), [](char c) { return (c & 0xc0) != 0x80; }));
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string random_id() {
  static std::mutex mu;
  static std::random_device device;
  std::lock_guard lock(mu);
  std::ostringstream out;
  out << std::hex;
  for (int i = 0; i < 4; ++i) {
    out.width(8);
    out.fill('0');
    out << static_cast<std::uint32_t>(device());
  }
  return out.str();
}

bool valid_id(std::string_view id) {
  return id.size() == 32 && std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

std::vector<std::string_view> split_path(std::string_view target) {
  const auto q = target.find('?');
  if (q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= target.size()) {
    const auto slash = target.find('/', start);
    const auto end = slash == std::string_view::npos ? target.size() : slash;
    if (end > start) parts.push_back(target.substr(start, end - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return parts;
}

json face_json(const FaceResult& face) {
  return {{"x", face.box.x},
          {"y", face.box.y},
          {"w", face.box.w},
          {"h", face.box.h},
          {"neighbors", face.box.neighbor_count},
          {"label", std::string(label_name(face.label))},
          {"emoji", utf8(face.emoji)},
          {"codepoint", codepoint_string(face.emoji)},
          {"probs", face.distribution.probs}};
}

json faces_json(const FramePrediction& frame) {
  json faces = json::array();
  for (const FaceResult& f : frame.faces) faces.push_back(face_json(f));
  return faces;
}

void append_line(const fs::path& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  out << record.dump() << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to " + path.string());
}

std::string content_type_for(const fs::path& p) {
  static const std::map<std::string, std::string> types = {
      {".html", "text/html; charset=utf-8"},
      {".js", "text/javascript"},
      {".mjs", "text/javascript"},
      {".css", "text/css"},
      {".json", "application/json"},
      {".svg", "image/svg+xml"},
      {".png", "image/png"},
      {".jpg", "image/jpeg"},
      {".ico", "image/x-icon"},
      {".map", "application/json"},
      {".txt", "text/plain; charset=utf-8"}};
  const auto it = types.find(p.extension().string());
  return it == types.end() ? "application/octet-stream" : it->second;
}

template <typename V>
V get_or(const json& j, const char* key, V fallback) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? fallback : it->get<V>();
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> keys,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw InvalidArgument("config: unknown key '" + where + key + "'");
    }
  }
}

}  // namespace

// --- config -----------------------------------------------------------------

void ServiceConfig::validate() const {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw InvalidArgument("config: tau must lie in [0,1]");
  }
  engagement.validate();
  if (!(detect.scale_factor > 1.0)) {
    throw InvalidArgument("config: detect.scale_factor must be > 1");
  }
  if (detect.min_neighbors < 0 || detect.min_size < 1) {
    throw InvalidArgument("config: bad detector parameters");
  }
  if (weights.empty() && !fixture_mode) {
    throw InvalidArgument("config: 'weights' is required unless fixture_mode");
  }
  if (cascade.empty()) throw InvalidArgument("config: 'cascade' is required");
  if (sessions_dir.empty()) {
    throw InvalidArgument("config: 'sessions_dir' must not be empty");
  }
}

ServiceConfig parse_service_config(std::string_view text,
                                   const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
  reject_unknown(j,
                 {"weights", "cascade", "tau", "engagement", "detect", "bind",
                  "fixture_mode", "sessions_dir", "static_dir"},
                 "");
  const auto path_of = [&](const char* key) -> fs::path {
    const std::string v = get_or<std::string>(j, key, "");
    if (v.empty()) return {};
    const fs::path p(v);
    return p.is_absolute() ? p : base_dir / p;
  };

  ServiceConfig c;
  try {
    c.weights = path_of("weights");
    c.cascade = path_of("cascade");
    c.tau = get_or(j, "tau", c.tau);
    c.fixture_mode = get_or(j, "fixture_mode", c.fixture_mode);
    if (j.contains("sessions_dir")) c.sessions_dir = path_of("sessions_dir");
    c.static_dir = path_of("static_dir");

    if (const auto it = j.find("engagement"); it != j.end()) {
      reject_unknown(*it, {"weights", "window_len", "no_face_score"},
                     "engagement.");
      if (const auto w = it->find("weights"); w != it->end()) {
        if (w->is_array()) {
          c.engagement.weights = w->get<std::array<double, kNumEmotions>>();
        } else {
          for (const auto& [name, value] : w->items()) {
            const auto label = parse_label(name);
            if (!label || *label == EmotionLabel::unknown) {
              throw InvalidArgument("config: unknown emotion '" + name + "'");
            }
            c.engagement.weights[static_cast<std::size_t>(*label)] =
                value.get<double>();
          }
        }
      }
      c.engagement.window_len =
          get_or(*it, "window_len", c.engagement.window_len);
      c.engagement.no_face_score =
          get_or(*it, "no_face_score", c.engagement.no_face_score);
    }
    if (const auto it = j.find("detect"); it != j.end()) {
      reject_unknown(*it, {"scale_factor", "min_neighbors", "min_size"},
                     "detect.");
      c.detect.scale_factor = get_or(*it, "scale_factor", c.detect.scale_factor);
      c.detect.min_neighbors =
          get_or(*it, "min_neighbors", c.detect.min_neighbors);
      c.detect.min_size = get_or(*it, "min_size", c.detect.min_size);
    }
    if (const auto it = j.find("bind"); it != j.end()) {
      const std::string bind = it->get<std::string>();
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) {
        throw InvalidArgument("config: bind must be host:port");
      }
      c.bind_address = bind.substr(0, colon);
      const int port = std::stoi(bind.substr(colon + 1));
      if (port < 0 || port > 65535) {
        throw InvalidArgument("config: port out of range");
      }
      c.port = static_cast<unsigned short>(port);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  } catch (const std::logic_error& e) {  // stoi
    if (dynamic_cast<const InvalidArgument*>(&e)) throw;
    throw InvalidArgument(std::string("config: bad bind port: ") + e.what());
  }
  c.validate();
  return c;
}

ServiceConfig load_service_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_service_config(text.str(), path.parent_path());
}

fs::path resolve_config_path(const fs::path& requested) {
  const char* env = std::getenv("FER_CONFIG");
  return env != nullptr && *env != '\0' ? fs::path(env) : requested;
}

ResNetConfig fixture_model_config() {
  ResNetConfig c;
  c.stage_filters = {8, 16, 32, 64};
  c.blocks_per_stage = {1, 1, 1, 1};
  return c;
}

std::string iso_timestamp(std::chrono::system_clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      t.time_since_epoch())
                      .count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

std::string iso_date(std::chrono::system_clock::time_point t) {
  return iso_timestamp(t).substr(0, 10);
}

// --- sessions ---------------------------------------------------------------

struct Service::Session {
  std::string id;
  std::string name;
  std::string created;
  fs::path log_path;
  std::mutex mu;  // serializes predictions, log appends and reports
  std::deque<FramePrediction> ring;
  std::uint64_t next_seq = 1;
};

Service::Service(ServiceConfig config,
                 std::shared_ptr<const EmotionClassifier> classifier,
                 std::shared_ptr<const CascadeModel> cascade)
    : config_(std::move(config)),
      classifier_(std::move(classifier)),
      cascade_(std::move(cascade)) {
  if (!classifier_ || !cascade_) {
    throw InvalidArgument("Service: classifier and cascade are required");
  }
  config_.engagement.validate();
  predict_options_.detect = config_.detect;
  predict_options_.tau = config_.tau;
  fs::create_directories(config_.sessions_dir);
  load_existing_sessions();
}

Service::~Service() = default;

std::unique_ptr<Service> Service::from_config(const ServiceConfig& config) {
  config.validate();
  std::shared_ptr<const EmotionClassifier> classifier;
  if (!config.weights.empty()) {
    classifier = std::make_shared<ResNetClassifier>(load_weights(config.weights));
  } else {
    Rng rng(kFixtureModelSeed);
    classifier = std::make_shared<ResNetClassifier>(
        ResNet<float>::build(fixture_model_config(), rng));
  }
  auto cascade = std::make_shared<CascadeModel>(load_cascade(config.cascade));
  return std::make_unique<Service>(config, std::move(classifier),
                                   std::move(cascade));
}

void Service::load_existing_sessions() {
  for (const auto& entry : fs::directory_iterator(config_.sessions_dir)) {
    const std::string file = entry.path().filename().string();
    const std::string suffix = ".meta.json";
    if (file.size() <= suffix.size() ||
        file.compare(file.size() - suffix.size(), suffix.size(), suffix) != 0) {
      continue;
    }
    try {
      std::ifstream in(entry.path());
      const json meta = json::parse(in);
      auto s = std::make_shared<Session>();
      s->id = meta.at("id").get<std::string>();
      s->name = meta.at("name").get<std::string>();
      s->created = meta.at("created").get<std::string>();
      if (!valid_id(s->id)) continue;
      s->log_path = config_.sessions_dir / (s->id + ".jsonl");
      std::ifstream log(s->log_path);
      std::string line;
      while (std::getline(log, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line, nullptr, false);
        if (rec.is_object() && rec.contains("seq")) {
          s->next_seq = std::max(s->next_seq, rec["seq"].get<std::uint64_t>() + 1);
        }
      }
      sessions_[s->id] = std::move(s);
    } catch (const std::exception&) {
      // A damaged meta file only loses that session.
    }
  }
}

std::size_t Service::session_count() const {
  std::shared_lock lock(sessions_mu_);
  return sessions_.size();
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool Service::is_live_path(std::string_view target) const {
  const auto parts = split_path(target);
  return parts.size() == 4 && parts[0] == "api" && parts[1] == "session" &&
         parts[3] == "live";
}

std::optional<std::string> Service::live_session(std::string_view target) const {
  if (!is_live_path(target)) return std::nullopt;
  const std::string id(split_path(target)[2]);
  if (!find(id)) return std::nullopt;
  return id;
}

HttpResponse Service::handle(const HttpRequest& request) {
  const auto parts = split_path(request.target);
  const std::string& m = request.method;
  try {
    if (parts.empty() || parts[0] != "api") {
      if (m != "GET" && m != "HEAD") {
        return error_response(405, "method not allowed");
      }
      return serve_static(request.target);
    }
    const bool read_only = m == "GET" || m == "HEAD";
    if (parts.size() == 2 && (parts[1] == "health" || parts[1] == "labels") &&
        !read_only) {
      return error_response(405, "use GET");
    }
    if (parts.size() == 2 && parts[1] == "health") {
      return json_response(200, {{"status", "ok"}});
    }
    if (parts.size() == 2 && parts[1] == "labels") {
      json labels = json::array();
      for (EmotionLabel l : kAllLabels) {
        labels.push_back({{"label", std::string(label_name(l))},
                          {"emoji", utf8(to_emoji(l))},
                          {"codepoint", codepoint_string(to_emoji(l))}});
      }
      return json_response(200, {{"labels", labels}, {"tau", config_.tau}});
    }
    if (parts.size() == 2 && parts[1] == "session") {
      if (m != "POST") return error_response(405, "use POST");
      return create_session(request.body);
    }
    if (parts.size() == 4 && parts[1] == "session") {
      const auto session = find(std::string(parts[2]));
      if (!session) return error_response(404, "unknown session");
      if (parts[3] == "predict") {
        if (m != "POST") return error_response(405, "use POST");
        return predict_static(*session, request);
      }
      if (parts[3] == "report") {
        if (m != "GET") return error_response(405, "use GET");
        return report(*session);
      }
      if (parts[3] == "live") {
        return error_response(426, "live endpoint requires a WebSocket upgrade");
      }
    }
    return error_response(404, "no such endpoint");
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::create_session(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return error_response(400, "body must be a JSON object {\"name\": ...}");
  }
  const auto it = j.find("name");
  if (it == j.end() || !it->is_string()) {
    return error_response(400, "'name' must be a string");
  }
  const std::string name = trim(it->get<std::string>());
  if (name.empty()) return error_response(400, "name must not be empty");
  if (utf8_length(name) > 64) {
    return error_response(400, "name must be at most 64 characters");
  }

  auto s = std::make_shared<Session>();
  s->name = name;
  s->created = iso_timestamp(std::chrono::system_clock::now());
  {
    std::unique_lock lock(sessions_mu_);
    do {
      s->id = random_id();
    } while (sessions_.count(s->id) != 0);
    s->log_path = config_.sessions_dir / (s->id + ".jsonl");
    sessions_[s->id] = s;
  }
  const json meta = {{"id", s->id}, {"name", s->name}, {"created", s->created}};
  std::ofstream out(config_.sessions_dir / (s->id + ".meta.json"));
  out << meta.dump() << '\n';
  std::ofstream(s->log_path, std::ios::app);  // an empty log for a new session
  return json_response(200, meta);
}

HttpResponse Service::predict_static(Session& session,
                                     const HttpRequest& request) {
  const std::span<const std::uint8_t> bytes(
      reinterpret_cast<const std::uint8_t*>(request.body.data()),
      request.body.size());
  Image image;
  try {
    image = decode_image(bytes);
  } catch (const DecodeError& e) {
    return error_response(422, e.what());
  }
  const FramePrediction frame =
      predict_image(*classifier_, *cascade_, image, predict_options_);
  const std::string ts = iso_timestamp(frame.timestamp);

  json table = json::array();
  json largest = nullptr;
  if (const auto idx = frame.largest_face()) {
    largest = *idx;
    const auto& probs = frame.faces[*idx].distribution.probs;
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      table.push_back(
          {{"label", std::string(kEmotionNames[k])}, {"probability", probs[k]}});
    }
  }
  const json faces = faces_json(frame);
  const json response = {
      {"session", session.id},
      {"timestamp", ts},
      {"file",
       {{"name", request.filename},
        {"bytes", request.body.size()},
        {"width", image.width},
        {"height", image.height},
        {"channels", image.channels}}},
      {"no_face", frame.faces.empty()},
      {"faces", faces},
      {"largest", largest},
      {"table", table}};

  std::lock_guard lock(session.mu);
  append_line(session.log_path, {{"session", session.id},
                                 {"timestamp", ts},
                                 {"mode", "static"},
                                 {"file", request.filename},
                                 {"faces", faces}});
  return json_response(200, response);
}

std::string Service::live_frame(const std::string& session_id,
                                std::span<const std::uint8_t> message,
                                bool binary) {
  const auto session = find(session_id);
  if (!session) return error_json("unknown session").dump();
  std::lock_guard lock(session->mu);
  const std::uint64_t seq = session->next_seq++;
  if (!binary) {
    return json{{"seq", seq}, {"error", "frames must be binary messages"}}
        .dump();
  }
  Image image;
  try {
    image = decode_image(message);
  } catch (const DecodeError& e) {
    return json{{"seq", seq}, {"error", e.what()}}.dump();
  }
  FramePrediction frame =
      predict_image(*classifier_, *cascade_, image, predict_options_);
  session->ring.push_back(frame);
  while (session->ring.size() > config_.engagement.window_len) {
    session->ring.pop_front();
  }
  const std::vector<FramePrediction> window(session->ring.begin(),
                                            session->ring.end());
  const double engagement = engagement_score(window, config_.engagement);
  const std::string ts = iso_timestamp(frame.timestamp);
  const json faces = faces_json(frame);
  append_line(session->log_path, {{"session", session->id},
                                  {"timestamp", ts},
                                  {"mode", "live"},
                                  {"seq", seq},
                                  {"faces", faces},
                                  {"engagement", engagement}});
  return json{{"seq", seq},
              {"timestamp", ts},
              {"date", iso_date(frame.timestamp)},
              {"boxes", faces},
              {"engagement", engagement}}
      .dump();
}

HttpResponse Service::report(Session& session) {
  std::lock_guard lock(session.mu);
  json counts = json::object();
  for (EmotionLabel l : kAllLabels) counts[std::string(label_name(l))] = 0;
  std::size_t records = 0, static_count = 0, live_count = 0, faces = 0;
  double engagement_sum = 0.0;
  json first = nullptr, last = nullptr;

  std::ifstream log(session.log_path);
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    ++records;
    if (first.is_null()) first = rec.at("timestamp");
    last = rec.at("timestamp");
    if (rec.at("mode") == "live") {
      ++live_count;
      engagement_sum += rec.at("engagement").get<double>();
    } else {
      ++static_count;
    }
    for (const json& f : rec.at("faces")) {
      counts[f.at("label").get<std::string>()] =
          counts[f.at("label").get<std::string>()].get<std::size_t>() + 1;
      ++faces;
    }
  }
  json mean = nullptr;
  if (live_count > 0) mean = engagement_sum / static_cast<double>(live_count);
  return json_response(200, {{"id", session.id},
                             {"name", session.name},
                             {"created", session.created},
                             {"records", records},
                             {"static_predictions", static_count},
                             {"live_frames", live_count},
                             {"faces", faces},
                             {"label_counts", counts},
                             {"mean_engagement", mean},
                             {"first_timestamp", first},
                             {"last_timestamp", last}});
}

HttpResponse Service::serve_static(const std::string& target) const {
  if (config_.static_dir.empty()) return error_response(404, "not found");
  std::string path = target.substr(0, target.find('?'));
  if (path.empty() || path.back() == '/') path += "index.html";
  const fs::path rel = fs::path(path).relative_path().lexically_normal();
  if (rel.empty() || *rel.begin() == "..") {
    return error_response(404, "not found");
  }
  const fs::path full = config_.static_dir / rel;
  std::ifstream in(full, std::ios::binary);
  if (!in || fs::is_directory(full)) return error_response(404, "not found");
  std::ostringstream body;
  body << in.rdbuf();
  return {200, content_type_for(full), body.str()};
}

}  // namespace fer
