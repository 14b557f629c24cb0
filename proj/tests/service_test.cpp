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

#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "fer/error.hpp"
#include "fer/image.hpp"
#include "fer/data.hpp"
#include "fer/service.hpp"
#include "json_schema.hpp"
#include "oracles.hpp"

namespace {

using namespace fer;
using nlohmann::json;
namespace fs = std::filesystem;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class StubClassifier final : public EmotionClassifier {
 public:
  StubClassifier(std::size_t cls, float hot) : cls_(cls), hot_(hot) {}
  Tensor<float> logits(const Tensor<float>& batch) const override {
    Tensor<float> out({batch.dim(0), kNumEmotions});
    for (std::size_t n = 0; n < batch.dim(0); ++n) out[n * kNumEmotions + cls_] = hot_;
    return out;
  }

 private:
  std::size_t cls_;
  float hot_;
};

std::shared_ptr<const CascadeModel> real_cascade() {
  static const auto model = std::make_shared<const CascadeModel>(
      load_cascade(fer::testing::fixture("haarcascade_frontalface_default.xml")));
  return model;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string face_png() {
  static const std::string bytes = read_file(fer::testing::fixture("face.png"));
  return bytes;
}

std::string blank_png() {
  const auto bytes = encode_png(Image(160, 160, 3, 128));
  return std::string(bytes.begin(), bytes.end());
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Closed-form frame score for a stub that puts logit `hot` on class k.
double stub_frame_score(std::size_t k, double hot, const EngagementConfig& c) {
  const double z = std::exp(hot) + 7.0;
  double s = 0.0;
  for (std::size_t j = 0; j < kNumEmotions; ++j) {
    s += c.weights[j] * (j == k ? std::exp(hot) : 1.0) / z;
  }
  return 10.0 * s;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("fer_service_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

class ServiceTest : public ::testing::Test {
 protected:
  static constexpr std::size_t kClass = 1;  // happiness
  static constexpr float kHot = 3.0f;

  ServiceConfig config() const {
    ServiceConfig c;
    c.fixture_mode = true;
    c.cascade = fer::testing::fixture("haarcascade_frontalface_default.xml");
    c.sessions_dir = dir_.path() / "sessions";
    return c;
  }

  std::unique_ptr<Service> make_service(ServiceConfig c) const {
    return std::make_unique<Service>(
        std::move(c), std::make_shared<StubClassifier>(kClass, kHot),
        real_cascade());
  }
  std::unique_ptr<Service> make_service() const { return make_service(config()); }

  static std::string create(Service& s, const std::string& name) {
    const auto r = s.handle({"POST", "/api/session", json{{"name", name}}.dump(), ""});
    EXPECT_EQ(r.status, 200) << r.body;
    return json::parse(r.body).at("id").get<std::string>();
  }

  static json body(const HttpResponse& r) { return json::parse(r.body); }

  void expect_schema(const std::string& schema, const json& value) {
    const auto errors = schemas_.validate(schema, value);
    EXPECT_TRUE(errors.empty()) << schema << ": " << errors.front() << "\n"
                                << value.dump();
  }

  TempDir dir_;
  fer::testing::SchemaSet schemas_;
};

// --- schema checker self-test -------------------------------------------------

TEST(SchemaSet, RejectsWrongTypesMissingKeysAndExtras) {
  fer::testing::SchemaSet s;
  EXPECT_TRUE(s.valid("health.json", json{{"status", "ok"}}));
  EXPECT_FALSE(s.valid("health.json", json{{"status", "bad"}}));
  EXPECT_FALSE(s.valid("health.json", json::object()));
  EXPECT_FALSE(s.valid("health.json", json{{"status", "ok"}, {"x", 1}}));
  EXPECT_FALSE(s.valid("live_error.json", json{{"seq", 0}, {"error", "e"}}));
  EXPECT_FALSE(s.valid("session.json",
                       json{{"id", "XYZ"}, {"name", "a"}, {"created", "2026-01-01T00:00:00.000Z"}}));
}

// --- plain endpoints ----------------------------------------------------------

TEST_F(ServiceTest, HealthAndLabels) {
  auto s = make_service();
  const auto h = s->handle({"GET", "/api/health", "", ""});
  EXPECT_EQ(h.status, 200);
  expect_schema("health.json", body(h));

  const auto l = s->handle({"GET", "/api/labels", "", ""});
  ASSERT_EQ(l.status, 200);
  const json j = body(l);
  expect_schema("labels.json", j);
  EXPECT_DOUBLE_EQ(j["tau"].get<double>(), kDefaultTau);
  for (std::size_t i = 0; i < kAllLabels.size(); ++i) {
    EXPECT_EQ(j["labels"][i]["label"], std::string(label_name(kAllLabels[i])));
    EXPECT_EQ(j["labels"][i]["emoji"], utf8(to_emoji(kAllLabels[i])));
  }
}

TEST_F(ServiceTest, RoutingStatuses) {
  auto s = make_service();
  const std::string id = create(*s, "routing");
  const std::string other(32, 'a');
  const struct {
    const char* method;
    std::string target;
    int status;
  } cases[] = {
      {"GET", "/api/nope", 404},
      {"GET", "/api/session", 405},
      {"DELETE", "/api/health", 405},
      {"POST", "/api/session/" + other + "/predict", 404},
      {"GET", "/api/session/" + other + "/report", 404},
      {"GET", "/api/session/" + id + "/predict", 405},
      {"POST", "/api/session/" + id + "/report", 405},
      {"GET", "/api/session/" + id + "/live", 426},
      {"GET", "/api/session/" + id + "/other", 404},
      {"GET", "/index.html", 404},  // no static_dir configured
  };
  for (const auto& c : cases) {
    const auto r = s->handle({c.method, c.target, "", ""});
    EXPECT_EQ(r.status, c.status) << c.method << " " << c.target;
    expect_schema("error.json", body(r));
  }
}

TEST_F(ServiceTest, SessionNameValidation) {
  auto s = make_service();
  const auto post = [&](const std::string& b) {
    return s->handle({"POST", "/api/session", b, ""});
  };
  for (const std::string bad :
       {"", "not json", "[]", "{}", R"({"name": 3})", R"({"name": null})",
        R"({"name": "   "})"}) {
    const auto r = post(bad);
    EXPECT_EQ(r.status, 400) << bad;
    expect_schema("error.json", body(r));
  }

  const auto trimmed = post(R"({"name": "  Ada Lovelace \t"})");
  ASSERT_EQ(trimmed.status, 200);
  expect_schema("session.json", body(trimmed));
  EXPECT_EQ(body(trimmed)["name"], "Ada Lovelace");

  // The limit counts code points, not bytes: 64 two-byte characters pass.
  std::string e64;
  for (int i = 0; i < 64; ++i) e64 += "\xc3\xa9";
  EXPECT_EQ(post(json{{"name", e64}}.dump()).status, 200);
  EXPECT_EQ(post(json{{"name", e64 + "x"}}.dump()).status, 400);
  EXPECT_EQ(post(json{{"name", std::string(64, 'n')}}.dump()).status, 200);
  EXPECT_EQ(post(json{{"name", std::string(65, 'n')}}.dump()).status, 400);
}

TEST_F(ServiceTest, SessionIdsAreDistinctAndPersistedOnCreate) {
  auto s = make_service();
  std::set<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.insert(create(*s, "s" + std::to_string(i)));
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(s->session_count(), 50u);
  for (const auto& id : ids) {
    EXPECT_TRUE(fs::exists(config().sessions_dir / (id + ".meta.json")));
    EXPECT_TRUE(fs::exists(config().sessions_dir / (id + ".jsonl")));
  }
}

TEST_F(ServiceTest, StaticPredictOnFaceFixture) {
  auto s = make_service();
  const std::string id = create(*s, "static");
  const auto r = s->handle({"POST", "/api/session/" + id + "/predict", face_png(), "face.png"});
  ASSERT_EQ(r.status, 200) << r.body;
  const json j = body(r);
  expect_schema("predict.json", j);
  EXPECT_EQ(j["session"], id);
  EXPECT_EQ(j["file"]["name"], "face.png");
  EXPECT_EQ(j["file"]["bytes"], face_png().size());
  EXPECT_EQ(j["file"]["width"], 160);
  EXPECT_FALSE(j["no_face"].get<bool>());
  ASSERT_EQ(j["faces"].size(), 1u);
  EXPECT_EQ(j["largest"], 0);
  EXPECT_EQ(j["faces"][0]["label"], "happiness");
  EXPECT_EQ(j["faces"][0]["codepoint"], codepoint_string(to_emoji(EmotionLabel::happiness)));

  const double p_hot = std::exp(3.0) / (std::exp(3.0) + 7.0);
  ASSERT_EQ(j["table"].size(), 8u);
  double sum = 0.0;
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(j["table"][k]["label"], std::string(kEmotionNames[k]));
    const double p = j["table"][k]["probability"].get<double>();
    EXPECT_NEAR(p, k == kClass ? p_hot : 1.0 / (std::exp(3.0) + 7.0), 1e-6);
    sum += p;
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST_F(ServiceTest, StaticPredictWithoutFace) {
  auto s = make_service();
  const std::string id = create(*s, "blank");
  const auto r = s->handle({"POST", "/api/session/" + id + "/predict", blank_png(), ""});
  ASSERT_EQ(r.status, 200);
  const json j = body(r);
  expect_schema("predict.json", j);
  EXPECT_TRUE(j["no_face"].get<bool>());
  EXPECT_TRUE(j["faces"].empty());
  EXPECT_TRUE(j["largest"].is_null());
  EXPECT_TRUE(j["table"].empty());
}

TEST_F(ServiceTest, UndecodableUploadIs422AndNotLogged) {
  auto s = make_service();
  const std::string id = create(*s, "bad upload");
  for (const std::string& b : {std::string(), std::string("GIF89a not supported"),
                              face_png().substr(0, 100)}) {
    const auto r = s->handle({"POST", "/api/session/" + id + "/predict", b, ""});
    EXPECT_EQ(r.status, 422);
    expect_schema("error.json", body(r));
  }
  EXPECT_EQ(fs::file_size(config().sessions_dir / (id + ".jsonl")), 0u);
}

// --- live stream --------------------------------------------------------------

TEST_F(ServiceTest, LiveReplayMatchesClosedFormEngagement) {
  auto s = make_service();
  const std::string id = create(*s, "live");
  const EngagementConfig ec = s->config().engagement;
  const double face_score = stub_frame_score(kClass, kHot, ec);
  const std::string face = face_png(), blank = blank_png();

  // Frames with index % 3 == 0 are blank; 35 frames exercise the 30-frame
  // window trimming.
  std::vector<double> scores;
  for (int i = 0; i < 35; ++i) {
    const bool has_face = i % 3 != 0;
    const json reply = json::parse(s->live_frame(id, as_bytes(has_face ? face : blank)));
    expect_schema("live_reply.json", reply);
    EXPECT_EQ(reply["seq"], i + 1);
    EXPECT_EQ(reply["boxes"].size(), has_face ? 1u : 0u);
    EXPECT_EQ(reply["date"], reply["timestamp"].get<std::string>().substr(0, 10));
    scores.push_back(has_face ? face_score : ec.no_face_score);
    const std::size_t n = std::min<std::size_t>(scores.size(), ec.window_len);
    double mean = 0.0;
    for (std::size_t k = scores.size() - n; k < scores.size(); ++k) mean += scores[k];
    mean /= static_cast<double>(n);
    EXPECT_NEAR(reply["engagement"].get<double>(), mean, 1e-6) << "frame " << i;
  }
}

TEST_F(ServiceTest, BlankFramesDecayEngagementToNoFaceScore) {
  auto s = make_service();
  const std::string id = create(*s, "decay");
  const std::string face = face_png(), blank = blank_png();
  for (int i = 0; i < 5; ++i) s->live_frame(id, as_bytes(face));
  double prev = json::parse(s->live_frame(id, as_bytes(face)))["engagement"];
  EXPECT_GT(prev, 0.0);
  for (int i = 0; i < 30; ++i) {
    const double e = json::parse(s->live_frame(id, as_bytes(blank)))["engagement"];
    EXPECT_LT(e, prev + 1e-12);
    prev = e;
  }
  EXPECT_NEAR(prev, 0.0, 1e-12);
}

TEST_F(ServiceTest, LiveErrorsKeepSequenceNumbers) {
  auto s = make_service();
  const std::string id = create(*s, "errors");
  const std::string face = face_png();
  const json a = json::parse(s->live_frame(id, as_bytes(face)));
  const json b = json::parse(s->live_frame(id, as_bytes(std::string("junk"))));
  const json c = json::parse(s->live_frame(id, as_bytes(face), false));
  const json d = json::parse(s->live_frame(id, as_bytes(face)));
  expect_schema("live_reply.json", a);
  expect_schema("live_error.json", b);
  expect_schema("live_error.json", c);
  expect_schema("live_reply.json", d);
  EXPECT_EQ(a["seq"], 1);
  EXPECT_EQ(b["seq"], 2);
  EXPECT_EQ(c["seq"], 3);
  EXPECT_EQ(c["error"], "frames must be binary messages");
  EXPECT_EQ(d["seq"], 4);
  // Failed frames do not enter the window.
  EXPECT_NEAR(d["engagement"].get<double>(), a["engagement"].get<double>(), 1e-12);

  const json unknown = json::parse(s->live_frame(std::string(32, 'b'), as_bytes(face)));
  expect_schema("error.json", unknown);
  EXPECT_FALSE(s->live_session("/api/session/" + std::string(32, 'b') + "/live"));
  EXPECT_EQ(s->live_session("/api/session/" + id + "/live"), id);
  EXPECT_TRUE(s->is_live_path("/api/session/x/live"));
  EXPECT_FALSE(s->is_live_path("/api/session/x/report"));
}

// --- log and report -----------------------------------------------------------

// Recomputes the report from the JSONL log alone.
json replay_report(const fs::path& log) {
  json counts = json::object();
  for (EmotionLabel l : kAllLabels) counts[std::string(label_name(l))] = 0;
  std::size_t records = 0, stat = 0, live = 0, faces = 0;
  double eng = 0.0;
  json first = nullptr, last = nullptr;
  std::ifstream in(log);
  std::string line;
  while (std::getline(in, line)) {
    const json r = json::parse(line);
    ++records;
    if (first.is_null()) first = r["timestamp"];
    last = r["timestamp"];
    if (r["mode"] == "live") {
      ++live;
      eng += r["engagement"].get<double>();
    } else {
      ++stat;
    }
    for (const auto& f : r["faces"]) {
      counts[f["label"].get<std::string>()] = counts[f["label"].get<std::string>()].get<int>() + 1;
      ++faces;
    }
  }
  return {{"records", records},   {"static_predictions", stat},
          {"live_frames", live},  {"faces", faces},
          {"label_counts", counts},
          {"mean_engagement", live ? json(eng / static_cast<double>(live)) : json(nullptr)},
          {"first_timestamp", first}, {"last_timestamp", last}};
}

TEST_F(ServiceTest, EmptyReport) {
  auto s = make_service();
  const std::string id = create(*s, "empty");
  const auto r = s->handle({"GET", "/api/session/" + id + "/report", "", ""});
  ASSERT_EQ(r.status, 200);
  const json j = body(r);
  expect_schema("report.json", j);
  EXPECT_EQ(j["records"], 0);
  EXPECT_TRUE(j["mean_engagement"].is_null());
  EXPECT_TRUE(j["first_timestamp"].is_null());
  EXPECT_EQ(j["name"], "empty");
}

TEST_F(ServiceTest, ReportEqualsLogReplayAndRecordsValidate) {
  auto s = make_service();
  const std::string id = create(*s, "mixed");
  const std::string face = face_png(), blank = blank_png();
  s->handle({"POST", "/api/session/" + id + "/predict", face, "a.png"});
  s->handle({"POST", "/api/session/" + id + "/predict", blank, "b.png"});
  for (int i = 0; i < 7; ++i) s->live_frame(id, as_bytes(i % 2 ? face : blank));
  s->live_frame(id, as_bytes(std::string("junk")));

  const fs::path log = config().sessions_dir / (id + ".jsonl");
  std::ifstream in(log);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    expect_schema("record.json", json::parse(line));
  }
  EXPECT_EQ(lines, 9u);

  const json j = body(s->handle({"GET", "/api/session/" + id + "/report", "", ""}));
  expect_schema("report.json", j);
  const json oracle = replay_report(log);
  for (const auto& [key, value] : oracle.items()) {
    if (key == "mean_engagement") {
      EXPECT_NEAR(j[key].get<double>(), value.get<double>(), 1e-12);
    } else {
      EXPECT_EQ(j[key], value) << key;
    }
  }
  EXPECT_EQ(j["static_predictions"], 2);
  EXPECT_EQ(j["live_frames"], 7);
  EXPECT_EQ(j["faces"], 4);
  EXPECT_EQ(j["label_counts"]["happiness"], 4);
}

TEST_F(ServiceTest, SessionsSurviveRestart) {
  std::string id;
  json before;
  {
    auto s = make_service();
    id = create(*s, "persistent");
    s->handle({"POST", "/api/session/" + id + "/predict", face_png(), "a.png"});
    for (int i = 0; i < 4; ++i) s->live_frame(id, as_bytes(face_png()));
    before = body(s->handle({"GET", "/api/session/" + id + "/report", "", ""}));
  }
  auto s = make_service();
  EXPECT_EQ(s->session_count(), 1u);
  const json after = body(s->handle({"GET", "/api/session/" + id + "/report", "", ""}));
  EXPECT_EQ(after, before);

  // Sequence numbers continue from the log; the engagement window restarts.
  const json next = json::parse(s->live_frame(id, as_bytes(blank_png())));
  EXPECT_EQ(next["seq"], 5);
  EXPECT_NEAR(next["engagement"].get<double>(), 0.0, 1e-12);
}

TEST_F(ServiceTest, DamagedMetaFileOnlyLosesThatSession) {
  {
    auto s = make_service();
    create(*s, "kept");
  }
  std::ofstream(config().sessions_dir / (std::string(32, 'c') + ".meta.json")) << "{broken";
  auto s = make_service();
  EXPECT_EQ(s->session_count(), 1u);
}

TEST_F(ServiceTest, SessionsAreIsolated) {
  auto s = make_service();
  const std::string a = create(*s, "a"), b = create(*s, "b");
  for (int i = 0; i < 3; ++i) s->live_frame(a, as_bytes(face_png()));
  const json rb = json::parse(s->live_frame(b, as_bytes(blank_png())));
  EXPECT_EQ(rb["seq"], 1);
  EXPECT_NEAR(rb["engagement"].get<double>(), 0.0, 1e-12);
}

TEST_F(ServiceTest, StaticFilesAreServedWithoutTraversal) {
  ServiceConfig c = config();
  c.static_dir = dir_.path() / "www";
  fs::create_directories(c.static_dir / "js");
  std::ofstream(c.static_dir / "index.html") << "<html>hi</html>";
  std::ofstream(c.static_dir / "js" / "app.js") << "let x = 1;";
  std::ofstream(dir_.path() / "secret.txt") << "secret";
  auto s = make_service(c);

  const auto root = s->handle({"GET", "/", "", ""});
  EXPECT_EQ(root.status, 200);
  EXPECT_EQ(root.body, "<html>hi</html>");
  EXPECT_NE(root.content_type.find("text/html"), std::string::npos);
  const auto js = s->handle({"GET", "/js/app.js?v=2", "", ""});
  EXPECT_EQ(js.status, 200);
  EXPECT_NE(js.content_type.find("javascript"), std::string::npos);
  EXPECT_EQ(s->handle({"GET", "/../secret.txt", "", ""}).status, 404);
  EXPECT_EQ(s->handle({"GET", "/js/../../secret.txt", "", ""}).status, 404);
  EXPECT_EQ(s->handle({"GET", "/missing.css", "", ""}).status, 404);
}

// --- config -------------------------------------------------------------------

TEST(ServiceConfig, ParsesAndResolvesRelativePaths) {
  const auto c = parse_service_config(R"({
    "weights": "w/model.ferw", "cascade": "/abs/cascade.xml", "tau": 0.5,
    "bind": "0.0.0.0:9000", "sessions_dir": "s",
    "engagement": {"weights": {"happiness": 1.0}, "window_len": 10, "no_face_score": 2.5},
    "detect": {"scale_factor": 1.2, "min_neighbors": 4, "min_size": 30}})",
                                      "/base");
  EXPECT_EQ(c.weights, fs::path("/base/w/model.ferw"));
  EXPECT_EQ(c.cascade, fs::path("/abs/cascade.xml"));
  EXPECT_EQ(c.sessions_dir, fs::path("/base/s"));
  EXPECT_DOUBLE_EQ(c.tau, 0.5);
  EXPECT_EQ(c.bind_address, "0.0.0.0");
  EXPECT_EQ(c.port, 9000);
  EXPECT_DOUBLE_EQ(c.engagement.weights[1], 1.0);
  EXPECT_DOUBLE_EQ(c.engagement.weights[0], 0.7);
  EXPECT_EQ(c.engagement.window_len, 10u);
  EXPECT_DOUBLE_EQ(c.engagement.no_face_score, 2.5);
  EXPECT_DOUBLE_EQ(c.detect.scale_factor, 1.2);
  EXPECT_EQ(c.detect.min_neighbors, 4);
  EXPECT_EQ(c.detect.min_size, 30);
}

TEST(ServiceConfig, RejectsBadInput) {
  const char* bad[] = {
      "not json",
      "[]",
      R"({"cascade": "c.xml"})",  // no weights, no fixture mode
      R"({"fixture_mode": true})",  // no cascade
      R"({"fixture_mode": true, "cascade": "c", "colour": 1})",
      R"({"fixture_mode": true, "cascade": "c", "tau": 1.5})",
      R"({"fixture_mode": true, "cascade": "c", "bind": "nohost"})",
      R"({"fixture_mode": true, "cascade": "c", "bind": "h:99999"})",
      R"({"fixture_mode": true, "cascade": "c", "bind": "h:port"})",
      R"({"fixture_mode": true, "cascade": "c", "engagement": {"window_len": 0}})",
      R"({"fixture_mode": true, "cascade": "c", "engagement": {"weights": {"joy": 1}}})",
      R"({"fixture_mode": true, "cascade": "c", "engagement": {"weights": [2,0,0,0,0,0,0,0]}})",
      R"({"fixture_mode": true, "cascade": "c", "detect": {"scale_factor": 1.0}})",
      R"({"fixture_mode": true, "cascade": "c", "detect": {"step": 2}})",
  };
  for (const char* text : bad) {
    EXPECT_THROW(parse_service_config(text, "/"), InvalidArgument) << text;
  }
}

TEST(ServiceConfig, EnvironmentOverridesRequestedPath) {
  ::unsetenv("FER_CONFIG");
  EXPECT_EQ(resolve_config_path("a.json"), fs::path("a.json"));
  ::setenv("FER_CONFIG", "/etc/fer.json", 1);
  EXPECT_EQ(resolve_config_path("a.json"), fs::path("/etc/fer.json"));
  ::setenv("FER_CONFIG", "", 1);
  EXPECT_EQ(resolve_config_path("a.json"), fs::path("a.json"));
  ::unsetenv("FER_CONFIG");
}

TEST(ServiceConfig, FromConfigFixtureModeBuildsAService) {
  TempDir dir;
  ServiceConfig c;
  c.fixture_mode = true;
  c.cascade = fer::testing::fixture("haarcascade_frontalface_default.xml");
  c.sessions_dir = dir.path() / "s";
  auto s = Service::from_config(c);
  const auto r = s->handle({"POST", "/api/session", R"({"name":"x"})", ""});
  ASSERT_EQ(r.status, 200);
  const std::string id = json::parse(r.body)["id"];
  const auto p = s->handle({"POST", "/api/session/" + id + "/predict", face_png(), ""});
  ASSERT_EQ(p.status, 200);
  EXPECT_TRUE(fer::testing::SchemaSet().valid("predict.json", json::parse(p.body)));

  c.cascade = dir.path() / "missing.xml";
  EXPECT_THROW(Service::from_config(c), LoadError);
}

TEST(ServiceConfig, ShippedExampleLoads) {
  const fs::path example = fs::path(FER_FIXTURES_DIR) / ".." / "tools" / "fer" /
                           "service.example.json";
  const auto c = load_service_config(example);
  EXPECT_TRUE(c.fixture_mode);
  EXPECT_TRUE(fs::exists(c.cascade)) << c.cascade;
  EXPECT_EQ(c.port, 8080);
  EXPECT_EQ(c.engagement.weights, EngagementConfig{}.weights);
}

TEST(Timestamps, IsoFormat) {
  using namespace std::chrono;
  const system_clock::time_point t{milliseconds(1791538200125)};
  EXPECT_EQ(iso_timestamp(t), "2026-10-09T09:30:00.125Z");
  EXPECT_EQ(iso_date(t), "2026-10-09");
  EXPECT_EQ(iso_timestamp(system_clock::time_point{}), "1970-01-01T00:00:00.000Z");
}

// --- over the wire ------------------------------------------------------------

class WireTest : public ServiceTest {
 protected:
  void SetUp() override {
    service_ = make_service();
    server_ = std::make_unique<HttpServer>(*service_, "127.0.0.1", 0);
    server_->start();
  }
  void TearDown() override { server_->stop(); }

  http::response<http::string_body> request(http::verb verb, const std::string& target,
                                            const std::string& body = {},
                                            const std::string& filename = {}) {
    net::io_context ioc;
    tcp::socket socket(ioc);
    socket.connect({net::ip::make_address("127.0.0.1"), server_->port()});
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "localhost");
    if (!filename.empty()) req.set("X-Filename", filename);
    req.body() = body;
    req.prepare_payload();
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    beast::error_code ec;
    socket.shutdown(tcp::socket::shutdown_both, ec);
    return res;
  }

  std::unique_ptr<Service> service_;
  std::unique_ptr<HttpServer> server_;
};

TEST_F(WireTest, HttpEndpointsAndStatuses) {
  EXPECT_NE(server_->port(), 0);
  const auto h = request(http::verb::get, "/api/health");
  EXPECT_EQ(h.result_int(), 200);
  EXPECT_EQ(h[http::field::content_type], "application/json");
  expect_schema("health.json", json::parse(h.body()));

  const auto created = request(http::verb::post, "/api/session", R"({"name":"wire"})");
  ASSERT_EQ(created.result_int(), 200);
  const std::string id = json::parse(created.body())["id"];

  const auto p = request(http::verb::post, "/api/session/" + id + "/predict", face_png(), "upload.png");
  ASSERT_EQ(p.result_int(), 200);
  const json pj = json::parse(p.body());
  expect_schema("predict.json", pj);
  EXPECT_EQ(pj["file"]["name"], "upload.png");
  EXPECT_EQ(pj["faces"].size(), 1u);

  EXPECT_EQ(request(http::verb::post, "/api/session", "{").result_int(), 400);
  EXPECT_EQ(request(http::verb::get, "/api/session").result_int(), 405);
  EXPECT_EQ(request(http::verb::get, "/api/missing").result_int(), 404);
  EXPECT_EQ(request(http::verb::post, "/api/session/" + id + "/predict", "junk").result_int(), 422);
  EXPECT_EQ(request(http::verb::get, "/api/session/" + id + "/live").result_int(), 426);

  const auto r = request(http::verb::get, "/api/session/" + id + "/report");
  ASSERT_EQ(r.result_int(), 200);
  expect_schema("report.json", json::parse(r.body()));
  EXPECT_EQ(json::parse(r.body())["static_predictions"], 1);
}

TEST_F(WireTest, WebSocketLiveStream) {
  const std::string id = create(*service_, "ws");
  net::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect({net::ip::make_address("127.0.0.1"), server_->port()});
  ws.handshake("localhost", "/api/session/" + id + "/live");

  const std::string face = face_png(), blank = blank_png();
  const double face_score = stub_frame_score(kClass, kHot, service_->config().engagement);
  std::vector<double> scores;
  for (int i = 0; i < 30; ++i) {
    const bool has_face = i % 4 != 3;
    ws.binary(true);
    ws.write(net::buffer(has_face ? face : blank));
    beast::flat_buffer buffer;
    ws.read(buffer);
    EXPECT_TRUE(ws.got_text());
    const json reply = json::parse(beast::buffers_to_string(buffer.data()));
    expect_schema("live_reply.json", reply);
    EXPECT_EQ(reply["seq"], i + 1);
    scores.push_back(has_face ? face_score : 0.0);
    double mean = 0.0;
    for (double v : scores) mean += v;
    mean /= static_cast<double>(scores.size());
    EXPECT_NEAR(reply["engagement"].get<double>(), mean, 1e-6);
  }

  ws.text(true);
  ws.write(net::buffer(std::string("hello")));
  beast::flat_buffer buffer;
  ws.read(buffer);
  const json err = json::parse(beast::buffers_to_string(buffer.data()));
  expect_schema("live_error.json", err);
  EXPECT_EQ(err["seq"], 31);
  ws.close(websocket::close_code::normal);

  const json report = json::parse(request(http::verb::get, "/api/session/" + id + "/report").body());
  EXPECT_EQ(report["live_frames"], 30);
  double mean_of_replies = 0.0;
  {
    double running = 0.0;
    for (std::size_t n = 0; n < scores.size(); ++n) {
      running += scores[n];
      mean_of_replies += running / static_cast<double>(n + 1);
    }
    mean_of_replies /= static_cast<double>(scores.size());
  }
  EXPECT_NEAR(report["mean_engagement"].get<double>(), mean_of_replies, 1e-6);
}

TEST_F(WireTest, WebSocketToUnknownSessionIsRejected) {
  {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws(ioc);
    ws.next_layer().connect({net::ip::make_address("127.0.0.1"), server_->port()});
    beast::error_code ec;
    ws.handshake("localhost", "/api/session/" + std::string(32, 'd') + "/live", ec);
    EXPECT_EQ(ec, websocket::error::upgrade_declined);
  }
  // The same upgrade request sent by hand shows the status and body.
  for (const std::string& target :
       {"/api/session/" + std::string(32, 'd') + "/live", std::string("/api/other")}) {
    net::io_context ioc;
    tcp::socket socket(ioc);
    socket.connect({net::ip::make_address("127.0.0.1"), server_->port()});
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "localhost");
    req.set(http::field::connection, "Upgrade");
    req.set(http::field::upgrade, "websocket");
    req.set(http::field::sec_websocket_key, "dGhlIHNhbXBsZSBub25jZQ==");
    req.set(http::field::sec_websocket_version, "13");
    http::write(socket, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    EXPECT_EQ(res.result_int(), 404) << target;
    expect_schema("error.json", json::parse(res.body()));
  }
}

TEST_F(WireTest, KeepAliveServesSeveralRequestsOnOneConnection) {
  net::io_context ioc;
  tcp::socket socket(ioc);
  socket.connect({net::ip::make_address("127.0.0.1"), server_->port()});
  beast::flat_buffer buffer;
  for (int i = 0; i < 3; ++i) {
    http::request<http::string_body> req{http::verb::get, "/api/health", 11};
    req.set(http::field::host, "localhost");
    http::write(socket, req);
    http::response<http::string_body> res;
    http::read(socket, buffer, res);
    EXPECT_EQ(res.result_int(), 200);
  }
}

TEST_F(WireTest, StopClosesOpenConnections) {
  const std::string id = create(*service_, "stop");
  net::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  ws.next_layer().connect({net::ip::make_address("127.0.0.1"), server_->port()});
  ws.handshake("localhost", "/api/session/" + id + "/live");
  server_->stop();  // must not hang with a connection open
  beast::flat_buffer buffer;
  beast::error_code ec;
  ws.read(buffer, ec);
  EXPECT_TRUE(ec);
}

}  // namespace
