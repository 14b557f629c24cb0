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
#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fer/model.hpp"
#include "fer/weights_io.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using fer::testing::fixture;

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() /
           ("fer_cli_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  CliRun run(const std::vector<std::string>& args, const std::string& env = "") {
    std::string cmd = env + " " + quote(FER_CLI_PATH);
    for (const auto& a : args) cmd += " " + quote(a);
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string fixtures_dir() const { return FER_FIXTURES_DIR; }
  std::string cascade() const { return fixture("haarcascade_frontalface_default.xml"); }

  std::vector<std::string> tiny_train(const fs::path& out, int seed) const {
    return {"train", "--data", fixtures_dir(), "--out", out.string(),
            "--filters", "8,16,32,64", "--blocks", "1,1,1,1", "--max-train", "16",
            "--epochs", "2", "--batch", "8", "--seed", std::to_string(seed),
            "--no-augment"};
  }

  fs::path dir_;
};

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"detect", "--image", "x.png"}).code, 2);  // missing --cascade
  EXPECT_EQ(run({"train", "--data", fixtures_dir(), "--out", "x", "--epochs", "many"}).code, 2);
  EXPECT_EQ(run({"detect", "--cascade", cascade(), "--image", fixture("face.png"),
                 "--scale-factor", "1.0"})
                .code,
            2);
  const CliRun help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("train"), std::string::npos);
}

TEST_F(CliTest, DataStatsOnFixture) {
  const fs::path csv = dir_ / "hist.csv";
  const CliRun r = run({"data", "stats", "--data", fixtures_dir(), "--csv", csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("kept=95 excluded=5"), std::string::npos) << r.out;
  EXPECT_EQ(slurp(csv),
            "split,neutral,happiness,surprise,sadness,anger,disgust,fear,contempt,total\n"
            "Training,19,22,9,4,7,3,8,4,76\n"
            "PublicTest,5,2,2,0,0,0,0,0,9\n"
            "PrivateTest,2,5,1,1,0,0,1,0,10\n");
}

TEST_F(CliTest, DataStatsErrors) {
  EXPECT_EQ(run({"data", "stats", "--data", (dir_ / "nope").string()}).code, 2);

  // Present but malformed data is a domain error.
  const fs::path bad = dir_ / "bad";
  fs::create_directories(bad);
  std::ofstream(bad / "fer2013.csv") << "emotion,pixels,Usage\n9,1 2 3,Training\n";
  fs::copy_file(fixture("fer2013new.csv"), bad / "fer2013new.csv");
  const CliRun r = run({"data", "stats", "--data", bad.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(CliTest, DetectFindsTheFixtureFace) {
  const CliRun r = run({"detect", "--cascade", cascade(), "--image", fixture("face.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  int x, y, w, h, n;
  ASSERT_TRUE(in >> x >> y >> w >> h >> n);
  const json truth = json::parse(slurp(fixture("face.json")))["faces"][0];
  const int tx = truth["x"], ty = truth["y"], tw = truth["w"], th = truth["h"];
  const int ix = std::max(0, std::min(x + w, tx + tw) - std::max(x, tx));
  const int iy = std::max(0, std::min(y + h, ty + th) - std::max(y, ty));
  const double inter = double(ix) * iy;
  EXPECT_GE(inter / (double(w) * h + double(tw) * th - inter), 0.5);
  EXPECT_FALSE(in >> x);  // exactly one box
}

TEST_F(CliTest, DetectFileErrors) {
  EXPECT_EQ(run({"detect", "--cascade", cascade(), "--image", (dir_ / "none.png").string()}).code, 2);
  std::ofstream(dir_ / "junk.png") << "not an image";
  EXPECT_EQ(run({"detect", "--cascade", cascade(), "--image", (dir_ / "junk.png").string()}).code, 2);
  std::ofstream(dir_ / "bad.xml") << "<opencv_storage><cascade>";
  EXPECT_EQ(run({"detect", "--cascade", (dir_ / "bad.xml").string(), "--image", fixture("face.png")}).code, 2);
}

TEST_F(CliTest, TrainEvalPredictRoundTrip) {
  const fs::path weights = dir_ / "model.ferw";
  const CliRun t = run(tiny_train(weights, 3));
  ASSERT_EQ(t.code, 0) << t.err;
  ASSERT_TRUE(fs::exists(weights));
  const std::string metrics = slurp(dir_ / "model.metrics.csv");
  EXPECT_EQ(metrics.rfind("epoch,train_loss,train_acc,val_loss,val_acc\n", 0), 0u);
  EXPECT_TRUE(std::regex_search(metrics, std::regex("\n1,[0-9.]+,[0-9.]+,[0-9.]+,[0-9.]+\n2,")));

  const CliRun e = run({"eval", "--data", fixtures_dir(), "--weights", weights.string(),
                     "--split", "test"});
  ASSERT_EQ(e.code, 0) << e.err;
  EXPECT_NE(e.out.find("split=PrivateTest samples=10"), std::string::npos) << e.out;
  std::istringstream confusion(slurp(dir_ / "model.confusion.csv"));
  std::string line;
  std::getline(confusion, line);
  EXPECT_EQ(line.rfind("true\\pred,neutral", 0), 0u);
  int total = 0, rows = 0;
  while (std::getline(confusion, line)) {
    ++rows;
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    while (std::getline(cells, cell, ',')) total += std::stoi(cell);
  }
  EXPECT_EQ(rows, 8);
  EXPECT_EQ(total, 10);

  const CliRun p = run({"predict", "--weights", weights.string(), "--cascade", cascade(),
                     "--image", fixture("face.png")});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.out.find("face 0: "), std::string::npos);
  EXPECT_NE(p.out.find("scores (largest face):"), std::string::npos);
  EXPECT_NE(p.out.find("label="), std::string::npos);

  const CliRun none = run({"predict", "--weights", weights.string(), "--cascade", cascade(),
                        "--image", fixture("face.png"), "--min-size", "150"});
  EXPECT_EQ(none.code, 0);
  EXPECT_NE(none.out.find("no face detected"), std::string::npos);

  EXPECT_EQ(run({"eval", "--data", fixtures_dir(), "--weights", weights.string(),
                 "--split", "holdout"})
                .code,
            2);
  std::ofstream(dir_ / "trunc.ferw", std::ios::binary) << slurp(weights).substr(0, 100);
  EXPECT_EQ(run({"eval", "--data", fixtures_dir(), "--weights", (dir_ / "trunc.ferw").string()}).code, 2);
}

TEST_F(CliTest, EvalOfConstantPredictorEqualsClassZeroFrequency) {
  fer::ResNetConfig c;
  c.stage_filters = {8, 16, 32, 64};
  c.blocks_per_stage = {1, 1, 1, 1};
  fer::Rng rng(5);
  auto net = fer::ResNet<float>::build(c, rng);
  for (const auto& nt : net.state()) {
    if (nt.layer != "head") continue;
    for (float& v : nt.tensor->values()) v = 0.0f;
    if (nt.role == "bias") (*nt.tensor)[0] = 1.0f;
  }
  const fs::path weights = dir_ / "constant.ferw";
  fer::save_weights(net, weights);
  // PrivateTest after merging holds 2 neutral samples out of 10.
  const CliRun r = run({"eval", "--data", fixtures_dir(), "--weights", weights.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("samples=10 "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("accuracy=0.200000"), std::string::npos) << r.out;
}

TEST_F(CliTest, PredictFileErrors) {
  std::ofstream(dir_ / "junk.jpg") << "\xff\xd8 truncated";
  const fs::path weights = dir_ / "w.ferw";
  ASSERT_EQ(run(tiny_train(weights, 2)).code, 0);
  EXPECT_EQ(run({"predict", "--weights", weights.string(), "--cascade", cascade(),
                 "--image", (dir_ / "junk.jpg").string()})
                .code,
            2);
  EXPECT_EQ(run({"predict", "--weights", (dir_ / "none.ferw").string(), "--cascade",
                 cascade(), "--image", fixture("face.png")})
                .code,
            2);
}

TEST_F(CliTest, SameSeedGivesIdenticalMetrics) {
  ASSERT_EQ(run(tiny_train(dir_ / "a.ferw", 11)).code, 0);
  ASSERT_EQ(run(tiny_train(dir_ / "b.ferw", 11)).code, 0);
  ASSERT_EQ(run(tiny_train(dir_ / "c.ferw", 12)).code, 0);
  EXPECT_EQ(slurp(dir_ / "a.metrics.csv"), slurp(dir_ / "b.metrics.csv"));
  EXPECT_EQ(slurp(dir_ / "a.ferw"), slurp(dir_ / "b.ferw"));
  EXPECT_NE(slurp(dir_ / "a.ferw"), slurp(dir_ / "c.ferw"));
}

TEST_F(CliTest, TrainDomainAndShapeErrors) {
  auto args = tiny_train(dir_ / "x.ferw", 1);
  args.insert(args.end(), {"--lr", "-1"});
  EXPECT_EQ(run(args).code, 1);
  EXPECT_EQ(run({"train", "--data", fixtures_dir(), "--out", (dir_ / "y").string(),
                 "--filters", "8,16"})
                .code,
            2);
}

TEST_F(CliTest, ServeAnswersHealthAndStopsOnSigterm) {
  const fs::path config = dir_ / "service.json";
  std::ofstream(config) << json{{"fixture_mode", true},
                                {"cascade", cascade()},
                                {"bind", "127.0.0.1:0"},
                                {"sessions_dir", (dir_ / "sessions").string()}}
                               .dump();
  const fs::path log = dir_ / "serve.txt";
  const pid_t pid = fork();
  ASSERT_GE(pid, 0);
  if (pid == 0) {
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    ::dup2(fd, 1);
    ::execl(FER_CLI_PATH, FER_CLI_PATH, "serve", "--config", config.c_str(),
            static_cast<char*>(nullptr));
    ::_exit(127);
  }
  std::smatch m;
  std::string text;
  const std::regex listening("listening on http://127\\.0\\.0\\.1:([0-9]+)");
  for (int i = 0; i < 200 && !std::regex_search(text, m, listening); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    text = slurp(log);
  }
  ASSERT_TRUE(std::regex_search(text, m, listening)) << text;
  const auto port = static_cast<unsigned short>(std::stoi(m[1].str()));

  namespace beast = boost::beast;
  namespace http = beast::http;
  boost::asio::io_context ioc;
  boost::asio::ip::tcp::socket socket(ioc);
  socket.connect({boost::asio::ip::make_address("127.0.0.1"), port});
  http::request<http::empty_body> req{http::verb::get, "/api/health", 11};
  req.set(http::field::host, "localhost");
  http::write(socket, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(socket, buffer, res);
  EXPECT_EQ(res.result_int(), 200);
  EXPECT_EQ(json::parse(res.body()), json({{"status", "ok"}}));
  socket.close();

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

TEST_F(CliTest, ServeConfigErrors) {
  EXPECT_EQ(run({"serve", "--config", (dir_ / "missing.json").string()}).code, 2);
  // FER_CONFIG takes precedence over --config.
  const fs::path good = dir_ / "good.json";
  std::ofstream(good) << "{}";
  EXPECT_EQ(run({"serve", "--config", good.string()},
                "FER_CONFIG=" + quote((dir_ / "elsewhere.json").string()))
                .code,
            2);
  // Parseable file, invalid content: domain error.
  EXPECT_EQ(run({"serve", "--config", good.string()}).code, 1);
}

}  // namespace
