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

// fer: train, evaluate and run the facial-expression models.
//
// Exit codes: 0 success, 1 domain error (bad data, invalid parameters),
// 2 usage or I/O error (bad flags, missing or undecodable files).

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "fer/data.hpp"
#include "fer/detect.hpp"
#include "fer/error.hpp"
#include "fer/image.hpp"
#include "fer/pipeline.hpp"
#include "fer/service.hpp"
#include "fer/train.hpp"
#include "fer/weights_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kDomainError = 1;
constexpr int kIoError = 2;

// Raised for problems the user fixes by changing arguments or files.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fixed(double v, int digits = 6) {
  if (std::isnan(v)) return "";
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

fs::path sibling(const fs::path& file, const std::string& suffix) {
  fs::path p = file;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

struct DataArgs {
  std::string data_dir;
  std::string ferplus;

  fer::MergeResult load() const {
    if (!fs::is_directory(data_dir)) {
      throw UsageError("data directory not found: " + data_dir);
    }
    const fs::path fer_csv = fs::path(data_dir) / "fer2013.csv";
    const fs::path plus_csv =
        ferplus.empty() ? fs::path(data_dir) / "fer2013new.csv" : fs::path(ferplus);
    if (!fs::exists(fer_csv)) throw UsageError("missing " + fer_csv.string());
    if (!fs::exists(plus_csv)) throw UsageError("missing " + plus_csv.string());
    return fer::load_dataset(fer_csv, plus_csv);
  }
};

std::optional<fer::Usage> parse_split(const std::string& s) {
  if (s == "training" || s == "train") return fer::Usage::training;
  if (s == "public-test" || s == "val") return fer::Usage::public_test;
  if (s == "private-test" || s == "test") return fer::Usage::private_test;
  return std::nullopt;
}

fer::Image read_image(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("image not found: " + path);
  return fer::load_image(path);
}

fer::CascadeModel read_cascade(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("cascade not found: " + path);
  return fer::load_cascade(fs::path(path));
}

fer::ResNet<float> read_weights(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("weights not found: " + path);
  return fer::load_weights(fs::path(path));
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  DataArgs data;
  std::string out;
  std::string metrics;
  fer::TrainConfig train;
  double weight_decay = 1e-4;
  bool no_augment = false;
  std::vector<std::size_t> filters{64, 128, 256, 512};
  std::vector<std::size_t> blocks{2, 2, 2, 2};
  std::size_t max_train = 0;
};

int run_train(const TrainArgs& a) {
  const fer::MergeResult ds = a.data.load();
  std::vector<fer::LabeledSample> train =
      fer::select_usage(ds.samples, fer::Usage::training);
  const std::vector<fer::LabeledSample> val =
      fer::select_usage(ds.samples, fer::Usage::public_test);
  if (a.max_train > 0 && train.size() > a.max_train) train.resize(a.max_train);
  if (train.empty()) throw fer::InvalidArgument("no training samples");

  fer::ResNetConfig mc;
  if (a.filters.size() != 4 || a.blocks.size() != 4) {
    throw UsageError("--filters and --blocks take exactly 4 values");
  }
  std::copy(a.filters.begin(), a.filters.end(), mc.stage_filters.begin());
  std::copy(a.blocks.begin(), a.blocks.end(), mc.blocks_per_stage.begin());
  mc.weight_decay = a.weight_decay;
  mc.validate();

  fer::TrainConfig tc = a.train;
  tc.augment = !a.no_augment;
  tc.validate();

  fer::Rng init_rng(tc.seed);
  fer::ResNet<float> model = fer::ResNet<float>::build(mc, init_rng);
  fer::Trainer trainer(model, tc);

  const fs::path metrics_path =
      a.metrics.empty() ? sibling(a.out, ".metrics.csv") : fs::path(a.metrics);
  std::ofstream metrics(metrics_path);
  if (!metrics) throw UsageError("cannot write " + metrics_path.string());
  metrics << "epoch,train_loss,train_acc,val_loss,val_acc\n";

  std::cout << "train_samples=" << train.size() << " val_samples=" << val.size()
            << " params=" << model.parameter_count() << '\n';
  trainer.fit(train, val, [&](const fer::EpochRecord& r) {
    std::cout << "epoch=" << r.epoch << " train_loss=" << fixed(r.train_loss)
              << " train_acc=" << fixed(r.train_acc)
              << " val_loss=" << fixed(r.val_loss)
              << " val_acc=" << fixed(r.val_acc) << " lr=" << r.lr << std::endl;
    metrics << r.epoch << ',' << fixed(r.train_loss) << ','
            << fixed(r.train_acc) << ',' << fixed(r.val_loss) << ','
            << fixed(r.val_acc) << '\n';
    metrics.flush();
    return true;
  });
  fer::save_weights(model, fs::path(a.out));
  std::cout << "weights=" << a.out << " metrics=" << metrics_path.string()
            << '\n';
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  DataArgs data;
  std::string weights;
  std::string split = "private-test";
  std::string confusion;
};

int run_eval(const EvalArgs& a) {
  const auto usage = parse_split(a.split);
  if (!usage) throw UsageError("unknown split '" + a.split + "'");
  const fer::ResNet<float> model = read_weights(a.weights);
  const fer::MergeResult ds = a.data.load();
  const auto samples = fer::select_usage(ds.samples, *usage);
  const fer::Metrics m = fer::evaluate(model, samples);

  const fs::path out = a.confusion.empty()
                           ? sibling(a.weights, ".confusion.csv")
                           : fs::path(a.confusion);
  std::ofstream csv(out);
  if (!csv) throw UsageError("cannot write " + out.string());
  m.confusion.write_csv(csv);
  std::cout << "split=" << fer::usage_name(*usage)
            << " samples=" << samples.size() << " loss=" << fixed(m.loss)
            << " accuracy=" << fixed(m.accuracy) << " confusion=" << out.string()
            << '\n';
  return 0;
}

// --- predict / detect -------------------------------------------------------

struct DetectArgs {
  std::string cascade;
  std::string image;
  fer::DetectOptions options;
};

struct PredictArgs {
  DetectArgs detect;
  std::string weights;
  double tau = fer::kDefaultTau;
};

int run_predict(const PredictArgs& a) {
  const fer::ResNetClassifier classifier(read_weights(a.weights));
  const fer::CascadeModel cascade = read_cascade(a.detect.cascade);
  const fer::Image image = read_image(a.detect.image);
  const fer::FramePrediction frame = fer::predict_image(
      classifier, cascade, image, {a.detect.options, a.tau});
  if (frame.faces.empty()) {
    std::cout << "no face detected\n";
    return 0;
  }
  for (std::size_t i = 0; i < frame.faces.size(); ++i) {
    const fer::FaceResult& f = frame.faces[i];
    std::cout << "face " << i << ": x=" << f.box.x << " y=" << f.box.y
              << " w=" << f.box.w << " h=" << f.box.h
              << " neighbors=" << f.box.neighbor_count
              << " label=" << fer::label_name(f.label) << " emoji="
              << fer::utf8(f.emoji) << " (" << fer::codepoint_string(f.emoji)
              << ")\n";
  }
  const fer::FaceResult& f = frame.faces[*frame.largest_face()];
  std::cout << "scores (largest face):\n";
  for (std::size_t k = 0; k < fer::kNumEmotions; ++k) {
    std::cout << "  " << std::left << std::setw(10) << fer::kEmotionNames[k]
              << ' ' << fixed(f.distribution.probs[k], 4) << '\n';
  }
  std::cout << "label=" << fer::label_name(f.label)
            << " emoji=" << fer::utf8(f.emoji) << '\n';
  return 0;
}

int run_detect(const DetectArgs& a) {
  const fer::CascadeModel cascade = read_cascade(a.cascade);
  const fer::Image gray = fer::to_gray(read_image(a.image));
  for (const fer::DetectionBox& b :
       fer::detect_multiscale(cascade, fer::gray_view(gray), a.options)) {
    std::cout << b.x << ' ' << b.y << ' ' << b.w << ' ' << b.h << ' '
              << b.neighbor_count << '\n';
  }
  return 0;
}

// --- data stats -------------------------------------------------------------

struct StatsArgs {
  DataArgs data;
  std::string csv;
};

int run_stats(const StatsArgs& a) {
  const fer::MergeResult ds = a.data.load();
  constexpr fer::Usage kSplits[] = {fer::Usage::training,
                                    fer::Usage::public_test,
                                    fer::Usage::private_test};
  std::ostringstream csv;
  csv << "split";
  for (auto name : fer::kEmotionNames) csv << ',' << name;
  csv << ",total\n";

  std::cout << std::left << std::setw(12) << "split";
  for (auto name : fer::kEmotionNames) {
    std::cout << std::right << std::setw(10) << name;
  }
  std::cout << std::setw(10) << "total" << '\n';
  for (fer::Usage u : kSplits) {
    const auto h = fer::class_histogram(ds.samples, u);
    std::size_t total = 0;
    std::cout << std::left << std::setw(12) << fer::usage_name(u);
    csv << fer::usage_name(u);
    for (std::size_t c : h) {
      std::cout << std::right << std::setw(10) << c;
      csv << ',' << c;
      total += c;
    }
    std::cout << std::setw(10) << total << '\n';
    csv << ',' << total << '\n';
  }
  const fer::MergeStats& s = ds.stats;
  std::cout << "kept=" << s.kept << " excluded=" << s.excluded()
            << " unknown_or_not_face=" << s.unknown_or_not_face
            << " weak_winner=" << s.weak_winner << " no_votes=" << s.no_votes
            << '\n';
  if (a.csv.empty()) {
    std::cout << '\n' << csv.str();
  } else {
    std::ofstream out(a.csv);
    if (!out) throw UsageError("cannot write " + a.csv);
    out << csv.str();
  }
  return 0;
}

// --- serve ------------------------------------------------------------------

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int run_serve(const std::string& config_arg) {
  const fs::path path = fer::resolve_config_path(config_arg);
  if (!fs::exists(path)) throw UsageError("config not found: " + path.string());
  const fer::ServiceConfig config = fer::load_service_config(path);
  auto service = fer::Service::from_config(config);
  fer::HttpServer server(*service, config.bind_address, config.port);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  std::cout << "listening on http://" << config.bind_address << ':'
            << server.port() << (config.fixture_mode && config.weights.empty()
                                     ? " (fixture model)"
                                     : "")
            << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  return 0;
}

void add_data_options(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--data", d.data_dir, "directory holding fer2013.csv")
      ->required();
  cmd->add_option("--ferplus", d.ferplus,
                  "FER+ vote CSV (default <data>/fer2013new.csv)");
}

void add_detect_options(CLI::App* cmd, DetectArgs& d) {
  cmd->add_option("--cascade", d.cascade, "Haar cascade XML")->required();
  cmd->add_option("--image", d.image, "PNG or JPEG image")->required();
  cmd->add_option("--scale-factor", d.options.scale_factor)
      ->check(CLI::Range(1.0001, 10.0));
  cmd->add_option("--min-neighbors", d.options.min_neighbors)
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--min-size", d.options.min_size)
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Facial expression recognition toolkit"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a ResNet18 classifier");
  add_data_options(train_cmd, train.data);
  train_cmd->add_option("--out", train.out, "output weights file")->required();
  train_cmd->add_option("--metrics", train.metrics,
                        "metrics CSV (default <out>.metrics.csv)");
  train_cmd->add_option("--epochs", train.train.epochs)->capture_default_str();
  train_cmd->add_option("--lr", train.train.lr)->capture_default_str();
  train_cmd->add_option("--batch", train.train.batch_size)
      ->capture_default_str();
  train_cmd->add_option("--seed", train.train.seed)->capture_default_str();
  train_cmd->add_option("--momentum", train.train.momentum)
      ->capture_default_str();
  train_cmd->add_option("--weight-decay", train.weight_decay)
      ->capture_default_str();
  train_cmd->add_flag("--no-augment", train.no_augment,
                      "disable random erasing and flips");
  train_cmd->add_flag("--class-weighted", train.train.class_weighted,
                      "inverse-frequency class weights");
  train_cmd->add_option("--filters", train.filters, "4 stage widths")
      ->expected(4)
      ->delimiter(',');
  train_cmd->add_option("--blocks", train.blocks, "4 blocks-per-stage counts")
      ->expected(4)
      ->delimiter(',');
  train_cmd->add_option("--max-train", train.max_train,
                        "use only the first N training samples");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate weights on a split");
  add_data_options(eval_cmd, eval.data);
  eval_cmd->add_option("--weights", eval.weights)->required();
  eval_cmd->add_option("--split", eval.split,
                       "training | public-test | private-test")
      ->capture_default_str();
  eval_cmd->add_option("--confusion", eval.confusion,
                       "confusion CSV (default <weights>.confusion.csv)");

  PredictArgs predict;
  auto* predict_cmd =
      app.add_subcommand("predict", "detect faces and classify each one");
  add_detect_options(predict_cmd, predict.detect);
  predict_cmd->add_option("--weights", predict.weights)->required();
  predict_cmd->add_option("--tau", predict.tau, "unknown threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  DetectArgs detect;
  auto* detect_cmd = app.add_subcommand("detect", "print face boxes");
  add_detect_options(detect_cmd, detect);

  StatsArgs stats;
  auto* data_cmd = app.add_subcommand("data", "dataset tools");
  data_cmd->require_subcommand(1);
  auto* stats_cmd =
      data_cmd->add_subcommand("stats", "per-split class histogram");
  add_data_options(stats_cmd, stats.data);
  stats_cmd->add_option("--csv", stats.csv, "also write the histogram here");

  std::string config = "fer.json";
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--config", config,
                        "JSON config (FER_CONFIG overrides)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kIoError;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*eval_cmd) return run_eval(eval);
    if (*predict_cmd) return run_predict(predict);
    if (*detect_cmd) return run_detect(detect);
    if (*stats_cmd) return run_stats(stats);
    if (*serve_cmd) return run_serve(config);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const fer::DecodeError& e) {
    std::cerr << "error: cannot decode image: " << e.what() << '\n';
    return kIoError;
  } catch (const fer::LoadError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const fer::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const fer::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDomainError;
  }
  return kIoError;
}
