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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "fer/data.hpp"
#include "fer/model.hpp"
#include "fer/optim.hpp"
#include "fer/rng.hpp"

namespace fer {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  bool augment = true;
  EraseOptions erase{};
  double flip_p = 0.5;
  // Reduce-on-plateau: multiply lr by `plateau_factor` once the monitored
  // loss has failed to improve for `plateau_patience` consecutive epochs.
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  // Inverse-frequency class weights in the loss.
  bool class_weighted = false;

  void validate() const;
};

/// K x K counts, rows = true class, columns = predicted class.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = kNumEmotions)
      : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const noexcept { return classes_; }
  void add(std::size_t truth, std::size_t predicted);
  std::size_t at(std::size_t truth, std::size_t predicted) const {
    return counts_.at(truth * classes_ + predicted);
  }
  std::size_t total() const;
  std::size_t trace() const;
  std::vector<std::size_t> row_sums() const;
  /// trace / total, 0 when empty.
  double accuracy() const;

  /// Header row of predicted-class names, one row per true class.
  void write_csv(std::ostream& out) const;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_acc = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
};

struct Metrics {
  std::vector<EpochRecord> epochs;
  ConfusionMatrix confusion;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Stacks samples into a [N,1,48,48] batch (no augmentation).
Tensor<float> make_batch(std::span<const LabeledSample> samples);

/// Infer-mode pass over `samples`; argmax with ties to the lowest index.
/// Fills `confusion`, `loss` and `accuracy` of the result.
Metrics evaluate(const ResNet<float>& model,
                 std::span<const LabeledSample> samples,
                 std::size_t batch_size = 64);

/// argmax over a row, ties to the lowest index.
std::size_t argmax(std::span<const float> row);

/// Per-class weights n / (K * count_k); classes absent from `samples` get 0.
std::vector<double> inverse_frequency_weights(
    std::span<const LabeledSample> samples);

/// Owns the optimizer and plateau state across epochs.
class Trainer {
 public:
  Trainer(ResNet<float>& model, TrainConfig config);

  /// One shuffled pass with BN in train mode; augmentation applies to every
  /// sample of `train` when enabled. Returns the epoch's train metrics; the
  /// validation fields are left NaN. Throws InvalidArgument on an empty set.
  EpochRecord train_epoch(std::span<const LabeledSample> train);

  /// train_epoch plus validation (when `val` is non-empty) plus the lr
  /// schedule. The schedule watches validation loss, or train loss when
  /// there is no validation set.
  EpochRecord run_epoch(std::span<const LabeledSample> train,
                        std::span<const LabeledSample> val);

  /// run_epoch `config.epochs` times. `on_epoch` may return false to stop.
  Metrics fit(std::span<const LabeledSample> train,
              std::span<const LabeledSample> val,
              const std::function<bool(const EpochRecord&)>& on_epoch = {});

  double lr() const noexcept { return lr_; }
  std::size_t epochs_done() const noexcept { return epoch_; }

 private:
  ResNet<float>& model_;
  TrainConfig config_;
  Rng rng_;
  SgdState<float> sgd_;
  double lr_;
  std::size_t epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

}  // namespace fer
