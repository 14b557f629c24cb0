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

#include "fer/train.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

namespace fer {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw InvalidArgument("TrainConfig: lr must be > 0");
  if (batch_size == 0) throw InvalidArgument("TrainConfig: batch_size >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw InvalidArgument("TrainConfig: momentum must be in [0,1)");
  }
  if (!(flip_p >= 0.0 && flip_p <= 1.0)) {
    throw InvalidArgument("TrainConfig: flip_p must be in [0,1]");
  }
  if (!(erase.p >= 0.0 && erase.p <= 1.0)) {
    throw InvalidArgument("TrainConfig: erase.p must be in [0,1]");
  }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted) {
  if (truth >= classes_ || predicted >= classes_) {
    throw InvalidArgument("ConfusionMatrix::add: class out of range");
  }
  ++counts_[truth * classes_ + predicted];
}

std::size_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0});
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t t = 0;
  for (std::size_t k = 0; k < classes_; ++k) t += at(k, k);
  return t;
}

std::vector<std::size_t> ConfusionMatrix::row_sums() const {
  std::vector<std::size_t> sums(classes_, 0);
  for (std::size_t r = 0; r < classes_; ++r) {
    for (std::size_t c = 0; c < classes_; ++c) sums[r] += at(r, c);
  }
  return sums;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t n = total();
  return n == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(n);
}

void ConfusionMatrix::write_csv(std::ostream& out) const {
  out << "true\\pred";
  for (std::size_t c = 0; c < classes_; ++c) {
    out << ',' << (classes_ == kNumEmotions ? std::string(kEmotionNames[c])
                                            : std::to_string(c));
  }
  out << '\n';
  for (std::size_t r = 0; r < classes_; ++r) {
    out << (classes_ == kNumEmotions ? std::string(kEmotionNames[r])
                                     : std::to_string(r));
    for (std::size_t c = 0; c < classes_; ++c) out << ',' << at(r, c);
    out << '\n';
  }
}

Tensor<float> make_batch(std::span<const LabeledSample> samples) {
  if (samples.empty()) throw InvalidArgument("make_batch: no samples");
  Tensor<float> batch({samples.size(), 1, kImageSide, kImageSide});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor<float> img = normalize_image(samples[i].pixels);
    std::copy(img.data(), img.data() + kImagePixels,
              batch.data() + i * kImagePixels);
  }
  return batch;
}

std::size_t argmax(std::span<const float> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

Metrics evaluate(const ResNet<float>& model,
                 std::span<const LabeledSample> samples,
                 std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgument("evaluate: batch_size >= 1");
  const std::size_t k = model.config().num_classes;
  Metrics m{{}, ConfusionMatrix(k), 0.0, 0.0};
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const auto chunk =
        samples.subspan(start, std::min(batch_size, samples.size() - start));
    const Tensor<float> logits = model.infer(make_batch(chunk));
    std::vector<int> labels(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) labels[i] = chunk[i].label8;
    loss_sum += softmax_cross_entropy(logits, labels).loss *
                static_cast<double>(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const std::span<const float> row(logits.data() + i * k, k);
      m.confusion.add(static_cast<std::size_t>(labels[i]), argmax(row));
    }
  }
  if (!samples.empty()) {
    m.loss = loss_sum / static_cast<double>(samples.size());
  }
  m.accuracy = m.confusion.accuracy();
  return m;
}

std::vector<double> inverse_frequency_weights(
    std::span<const LabeledSample> samples) {
  std::vector<double> counts(kNumEmotions, 0.0);
  for (const LabeledSample& s : samples) counts.at(s.label8) += 1.0;
  std::vector<double> weights(kNumEmotions, 0.0);
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    if (counts[k] > 0) weights[k] = n / (kNumEmotions * counts[k]);
  }
  return weights;
}

Trainer::Trainer(ResNet<float>& model, TrainConfig config)
    : model_(model), config_(config), rng_(config.seed), lr_(config.lr) {
  config_.validate();
}

EpochRecord Trainer::train_epoch(std::span<const LabeledSample> train) {
  if (train.empty()) throw InvalidArgument("train_epoch: empty dataset");
  Rng epoch_rng = rng_.split();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(
        epoch_rng.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(order[i], order[j]);
  }

  std::vector<double> class_weights;
  if (config_.class_weighted) class_weights = inverse_frequency_weights(train);

  auto params = model_.parameters();
  const SgdOptions sgd{lr_, config_.momentum, 0.0};  // decay is in the loss

  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size();
       start += config_.batch_size) {
    const std::size_t n = std::min(config_.batch_size, order.size() - start);
    Tensor<float> batch({n, 1, kImageSide, kImageSide});
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      const LabeledSample& s = train[order[start + i]];
      Tensor<float> img = normalize_image(s.pixels);
      if (config_.augment) {
        if (epoch_rng.bernoulli(config_.flip_p)) img = horizontal_flip(img);
        img = random_erase(img, epoch_rng, config_.erase).image;
      }
      std::copy(img.data(), img.data() + kImagePixels,
                batch.data() + i * kImagePixels);
      labels[i] = s.label8;
    }
    const LossBreakdown loss =
        loss_with_l2(model_, batch, labels, class_weights);
    sgd_step<float>(params, sgd, sgd_);
    loss_sum += loss.total * static_cast<double>(n);
    correct += loss.correct;
  }

  ++epoch_;
  EpochRecord rec;
  rec.epoch = epoch_;
  rec.train_loss = loss_sum / static_cast<double>(train.size());
  rec.train_acc =
      static_cast<double>(correct) / static_cast<double>(train.size());
  rec.lr = lr_;
  return rec;
}

EpochRecord Trainer::run_epoch(std::span<const LabeledSample> train,
                               std::span<const LabeledSample> val) {
  EpochRecord rec = train_epoch(train);
  double monitored = rec.train_loss;
  if (!val.empty()) {
    const Metrics m = evaluate(model_, val);
    rec.val_loss = m.loss;
    rec.val_acc = m.accuracy;
    monitored = m.loss;
  }
  if (monitored < best_loss_) {
    best_loss_ = monitored;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= config_.plateau_patience) {
    lr_ *= config_.plateau_factor;
    bad_epochs_ = 0;
  }
  return rec;
}

Metrics Trainer::fit(std::span<const LabeledSample> train,
                     std::span<const LabeledSample> val,
                     const std::function<bool(const EpochRecord&)>& on_epoch) {
  Metrics metrics{{}, ConfusionMatrix(model_.config().num_classes), 0.0, 0.0};
  for (std::size_t e = 0; e < config_.epochs; ++e) {
    metrics.epochs.push_back(run_epoch(train, val));
    if (on_epoch && !on_epoch(metrics.epochs.back())) break;
  }
  if (!val.empty()) {
    Metrics final_eval = evaluate(model_, val);
    metrics.confusion = final_eval.confusion;
    metrics.loss = final_eval.loss;
    metrics.accuracy = final_eval.accuracy;
  }
  return metrics;
}

}  // namespace fer
