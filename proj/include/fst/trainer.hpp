// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fst/config.hpp"
#include "fst/dataset.hpp"
#include "fst/model.hpp"
#include "fst/optim.hpp"

namespace fst {

/// Affine map between kelvin-like field values and model units. Powers of two
/// keep the round trip exact.
struct Normalizer {
  double offset = 256.0;
  double scale = 16.0;

  [[nodiscard]] Tensor to_model(const Tensor& kelvin) const;
  [[nodiscard]] Tensor to_kelvin(const Tensor& model_units) const;
};

struct DataConfig {
  int zoom_in = 6;
  int zoom_low = 3;
  std::uint64_t seed = 0;
  std::size_t n_train = 16000;
  std::size_t n_val = 32;
  SynthFieldParams synth;
  Normalizer norm;

  /// The synthetic params with zoom forced to zoom_in.
  [[nodiscard]] SynthFieldParams field_params() const;
  [[nodiscard]] SyntheticDataset dataset() const;
};

struct TrainConfig {
  FSTConfig model;
  DataConfig data;
  double lr_max = 2e-4;
  std::size_t warmup_iters = 200;
  std::size_t total_iters = 2000;
  std::size_t batch_size = 8;
  std::size_t eval_every = 100;
  AdamConfig adam;
  /// 1 selects the single-context reference path; more splits each batch
  /// across model replicas and averages their gradients.
  std::size_t replicas = 1;
  std::string out_dir;

  void validate() const;
};

/// Reads every recognised key; unknown keys are ignored. `base` supplies defaults.
TrainConfig train_config_from(const KeyValues& kv, TrainConfig base = {});
KeyValues to_key_values(const TrainConfig& cfg);

struct Metrics {
  double rmse = 0.0;
  double bias = 0.0;
  std::size_t count = 0;
};

/// Plain (unweighted) statistics of pred - truth: HEALPix cells are equal-area.
Metrics compute_metrics(const Tensor& pred, const Tensor& truth);
/// Pools partial metrics in proportion to their pixel counts.
Metrics merge_metrics(const std::vector<Metrics>& parts);

/// Prediction in kelvin for a batch of coarse inputs.
Tensor predict(const FSTModel& model, const Tensor& lo_kelvin, const Normalizer& norm);

Metrics evaluate(const FSTModel& model, const SyntheticDataset& ds, const Normalizer& norm,
                 std::size_t batch_size = 8);
/// Metrics of upsample(lo) against hi.
Metrics evaluate_baseline(const SyntheticDataset& ds, std::size_t batch_size = 8);

/// MSE in model units; accumulates parameter gradients.
double loss_and_backward(const FSTModel& model, const Batch& batch, const Normalizer& norm);

/// Same loss and gradients computed on `replicas` copies of the model, each
/// taking a contiguous shard of the batch; gradients are averaged with shard weights.
double data_parallel_loss_and_grads(const FSTModel& model, const Batch& batch, const Normalizer& norm,
                                    std::size_t replicas, GradientSet& grads);

struct LossRow {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  bool has_val = false;
  double val_loss = 0.0;
};

struct TrainResult {
  FSTModel model;
  std::vector<LossRow> curve;
  Metrics initial_val;
  Metrics final_val;
};

using ProgressFn = std::function<void(const LossRow&)>;

/// Runs the full schedule. When out_dir is set, writes loss.csv and model.fstc there.
TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = {});

std::string loss_curve_csv(const std::vector<LossRow>& rows);
std::string metrics_csv(const Metrics& model, const Metrics& baseline);

}  // namespace fst
