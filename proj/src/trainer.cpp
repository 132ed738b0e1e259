// SPDX-License-Identifier: Apache-2.0
#include "fst/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "fst/checkpoint.hpp"
#include "fst/multiscale.hpp"
#include "fst/ops.hpp"

namespace fst {

Tensor Normalizer::to_model(const Tensor& kelvin) const {
  std::vector<double> v(kelvin.data().begin(), kelvin.data().end());
  for (auto& x : v) x = (x - offset) / scale;
  return Tensor::from_data(kelvin.shape(), std::move(v));
}

Tensor Normalizer::to_kelvin(const Tensor& model_units) const {
  std::vector<double> v(model_units.data().begin(), model_units.data().end());
  for (auto& x : v) x = x * scale + offset;
  return Tensor::from_data(model_units.shape(), std::move(v));
}

SynthFieldParams DataConfig::field_params() const {
  SynthFieldParams p = synth;
  p.zoom = zoom_in;
  return p;
}

SyntheticDataset DataConfig::dataset() const { return {seed, n_train, n_val, field_params(), zoom_low}; }

void TrainConfig::validate() const {
  model.validate();
  if (model.zooms.back() != data.zoom_in) throw std::invalid_argument("finest model zoom must equal zoom_in");
  if (model.resolved_input_zoom() != data.zoom_low) {
    throw std::invalid_argument("model input zoom must equal zoom_low");
  }
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (total_iters == 0) throw std::invalid_argument("total_iters must be positive");
  if (warmup_iters >= total_iters) throw std::invalid_argument("warmup must be shorter than the run");
  if (replicas == 0 || replicas > batch_size) throw std::invalid_argument("replicas must lie in [1, batch]");
  if (data.n_train == 0) throw std::invalid_argument("training split is empty");
  if (!(data.norm.scale > 0.0)) throw std::invalid_argument("normalizer scale must be positive");
  if (!(lr_max >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
}

TrainConfig train_config_from(const KeyValues& kv, TrainConfig base) {
  TrainConfig c = std::move(base);
  c.model = load_model_config(kv, c.model);
  auto& d = c.data;
  d.zoom_in = static_cast<int>(kv.get_int("data.zoom_in", d.zoom_in));
  d.zoom_low = static_cast<int>(kv.get_int("data.zoom_low", d.zoom_low));
  d.seed = kv.get_u64("data.seed", d.seed);
  d.n_train = static_cast<std::size_t>(kv.get_int("data.n_train", static_cast<long long>(d.n_train)));
  d.n_val = static_cast<std::size_t>(kv.get_int("data.n_val", static_cast<long long>(d.n_val)));
  d.norm.offset = kv.get_double("data.offset", d.norm.offset);
  d.norm.scale = kv.get_double("data.scale", d.norm.scale);
  auto& s = d.synth;
  s.l_band = static_cast<int>(kv.get_int("synth.l_band", s.l_band));
  s.n_blobs = static_cast<std::size_t>(kv.get_int("synth.n_blobs", static_cast<long long>(s.n_blobs)));
  s.blob_sigma = kv.get_double("synth.blob_sigma", s.blob_sigma);
  s.base_amp = kv.get_double("synth.base_amp", s.base_amp);
  s.season_amp = kv.get_double("synth.season_amp", s.season_amp);
  s.noise_amp = kv.get_double("synth.noise_amp", s.noise_amp);
  s.blob_amp = kv.get_double("synth.blob_amp", s.blob_amp);
  s.offset = kv.get_double("synth.offset", s.offset);
  s.half_range = kv.get_double("synth.half_range", s.half_range);
  c.lr_max = kv.get_double("train.lr", c.lr_max);
  c.warmup_iters = static_cast<std::size_t>(kv.get_int("train.warmup", static_cast<long long>(c.warmup_iters)));
  c.total_iters = static_cast<std::size_t>(kv.get_int("train.iters", static_cast<long long>(c.total_iters)));
  c.batch_size = static_cast<std::size_t>(kv.get_int("train.batch", static_cast<long long>(c.batch_size)));
  c.eval_every = static_cast<std::size_t>(kv.get_int("train.eval_every", static_cast<long long>(c.eval_every)));
  c.replicas = static_cast<std::size_t>(kv.get_int("train.replicas", static_cast<long long>(c.replicas)));
  c.adam.beta1 = kv.get_double("train.beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_double("train.beta2", c.adam.beta2);
  c.adam.eps = kv.get_double("train.eps", c.adam.eps);
  if (kv.has("train.out")) c.out_dir = kv.get("train.out");
  return c;
}

KeyValues to_key_values(const TrainConfig& c) {
  KeyValues kv;
  store_model_config(c.model, kv);
  const auto& d = c.data;
  kv.set("data.zoom_in", std::to_string(d.zoom_in));
  kv.set("data.zoom_low", std::to_string(d.zoom_low));
  kv.set("data.seed", std::to_string(d.seed));
  kv.set("data.n_train", std::to_string(d.n_train));
  kv.set("data.n_val", std::to_string(d.n_val));
  kv.set("data.offset", format_double(d.norm.offset));
  kv.set("data.scale", format_double(d.norm.scale));
  const auto& s = d.synth;
  kv.set("synth.l_band", std::to_string(s.l_band));
  kv.set("synth.n_blobs", std::to_string(s.n_blobs));
  kv.set("synth.blob_sigma", format_double(s.blob_sigma));
  kv.set("synth.base_amp", format_double(s.base_amp));
  kv.set("synth.season_amp", format_double(s.season_amp));
  kv.set("synth.noise_amp", format_double(s.noise_amp));
  kv.set("synth.blob_amp", format_double(s.blob_amp));
  kv.set("synth.offset", format_double(s.offset));
  kv.set("synth.half_range", format_double(s.half_range));
  kv.set("train.lr", format_double(c.lr_max));
  kv.set("train.warmup", std::to_string(c.warmup_iters));
  kv.set("train.iters", std::to_string(c.total_iters));
  kv.set("train.batch", std::to_string(c.batch_size));
  kv.set("train.eval_every", std::to_string(c.eval_every));
  kv.set("train.replicas", std::to_string(c.replicas));
  kv.set("train.beta1", format_double(c.adam.beta1));
  kv.set("train.beta2", format_double(c.adam.beta2));
  kv.set("train.eps", format_double(c.adam.eps));
  return kv;
}

Metrics compute_metrics(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape()) throw std::invalid_argument("metrics: shape mismatch");
  Metrics m;
  m.count = pred.numel();
  if (m.count == 0) return m;
  double se = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i < m.count; ++i) {
    const double e = pred.data()[i] - truth.data()[i];
    se += e * e;
    err += e;
  }
  m.rmse = std::sqrt(se / static_cast<double>(m.count));
  m.bias = err / static_cast<double>(m.count);
  return m;
}

Metrics merge_metrics(const std::vector<Metrics>& parts) {
  Metrics out;
  double se = 0.0;
  double err = 0.0;
  for (const auto& p : parts) {
    se += p.rmse * p.rmse * static_cast<double>(p.count);
    err += p.bias * static_cast<double>(p.count);
    out.count += p.count;
  }
  if (out.count == 0) return out;
  out.rmse = std::sqrt(se / static_cast<double>(out.count));
  out.bias = err / static_cast<double>(out.count);
  return out;
}

Tensor predict(const FSTModel& model, const Tensor& lo_kelvin, const Normalizer& norm) {
  return norm.to_kelvin(model.forward(norm.to_model(lo_kelvin)).output.detach());
}

Metrics evaluate(const FSTModel& model, const SyntheticDataset& ds, const Normalizer& norm,
                 std::size_t batch_size) {
  std::vector<Metrics> parts;
  auto stream = ds.stream(Split::Val, batch_size);
  while (auto b = stream.next()) parts.push_back(compute_metrics(predict(model, b->lo, norm), b->hi));
  return merge_metrics(parts);
}

Metrics evaluate_baseline(const SyntheticDataset& ds, std::size_t batch_size) {
  std::vector<Metrics> parts;
  const int z_in = ds.params().zoom;
  auto stream = ds.stream(Split::Val, batch_size);
  while (auto b = stream.next()) parts.push_back(compute_metrics(upsample(b->lo, z_in), b->hi));
  return merge_metrics(parts);
}

double loss_and_backward(const FSTModel& model, const Batch& batch, const Normalizer& norm) {
  const Tensor out = model.forward(norm.to_model(batch.lo)).output;
  const Tensor loss = mse(out, norm.to_model(batch.hi));
  const double value = loss.item();
  backward(loss);
  return value;
}

namespace {

FSTModel clone_model(const FSTModel& model) {
  FSTModel copy(model.config());
  auto dst = copy.named_parameters();
  const auto src = model.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::copy(src[i].second.data().begin(), src[i].second.data().end(), dst[i].second.mutable_data().begin());
  }
  return copy;
}

Tensor rows_of(const Tensor& t, std::size_t begin, std::size_t end) {
  const std::size_t row = t.numel() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = end - begin;
  return Tensor::from_data(shape, std::vector<double>(t.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                                                      t.data().begin() + static_cast<std::ptrdiff_t>(end * row)));
}

void check_finite_loss(double loss, std::size_t iteration) {
  if (!std::isfinite(loss)) {
    throw NonFiniteError("non-finite training loss at iteration " + std::to_string(iteration));
  }
}

}  // namespace

double data_parallel_loss_and_grads(const FSTModel& model, const Batch& batch, const Normalizer& norm,
                                    std::size_t replicas, GradientSet& grads) {
  const std::size_t n = batch.size();
  if (replicas == 0 || replicas > n) throw std::invalid_argument("replicas must lie in [1, batch]");
  std::vector<double> losses(replicas, 0.0);
  std::vector<GradientSet> shard_grads(replicas);
  std::vector<std::size_t> bounds(replicas + 1);
  for (std::size_t r = 0; r <= replicas; ++r) bounds[r] = r * n / replicas;

  const auto rr = static_cast<std::ptrdiff_t>(replicas);
#pragma omp parallel for schedule(static, 1)
  for (std::ptrdiff_t r = 0; r < rr; ++r) {
    const auto i = static_cast<std::size_t>(r);
    FSTModel replica = clone_model(model);
    const Batch shard{rows_of(batch.lo, bounds[i], bounds[i + 1]), rows_of(batch.hi, bounds[i], bounds[i + 1])};
    losses[i] = loss_and_backward(replica, shard, norm);
    shard_grads[i] = collect_grads(replica.named_parameters());
  }

  double loss = 0.0;
  grads.assign(shard_grads[0].size(), {});
  for (std::size_t k = 0; k < grads.size(); ++k) grads[k].assign(shard_grads[0][k].size(), 0.0);
  for (std::size_t r = 0; r < replicas; ++r) {
    const double w = static_cast<double>(bounds[r + 1] - bounds[r]) / static_cast<double>(n);
    loss += w * losses[r];
    for (std::size_t k = 0; k < grads.size(); ++k) {
      for (std::size_t j = 0; j < grads[k].size(); ++j) grads[k][j] += w * shard_grads[r][k][j];
    }
  }
  return loss;
}

namespace {

double validation_loss(const FSTModel& model, const SyntheticDataset& ds, const Normalizer& norm,
                       std::size_t batch_size) {
  // Mean squared error in model units, pooled over pixels.
  const Metrics m = evaluate(model, ds, norm, batch_size);
  return m.rmse * m.rmse / (norm.scale * norm.scale);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const SyntheticDataset ds = cfg.data.dataset();
  const Normalizer& norm = cfg.data.norm;
  TrainResult result{FSTModel(cfg.model), {}, {}, {}};
  FSTModel& model = result.model;
  Adam adam(model.named_parameters(), cfg.adam);

  result.initial_val = evaluate(model, ds, norm, cfg.batch_size);
  for (std::size_t it = 0; it < cfg.total_iters; ++it) {
    const Batch batch = ds.batch(Split::Train, it * cfg.batch_size, cfg.batch_size);
    const double lr = cosine_lr(it + 1, cfg.lr_max, cfg.warmup_iters, cfg.total_iters);
    LossRow row;
    row.iteration = it + 1;
    if (cfg.replicas == 1) {
      model.zero_grad();
      row.train_loss = loss_and_backward(model, batch, norm);
      check_finite_loss(row.train_loss, row.iteration);
      adam.step(lr);
    } else {
      GradientSet grads;
      row.train_loss = data_parallel_loss_and_grads(model, batch, norm, cfg.replicas, grads);
      check_finite_loss(row.train_loss, row.iteration);
      adam.step(lr, grads);
    }
    const bool last = row.iteration == cfg.total_iters;
    if (last || (cfg.eval_every != 0 && row.iteration % cfg.eval_every == 0)) {
      row.has_val = true;
      row.val_loss = validation_loss(model, ds, norm, cfg.batch_size);
    }
    result.curve.push_back(row);
    if (progress) progress(row);
  }
  model.zero_grad();
  result.final_val = evaluate(model, ds, norm, cfg.batch_size);

  if (!cfg.out_dir.empty()) {
    const std::filesystem::path dir(cfg.out_dir);
    std::filesystem::create_directories(dir);
    write_text(dir / "loss.csv", loss_curve_csv(result.curve));
    save_model((dir / "model.fstc").string(), model, to_key_values(cfg));
  }
  return result;
}

std::string loss_curve_csv(const std::vector<LossRow>& rows) {
  std::string out = "iteration,train_loss,val_loss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.iteration) + "," + format_double(r.train_loss) + "," +
           (r.has_val ? format_double(r.val_loss) : "") + "\n";
  }
  return out;
}

std::string metrics_csv(const Metrics& model, const Metrics& baseline) {
  return "metric,value\nrmse," + format_double(model.rmse) + "\nbias," + format_double(model.bias) +
         "\nbaseline_rmse," + format_double(baseline.rmse) + "\nbaseline_bias," + format_double(baseline.bias) +
         "\npixels," + std::to_string(model.count) + "\n";
}

}  // namespace fst
