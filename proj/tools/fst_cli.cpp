// SPDX-License-Identifier: Apache-2.0
// fst: data generation, training, evaluation, layer inspection and rendering.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "fst/checkpoint.hpp"
#include "fst/config.hpp"
#include "fst/dataset.hpp"
#include "fst/field_file.hpp"
#include "fst/inspect.hpp"
#include "fst/parallel.hpp"
#include "fst/render.hpp"
#include "fst/selftest.hpp"
#include "fst/trainer.hpp"

namespace fs = std::filesystem;

namespace {

// Flags shared by the subcommands that build a TrainConfig. Unset flags leave
// the config file (or built-in default) alone.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> zoom_in;
  std::optional<int> zoom_low;
  std::string zooms;
  std::optional<int> za;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> iters;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> replicas;
  std::optional<std::size_t> n_val;
  std::string out;

  void attach(CLI::App* app, bool training) {
    app->add_option("--config", config, "key = value config file; flags override it")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "base seed for data and weights");
    app->add_option("--zoom-in", zoom_in, "zoom of the high-resolution field");
    app->add_option("--zoom-low", zoom_low, "zoom of the coarse model input");
    app->add_option("--n-val", n_val, "validation samples");
    app->add_option("--out", out, "output directory");
    if (!training) return;
    app->add_option("--zooms", zooms, "model zoom list, e.g. 3,5,6");
    app->add_option("--za", za, "attention (token) zoom");
    app->add_option("--layers", layers, "number of field-space attention blocks");
    app->add_option("--dim", dim, "attention width D");
    app->add_option("--iters", iters, "training iterations");
    app->add_option("--batch", batch, "batch size");
    app->add_option("--lr", lr, "peak learning rate");
    app->add_option("--warmup", warmup, "linear warmup iterations");
    app->add_option("--replicas", replicas, "data-parallel model replicas (1 = reference mode)");
  }

  fst::TrainConfig resolve(fst::TrainConfig base = {}) const {
    fst::TrainConfig c = config.empty() ? std::move(base) : fst::train_config_from(fst::KeyValues::load(config), std::move(base));
    if (seed) {
      c.data.seed = *seed;
      c.model.seed = *seed;
    }
    if (zoom_in) c.data.zoom_in = *zoom_in;
    if (zoom_low) c.data.zoom_low = *zoom_low;
    if (!zooms.empty()) c.model.zooms = fst::parse_int_list(zooms);
    if (za) c.model.attn_zoom = *za;
    if (layers) c.model.layers = *layers;
    if (dim) c.model.dim = *dim;
    if (iters) c.total_iters = *iters;
    if (batch) c.batch_size = *batch;
    if (lr) c.lr_max = *lr;
    if (warmup) c.warmup_iters = *warmup;
    if (replicas) c.replicas = *replicas;
    if (n_val) c.data.n_val = *n_val;
    if (!out.empty()) c.out_dir = out;
    // Keep the model input on the coarse grid unless configured otherwise.
    if (c.model.input_zoom < 0 && c.model.zooms.front() != c.data.zoom_low) c.model.input_zoom = c.data.zoom_low;
    return c;
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

int cmd_gen_data(const CommonFlags& flags, std::size_t count) {
  const fst::TrainConfig cfg = flags.resolve();
  const fs::path dir = flags.out.empty() ? fs::path("data") : fs::path(flags.out);
  fs::create_directories(dir);
  fst::DataConfig data = cfg.data;
  data.n_val = count;
  const auto ds = data.dataset();
  for (std::size_t i = 0; i < count; ++i) {
    const auto pair = ds.sample(fst::Split::Val, i);
    const std::string stem = "sample" + std::to_string(i);
    fst::write_field((dir / (stem + "_hi.fsf")).string(), pair.hi);
    fst::write_field((dir / (stem + "_lo.fsf")).string(), pair.lo);
  }
  std::cout << "wrote " << count << " pairs (z" << data.zoom_in << " -> z" << data.zoom_low << ") to " << dir.string()
            << "\n";
  return 0;
}

int cmd_train(const CommonFlags& flags) {
  fst::TrainConfig cfg = flags.resolve();
  if (cfg.out_dir.empty()) cfg.out_dir = "run";
  std::cout << "training " << fst::param_count(cfg.model) << " parameters for " << cfg.total_iters
            << " iterations\n";
  const auto result = fst::train(cfg, [](const fst::LossRow& r) {
    if (r.has_val) {
      std::printf("iter %6zu  train %.6g  val %.6g\n", r.iteration, r.train_loss, r.val_loss);
      std::fflush(stdout);
    }
  });
  const auto baseline = fst::evaluate_baseline(cfg.data.dataset(), cfg.batch_size);
  write_text(fs::path(cfg.out_dir) / "metrics.csv", fst::metrics_csv(result.final_val, baseline));
  std::printf("val rmse %.6g K (bias %.3g K), upsampling baseline %.6g K\n", result.final_val.rmse,
              result.final_val.bias, baseline.rmse);
  return 0;
}

fst::TrainConfig checkpoint_config(const std::string& path, const CommonFlags& flags, fst::FSTModel*& model_out,
                                   std::optional<fst::FSTModel>& holder) {
  fst::KeyValues kv;
  holder.emplace(fst::load_model(path, &kv));
  model_out = &*holder;
  fst::TrainConfig cfg = flags.resolve(fst::train_config_from(kv));
  if (cfg.data.zoom_in != holder->config().zooms.back() ||
      cfg.data.zoom_low != holder->config().resolved_input_zoom()) {
    throw std::invalid_argument("data zooms do not match the checkpoint's model configuration");
  }
  return cfg;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint) {
  std::optional<fst::FSTModel> holder;
  fst::FSTModel* model = nullptr;
  const auto cfg = checkpoint_config(checkpoint, flags, model, holder);
  const auto ds = cfg.data.dataset();
  const auto m = fst::evaluate(*model, ds, cfg.data.norm, cfg.batch_size);
  const auto b = fst::evaluate_baseline(ds, cfg.batch_size);
  const std::string csv = fst::metrics_csv(m, b);
  if (!flags.out.empty()) {
    fs::create_directories(flags.out);
    write_text(fs::path(flags.out) / "metrics.csv", csv);
  }
  std::cout << csv;
  return 0;
}

int cmd_inspect(const CommonFlags& flags, const std::string& checkpoint, std::size_t index, const std::string& input) {
  std::optional<fst::FSTModel> holder;
  fst::FSTModel* model = nullptr;
  const auto cfg = checkpoint_config(checkpoint, flags, model, holder);
  fst::SRPair sample;
  if (!input.empty()) {
    sample = fst::make_sr_pair(fst::read_field(input), cfg.data.zoom_low);
  } else {
    sample = cfg.data.dataset().sample(fst::Split::Val, index);
  }
  const auto files = fst::inspect_layers(*model, sample, cfg.data.norm, flags.out.empty() ? "layers" : flags.out);
  for (const auto& f : files) std::cout << f << "\n";
  return 0;
}

int cmd_render(const std::string& input, const std::string& out, std::size_t width, std::size_t height) {
  const auto raster = fst::rasterize(fst::read_field(input), width, height);
  const std::string prefix = out.empty() ? fs::path(input).replace_extension().string() : out;
  fst::write_pgm(prefix + ".pgm", raster);
  fst::write_raster_csv(prefix + ".csv", raster);
  std::cout << "wrote " << prefix << ".pgm and " << prefix << ".csv\n";
  return 0;
}

int cmd_selftest(const std::string& scratch) {
  bool all = true;
  for (const auto& r : fst::run_selftest(scratch)) {
    std::printf("%s  %s (%s)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.passed;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  fst::configure_threads_from_env();
  CLI::App app{"Field-space transformer on the HEALPix sphere. Metrics are plain (unweighted) RMSE and bias: "
               "HEALPix cells have equal area."};
  app.require_subcommand(1);

  CommonFlags gen_flags;
  std::size_t gen_count = 4;
  auto* gen = app.add_subcommand("gen-data", "write synthetic (hi, lo) field pairs as .fsf files");
  gen_flags.attach(gen, false);
  gen->add_option("--count", gen_count, "number of pairs");

  CommonFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model; writes loss.csv, metrics.csv and model.fstc");
  train_flags.attach(train, true);

  CommonFlags eval_flags;
  std::string eval_ckpt;
  auto* eval = app.add_subcommand("eval", "RMSE and bias on the synthetic validation split");
  eval_flags.attach(eval, false);
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);

  CommonFlags inspect_flags;
  std::string inspect_ckpt;
  std::string inspect_input;
  std::size_t inspect_index = 0;
  auto* inspect = app.add_subcommand("inspect-layers", "write per-layer residual fields and the true residuals");
  inspect_flags.attach(inspect, false);
  inspect->add_option("--checkpoint", inspect_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  inspect->add_option("--index", inspect_index, "validation sample index");
  inspect->add_option("--input", inspect_input, "high-resolution .fsf to inspect instead")->check(CLI::ExistingFile);

  std::string render_input;
  std::string render_out;
  std::size_t width = 360;
  std::size_t height = 180;
  auto* render = app.add_subcommand("render", "equirectangular .pgm and lon,lat,value .csv of a field");
  render->add_option("--input", render_input, "field file")->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_out, "output path prefix");
  render->add_option("--width", width, "image width");
  render->add_option("--height", height, "image height");

  std::string scratch = (fs::temp_directory_path() / "fst-selftest").string();
  auto* selftest = app.add_subcommand("selftest", "run the invariant suite; exit 0 only if every check passes");
  selftest->add_option("--scratch", scratch, "directory for temporary files");

  CLI11_PARSE(app, argc, argv);
  try {
    if (gen->parsed()) return cmd_gen_data(gen_flags, gen_count);
    if (train->parsed()) return cmd_train(train_flags);
    if (eval->parsed()) return cmd_eval(eval_flags, eval_ckpt);
    if (inspect->parsed()) return cmd_inspect(inspect_flags, inspect_ckpt, inspect_index, inspect_input);
    if (render->parsed()) return cmd_render(render_input, render_out, width, height);
    if (selftest->parsed()) return cmd_selftest(scratch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
