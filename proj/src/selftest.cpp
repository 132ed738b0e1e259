// SPDX-License-Identifier: Apache-2.0
#include "fst/selftest.hpp"

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "fst/checkpoint.hpp"
#include "fst/field_file.hpp"
#include "fst/grad_check.hpp"
#include "fst/healpix.hpp"
#include "fst/model.hpp"
#include "fst/multiscale.hpp"
#include "fst/ops.hpp"
#include "fst/sph_harm.hpp"

namespace fst {

namespace {

Tensor random_field(int zoom, std::size_t batch, std::mt19937_64& rng, bool requires_grad = false) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(batch * static_cast<std::size_t>(healpix::n_pixels(zoom)));
  for (auto& x : v) x = normal(rng);
  const std::size_t n = v.size() / batch;
  return Tensor::from_data({batch, n, 1}, std::move(v), requires_grad);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

CheckResult check(std::string name, bool ok, std::string detail) { return {std::move(name), ok, std::move(detail)}; }

}  // namespace

std::vector<CheckResult> run_selftest(const std::string& scratch_dir) {
  std::vector<CheckResult> out;
  std::mt19937_64 rng(7);

  {
    double worst = 0.0;
    for (const auto& zooms : std::vector<std::vector<int>>{{2, 3, 4}, {1, 3, 4}, {0, 4}}) {
      const Tensor x = random_field(4, 2, rng);
      worst = std::max(worst, max_abs_diff(reconstruct(decompose(x, zooms)).data(), x.data()));
    }
    out.push_back(check("reconstruct(decompose(x)) == x", worst < 1e-12, "max abs " + fmt(worst)));
  }
  {
    const Tensor x = random_field(4, 2, rng);
    FieldPyramid p = decompose(x, {1, 2, 4});
    for (auto& l : p.levels) l = add(l, random_field(healpix::zoom_for_pixel_count(static_cast<std::int64_t>(l.dim(1))), 2, rng));
    const FieldPyramid s = scale_constrain(p);
    const double recon = max_abs_diff(reconstruct(s).data(), reconstruct(p).data());
    const double mean = std::max(max_abs_parent_mean(s, 2, 1), max_abs_parent_mean(s, 4, 2));
    const FieldPyramid s2 = scale_constrain(s);
    double idem = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) idem = std::max(idem, max_abs_diff(s.levels[i].data(), s2.levels[i].data()));
    out.push_back(check("scale_constrain conserves and centres", recon < 1e-12 && mean < 1e-12 && idem < 1e-12,
                        "recon " + fmt(recon) + ", parent mean " + fmt(mean) + ", idempotence " + fmt(idem)));
  }
  {
    const bool c276 = token_channels(2, {3, 4, 6}) == 276;
    const Tensor x = random_field(5, 2, rng);
    const FieldPyramid p = decompose(x, {2, 3, 5});
    const auto parts = detokenize(tokenize(p, 2, {2, 3, 5}), 2, {2, 3, 5});
    double worst = 0.0;
    for (std::size_t i = 0; i < parts.size(); ++i) worst = std::max(worst, max_abs_diff(parts[i].data(), p.levels[i].data()));
    out.push_back(check("tokenize/detokenize bijection", c276 && worst == 0.0, "C(2;{3,4,6}) = " +
                        std::to_string(token_channels(2, {3, 4, 6})) + ", roundtrip " + fmt(worst)));
  }
  {
    FSTConfig cfg;
    cfg.zooms = {3};
    cfg.attn_zoom = 2;
    cfg.layers = 1;
    cfg.dim = 16;
    cfg.seed = 3;
    FSTModel model(cfg);
    randomize_parameters(model, 0.3, 11);
    const Tensor x = random_field(3, 2, rng);
    FieldPyramid p{{3}, {x}};
    const FieldPyramid y = fsa_block_forward(p, model.blocks()[0], cfg.token_spec(), model.embedding());
    const std::vector<double> tokens(x.data().begin(), x.data().end());
    const auto ref = single_scale_reference_layer(tokens, 2, 192, model.blocks()[0], model.embedding());
    const double d = max_abs_diff(y.levels[0].data(), ref);
    out.push_back(check("single-zoom block == reference transformer layer", d < 1e-12, "max abs " + fmt(d)));
  }
  {
    FSTConfig cfg;
    cfg.zooms = {1, 2, 3};
    cfg.attn_zoom = 1;
    cfg.layers = 2;
    cfg.dim = 16;
    cfg.embed_dim = 8;
    FSTModel model(cfg);
    randomize_parameters(model, 0.2, 5);
    const Tensor x = random_field(1, 2, rng);
    const Tensor target = random_field(3, 2, rng);
    const auto r = grad_check_params([&] { return mse(model.forward(x).output, target); }, model.named_parameters());
    out.push_back(check("model gradient check", r.max_rel_error < 1e-5,
                        "max rel " + fmt(r.max_rel_error) + " at " + r.worst_tensor));
  }
  {
    FSTModel model(FSTConfig{});
    const Tensor x = random_field(3, 1, rng);
    const double d = max_abs_diff(model.forward(x).output.data(), upsample(x, 6).data());
    out.push_back(check("fresh model is the upsampling identity", d == 0.0, "max abs " + fmt(d)));
  }
  {
    bool ok = true;
    for (auto [z, km] : std::vector<std::pair<int, double>>{{3, 814}, {5, 204}, {8, 25}}) {
      ok = ok && std::abs(healpix::mean_cell_diameter_km(z) - km) < 1.0;
    }
    ok = ok && nyquist_lmax(0) == 1 && nyquist_lmax(1) == 3 && nyquist_lmax(8) == 392;
    out.push_back(check("grid constants", ok, "cell diameters and Nyquist degrees"));
  }
  {
    std::filesystem::create_directories(scratch_dir);
    const auto path = (std::filesystem::path(scratch_dir) / "selftest.fsf").string();
    HealpixField f{3, 2, {}};
    std::uniform_real_distribution<float> u(200.0f, 320.0f);
    for (int i = 0; i < 2 * 768; ++i) f.values.push_back(u(rng));
    write_field(path, f);
    const bool field_ok = read_field(path) == f;
    const auto ckpt_path = (std::filesystem::path(scratch_dir) / "selftest.fstc").string();
    FSTConfig cfg;
    cfg.layers = 1;
    FSTModel m(cfg);
    randomize_parameters(m, 1.0, 9);
    save_model(ckpt_path, m);
    const FSTModel back = load_model(ckpt_path);
    bool ckpt_ok = back.config() == m.config();
    const auto a = m.named_parameters();
    const auto b = back.named_parameters();
    for (std::size_t i = 0; i < a.size(); ++i) {
      ckpt_ok = ckpt_ok && std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin());
    }
    out.push_back(check("field file and checkpoint roundtrip", field_ok && ckpt_ok,
                        std::string("field ") + (field_ok ? "ok" : "differs") + ", checkpoint " + (ckpt_ok ? "ok" : "differs")));
  }
  return out;
}

}  // namespace fst
