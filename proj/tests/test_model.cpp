#include <doctest.h>

#include "fst/grad_check.hpp"
#include "fst/healpix.hpp"
#include "fst/model.hpp"
#include "fst/ops.hpp"
#include "test_util.hpp"

using namespace fst;
using fst::test::max_abs;
using fst::test::max_abs_diff;
using fst::test::random_field;
using fst::test::values;

namespace {

FSTConfig toy_config() {
  FSTConfig c;
  c.zooms = {1, 2, 3};
  c.attn_zoom = 1;
  c.layers = 2;
  c.dim = 16;
  c.heads = 2;
  c.embed_dim = 6;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("parameter count formula") {
  FSTConfig c;
  c.zooms = {3, 5, 8};
  c.layers = 5;
  const FSTModel m(c);
  CHECK(m.parameter_count() == param_count(c));
  CHECK(param_count(c) > 64u * 768u);
  CHECK(m.embedding().numel() == 49152);

  for (const auto& cfg : {FSTConfig{}, toy_config()}) CHECK(FSTModel(cfg).parameter_count() == param_count(cfg));
  FSTConfig d{};
  CHECK(param_count(d) == 205299);

  // Attention weights scale linearly with the width.
  const auto attn = [](const FSTConfig& cfg) {
    const auto b = cfg.block_dims();
    return (2 * b.q_channels + 2 * b.kv_channels) * b.dim;
  };
  FSTConfig wide = c;
  wide.dim = 64;
  CHECK(attn(wide) == 2 * attn(c));
  CHECK(param_count(wide) > param_count(c));
}

TEST_CASE("config validation") {
  FSTConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.resolved_heads() == 1);
  c.dim = 128;
  CHECK(c.resolved_heads() == 4);
  c.dim = 30;
  c.heads = 4;
  CHECK_THROWS(c.validate());
  c = FSTConfig{};
  c.zooms = {5, 3};
  CHECK_THROWS(c.validate());
  c = FSTConfig{};
  c.attn_zoom = 7;
  CHECK_THROWS(c.validate());
  c = FSTConfig{};
  c.input_zoom = 4;
  CHECK_THROWS(c.validate());
  c = FSTConfig{};
  c.layers = 0;
  CHECK_THROWS(FSTModel{c});
  c = FSTConfig{};
  c.zooms = {6};
  c.input_zoom = 3;
  CHECK_NOTHROW(c.validate());
  CHECK(c.block_dims().q_channels == 64);
}

TEST_CASE("init pyramid") {
  const FSTModel m(toy_config());
  const auto x = random_field(1, 2, 1);
  const auto p = m.init_pyramid(x);
  CHECK(p.zooms == std::vector<int>{1, 2, 3});
  CHECK(values(p.levels[0]) == values(x));
  CHECK(max_abs(p.levels[1].data()) == 0.0);
  CHECK(max_abs(p.levels[2].data()) == 0.0);
  CHECK(values(reconstruct(p)) == values(upsample(x, 3)));
  CHECK(values(coarsen(reconstruct(p), 1)) == values(x));
  CHECK(max_abs(reconstruct(m.init_pyramid(Tensor::zeros({1, 48, 1}))).data()) == 0.0);
  CHECK_THROWS((void)m.init_pyramid(random_field(2, 1, 2)));

  FSTConfig up = toy_config();
  up.zooms = {2, 3};
  up.input_zoom = 1;
  const auto pu = FSTModel(up).init_pyramid(x);
  CHECK(values(pu.levels[0]) == values(upsample(x, 2)));
}

TEST_CASE("fresh model is the upsampling operator") {
  for (const auto& cfg : {toy_config(), FSTConfig{}}) {
    const FSTModel m(cfg);
    const auto x = random_field(cfg.zooms.front(), 2, 3);
    const auto r = m.forward(x, true);
    CHECK(values(r.output) == values(upsample(x, cfg.zooms.back())));
    CHECK(max_abs_diff(coarsen(r.output, cfg.zooms.front()).data(), x.data()) < 1e-6);
    CHECK(r.snapshots.size() == cfg.layers);
    for (const auto& s : r.snapshots)
      for (std::size_t i = 1; i < s.size(); ++i) CHECK(max_abs(s.levels[i].data()) == 0.0);
  }
}

TEST_CASE("output pyramid is scale constrained regardless of the weights") {
  for (bool per_block : {false, true}) {
    FSTConfig c = toy_config();
    c.sc_per_block = per_block;
    FSTModel m(c);
    randomize_parameters(m, 0.3, 11);
    const auto r = m.forward(random_field(1, 2, 12), true);
    const auto& p = r.final_pyramid;
    CHECK(max_abs_parent_mean(p, 2, 1) < 1e-9);
    CHECK(max_abs_parent_mean(p, 3, 2) < 1e-9);
    CHECK(max_abs_diff(reconstruct(p).data(), r.output.data()) == 0.0);
    if (per_block) {
      for (const auto& s : r.snapshots) CHECK(max_abs_parent_mean(s, 3, 2) < 1e-9);
    } else {
      CHECK(max_abs_parent_mean(r.snapshots.back(), 3, 2) > 1e-6);
    }
    for (const auto& s : r.snapshots) validate_pyramid(s);
  }
}

TEST_CASE("determinism") {
  FSTModel a(toy_config()), b(toy_config());
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].first == pb[i].first);
    CHECK(values(pa[i].second) == values(pb[i].second));
  }
  randomize_parameters(a, 0.2, 3);
  randomize_parameters(b, 0.2, 3);
  const auto x = random_field(1, 1, 4);
  CHECK(values(a.forward(x).output) == values(b.forward(x).output));
  FSTConfig other = toy_config();
  other.seed = 6;
  CHECK(values(FSTModel(other).blocks()[0].w_q) != values(FSTModel(toy_config()).blocks()[0].w_q));
}

TEST_CASE("full model gradient check") {
  FSTModel m(toy_config());
  randomize_parameters(m, 0.25, 21);
  const auto x = random_field(1, 1, 22);
  const auto target = random_field(3, 1, 23);
  const auto rep = grad_check_params([&] { return mse(m.forward(x).output, target); }, m.named_parameters());
  CAPTURE(rep.worst_tensor);
  CHECK(rep.coordinates == m.parameter_count());
  CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("single zoom model equals a stack of reference layers") {
  FSTConfig c;
  c.zooms = {2};
  c.attn_zoom = 1;
  c.layers = 3;
  c.dim = 8;
  c.heads = 2;
  c.embed_dim = 5;
  for (std::uint64_t draw = 0; draw < 3; ++draw) {
    FSTModel m(c);
    randomize_parameters(m, 0.4, 30 + draw);
    const auto x = random_field(2, 2, 40 + draw);
    std::vector<double> ref = values(x);
    for (const auto& block : m.blocks()) ref = single_scale_reference_layer(ref, 2, 48, block, m.embedding());
    CHECK(max_abs_diff(m.forward(x).output.data(), ref) < 1e-12);
  }
}

TEST_CASE("reference layer basics") {
  FSTConfig c;
  c.zooms = {2};
  c.attn_zoom = 1;
  c.dim = 8;
  c.embed_dim = 3;
  FSTModel m(c);
  const auto x = values(random_field(2, 1, 50));
  CHECK(single_scale_reference_layer(x, 1, 48, m.blocks()[0], m.embedding()) == x);
  randomize_parameters(m, 0.5, 51);
  std::vector<std::vector<double>> attn;
  single_scale_reference_layer(x, 1, 48, m.blocks()[0], m.embedding(), &attn);
  REQUIRE_FALSE(attn.empty());
  for (const auto& a : attn) {
    REQUIRE(a.size() % 48 == 0);
    for (std::size_t r = 0; r < a.size() / 48; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 48; ++j) s += a[r * 48 + j];
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("zoom ablation configurations are constructible and trainable") {
  for (const auto& zooms : std::vector<std::vector<int>>{{3, 5, 6}, {3, 6}, {6}}) {
    FSTConfig c;
    c.zooms = zooms;
    c.input_zoom = 3;
    c.layers = 1;
    FSTModel m(c);
    CHECK(m.parameter_count() == param_count(c));
    const auto x = random_field(3, 1, 60);
    const auto y = random_field(6, 1, 61);
    const auto loss = mse(m.forward(x).output, y);
    backward(loss);
    double g = 0;
    for (const auto& [name, t] : m.named_parameters())
      if (t.has_grad()) g = std::max(g, max_abs(t.grad()));
    CHECK(g > 0.0);
    CHECK(std::isfinite(g));
  }
}
