// SPDX-License-Identifier: Apache-2.0
#include "fst/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "binary_io.hpp"

namespace fst {

namespace {

constexpr char kMagic[4] = {'F', 'S', 'T', 'C'};
constexpr std::uint64_t kMaxConfigBytes = 1u << 20;
constexpr std::uint32_t kMaxNameBytes = 4096;
constexpr std::uint32_t kMaxRank = 8;

void write_string(std::ostream& out, const std::string& s) { out.write(s.data(), static_cast<std::streamsize>(s.size())); }

template <class T>
T read_or_throw(std::istream& in, const char* what) {
  T v{};
  if (!binio::read_le(in, v)) throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  return v;
}

std::string read_string(std::istream& in, std::size_t n, const char* what) {
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return s;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  binio::write_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string text = ckpt.config.to_text();
  binio::write_le<std::uint64_t>(out, text.size());
  write_string(out, text);
  binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    write_string(out, name);
    binio::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) binio::write_le<std::uint64_t>(out, d);
    for (double v : t.data()) binio::write_le<double>(out, v);
  }
  if (!out) throw CheckpointError("write failed for " + path);
}

namespace {

// Rejects dims whose payload would run past the end of the file, before allocating.
void check_payload(std::istream& in, const Shape& shape, const std::string& name) {
  const auto here = in.tellg();
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (here < 0 || end < 0) throw CheckpointError("cannot size checkpoint payload");
  std::uint64_t left = static_cast<std::uint64_t>(end - here) / sizeof(double);
  for (const auto d : shape) {
    if (d == 0) return;
    if (d > left) throw CheckpointError("checkpoint truncated while reading " + name);
    left /= d;
  }
}

}  // namespace

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  const std::string magic = read_string(in, 4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw CheckpointError("bad checkpoint magic in " + path);
  const auto version = read_or_throw<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto text_len = read_or_throw<std::uint64_t>(in, "config length");
  if (text_len > kMaxConfigBytes) throw CheckpointError("checkpoint config block too large");
  Checkpoint ckpt;
  ckpt.config = KeyValues::parse(read_string(in, text_len, "config"));
  const auto count = read_or_throw<std::uint32_t>(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_or_throw<std::uint32_t>(in, "name length");
    if (name_len > kMaxNameBytes) throw CheckpointError("tensor name too long");
    std::string name = read_string(in, name_len, "tensor name");
    const auto rank = read_or_throw<std::uint32_t>(in, "rank");
    if (rank > kMaxRank) throw CheckpointError("tensor rank too large for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = read_or_throw<std::uint64_t>(in, "dims");
    check_payload(in, shape, name);
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = read_or_throw<double>(in, "tensor values");
    ckpt.tensors.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(values)));
  }
  return ckpt;
}

void store_model_config(const FSTConfig& cfg, KeyValues& kv) {
  kv.set("model.zooms", format_int_list(cfg.zooms));
  kv.set("model.attn_zoom", std::to_string(cfg.attn_zoom));
  kv.set("model.input_zoom", std::to_string(cfg.input_zoom));
  kv.set("model.layers", std::to_string(cfg.layers));
  kv.set("model.dim", std::to_string(cfg.dim));
  kv.set("model.heads", std::to_string(cfg.heads));
  kv.set("model.mlp_ratio", std::to_string(cfg.mlp_ratio));
  kv.set("model.embed_dim", std::to_string(cfg.embed_dim));
  kv.set("model.sc_per_block", cfg.sc_per_block ? "true" : "false");
  kv.set("model.seed", std::to_string(cfg.seed));
}

FSTConfig load_model_config(const KeyValues& kv, FSTConfig base) {
  base.zooms = kv.get_int_list("model.zooms", base.zooms);
  base.attn_zoom = static_cast<int>(kv.get_int("model.attn_zoom", base.attn_zoom));
  base.input_zoom = static_cast<int>(kv.get_int("model.input_zoom", base.input_zoom));
  base.layers = static_cast<std::size_t>(kv.get_int("model.layers", static_cast<long long>(base.layers)));
  base.dim = static_cast<std::size_t>(kv.get_int("model.dim", static_cast<long long>(base.dim)));
  base.heads = static_cast<std::size_t>(kv.get_int("model.heads", static_cast<long long>(base.heads)));
  base.mlp_ratio =
      static_cast<std::size_t>(kv.get_int("model.mlp_ratio", static_cast<long long>(base.mlp_ratio)));
  base.embed_dim =
      static_cast<std::size_t>(kv.get_int("model.embed_dim", static_cast<long long>(base.embed_dim)));
  base.sc_per_block = kv.get_bool("model.sc_per_block", base.sc_per_block);
  base.seed = kv.get_u64("model.seed", base.seed);
  return base;
}

void save_model(const std::string& path, const FSTModel& model, KeyValues extra) {
  store_model_config(model.config(), extra);
  write_checkpoint(path, {std::move(extra), model.named_parameters()});
}

FSTModel load_model(const std::string& path, KeyValues* config_out) {
  Checkpoint ckpt = read_checkpoint(path);
  FSTModel model(load_model_config(ckpt.config));
  auto params = model.named_parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, dst] = params[i];
    const auto& [src_name, src] = ckpt.tensors[i];
    if (name != src_name || dst.shape() != src.shape()) {
      throw CheckpointError("checkpoint tensor " + src_name + " " + shape_string(src.shape()) +
                            " does not match model tensor " + name + " " + shape_string(dst.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
  if (config_out != nullptr) *config_out = std::move(ckpt.config);
  return model;
}

}  // namespace fst
