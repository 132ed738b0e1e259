// SPDX-License-Identifier: Apache-2.0
#include "fst/inspect.hpp"

#include <filesystem>

#include "fst/field_file.hpp"
#include "fst/multiscale.hpp"

namespace fst {

LayerTrace trace_layers(const FSTModel& model, const SRPair& sample, const Normalizer& norm) {
  LayerTrace trace;
  auto r = model.forward(norm.to_model(sample.lo.to_tensor()), true);
  trace.layers = std::move(r.snapshots);
  trace.final = std::move(r.final_pyramid);
  trace.truth = decompose(norm.to_model(sample.hi.to_tensor()), model.config().zooms);
  return trace;
}

namespace {

HealpixField residual_in_kelvin(const Tensor& level, const Normalizer& norm) {
  HealpixField f = HealpixField::from_tensor(level.detach());
  for (auto& v : f.values) v *= norm.scale;
  return f;
}

}  // namespace

std::vector<std::string> inspect_layers(const FSTModel& model, const SRPair& sample, const Normalizer& norm,
                                        const std::string& out_dir) {
  const LayerTrace trace = trace_layers(model, sample, norm);
  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  const auto& zooms = model.config().zooms;
  auto emit = [&](const std::string& stem, const FieldPyramid& p) {
    for (std::size_t i = 1; i < zooms.size(); ++i) {
      const auto path = (dir / (stem + "_r" + std::to_string(zooms[i]) + ".fsf")).string();
      write_field(path, residual_in_kelvin(p.levels[i], norm));
      written.push_back(path);
    }
  };
  for (std::size_t l = 0; l < trace.layers.size(); ++l) emit("layer" + std::to_string(l), trace.layers[l]);
  if (model.config().sc_per_block) emit("final", trace.final);
  emit("truth", trace.truth);
  return written;
}

}  // namespace fst
