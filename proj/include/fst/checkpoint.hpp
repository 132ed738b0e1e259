// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fst/config.hpp"
#include "fst/model.hpp"
#include "fst/tensor.hpp"

namespace fst {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  KeyValues config;
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

/// Model settings live under the "model" section.
void store_model_config(const FSTConfig& cfg, KeyValues& kv);
FSTConfig load_model_config(const KeyValues& kv, FSTConfig base = {});

/// Serializes the model config merged into `extra` plus every parameter.
void save_model(const std::string& path, const FSTModel& model, KeyValues extra = {});
/// Rebuilds the model from its stored config and copies the stored values in.
FSTModel load_model(const std::string& path, KeyValues* config_out = nullptr);

}  // namespace fst
