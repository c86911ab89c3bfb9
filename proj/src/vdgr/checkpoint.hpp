#pragma once

// Binary checkpoints: "VDGRCKPT", a little-endian u32 version and u64 header
// length, a JSON header (config, vocabulary, RNG state, tensor shapes), then
// every tensor as raw little-endian doubles in header order.

#include "vdgr/model.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace vdgr {

struct Checkpoint {
  struct Tensor {
    std::string name;
    ParamGroup group = ParamGroup::Backbone;
    Matrix value;
    bool operator==(const Tensor&) const = default;
  };

  ModelConfig config;
  std::vector<std::string> vocab;
  std::string rng_state;
  std::string stage;  // last stage trained, empty for a fresh model
  std::int64_t step = 0;
  std::vector<Tensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint snapshot(const VdGrModel& model, const std::string& rng_state = "", const std::string& stage = "",
                    std::int64_t step = 0);

/// Builds the model described by the checkpoint and copies its tensors in.
std::unique_ptr<VdGrModel> restore_model(const Checkpoint& ckpt);

/// Copies tensors into an existing model with the same parameter layout.
void load_parameters(VdGrModel& model, const Checkpoint& ckpt);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vdgr
