#pragma once

// Run configuration: a flat key=value file covering the model, the training
// stage and the data locations.

#include "vdgr/model.hpp"
#include "vdgr/objectives.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <string>

namespace vdgr {

enum class DenseLoss { CrossEntropy, ListNet };

struct StageConfig {
  objectives::Stage stage = objectives::Stage::Sparse;
  int epochs = 20;
  int batch_size = 64;  // samples per step; rounds per step in the dense stage
  double backbone_lr_min = 0.0;
  double backbone_lr_max = 5e-6;
  double gnn_lr_min = 0.0;
  double gnn_lr_max = 5e-4;
  bool backbone_lr_warmup = true;
  bool gnn_lr_warmup = true;
  double warmup_fraction = 0.1;
  bool toy_lr_scale = false;  // multiplies every rate by 10
  int max_steps = 0;          // 0 = run every epoch
  std::uint64_t seed = 0;
  objectives::MaskRates rates;
  objectives::LossWeights weights;
  double negative_probability = 0.5;
  DenseLoss dense_loss = DenseLoss::CrossEntropy;

  /// Defaults for one stage at paper scale.
  static StageConfig defaults(objectives::Stage stage);
  void validate() const;
};

struct DataConfig {
  std::string data_dir = ".";
  std::string train_split = "train";
  std::string output_dir;  // empty = cache directory
};

struct RunConfig {
  ModelConfig model;
  StageConfig stage;
  DataConfig data;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys are errors.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Stage defaults first, then the file (or map) overrides.
RunConfig load_run_config(const std::string& path, objectives::Stage stage);
RunConfig run_config_from_map(const std::map<std::string, std::string>& kv, objectives::Stage stage);
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_setting(const RunConfig& cfg, const std::string& key);
std::string render_run_config(const RunConfig& cfg);

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Stable 64-bit hash of the architecture (everything except the init seed),
/// printed as 16 hex digits.
std::string config_hash(const ModelConfig& c);

/// VDGR_CACHE_DIR if set, otherwise ./vdgr_cache.
std::string cache_dir();
std::string output_dir(const DataConfig& d);

std::string dense_loss_name(DenseLoss l);

}  // namespace vdgr
