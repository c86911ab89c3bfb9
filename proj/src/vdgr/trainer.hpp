#pragma once

// Training stages, candidate scoring, evaluation, ensembles and ablations.

#include "vdgr/config.hpp"
#include "vdgr/dialog.hpp"
#include "vdgr/model.hpp"
#include "vdgr/ranking.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace vdgr {

struct TrainLogRow {
  int step = 0;
  double lr_backbone = 0, lr_gnn = 0;
  double mlm = 0, mrm = 0, nsp = 0, gem_image = 0, gem_question = 0, gem_history = 0, dense = 0;
  double total = 0;
  int samples = 0;
};

struct TrainResult {
  int steps = 0;
  int skipped_rounds = 0;  // dense rounds with all-zero relevance
  std::vector<TrainLogRow> log;
  std::string rng_state;
};

struct NspPair {
  int candidate = 0;
  int label = 1;
};

/// Sparse-stage training pair: with probability `negative_probability` a
/// uniformly drawn wrong candidate (label 0), otherwise the ground truth.
NspPair draw_nsp_pair(Rng& rng, int gt_index, int num_candidates, double negative_probability);

/// Runs one stage in place. `dump_dir` receives the batch and mask plans if a
/// loss turns non-finite (the run then aborts with ErrorCode::Numeric).
TrainResult train_stage(VdGrModel& model, const std::vector<DialogInstance>& data, const StageConfig& stage,
                        const std::string& dump_dir = "");

std::string loss_log_csv(const TrainResult& r);
std::string schedule_csv(const TrainResult& r);

/// Per-group learning rate at `step` for a run of `total_steps`.
std::pair<double, double> stage_rates(const StageConfig& stage, int step, int total_steps);

/// NSP probability of every candidate of `round` (1-based), one forward each.
std::vector<double> score_candidates(const VdGrModel& model, const DialogInstance& inst, int round);

struct EvalOptions {
  bool dump_attention = false;
};

struct EvalResult {
  std::vector<ranking::RoundResult> rounds;
  nlohmann::json report;
  std::vector<nlohmann::json> attention;  // one record per (dialog, round, modality, layer)
};

EvalResult evaluate(const VdGrModel& model, const std::vector<DialogInstance>& data, const EvalOptions& opts = {});
EvalResult evaluate_ensemble(const std::vector<const VdGrModel*>& models, const std::vector<DialogInstance>& data);

/// Throws ErrorCode::ConfigMismatch (quoting both hashes) unless the
/// architectures agree.
void check_config_compatible(const ModelConfig& requested, const ModelConfig& checkpoint);

struct PipelineConfig {
  ModelConfig model;
  StageConfig warmup = StageConfig::defaults(objectives::Stage::Warmup);
  StageConfig sparse = StageConfig::defaults(objectives::Stage::Sparse);
  bool with_warmup = true;
};

PipelineConfig load_pipeline_config(const std::string& path);

struct PipelineResult {
  std::unique_ptr<VdGrModel> model;
  ranking::Metrics train_metrics;
};

/// Fresh model, optional warm-up stage, sparse stage, evaluation on `data`.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::vector<DialogInstance>& data);

/// Applies one named ablation to a pipeline configuration.
PipelineConfig ablated(const PipelineConfig& base, const std::string& name);

/// Trains the full and the ablated pipeline for every seed (seed drives both
/// the initialisation and the stage RNGs) and compares training metrics.
nlohmann::json run_ablation(const std::string& name, const PipelineConfig& base, const std::vector<DialogInstance>& data,
                            const std::vector<std::uint64_t>& seeds);

/// Side-by-side text table of a run_ablation report.
std::string ablation_table(const nlohmann::json& report);

}  // namespace vdgr
