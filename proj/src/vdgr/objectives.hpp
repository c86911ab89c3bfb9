#pragma once

// Mask planning and the loss heads: masked language / region modelling, next
// sentence prediction, graph edge masking, the stage totals and the dense
// ranking losses.

#include "vdgr/autograd.hpp"
#include "vdgr/dialog.hpp"
#include "vdgr/layout.hpp"
#include "vdgr/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace vdgr::objectives {

using ad::Var;
using graphcon::Graph;
using graphcon::Modality;

struct MaskRates {
  double text = 0.1;
  double region = 0.1;
  double edge = 0.15;
};

struct MaskedEdge {
  int src = 0;
  int dst = 0;
  int type = 0;
  bool operator==(const MaskedEdge&) const = default;
};

struct MaskPlan {
  std::uint64_t seed = 0;
  std::vector<int> text_positions;  // ascending
  std::vector<int> text_targets;    // original token ids at those positions
  std::vector<int> region_nodes;    // 0-based region indices (image slot = node + 1)
  std::array<std::vector<MaskedEdge>, 3> edges;  // indexed by Modality

  bool empty() const;
  bool operator==(const MaskPlan&) const = default;
};

/// Bernoulli masking. Text positions exclude [CLS]/[SEP]; regions exclude the
/// [IMG] slot; an edge is eligible only when it is not a hub edge and neither
/// endpoint is masked.
MaskPlan plan_masks(const TokenLayout& layout, const Graph& image_graph, const Graph& question_graph,
                    const Graph& history_graph, const MaskRates& rates, std::uint64_t seed);

/// Number of edges that were eligible for masking under `plan`'s node masks.
std::size_t eligible_edge_count(const Graph& g, const MaskPlan& plan, const TokenLayout& layout);

bool node_masked(Modality m, int node, const MaskPlan& plan, const TokenLayout& layout);

nlohmann::json to_json(const MaskPlan& plan);
MaskPlan mask_plan_from_json(const nlohmann::json& j);

/// Model inputs with the plan applied: [MASK] tokens, zeroed regions (the
/// [IMG] slot is re-pooled from the masked regions) and graphs without the
/// masked edges or their reverses.
struct MaskedInputs {
  TokenLayout layout;
  ImageInput image;
  Graph image_graph, question_graph, history_graph;
};

MaskedInputs apply_masks(const TokenLayout& layout, const ImageInput& image, const Graph& image_graph,
                         const Graph& question_graph, const Graph& history_graph, const MaskPlan& plan);

// ---- loss heads ----

/// Mean negative log-likelihood of `targets` under row-wise log-probabilities.
Var mlm_loss(Var logprobs, std::span<const int> targets);
/// Mean squared error between predicted and original region features.
Var mrm_loss(Var predicted, const ad::Matrix& original);
Var nsp_loss(Var logit, int label);
double nsp_score(double logit);

/// Cross-entropy of the relation-type logits (one row per masked edge) against
/// 1-based relation ids.
Var gem_modality_loss(Var logits, std::span<const MaskedEdge> edges);

struct GemLosses {
  Var image, question, history;
};

/// GEM losses from node representations; throws if a masked edge touches a
/// masked node.
GemLosses gem_loss(const VdGrModel& model, Var image_nodes, Var question_nodes, Var history_nodes,
                   const MaskPlan& plan, const TokenLayout& layout);

struct LossWeights {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
};

struct LossComponents {
  Var mlm, mrm, nsp, gem_image, gem_question, gem_history;
};

/// alpha1 (mlm + mrm) + alpha2 (gem_image + gem_question + gem_history).
Var warmup_loss(const LossComponents& c, const LossWeights& w);
/// mlm + mrm + nsp.
Var vd_loss(const LossComponents& c);

double warmup_loss(double mlm, double mrm, std::array<double, 3> gem, const LossWeights& w);
double vd_loss(double mlm, double mrm, double nsp);

/// -sum r_i log softmax(s)_i with r normalised to sum 1. `scores` is 1 x N.
/// Throws Error(Skipped) when the relevance is all zero.
Var ce_dense_loss(Var scores, std::span<const double> relevance);
/// ListNet top-one cross-entropy: -sum softmax(r)_i log softmax(s)_i.
Var listnet_loss(Var scores, std::span<const double> relevance);

// ---- one training sample ----

enum class Stage { Warmup, Sparse, Dense };

Stage parse_stage(const std::string& name);
std::string stage_name(Stage s);

struct SampleSpec {
  const DialogInstance* instance = nullptr;
  int round = 1;       // 1-based
  int candidate = 0;   // index into the round's candidates
  int label = 1;       // NSP label
  MaskRates rates;
  std::uint64_t mask_seed = 0;
  bool with_nsp = true;
  bool with_gem = true;
};

struct SampleResult {
  LossComponents losses;
  MaskPlan plan;
};

/// Runs the masked forward pass for one (dialog, round, candidate) and builds
/// every loss component. Components a stage does not use are still defined
/// (as constant zero) so callers can log them.
SampleResult sample_losses(const VdGrModel& model, ad::Tape& tape, const SampleSpec& spec);

}  // namespace vdgr::objectives
