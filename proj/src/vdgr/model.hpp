#pragma once

#include "vdgr/autograd.hpp"
#include "vdgr/fusion.hpp"
#include "vdgr/layout.hpp"
#include "vdgr/mmgnn.hpp"
#include "vdgr/params.hpp"
#include "vdgr/transformer.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace vdgr {

/// Architecture settings. Defaults follow the published hyper-parameters where
/// they exist; the toy configurations in data/ shrink the widths.
struct ModelConfig {
  int text_dim = 768;
  int image_dim = 1024;
  int region_dim = 2048;
  int vdgr_layers = 2;      // L
  int gnn_layers = 2;       // K
  int gnn_heads = 4;        // H
  int attention_heads = 8;  // transformer heads
  int text_ffn_dim = 3072;
  int image_ffn_dim = 4096;
  double lambda = 0.5;
  bool share_gnn = true;
  bool use_hub = true;
  bool use_gnn = true;
  bool co_attention = true;
  bool learned_edge_embedding = false;
  mmgnn::ImageHubSource image_hub_source = mmgnn::ImageHubSource::Gathered;
  int max_text_tokens = 256;
  int max_regions = 36;
  int num_candidates = 100;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

class VdGrModel {
public:
  VdGrModel(const ModelConfig& config, Vocabulary vocab);
  VdGrModel(const VdGrModel&) = delete;
  VdGrModel& operator=(const VdGrModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  /// Number of independent cascade parameter sets (1 when shared).
  std::size_t gnn_parameter_sets() const { return cascades_.size(); }

  struct Input {
    const TokenLayout* layout = nullptr;
    const ImageInput* image = nullptr;
    const graphcon::Graph* image_graph = nullptr;
    const graphcon::Graph* question_graph = nullptr;
    const graphcon::Graph* history_graph = nullptr;
    backbone::StreamMasks masks;
  };

  struct Output {
    ad::Var text;    // final text states
    ad::Var image;   // final image states
    ad::Var pooled;  // [IMG] (projected) * [CLS]
    ad::Var nsp_logit;
    /// Node representations from the last layer's cascade (invalid when the
    /// GNN path is disabled).
    ad::Var image_nodes, question_nodes, history_nodes;
    std::vector<mmgnn::AttentionTrace> traces;
  };

  Output forward(ad::Tape& tape, const Input& in, bool record_traces = false) const;

  ad::Var embed_text(ad::Tape& tape, const std::vector<int>& token_ids) const;
  ad::Var embed_image(ad::Tape& tape, const ImageInput& image) const;

  /// Log-probabilities over the vocabulary for the given text rows.
  ad::Var mlm_logprobs(ad::Var rows) const;
  /// Reconstructed region features for the given image rows.
  ad::Var mrm_predict(ad::Var rows) const;
  /// Relation-class logits for concatenated endpoint representations.
  ad::Var gem_logits(graphcon::Modality m, ad::Var endpoint_pairs) const;

private:
  ModelConfig config_;
  Vocabulary vocab_;
  ParameterSet params_;

  Parameter *tok_emb_, *pos_emb_;
  backbone::NormParams text_norm_, image_norm_;
  Parameter *region_w_, *region_b_, *geom_w_, *geom_b_;
  std::vector<backbone::DualStreamParams> layers_;
  std::vector<mmgnn::CascadeParams> cascades_;
  Parameter *pool_w_, *pool_b_, *nsp_w_, *nsp_b_;
  Parameter *mlm_w_, *mlm_b_, *mrm_w_, *mrm_b_;
  Parameter *gem_w_[3], *gem_b_[3];
};

double sigmoid(double z);

}  // namespace vdgr
