#pragma once

// Edge-conditioned multi-head graph attention, attention-pooled hub
// embeddings and the image -> history -> question -> image cascade.

#include "vdgr/autograd.hpp"
#include "vdgr/graphcon.hpp"
#include "vdgr/params.hpp"

#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace vdgr::mmgnn {

using ad::Tape;
using ad::Var;
using graphcon::Graph;
using graphcon::Modality;

inline constexpr double kAttentionSlope = 0.2;

/// Parameters of one graph-attention layer of one modality.
struct GnnLayerParams {
  Parameter* msg_w = nullptr;  // (node_dim + edge_dim) x node_dim, head h owns column block h
  Parameter* msg_b = nullptr;  // 1 x node_dim
  std::vector<Parameter*> attn_w;  // per head: (node_dim + head_dim) x head_dim
  std::vector<Parameter*> attn_a;  // per head: head_dim x 1
  std::vector<Parameter*> out_w;   // per head: head_dim x head_dim (f, no bias)
};

struct ModalityGnnParams {
  Modality modality = Modality::Image;
  int node_dim = 0;
  int edge_dim = 0;
  int heads = 1;
  Parameter* edge_table = nullptr;  // set only with learned edge embeddings
  std::vector<GnnLayerParams> layers;

  int head_dim() const { return node_dim / heads; }
};

/// Scores each node with a two-layer perceptron; softmax of the scores weights
/// the pooled hub vector.
struct HubScorer {
  Parameter* w1 = nullptr;
  Parameter* b1 = nullptr;
  Parameter* w2 = nullptr;
  Parameter* b2 = nullptr;
};

struct CascadeParams {
  ModalityGnnParams image, question, history;
  HubScorer hub_image, hub_question, hub_history;
  Parameter* proj_image_to_history_w = nullptr;  // image_dim x text_dim
  Parameter* proj_image_to_history_b = nullptr;
  Parameter* proj_question_to_image_w = nullptr;  // text_dim x image_dim
  Parameter* proj_question_to_image_b = nullptr;
};

struct GnnShape {
  int image_dim = 0;
  int text_dim = 0;
  int heads = 4;
  int layers = 2;  // K
  bool learned_edge_embedding = false;
};

/// Registers one full cascade parameter set under `prefix`.
CascadeParams make_cascade_params(ParameterSet& store, const std::string& prefix, const GnnShape& shape, Rng& rng);

ModalityGnnParams make_modality_params(ParameterSet& store, const std::string& prefix, Modality m, int node_dim,
                                       int heads, int layers, bool learned_edge_embedding, Rng& rng);
HubScorer make_hub_scorer(ParameterSet& store, const std::string& prefix, int node_dim, Rng& rng);

/// Head-averaged, per-node re-normalised attention weights of one GNN layer.
struct AttentionTrace {
  Modality modality = Modality::Image;
  int layer = 0;      // backbone layer, 1-based
  int gnn_layer = 0;  // k, 1-based
  std::vector<std::tuple<int, int, double>> edges;
};

/// Raw per-head attention of one layer, kept for tests and trace export.
struct LayerAttention {
  std::vector<std::vector<double>> per_head;  // [head][edge]
};

/// Attention-weighted pooling of `feats` (no hub row). Returns 1 x node_dim.
Var compute_hub(Var feats, const HubScorer& scorer);

/// One edge-conditioned attention layer. `feats` has graph.total_nodes() rows.
Var gnn_layer_forward(const Graph& graph, Var feats, const ModalityGnnParams& params, int k,
                      LayerAttention* attention = nullptr);

/// K stacked layers.
Var gnn_block_forward(const Graph& graph, Var feats, const ModalityGnnParams& params, int layers,
                      std::vector<LayerAttention>* attention = nullptr);

/// Which image features feed the image hub of a layer.
enum class ImageHubSource {
  Gathered,        // this layer's gathered (pre-block) image node features
  PreviousOutput,  // previous layer's image block output (gathered for l = 1)
};

struct CascadeOptions {
  bool use_hub = true;
  int layers = 2;  // K
  ImageHubSource image_hub_source = ImageHubSource::Gathered;
  int vdgr_layer = 1;  // only used to label traces
  bool record_traces = false;
};

struct CascadeInputs {
  Var image;     // N_i x image_dim (no hub row)
  Var question;  // N_q x text_dim
  Var history;   // t x text_dim
  Var previous_image_output;  // optional, see ImageHubSource
};

struct CascadeOutputs {
  Var image, question, history;  // non-hub rows only
  Var image_hub, history_hub, question_hub;
  std::vector<AttentionTrace> traces;
};

CascadeOutputs cascade_forward(const CascadeInputs& in, const Graph& image_graph, const Graph& question_graph,
                               const Graph& history_graph, const CascadeParams& params, const CascadeOptions& opts);

/// Average over heads then softmax per target node, as exported for inspection.
AttentionTrace summarize_attention(const Graph& graph, const LayerAttention& attention, int layer, int gnn_layer);

}  // namespace vdgr::mmgnn
