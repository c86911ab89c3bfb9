#include "vdgr/mmgnn.hpp"

#include "vdgr/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vdgr::mmgnn {

ModalityGnnParams make_modality_params(ParameterSet& store, const std::string& prefix, Modality m, int node_dim,
                                       int heads, int layers, bool learned_edge_embedding, Rng& rng) {
  require(heads >= 1 && node_dim % heads == 0, "GNN heads must divide the node dimension");
  require(layers >= 1, "GNN needs at least one layer");
  ModalityGnnParams p;
  p.modality = m;
  p.node_dim = node_dim;
  p.edge_dim = graphcon::hub_type(m);
  p.heads = heads;
  const int hd = node_dim / heads;
  if (learned_edge_embedding)
    p.edge_table = &store.weight(prefix + ".edge_table", ParamGroup::Gnn, p.edge_dim, p.edge_dim, rng);
  for (int k = 0; k < layers; ++k) {
    const std::string lp = prefix + ".k" + std::to_string(k + 1);
    GnnLayerParams lay;
    lay.msg_w = &store.weight(lp + ".msg_w", ParamGroup::Gnn, node_dim + p.edge_dim, node_dim, rng);
    lay.msg_b = &store.zeros(lp + ".msg_b", ParamGroup::Gnn, 1, node_dim);
    for (int h = 0; h < heads; ++h) {
      const std::string hp = lp + ".h" + std::to_string(h + 1);
      lay.attn_w.push_back(&store.weight(hp + ".attn_w", ParamGroup::Gnn, node_dim + hd, hd, rng));
      lay.attn_a.push_back(&store.weight(hp + ".attn_a", ParamGroup::Gnn, hd, 1, rng));
      lay.out_w.push_back(&store.weight(hp + ".out_w", ParamGroup::Gnn, hd, hd, rng));
    }
    p.layers.push_back(std::move(lay));
  }
  return p;
}

HubScorer make_hub_scorer(ParameterSet& store, const std::string& prefix, int node_dim, Rng& rng) {
  HubScorer s;
  s.w1 = &store.weight(prefix + ".w1", ParamGroup::Gnn, node_dim, node_dim, rng);
  s.b1 = &store.zeros(prefix + ".b1", ParamGroup::Gnn, 1, node_dim);
  s.w2 = &store.weight(prefix + ".w2", ParamGroup::Gnn, node_dim, 1, rng);
  s.b2 = &store.zeros(prefix + ".b2", ParamGroup::Gnn, 1, 1);
  return s;
}

CascadeParams make_cascade_params(ParameterSet& store, const std::string& prefix, const GnnShape& shape, Rng& rng) {
  CascadeParams c;
  c.image = make_modality_params(store, prefix + ".image", Modality::Image, shape.image_dim, shape.heads, shape.layers,
                                 shape.learned_edge_embedding, rng);
  c.question = make_modality_params(store, prefix + ".question", Modality::Question, shape.text_dim, shape.heads,
                                    shape.layers, shape.learned_edge_embedding, rng);
  c.history = make_modality_params(store, prefix + ".history", Modality::History, shape.text_dim, shape.heads,
                                   shape.layers, shape.learned_edge_embedding, rng);
  c.hub_image = make_hub_scorer(store, prefix + ".hub_image", shape.image_dim, rng);
  c.hub_question = make_hub_scorer(store, prefix + ".hub_question", shape.text_dim, rng);
  c.hub_history = make_hub_scorer(store, prefix + ".hub_history", shape.text_dim, rng);
  c.proj_image_to_history_w = &store.weight(prefix + ".proj_i2h_w", ParamGroup::Gnn, shape.image_dim, shape.text_dim, rng);
  c.proj_image_to_history_b = &store.zeros(prefix + ".proj_i2h_b", ParamGroup::Gnn, 1, shape.text_dim);
  c.proj_question_to_image_w = &store.weight(prefix + ".proj_q2i_w", ParamGroup::Gnn, shape.text_dim, shape.image_dim, rng);
  c.proj_question_to_image_b = &store.zeros(prefix + ".proj_q2i_b", ParamGroup::Gnn, 1, shape.image_dim);
  return c;
}

// ---------------------------------------------------------------------------

Var compute_hub(Var feats, const HubScorer& scorer) {
  require(feats.rows() >= 1, "hub needs at least one node");
  Tape& t = *feats.tape();
  Var hidden = ad::gelu(ad::linear(feats, t.param(*scorer.w1), t.param(*scorer.b1)));
  Var logits = ad::linear(hidden, t.param(*scorer.w2), t.param(*scorer.b2));  // n x 1
  Var alpha = ad::softmax_rows(ad::transpose(logits));                         // 1 x n
  return ad::matmul(alpha, feats);
}

namespace {

Matrix one_hot_edges(const Graph& g, int edge_dim) {
  Matrix e = Matrix::Zero(static_cast<Eigen::Index>(g.edges.size()), edge_dim);
  for (std::size_t i = 0; i < g.edges.size(); ++i) e(static_cast<Eigen::Index>(i), g.edges[i].type - 1) = 1.0;
  return e;
}

}  // namespace

Var gnn_layer_forward(const Graph& graph, Var feats, const ModalityGnnParams& params, int k, LayerAttention* attention) {
  require(k >= 1 && k <= static_cast<int>(params.layers.size()), "GNN layer index out of range");
  require(feats.rows() == graph.total_nodes(), "node feature rows do not match the graph");
  require(feats.cols() == params.node_dim, "node feature width does not match the GNN");
  Tape& t = *feats.tape();
  const GnnLayerParams& lp = params.layers[static_cast<std::size_t>(k - 1)];
  const int n = graph.total_nodes();
  const int hd = params.head_dim();

  if (attention != nullptr) attention->per_head.assign(static_cast<std::size_t>(params.heads), {});
  if (graph.edges.empty()) {
    // Every neighbourhood is empty, so the aggregated message is zero.
    return ad::gelu(feats);
  }

  std::vector<int> src, dst, types;
  src.reserve(graph.edges.size());
  dst.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    src.push_back(e.src);
    dst.push_back(e.dst);
    types.push_back(e.type - 1);
  }

  Var edge_feats = params.edge_table != nullptr ? ad::gather_rows(t.param(*params.edge_table), types)
                                                 : t.constant(one_hot_edges(graph, params.edge_dim));
  Var src_feats = ad::gather_rows(feats, src);
  Var dst_feats = ad::gather_rows(feats, dst);
  const Var msg_in[] = {src_feats, edge_feats};
  Var messages = ad::linear(ad::concat_cols(msg_in), t.param(*lp.msg_w), t.param(*lp.msg_b));  // E x d

  std::vector<Var> head_out;
  head_out.reserve(static_cast<std::size_t>(params.heads));
  for (int h = 0; h < params.heads; ++h) {
    const auto hs = static_cast<std::size_t>(h);
    Var m_h = ad::slice_cols(messages, h * hd, hd);
    const Var z_parts[] = {dst_feats, m_h};
    Var z = ad::leaky_relu(ad::matmul(ad::concat_cols(z_parts), t.param(*lp.attn_w[hs])), kAttentionSlope);
    Var logits = ad::matmul(z, t.param(*lp.attn_a[hs]));  // E x 1
    Var alpha = ad::segment_softmax(logits, dst, n);
    if (attention != nullptr) {
      const Matrix& a = alpha.value();
      attention->per_head[hs].assign(a.data(), a.data() + a.size());
    }
    Var agg = ad::segment_sum(ad::mul_col(m_h, alpha), dst, n);  // n x hd
    head_out.push_back(ad::matmul(agg, t.param(*lp.out_w[hs])));
  }
  return ad::gelu(ad::add(ad::concat_cols(head_out), feats));
}

Var gnn_block_forward(const Graph& graph, Var feats, const ModalityGnnParams& params, int layers,
                      std::vector<LayerAttention>* attention) {
  require(layers >= 1, "GNN block needs K >= 1");
  require(layers <= static_cast<int>(params.layers.size()), "GNN block has fewer parameter layers than K");
  if (attention != nullptr) attention->assign(static_cast<std::size_t>(layers), {});
  Var x = feats;
  for (int k = 1; k <= layers; ++k)
    x = gnn_layer_forward(graph, x, params, k, attention != nullptr ? &(*attention)[static_cast<std::size_t>(k - 1)] : nullptr);
  return x;
}

AttentionTrace summarize_attention(const Graph& graph, const LayerAttention& attention, int layer, int gnn_layer) {
  AttentionTrace tr{graph.modality, layer, gnn_layer, {}};
  const std::size_t heads = attention.per_head.size();
  if (heads == 0 || graph.edges.empty()) return tr;
  std::vector<double> avg(graph.edges.size(), 0.0);
  for (const auto& h : attention.per_head)
    for (std::size_t e = 0; e < avg.size(); ++e) avg[e] += h[e] / static_cast<double>(heads);
  // Softmax of the averaged weights over each target's incoming edges.
  const auto n = static_cast<std::size_t>(graph.total_nodes());
  std::vector<double> mx(n, -std::numeric_limits<double>::infinity()), denom(n, 0.0);
  for (std::size_t e = 0; e < avg.size(); ++e) {
    const auto d = static_cast<std::size_t>(graph.edges[e].dst);
    mx[d] = std::max(mx[d], avg[e]);
  }
  std::vector<double> w(avg.size());
  for (std::size_t e = 0; e < avg.size(); ++e) {
    const auto d = static_cast<std::size_t>(graph.edges[e].dst);
    w[e] = std::exp(avg[e] - mx[d]);
    denom[d] += w[e];
  }
  for (std::size_t e = 0; e < avg.size(); ++e) {
    const auto& edge = graph.edges[e];
    tr.edges.emplace_back(edge.src, edge.dst, w[e] / denom[static_cast<std::size_t>(edge.dst)]);
  }
  return tr;
}

// ---------------------------------------------------------------------------

namespace {

Var run_block(const Graph& graph, Var nodes, std::optional<Var> hub, const ModalityGnnParams& params,
              const CascadeOptions& opts, std::vector<AttentionTrace>* traces) {
  const Graph* g = &graph;
  Graph no_hub;
  Var input = nodes;
  if (opts.use_hub) {
    require(graph.hub_present, "cascade: " + graphcon::modality_name(graph.modality) + " graph has no hub slot");
    require(hub.has_value(), "cascade: missing hub features");
    const Var parts[] = {nodes, *hub};
    input = ad::concat_rows(parts);
  } else {
    // A zero hub with all hub edges dropped is isolated and its output row is
    // discarded, so dropping the hub entirely is the same computation.
    no_hub = graphcon::without_hub(graph);
    g = &no_hub;
  }
  require(nodes.rows() == g->num_nodes, "cascade: node count mismatch for " + graphcon::modality_name(graph.modality));
  std::vector<LayerAttention> att;
  Var out = gnn_block_forward(*g, input, params, opts.layers, traces != nullptr ? &att : nullptr);
  if (traces != nullptr)
    for (int k = 1; k <= opts.layers; ++k)
      traces->push_back(summarize_attention(*g, att[static_cast<std::size_t>(k - 1)], opts.vdgr_layer, k));
  return ad::slice_rows(out, 0, g->num_nodes);
}

}  // namespace

CascadeOutputs cascade_forward(const CascadeInputs& in, const Graph& image_graph, const Graph& question_graph,
                               const Graph& history_graph, const CascadeParams& params, const CascadeOptions& opts) {
  require(image_graph.modality == Modality::Image && question_graph.modality == Modality::Question &&
              history_graph.modality == Modality::History,
          "cascade: graphs passed in the wrong order");
  Tape& t = *in.image.tape();
  CascadeOutputs out;
  auto* traces = opts.record_traces ? &out.traces : nullptr;

  std::optional<Var> hist_hub, q_hub, img_hub;
  if (opts.use_hub) {
    Var src = in.image;
    if (opts.image_hub_source == ImageHubSource::PreviousOutput && in.previous_image_output.valid())
      src = in.previous_image_output;
    out.image_hub = compute_hub(src, params.hub_image);
    hist_hub = ad::linear(out.image_hub, t.param(*params.proj_image_to_history_w), t.param(*params.proj_image_to_history_b));
  }
  out.history = run_block(history_graph, in.history, hist_hub, params.history, opts, traces);

  if (opts.use_hub) {
    out.history_hub = compute_hub(out.history, params.hub_history);
    q_hub = out.history_hub;
  }
  out.question = run_block(question_graph, in.question, q_hub, params.question, opts, traces);

  if (opts.use_hub) {
    out.question_hub = compute_hub(out.question, params.hub_question);
    img_hub = ad::linear(out.question_hub, t.param(*params.proj_question_to_image_w),
                         t.param(*params.proj_question_to_image_b));
  }
  out.image = run_block(image_graph, in.image, img_hub, params.image, opts, traces);
  return out;
}

}  // namespace vdgr::mmgnn
