#include "vdgr/model.hpp"

#include "vdgr/error.hpp"

#include <cmath>
#include <numeric>

namespace vdgr {

using ad::Var;
using graphcon::Modality;

void ModelConfig::validate() const {
  require(text_dim > 0 && image_dim > 0 && region_dim > 0, "model widths must be positive");
  require(vdgr_layers >= 1, "need at least one layer");
  require(gnn_layers >= 1, "need at least one GNN layer (K >= 1)");
  require(gnn_heads >= 1 && text_dim % gnn_heads == 0 && image_dim % gnn_heads == 0,
          "GNN heads must divide both node widths");
  require(attention_heads >= 1 && text_dim % attention_heads == 0 && image_dim % attention_heads == 0,
          "attention heads must divide both stream widths");
  require(text_ffn_dim > 0 && image_ffn_dim > 0, "feed-forward widths must be positive");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  require(max_text_tokens >= 8 && max_text_tokens <= 256, "text budget must lie in [8, 256]");
  require(max_regions >= 1 && max_regions <= graphcon::kMaxRegions, "region count must lie in [1, 36]");
  require(num_candidates >= 1, "need at least one candidate");
}

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

VdGrModel::VdGrModel(const ModelConfig& config, Vocabulary vocab) : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  Rng rng(config_.seed);
  const auto B = ParamGroup::Backbone;
  const int dt = config_.text_dim, di = config_.image_dim;

  tok_emb_ = &params_.weight("embed.tokens", B, vocab_.size(), dt, rng);
  pos_emb_ = &params_.weight("embed.positions", B, config_.max_text_tokens, dt, rng);
  text_norm_ = {&params_.ones("embed.text_norm.gamma", B, 1, dt), &params_.zeros("embed.text_norm.beta", B, 1, dt)};
  region_w_ = &params_.weight("embed.region_w", B, config_.region_dim, di, rng);
  region_b_ = &params_.zeros("embed.region_b", B, 1, di);
  geom_w_ = &params_.weight("embed.geometry_w", B, 5, di, rng);
  geom_b_ = &params_.zeros("embed.geometry_b", B, 1, di);
  image_norm_ = {&params_.ones("embed.image_norm.gamma", B, 1, di), &params_.zeros("embed.image_norm.beta", B, 1, di)};

  const backbone::DualStreamShape shape{dt, di, config_.attention_heads, config_.text_ffn_dim, config_.image_ffn_dim};
  const mmgnn::GnnShape gshape{di, dt, config_.gnn_heads, config_.gnn_layers, config_.learned_edge_embedding};
  const int sets = config_.share_gnn ? 1 : config_.vdgr_layers;
  for (int l = 0; l < config_.vdgr_layers; ++l) {
    layers_.push_back(backbone::make_dual_stream_params(params_, "layer" + std::to_string(l + 1), shape, rng));
    if (l < sets)
      cascades_.push_back(mmgnn::make_cascade_params(params_, config_.share_gnn ? std::string("gnn") : "gnn.l" + std::to_string(l + 1),
                                                     gshape, rng));
  }

  pool_w_ = &params_.weight("head.pool_img_w", B, di, dt, rng);
  pool_b_ = &params_.zeros("head.pool_img_b", B, 1, dt);
  nsp_w_ = &params_.weight("head.nsp_w", B, dt, 1, rng);
  nsp_b_ = &params_.zeros("head.nsp_b", B, 1, 1);
  mlm_w_ = &params_.weight("head.mlm_w", B, dt, vocab_.size(), rng);
  mlm_b_ = &params_.zeros("head.mlm_b", B, 1, vocab_.size());
  mrm_w_ = &params_.weight("head.mrm_w", B, di, config_.region_dim, rng);
  mrm_b_ = &params_.zeros("head.mrm_b", B, 1, config_.region_dim);
  const Modality mods[] = {Modality::Image, Modality::Question, Modality::History};
  for (int m = 0; m < 3; ++m) {
    const int width = mods[m] == Modality::Image ? di : dt;
    const std::string name = "head.gem_" + graphcon::modality_name(mods[m]);
    gem_w_[m] = &params_.weight(name + "_w", ParamGroup::Gnn, 2 * width, graphcon::relation_class_count(mods[m]), rng);
    gem_b_[m] = &params_.zeros(name + "_b", ParamGroup::Gnn, 1, graphcon::relation_class_count(mods[m]));
  }
}

Var VdGrModel::embed_text(ad::Tape& t, const std::vector<int>& ids) const {
  require(static_cast<int>(ids.size()) <= config_.max_text_tokens, "text longer than the position table");
  for (int id : ids) require(id >= 0 && id < vocab_.size(), "token id outside the vocabulary");
  std::vector<int> positions(ids.size());
  std::iota(positions.begin(), positions.end(), 0);
  Var x = ad::add(ad::gather_rows(t.param(*tok_emb_), ids), ad::gather_rows(t.param(*pos_emb_), positions));
  return ad::layer_norm_rows(x, t.param(*text_norm_.gamma), t.param(*text_norm_.beta));
}

Var VdGrModel::embed_image(ad::Tape& t, const ImageInput& image) const {
  require(image.features.cols() == config_.region_dim, "region feature width does not match region_dim");
  require(image.features.rows() <= config_.max_regions + 1, "too many image regions");
  Var f = ad::linear(t.constant(image.features), t.param(*region_w_), t.param(*region_b_));
  Var g = ad::linear(t.constant(image.geometry), t.param(*geom_w_), t.param(*geom_b_));
  return ad::layer_norm_rows(ad::add(f, g), t.param(*image_norm_.gamma), t.param(*image_norm_.beta));
}

VdGrModel::Output VdGrModel::forward(ad::Tape& t, const Input& in, bool record_traces) const {
  require(in.layout != nullptr && in.image != nullptr, "forward: missing layout or image input");
  const TokenLayout& lay = *in.layout;
  require(in.image->features.rows() == lay.image_slots(), "forward: image slots do not match the layout");

  Output out;
  Var text = embed_text(t, lay.token_ids);
  Var image = embed_image(t, *in.image);
  Var previous_image;
  for (int l = 0; l < config_.vdgr_layers; ++l) {
    if (config_.use_gnn) {
      require(in.image_graph && in.question_graph && in.history_graph, "forward: graphs missing");
      const auto g = backbone::gather_modality_features(text, image, lay);
      mmgnn::CascadeOptions opts;
      opts.use_hub = config_.use_hub;
      opts.layers = config_.gnn_layers;
      opts.image_hub_source = config_.image_hub_source;
      opts.vdgr_layer = l + 1;
      opts.record_traces = record_traces;
      const auto& cp = cascades_[config_.share_gnn ? 0 : static_cast<std::size_t>(l)];
      auto casc = mmgnn::cascade_forward({g.image, g.question, g.history, previous_image}, *in.image_graph,
                                         *in.question_graph, *in.history_graph, cp, opts);
      const auto fused = backbone::scatter_fuse(text, image, casc.image, casc.question, casc.history, lay, config_.lambda);
      text = fused.text;
      image = fused.image;
      previous_image = casc.image;
      out.image_nodes = casc.image;
      out.question_nodes = casc.question;
      out.history_nodes = casc.history;
      for (auto& tr : casc.traces) out.traces.push_back(std::move(tr));
    }
    const auto next = backbone::dual_stream_layer(text, image, layers_[static_cast<std::size_t>(l)],
                                                  config_.attention_heads, in.masks, config_.co_attention);
    text = next.text;
    image = next.image;
  }
  out.text = text;
  out.image = image;
  Var img = ad::linear(ad::slice_rows(image, 0, 1), t.param(*pool_w_), t.param(*pool_b_));
  out.pooled = ad::mul(img, ad::slice_rows(text, lay.cls_position, 1));
  out.nsp_logit = ad::linear(out.pooled, t.param(*nsp_w_), t.param(*nsp_b_));
  return out;
}

Var VdGrModel::mlm_logprobs(Var rows) const {
  ad::Tape& t = *rows.tape();
  return ad::log_softmax_rows(ad::linear(rows, t.param(*mlm_w_), t.param(*mlm_b_)));
}

Var VdGrModel::mrm_predict(Var rows) const {
  ad::Tape& t = *rows.tape();
  return ad::linear(rows, t.param(*mrm_w_), t.param(*mrm_b_));
}

Var VdGrModel::gem_logits(Modality m, Var pairs) const {
  ad::Tape& t = *pairs.tape();
  const auto i = static_cast<std::size_t>(m);
  return ad::linear(pairs, t.param(*gem_w_[i]), t.param(*gem_b_[i]));
}

}  // namespace vdgr
