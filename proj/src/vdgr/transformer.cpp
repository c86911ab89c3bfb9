#include "vdgr/transformer.hpp"

#include "vdgr/error.hpp"

#include <cmath>
#include <vector>

namespace vdgr::backbone {

namespace {

constexpr double kNormEps = 1e-12;

AttentionParams make_attention(ParameterSet& s, const std::string& prefix, int q_dim, int kv_dim, Rng& rng) {
  AttentionParams a;
  a.wq = &s.weight(prefix + ".wq", ParamGroup::Backbone, q_dim, q_dim, rng);
  a.bq = &s.zeros(prefix + ".bq", ParamGroup::Backbone, 1, q_dim);
  a.wk = &s.weight(prefix + ".wk", ParamGroup::Backbone, kv_dim, q_dim, rng);
  a.bk = &s.zeros(prefix + ".bk", ParamGroup::Backbone, 1, q_dim);
  a.wv = &s.weight(prefix + ".wv", ParamGroup::Backbone, kv_dim, q_dim, rng);
  a.bv = &s.zeros(prefix + ".bv", ParamGroup::Backbone, 1, q_dim);
  a.wo = &s.weight(prefix + ".wo", ParamGroup::Backbone, q_dim, q_dim, rng);
  a.bo = &s.zeros(prefix + ".bo", ParamGroup::Backbone, 1, q_dim);
  return a;
}

NormParams make_norm(ParameterSet& s, const std::string& prefix, int dim) {
  return {&s.ones(prefix + ".gamma", ParamGroup::Backbone, 1, dim), &s.zeros(prefix + ".beta", ParamGroup::Backbone, 1, dim)};
}

StreamParams make_stream(ParameterSet& s, const std::string& prefix, int dim, int other_dim, int ffn_dim, Rng& rng) {
  StreamParams p;
  p.co_attention = make_attention(s, prefix + ".co_attn", dim, other_dim, rng);
  p.self_attention = make_attention(s, prefix + ".self_attn", dim, dim, rng);
  p.ffn.w1 = &s.weight(prefix + ".ffn.w1", ParamGroup::Backbone, dim, ffn_dim, rng);
  p.ffn.b1 = &s.zeros(prefix + ".ffn.b1", ParamGroup::Backbone, 1, ffn_dim);
  p.ffn.w2 = &s.weight(prefix + ".ffn.w2", ParamGroup::Backbone, ffn_dim, dim, rng);
  p.ffn.b2 = &s.zeros(prefix + ".ffn.b2", ParamGroup::Backbone, 1, dim);
  p.norm_co = make_norm(s, prefix + ".norm_co", dim);
  p.norm_self = make_norm(s, prefix + ".norm_self", dim);
  p.norm_ffn = make_norm(s, prefix + ".norm_ffn", dim);
  return p;
}

Var norm(Var x, const NormParams& p) {
  ad::Tape& t = *x.tape();
  return ad::layer_norm_rows(x, t.param(*p.gamma), t.param(*p.beta), kNormEps);
}

Var feed_forward(Var x, const FeedForwardParams& p) {
  ad::Tape& t = *x.tape();
  Var h = ad::gelu(ad::linear(x, t.param(*p.w1), t.param(*p.b1)));
  return ad::linear(h, t.param(*p.w2), t.param(*p.b2));
}

const ad::Matrix* bias_or_null(const ad::Matrix& m) { return m.size() == 0 ? nullptr : &m; }

Var stream_tail(Var x, const StreamParams& p, int heads, const ad::Matrix* self_bias) {
  x = norm(ad::add(x, multi_head_attention(x, x, p.self_attention, heads, self_bias)), p.norm_self);
  return norm(ad::add(x, feed_forward(x, p.ffn)), p.norm_ffn);
}

}  // namespace

DualStreamParams make_dual_stream_params(ParameterSet& store, const std::string& prefix, const DualStreamShape& shape,
                                         Rng& rng) {
  require(shape.text_dim % shape.heads == 0 && shape.image_dim % shape.heads == 0,
          "attention heads must divide both stream widths");
  DualStreamParams p;
  p.text = make_stream(store, prefix + ".text", shape.text_dim, shape.image_dim, shape.text_ffn_dim, rng);
  p.image = make_stream(store, prefix + ".image", shape.image_dim, shape.text_dim, shape.image_ffn_dim, rng);
  return p;
}

Var multi_head_attention(Var queries, Var keys_values, const AttentionParams& p, int heads, const ad::Matrix* key_bias) {
  ad::Tape& t = *queries.tape();
  Var q = ad::linear(queries, t.param(*p.wq), t.param(*p.bq));
  Var k = ad::linear(keys_values, t.param(*p.wk), t.param(*p.bk));
  Var v = ad::linear(keys_values, t.param(*p.wv), t.param(*p.bv));
  const auto dim = q.cols();
  require(dim % heads == 0, "attention heads must divide the width");
  const auto hd = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));
  std::vector<Var> outs;
  outs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = ad::slice_cols(q, h * hd, hd);
    Var kh = ad::slice_cols(k, h * hd, hd);
    Var vh = ad::slice_cols(v, h * hd, hd);
    Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    outs.push_back(ad::matmul(ad::softmax_rows(scores, key_bias), vh));
  }
  return ad::linear(ad::concat_cols(outs), t.param(*p.wo), t.param(*p.bo));
}

DualStreamOutput dual_stream_layer(Var text, Var image, const DualStreamParams& p, int heads, const StreamMasks& masks,
                                   bool co_attention) {
  const ad::Matrix* text_bias = bias_or_null(masks.text);
  const ad::Matrix* image_bias = bias_or_null(masks.image);
  Var t = text, v = image;
  if (co_attention) {
    // Both streams read the other's input states.
    t = norm(ad::add(text, multi_head_attention(text, image, p.text.co_attention, heads, image_bias)), p.text.norm_co);
    v = norm(ad::add(image, multi_head_attention(image, text, p.image.co_attention, heads, text_bias)), p.image.norm_co);
  }
  return {stream_tail(t, p.text, heads, text_bias), stream_tail(v, p.image, heads, image_bias)};
}

}  // namespace vdgr::backbone
