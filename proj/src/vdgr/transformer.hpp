#pragma once

// Two-stream transformer layer: co-attention between the text and image
// streams, then per-stream self-attention and feed-forward, each followed by
// a residual connection and layer normalisation.

#include "vdgr/autograd.hpp"
#include "vdgr/params.hpp"

#include <string>

namespace vdgr::backbone {

using ad::Var;

struct AttentionParams {
  Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
};

struct NormParams {
  Parameter *gamma, *beta;
};

struct FeedForwardParams {
  Parameter *w1, *b1, *w2, *b2;
};

struct StreamParams {
  AttentionParams co_attention;    // queries from this stream, keys/values from the other
  AttentionParams self_attention;
  FeedForwardParams ffn;
  NormParams norm_co, norm_self, norm_ffn;
};

struct DualStreamParams {
  StreamParams text;
  StreamParams image;
};

struct DualStreamShape {
  int text_dim = 0;
  int image_dim = 0;
  int heads = 2;
  int text_ffn_dim = 0;
  int image_ffn_dim = 0;
};

DualStreamParams make_dual_stream_params(ParameterSet& store, const std::string& prefix, const DualStreamShape& shape,
                                         Rng& rng);

/// Multi-head scaled dot-product attention of `queries` over `keys_values`.
/// `key_bias` (1 x keys) is added to every score row; use -inf for padding.
Var multi_head_attention(Var queries, Var keys_values, const AttentionParams& p, int heads, const ad::Matrix* key_bias);

struct StreamMasks {
  /// 1 x text_length and 1 x image_slots additive masks (0 or -inf). Empty
  /// matrices mean no padding.
  ad::Matrix text;
  ad::Matrix image;
};

struct DualStreamOutput {
  Var text;
  Var image;
};

DualStreamOutput dual_stream_layer(Var text, Var image, const DualStreamParams& p, int heads, const StreamMasks& masks,
                                   bool co_attention = true);

}  // namespace vdgr::backbone
