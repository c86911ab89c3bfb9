#pragma once

// Moving rows between the transformer hidden states and the graph node
// features: gather before the GNN cascade, scatter plus residual blend after.

#include "vdgr/autograd.hpp"
#include "vdgr/layout.hpp"

namespace vdgr::backbone {

using ad::Var;

struct GatheredFeatures {
  Var image;     // rows of the image stream at idx_v
  Var question;  // rows of the text stream at idx_q
  Var history;   // rows of the text stream at idx_h
};

GatheredFeatures gather_modality_features(Var text_states, Var image_states, const TokenLayout& layout);

struct FusedStates {
  Var text;
  Var image;
};

/// Rows at the index maps become lambda * state + (1 - lambda) * gnn output;
/// every other row is passed through untouched.
FusedStates scatter_fuse(Var text_states, Var image_states, Var image_gnn, Var question_gnn, Var history_gnn,
                         const TokenLayout& layout, double lambda);

}  // namespace vdgr::backbone
