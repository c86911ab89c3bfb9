#include "vdgr/fusion.hpp"

#include "vdgr/error.hpp"

#include <algorithm>

namespace vdgr::backbone {

namespace {

void check_indices(const std::vector<int>& idx, Eigen::Index rows, const char* name) {
  for (int i : idx)
    require(i >= 0 && i < rows, std::string("layout index out of range in ") + name);
}

Var blend_into(Var states, Var gnn, const std::vector<int>& idx, double lambda) {
  require(gnn.rows() == static_cast<Eigen::Index>(idx.size()), "GNN output rows do not match the index map");
  require(gnn.cols() == states.cols(), "GNN output width does not match the hidden states");
  Var original = ad::gather_rows(states, idx);
  Var blended = ad::add(ad::scale(original, lambda), ad::scale(gnn, 1.0 - lambda));
  return ad::scatter_rows(states, blended, idx);
}

}  // namespace

GatheredFeatures gather_modality_features(Var text_states, Var image_states, const TokenLayout& layout) {
  check_indices(layout.idx_v, image_states.rows(), "idx_v");
  check_indices(layout.idx_q, text_states.rows(), "idx_q");
  check_indices(layout.idx_h, text_states.rows(), "idx_h");
  return {ad::gather_rows(image_states, layout.idx_v), ad::gather_rows(text_states, layout.idx_q),
          ad::gather_rows(text_states, layout.idx_h)};
}

FusedStates scatter_fuse(Var text_states, Var image_states, Var image_gnn, Var question_gnn, Var history_gnn,
                         const TokenLayout& layout, double lambda) {
  require(lambda >= 0.0 && lambda <= 1.0, "residual coefficient lambda must lie in [0, 1]");
  check_indices(layout.idx_v, image_states.rows(), "idx_v");
  check_indices(layout.idx_q, text_states.rows(), "idx_q");
  check_indices(layout.idx_h, text_states.rows(), "idx_h");
  for (int q : layout.idx_q)
    require(std::find(layout.idx_h.begin(), layout.idx_h.end(), q) == layout.idx_h.end(),
            "question and history index maps overlap");
  Var text = blend_into(text_states, question_gnn, layout.idx_q, lambda);
  text = blend_into(text, history_gnn, layout.idx_h, lambda);
  return {text, blend_into(image_states, image_gnn, layout.idx_v, lambda)};
}

}  // namespace vdgr::backbone
