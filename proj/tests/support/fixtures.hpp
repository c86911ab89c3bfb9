#pragma once

// Shared fixtures for the unit tests and the acceptance runner: tiny model
// configurations, a hand-written dialog, a finite-difference checker and
// brute-force metric oracles written independently of the library code.

#include "vdgr/autograd.hpp"
#include "vdgr/dialog.hpp"
#include "vdgr/graphcon.hpp"
#include "vdgr/model.hpp"
#include "vdgr/rng.hpp"

#include <functional>
#include <string>
#include <vector>

namespace vdgr::test_support {

/// Smallest end-to-end setting: text 8, image 12, L=1, K=1, H=2.
ModelConfig minimal_config();

/// Small but complete setting used by the behavioural tests.
ModelConfig small_config(int num_candidates = 10);

/// Two rounds, three regions, a four-token second question and three
/// candidates per round. Graphs are prepared.
DialogInstance handmade_dialog();

/// Random valid box inside a 100 x 100 canvas, snapped to a 0.5 grid so exact
/// ties (shared centres, identical boxes, containment edges) occur.
graphcon::BoundingBox random_box(Rng& rng);

/// Random canonical graph with hub.
graphcon::Graph random_graph(graphcon::Modality m, int num_nodes, double edge_prob, Rng& rng);

struct GradientReport {
  double max_error = 0.0;
  std::string worst_tensor;
  std::size_t tensors = 0;
  std::size_t scalars = 0;
};

/// Compares backprop gradients with central differences for every scalar of
/// every parameter in `params`. Error per tensor is
/// |analytic - numeric|_2 / max(|analytic|_2, |numeric|_2, floor).
GradientReport check_gradients(ParameterSet& params, const std::function<ad::Var(ad::Tape&)>& loss, double step = 1e-5,
                               double floor = 1e-7);

// ---- brute-force metric oracles ----

/// 1-based rank of candidate `i`: one plus the number of candidates that beat
/// it (higher score, or equal score with lower index).
int oracle_rank(const std::vector<double>& scores, int i);

/// NDCG with cutoff = count of positive relevance, by explicit selection of
/// the best remaining candidate at every position.
double oracle_ndcg(const std::vector<double>& scores, const std::vector<double>& relevance);

}  // namespace vdgr::test_support
