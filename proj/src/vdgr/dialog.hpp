#pragma once

#include "vdgr/autograd.hpp"
#include "vdgr/graphcon.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vdgr {

struct DialogRound {
  std::string question;
  std::string answer;
  std::vector<std::string> candidates;
  int gt_index = 0;
  /// Graded relevance per candidate, present only on densely annotated rounds.
  std::optional<std::vector<double>> relevance;
  /// Dependency parse over the whitespace tokens of `question`.
  std::vector<graphcon::DependencyEdge> parse;
};

/// One image with its caption and question/answer rounds. Graphs are built
/// once by `prepare_graphs` and never modified afterwards.
struct DialogInstance {
  std::int64_t image_id = 0;
  std::string caption;
  ad::Matrix region_features;  // N_i x region_dim; empty when features are missing
  std::vector<graphcon::BoundingBox> boxes;
  std::vector<DialogRound> rounds;
  std::vector<graphcon::CoreferenceLink> corefs;

  graphcon::Graph image_graph;
  std::vector<graphcon::Graph> question_graphs;  // one per round
  graphcon::Graph history_graph;                 // caption + every round

  bool has_features() const { return region_features.rows() > 0 && !boxes.empty(); }
  int num_regions() const { return static_cast<int>(boxes.size()); }
};

/// Builds the image, per-round question and full history graphs.
void prepare_graphs(DialogInstance& inst, const graphcon::RelationLexicon& lexicon = graphcon::RelationLexicon::builtin());

/// Throws unless the instance is usable for training (features present,
/// candidates contain the ground truth, at most 10 rounds).
void validate_for_training(const DialogInstance& inst, int num_candidates);

}  // namespace vdgr
