#include "vdgr/dialog.hpp"

#include "vdgr/error.hpp"
#include "vdgr/layout.hpp"

#include <algorithm>

namespace vdgr {

void prepare_graphs(DialogInstance& inst, const graphcon::RelationLexicon& lexicon) {
  require(!inst.rounds.empty(), "dialog has no rounds");
  if (!inst.boxes.empty()) inst.image_graph = graphcon::build_image_graph(inst.boxes);
  inst.question_graphs.clear();
  for (const auto& r : inst.rounds) {
    const int n = static_cast<int>(split_words(r.question).size());
    inst.question_graphs.push_back(graphcon::build_question_graph(r.parse, n, lexicon));
  }
  inst.history_graph = graphcon::build_history_graph(inst.corefs, static_cast<int>(inst.rounds.size()) + 1);
}

void validate_for_training(const DialogInstance& inst, int num_candidates) {
  const std::string id = "dialog " + std::to_string(inst.image_id);
  require(inst.has_features(), id + ": region features missing (text-only instance)");
  require(inst.region_features.rows() == inst.num_regions(), id + ": feature/box count mismatch");
  require(!inst.rounds.empty() && inst.rounds.size() <= 10, id + ": needs 1..10 rounds");
  require(inst.question_graphs.size() == inst.rounds.size(), id + ": graphs not prepared");
  for (std::size_t r = 0; r < inst.rounds.size(); ++r) {
    const auto& rd = inst.rounds[r];
    require(static_cast<int>(rd.candidates.size()) == num_candidates,
            id + ": round " + std::to_string(r + 1) + " has " + std::to_string(rd.candidates.size()) +
                " candidates, expected " + std::to_string(num_candidates));
    require(rd.gt_index >= 0 && rd.gt_index < num_candidates, id + ": ground-truth index out of range");
    require(rd.candidates[static_cast<std::size_t>(rd.gt_index)] == rd.answer,
            id + ": candidate list does not contain the ground-truth answer at gt_index");
    if (rd.relevance) {
      require(static_cast<int>(rd.relevance->size()) == num_candidates, id + ": relevance length mismatch");
      for (double v : *rd.relevance) require(v >= 0.0 && v <= 1.0, id + ": relevance outside [0, 1]");
    }
  }
}

}  // namespace vdgr
