#pragma once

// Synthetic dialogs from a small template grammar. Each question comes with
// its dependency parse and each back-reference with a coreference link, so
// the graph inputs are exact. Region features are drawn around a fixed
// per-class centroid, which makes count and position questions answerable.

#include "vdgr/dialog.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vdgr {

struct ToyDataOptions {
  std::uint64_t seed = 0;
  int dialogs = 8;
  int regions = 4;  // regions per image (at most 10)
  int candidates = 10;
  int rounds = 3;
  int region_dim = 16;
  double feature_noise = 0.1;
  bool dense = true;  // one densely annotated round per dialog
  std::int64_t first_image_id = 1;
};

/// Instances with graphs prepared. Deterministic per options.
std::vector<DialogInstance> generate_toy_dialogs(const ToyDataOptions& opts);

/// Generates and writes the split's files (see dataset.hpp for the layout).
void generate_toy_dataset(const ToyDataOptions& opts, const std::string& dir, const std::string& split);

/// Every answer string the grammar can produce as a candidate.
const std::vector<std::string>& toy_answer_pool();

}  // namespace vdgr
