#pragma once

// Candidate ranking and retrieval metrics.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vdgr::ranking {

/// 1-based rank of every candidate: higher score ranks first, ties go to the
/// lower index.
std::vector<int> rank(std::span<const double> scores);

/// Candidate indices in ranked order.
std::vector<int> ranked_order(std::span<const double> scores);

double reciprocal_rank(int gt_rank);
bool hit_at(int gt_rank, int k);

/// NDCG with cutoff k = number of candidates with positive relevance and
/// discount 1 / log2(1 + position).
double ndcg(std::span<const double> scores, std::span<const double> relevance);

/// Per-round evaluation record.
struct RoundResult {
  std::int64_t image_id = 0;
  int round = 0;  // 1-based
  int gt_rank = 0;
  std::vector<int> ranks;
  bool has_ndcg = false;
  double ndcg = 0.0;
};

RoundResult score_round(std::int64_t image_id, int round, std::span<const double> scores, int gt_index,
                        const std::vector<double>* relevance);

struct Metrics {
  double ndcg = 0.0;  // mean over rounds with positive relevance
  double mrr = 0.0;
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
  double mean_rank = 0.0;
  int rounds = 0;
  int ndcg_rounds = 0;
};

Metrics aggregate(std::span<const RoundResult> results);

/// Metrics per dialogue round index (1..max_round).
std::vector<Metrics> round_wise_metrics(std::span<const RoundResult> results);

/// Element-wise mean of several score vectors.
std::vector<double> ensemble_scores(const std::vector<std::vector<double>>& scores);

nlohmann::json to_json(const Metrics& m);
nlohmann::json metrics_report(std::span<const RoundResult> results);

/// One line per (dialogue, round): image id, round, then the candidate ranks.
std::string ranks_text(std::span<const RoundResult> results);

}  // namespace vdgr::ranking
