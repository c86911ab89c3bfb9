#include "vdgr/ranking.hpp"

#include "vdgr/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace vdgr::ranking {

std::vector<int> ranked_order(std::span<const double> scores) {
  for (double s : scores) require(!std::isnan(s), "cannot rank NaN scores");
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)]; });
  return order;
}

std::vector<int> rank(std::span<const double> scores) {
  const auto order = ranked_order(scores);
  std::vector<int> ranks(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) ranks[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos) + 1;
  return ranks;
}

double reciprocal_rank(int gt_rank) {
  require(gt_rank >= 1, "ranks are 1-based");
  return 1.0 / gt_rank;
}

bool hit_at(int gt_rank, int k) { return gt_rank >= 1 && gt_rank <= k; }

double ndcg(std::span<const double> scores, std::span<const double> relevance) {
  require(scores.size() == relevance.size(), "scores and relevance differ in length");
  std::size_t k = 0;
  for (double r : relevance) {
    require(std::isfinite(r) && r >= 0.0, "relevance must be finite and non-negative");
    if (r > 0.0) ++k;
  }
  if (k == 0) throw Error(ErrorCode::Skipped, "NDCG needs at least one relevant candidate");
  const auto order = ranked_order(scores);
  std::vector<double> ideal(relevance.begin(), relevance.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double discount = 1.0 / std::log2(static_cast<double>(p) + 2.0);
    dcg += relevance[static_cast<std::size_t>(order[p])] * discount;
    idcg += ideal[p] * discount;
  }
  return dcg / idcg;
}

RoundResult score_round(std::int64_t image_id, int round, std::span<const double> scores, int gt_index,
                        const std::vector<double>* relevance) {
  require(gt_index >= 0 && gt_index < static_cast<int>(scores.size()), "ground-truth index out of range");
  RoundResult r;
  r.image_id = image_id;
  r.round = round;
  r.ranks = rank(scores);
  r.gt_rank = r.ranks[static_cast<std::size_t>(gt_index)];
  if (relevance && std::any_of(relevance->begin(), relevance->end(), [](double x) { return x > 0.0; })) {
    r.has_ndcg = true;
    r.ndcg = ndcg(scores, *relevance);
  }
  return r;
}

Metrics aggregate(std::span<const RoundResult> results) {
  Metrics m;
  for (const auto& r : results) {
    ++m.rounds;
    m.mrr += reciprocal_rank(r.gt_rank);
    m.r1 += hit_at(r.gt_rank, 1);
    m.r5 += hit_at(r.gt_rank, 5);
    m.r10 += hit_at(r.gt_rank, 10);
    m.mean_rank += r.gt_rank;
    if (r.has_ndcg) {
      ++m.ndcg_rounds;
      m.ndcg += r.ndcg;
    }
  }
  if (m.rounds > 0) {
    m.mrr /= m.rounds;
    m.r1 /= m.rounds;
    m.r5 /= m.rounds;
    m.r10 /= m.rounds;
    m.mean_rank /= m.rounds;
  }
  if (m.ndcg_rounds > 0) m.ndcg /= m.ndcg_rounds;
  return m;
}

std::vector<Metrics> round_wise_metrics(std::span<const RoundResult> results) {
  std::map<int, std::vector<RoundResult>> by_round;
  int max_round = 0;
  for (const auto& r : results) {
    by_round[r.round].push_back(r);
    max_round = std::max(max_round, r.round);
  }
  std::vector<Metrics> out(static_cast<std::size_t>(max_round));
  for (const auto& [round, rs] : by_round)
    if (round >= 1) out[static_cast<std::size_t>(round - 1)] = aggregate(rs);
  return out;
}

std::vector<double> ensemble_scores(const std::vector<std::vector<double>>& scores) {
  require(!scores.empty(), "ensemble needs at least one model");
  const std::size_t n = scores.front().size();
  std::vector<double> out(n, 0.0);
  for (const auto& s : scores) {
    require(s.size() == n, "ensemble members disagree on the candidate count");
    for (std::size_t i = 0; i < n; ++i) out[i] += s[i];
  }
  for (double& v : out) v /= static_cast<double>(scores.size());
  return out;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"ndcg", m.ndcg}, {"mrr", m.mrr}, {"r1", m.r1}, {"r5", m.r5}, {"r10", m.r10}, {"mean", m.mean_rank},
          {"rounds", m.rounds}, {"ndcg_rounds", m.ndcg_rounds}};
}

nlohmann::json metrics_report(std::span<const RoundResult> results) {
  nlohmann::json j = to_json(aggregate(results));
  auto per_round = nlohmann::json::array();
  for (const auto& m : round_wise_metrics(results)) per_round.push_back(to_json(m));
  j["per_round"] = per_round;
  return j;
}

std::string ranks_text(std::span<const RoundResult> results) {
  std::ostringstream os;
  for (const auto& r : results) {
    os << r.image_id << ' ' << r.round;
    for (int k : r.ranks) os << ' ' << k;
    os << '\n';
  }
  return os.str();
}

}  // namespace vdgr::ranking
