#include "support/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vdgr::test_support {

ModelConfig minimal_config() {
  ModelConfig c;
  c.text_dim = 8;
  c.image_dim = 12;
  c.region_dim = 6;
  c.vdgr_layers = 1;
  c.gnn_layers = 1;
  c.gnn_heads = 2;
  c.attention_heads = 2;
  c.text_ffn_dim = 16;
  c.image_ffn_dim = 16;
  c.max_text_tokens = 32;
  c.max_regions = 3;
  c.num_candidates = 3;
  c.seed = 11;
  return c;
}

ModelConfig small_config(int num_candidates) {
  ModelConfig c;
  c.text_dim = 16;
  c.image_dim = 16;
  c.region_dim = 16;
  c.vdgr_layers = 2;
  c.gnn_layers = 2;
  c.gnn_heads = 4;
  c.attention_heads = 2;
  c.text_ffn_dim = 32;
  c.image_ffn_dim = 32;
  c.max_text_tokens = 64;
  c.max_regions = 10;
  c.num_candidates = num_candidates;
  c.seed = 5;
  return c;
}

DialogInstance handmade_dialog() {
  DialogInstance d;
  d.image_id = 42;
  d.caption = "a brown dog on the grass";
  d.boxes = {{10, 10, 60, 50}, {20, 20, 40, 40}, {70, 5, 95, 30}};
  d.region_features.resize(3, 6);
  Rng rng(99);
  for (Eigen::Index i = 0; i < d.region_features.size(); ++i) d.region_features.data()[i] = rng.normal();

  DialogRound r1;
  r1.question = "is it big";
  r1.answer = "yes";
  r1.candidates = {"yes", "no", "maybe"};
  r1.gt_index = 0;
  r1.parse = {{2, 0, "cop"}, {2, 1, "nsubj"}};

  DialogRound r2;
  r2.question = "what color is it";
  r2.answer = "brown";
  r2.candidates = {"black", "brown", "white"};
  r2.gt_index = 1;
  r2.relevance = std::vector<double>{0.0, 1.0, 0.5};
  r2.parse = {{1, 0, "det"}, {1, 2, "cop"}, {1, 3, "nsubj"}};

  d.rounds = {r1, r2};
  d.corefs = {{2, 1}};
  prepare_graphs(d);
  return d;
}

graphcon::BoundingBox random_box(Rng& rng) {
  auto snap = [](double v) { return std::round(v * 2.0) / 2.0; };
  for (;;) {
    double x1 = snap(rng.uniform(0, 100)), x2 = snap(rng.uniform(0, 100));
    double y1 = snap(rng.uniform(0, 100)), y2 = snap(rng.uniform(0, 100));
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    if (x2 > x1 && y2 > y1) return {x1, y1, x2, y2};
  }
}

graphcon::Graph random_graph(graphcon::Modality m, int num_nodes, double edge_prob, Rng& rng) {
  graphcon::Graph g;
  g.modality = m;
  g.num_nodes = num_nodes;
  const int classes = graphcon::relation_class_count(m);
  for (int s = 0; s < num_nodes; ++s)
    for (int t = 0; t < num_nodes; ++t)
      if (s != t && rng.bernoulli(edge_prob))
        g.edges.push_back({s, t, 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)))});
  graphcon::attach_hub(g);
  graphcon::canonicalize(g);
  return g;
}

GradientReport check_gradients(ParameterSet& params, const std::function<ad::Var(ad::Tape&)>& loss, double step,
                               double floor) {
  params.zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto value = [&] {
    ad::Tape tape;
    return loss(tape).value()(0, 0);
  };

  GradientReport report;
  for (auto& p : params.all()) {
    const Matrix analytic = p.grad;
    Matrix numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& x = p.value.data()[i];
      const double saved = x;
      x = saved + step;
      const double up = value();
      x = saved - step;
      const double down = value();
      x = saved;
      numeric.data()[i] = (up - down) / (2.0 * step);
    }
    const double denom = std::max({analytic.norm(), numeric.norm(), floor});
    const double err = (analytic - numeric).norm() / denom;
    if (err >= report.max_error) {
      report.max_error = err;
      report.worst_tensor = p.name;
    }
    ++report.tensors;
    report.scalars += static_cast<std::size_t>(p.value.size());
  }
  return report;
}

int oracle_rank(const std::vector<double>& scores, int i) {
  int beaten_by = 0;
  for (int j = 0; j < static_cast<int>(scores.size()); ++j) {
    if (j == i) continue;
    const double sj = scores[static_cast<std::size_t>(j)], si = scores[static_cast<std::size_t>(i)];
    if (sj > si || (sj == si && j < i)) ++beaten_by;
  }
  return beaten_by + 1;
}

double oracle_ndcg(const std::vector<double>& scores, const std::vector<double>& relevance) {
  int k = 0;
  for (double r : relevance)
    if (r > 0) ++k;
  const int n = static_cast<int>(scores.size());

  // Predicted order by repeated selection of the best remaining candidate.
  std::set<int> left;
  for (int i = 0; i < n; ++i) left.insert(i);
  double dcg = 0.0;
  for (int pos = 1; pos <= k; ++pos) {
    int best = *left.begin();
    for (int j : left)
      if (scores[static_cast<std::size_t>(j)] > scores[static_cast<std::size_t>(best)]) best = j;
    left.erase(best);
    dcg += relevance[static_cast<std::size_t>(best)] / std::log2(1.0 + pos);
  }

  std::vector<double> ideal = relevance;
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (int pos = 1; pos <= k; ++pos) idcg += ideal[static_cast<std::size_t>(pos - 1)] / std::log2(1.0 + pos);
  return dcg / idcg;
}

}  // namespace vdgr::test_support
