#include "vdgr/objectives.hpp"

#include "vdgr/error.hpp"
#include "vdgr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace vdgr::objectives {

namespace {

const std::vector<MaskedEdge>& plan_edges(const MaskPlan& plan, Modality m) {
  return plan.edges[static_cast<std::size_t>(m)];
}

bool contains_sorted(const std::vector<int>& v, int x) { return std::binary_search(v.begin(), v.end(), x); }

Var zero(ad::Tape& t) { return t.constant(ad::Matrix::Zero(1, 1)); }

Graph remove_edges(const Graph& g, const std::vector<MaskedEdge>& masked) {
  std::set<std::pair<int, int>> drop;
  for (const auto& e : masked) {
    drop.emplace(e.src, e.dst);
    drop.emplace(e.dst, e.src);
  }
  Graph out = g;
  std::erase_if(out.edges, [&](const graphcon::Edge& e) {
    return !g.is_hub_edge(e) && drop.count({e.src, e.dst}) > 0;
  });
  return out;
}

void append_edges(std::vector<MaskedEdge>& out, const Graph& g, Modality m, const MaskPlan& plan,
                  const TokenLayout& layout, double rate, Rng& rng) {
  for (const auto& e : g.edges) {
    if (g.is_hub_edge(e) || node_masked(m, e.src, plan, layout) || node_masked(m, e.dst, plan, layout)) continue;
    if (rng.bernoulli(rate)) out.push_back({e.src, e.dst, e.type});
  }
}

}  // namespace

bool MaskPlan::empty() const {
  return text_positions.empty() && region_nodes.empty() &&
         std::all_of(edges.begin(), edges.end(), [](const auto& v) { return v.empty(); });
}

bool node_masked(Modality m, int node, const MaskPlan& plan, const TokenLayout& layout) {
  switch (m) {
    case Modality::Image:
      return contains_sorted(plan.region_nodes, node);
    case Modality::Question:
      require(node >= 0 && node < static_cast<int>(layout.idx_q.size()), "question node outside the layout");
      return contains_sorted(plan.text_positions, layout.idx_q[static_cast<std::size_t>(node)]);
    case Modality::History:
      return false;
  }
  return false;
}

MaskPlan plan_masks(const TokenLayout& layout, const Graph& image_graph, const Graph& question_graph,
                    const Graph& history_graph, const MaskRates& rates, std::uint64_t seed) {
  for (double r : {rates.text, rates.region, rates.edge})
    require(r >= 0.0 && r <= 1.0, "mask rates must lie in [0, 1]");
  require(image_graph.num_nodes == layout.num_regions, "image graph does not match the layout");
  require(question_graph.num_nodes == static_cast<int>(layout.idx_q.size()), "question graph does not match the layout");
  require(history_graph.num_nodes == static_cast<int>(layout.idx_h.size()), "history graph does not match the layout");

  MaskPlan plan;
  plan.seed = seed;
  Rng rng(seed);
  for (int p = 0; p < layout.text_length(); ++p) {
    if (layout.is_special_position(p)) continue;
    if (rng.bernoulli(rates.text)) {
      plan.text_positions.push_back(p);
      plan.text_targets.push_back(layout.token_ids[static_cast<std::size_t>(p)]);
    }
  }
  for (int n = 0; n < layout.num_regions; ++n)
    if (rng.bernoulli(rates.region)) plan.region_nodes.push_back(n);

  append_edges(plan.edges[0], image_graph, Modality::Image, plan, layout, rates.edge, rng);
  append_edges(plan.edges[1], question_graph, Modality::Question, plan, layout, rates.edge, rng);
  append_edges(plan.edges[2], history_graph, Modality::History, plan, layout, rates.edge, rng);
  return plan;
}

std::size_t eligible_edge_count(const Graph& g, const MaskPlan& plan, const TokenLayout& layout) {
  std::size_t n = 0;
  for (const auto& e : g.edges)
    if (!g.is_hub_edge(e) && !node_masked(g.modality, e.src, plan, layout) &&
        !node_masked(g.modality, e.dst, plan, layout))
      ++n;
  return n;
}

nlohmann::json to_json(const MaskPlan& plan) {
  nlohmann::json j;
  j["seed"] = plan.seed;
  j["text_positions"] = plan.text_positions;
  j["text_targets"] = plan.text_targets;
  j["region_nodes"] = plan.region_nodes;
  nlohmann::json edges = nlohmann::json::object();
  for (auto m : {Modality::Image, Modality::Question, Modality::History}) {
    auto arr = nlohmann::json::array();
    for (const auto& e : plan_edges(plan, m)) arr.push_back({e.src, e.dst, e.type});
    edges[graphcon::modality_name(m)] = arr;
  }
  j["edges"] = edges;
  return j;
}

MaskPlan mask_plan_from_json(const nlohmann::json& j) {
  try {
    MaskPlan plan;
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.text_positions = j.at("text_positions").get<std::vector<int>>();
    plan.text_targets = j.at("text_targets").get<std::vector<int>>();
    plan.region_nodes = j.at("region_nodes").get<std::vector<int>>();
    require(plan.text_positions.size() == plan.text_targets.size(), "mask plan: positions and targets differ in length");
    require(std::is_sorted(plan.text_positions.begin(), plan.text_positions.end()) &&
                std::is_sorted(plan.region_nodes.begin(), plan.region_nodes.end()),
            "mask plan: positions must be ascending");
    for (auto m : {Modality::Image, Modality::Question, Modality::History}) {
      for (const auto& e : j.at("edges").at(graphcon::modality_name(m))) {
        require(e.size() == 3, "mask plan: edges are [src, dst, type]");
        plan.edges[static_cast<std::size_t>(m)].push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
      }
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("mask plan: ") + e.what());
  }
}

MaskedInputs apply_masks(const TokenLayout& layout, const ImageInput& image, const Graph& image_graph,
                         const Graph& question_graph, const Graph& history_graph, const MaskPlan& plan) {
  MaskedInputs out{layout, image, remove_edges(image_graph, plan.edges[0]),
                   remove_edges(question_graph, plan.edges[1]), remove_edges(history_graph, plan.edges[2])};
  for (int p : plan.text_positions) {
    require(p >= 0 && p < layout.text_length() && !layout.is_special_position(p), "mask plan: bad text position");
    out.layout.token_ids[static_cast<std::size_t>(p)] = Vocabulary::kMask;
  }
  if (!plan.region_nodes.empty()) {
    for (int n : plan.region_nodes) {
      require(n >= 0 && n < layout.num_regions, "mask plan: bad region index");
      out.image.features.row(n + 1).setZero();
    }
    if (layout.num_regions > 0)
      out.image.features.row(0) = out.image.features.bottomRows(layout.num_regions).colwise().mean();
  }
  return out;
}

Var mlm_loss(Var logprobs, std::span<const int> targets) { return ad::nll_mean(logprobs, targets); }

Var mrm_loss(Var predicted, const ad::Matrix& original) { return ad::mse_mean(predicted, original); }

Var nsp_loss(Var logit, int label) {
  require(label == 0 || label == 1, "NSP label must be 0 or 1");
  return ad::bce_with_logits(logit, label);
}

double nsp_score(double logit) { return sigmoid(logit); }

Var gem_modality_loss(Var logits, std::span<const MaskedEdge> edges) {
  require(logits.rows() == static_cast<Eigen::Index>(edges.size()), "GEM logits do not match the masked edges");
  std::vector<int> targets;
  targets.reserve(edges.size());
  for (const auto& e : edges) {
    require(e.type >= 1 && e.type <= logits.cols(), "GEM edge type outside the relation classes");
    targets.push_back(e.type - 1);
  }
  return ad::nll_mean(ad::log_softmax_rows(logits), targets);
}

GemLosses gem_loss(const VdGrModel& model, Var image_nodes, Var question_nodes, Var history_nodes,
                   const MaskPlan& plan, const TokenLayout& layout) {
  const Var nodes[3] = {image_nodes, question_nodes, history_nodes};
  Var losses[3];
  for (auto m : {Modality::Image, Modality::Question, Modality::History}) {
    const auto i = static_cast<std::size_t>(m);
    require(nodes[i].valid(), "GEM needs node representations");
    ad::Tape& t = *nodes[i].tape();
    const auto& edges = plan.edges[i];
    if (edges.empty()) {
      losses[i] = zero(t);
      continue;
    }
    std::vector<int> src, dst;
    for (const auto& e : edges) {
      require(!node_masked(m, e.src, plan, layout) && !node_masked(m, e.dst, plan, layout),
              "GEM edge touches a masked node");
      require(e.src >= 0 && e.src < nodes[i].rows() && e.dst >= 0 && e.dst < nodes[i].rows(),
              "GEM edge outside the node range");
      src.push_back(e.src);
      dst.push_back(e.dst);
    }
    const Var parts[2] = {ad::gather_rows(nodes[i], src), ad::gather_rows(nodes[i], dst)};
    losses[i] = gem_modality_loss(model.gem_logits(m, ad::concat_cols(parts)), edges);
  }
  return {losses[0], losses[1], losses[2]};
}

Var warmup_loss(const LossComponents& c, const LossWeights& w) {
  Var gem = ad::add(ad::add(c.gem_image, c.gem_question), c.gem_history);
  return ad::add(ad::scale(ad::add(c.mlm, c.mrm), w.alpha1), ad::scale(gem, w.alpha2));
}

Var vd_loss(const LossComponents& c) { return ad::add(ad::add(c.mlm, c.mrm), c.nsp); }

double warmup_loss(double mlm, double mrm, std::array<double, 3> gem, const LossWeights& w) {
  return w.alpha1 * (mlm + mrm) + w.alpha2 * (gem[0] + gem[1] + gem[2]);
}

double vd_loss(double mlm, double mrm, double nsp) { return mlm + mrm + nsp; }

namespace {

ad::RowVector check_relevance(Var scores, std::span<const double> relevance) {
  require(scores.rows() == 1 && scores.cols() == static_cast<Eigen::Index>(relevance.size()),
          "scores and relevance differ in length");
  ad::RowVector r(relevance.size());
  double total = 0.0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    require(std::isfinite(relevance[i]) && relevance[i] >= 0.0, "relevance must be finite and non-negative");
    r(static_cast<Eigen::Index>(i)) = relevance[i];
    total += relevance[i];
  }
  if (total == 0.0) throw Error(ErrorCode::Skipped, "all-zero relevance; round skipped");
  return r;
}

}  // namespace

Var ce_dense_loss(Var scores, std::span<const double> relevance) {
  ad::RowVector r = check_relevance(scores, relevance);
  return ad::soft_cross_entropy(scores, r / r.sum());
}

Var listnet_loss(Var scores, std::span<const double> relevance) {
  ad::RowVector r = check_relevance(scores, relevance);
  ad::RowVector p = (r.array() - r.maxCoeff()).exp();
  return ad::soft_cross_entropy(scores, p / p.sum());
}

Stage parse_stage(const std::string& name) {
  if (name == "warmup") return Stage::Warmup;
  if (name == "sparse") return Stage::Sparse;
  if (name == "dense") return Stage::Dense;
  fail("unknown stage '" + name + "' (expected warmup, sparse or dense)");
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::Warmup: return "warmup";
    case Stage::Sparse: return "sparse";
    case Stage::Dense: return "dense";
  }
  return "?";
}

SampleResult sample_losses(const VdGrModel& model, ad::Tape& tape, const SampleSpec& spec) {
  require(spec.instance != nullptr, "sample without a dialog");
  const DialogInstance& inst = *spec.instance;
  require(spec.round >= 1 && spec.round <= static_cast<int>(inst.rounds.size()), "round out of range");
  const DialogRound& round = inst.rounds[static_cast<std::size_t>(spec.round - 1)];
  require(spec.candidate >= 0 && spec.candidate < static_cast<int>(round.candidates.size()), "candidate out of range");

  const TokenLayout layout = tokenize_and_layout(inst, spec.round, round.candidates[static_cast<std::size_t>(spec.candidate)],
                                                 model.vocab(), model.config().max_text_tokens);
  const ImageInput image = make_image_input(inst);
  const Graph history = history_graph_for(inst, layout);
  const Graph& question = inst.question_graphs.at(static_cast<std::size_t>(spec.round - 1));

  SampleResult res;
  res.plan = plan_masks(layout, inst.image_graph, question, history, spec.rates, spec.mask_seed);
  const MaskedInputs masked = apply_masks(layout, image, inst.image_graph, question, history, res.plan);

  VdGrModel::Input in;
  in.layout = &masked.layout;
  in.image = &masked.image;
  in.image_graph = &masked.image_graph;
  in.question_graph = &masked.question_graph;
  in.history_graph = &masked.history_graph;
  const auto out = model.forward(tape, in);

  LossComponents& c = res.losses;
  if (!res.plan.text_positions.empty())
    c.mlm = mlm_loss(model.mlm_logprobs(ad::gather_rows(out.text, res.plan.text_positions)), res.plan.text_targets);
  else
    c.mlm = zero(tape);
  if (!res.plan.region_nodes.empty()) {
    std::vector<int> slots;
    for (int n : res.plan.region_nodes) slots.push_back(n + 1);
    ad::Matrix target(static_cast<Eigen::Index>(slots.size()), image.features.cols());
    for (std::size_t i = 0; i < slots.size(); ++i) target.row(static_cast<Eigen::Index>(i)) = image.features.row(slots[i]);
    c.mrm = mrm_loss(model.mrm_predict(ad::gather_rows(out.image, slots)), target);
  } else {
    c.mrm = zero(tape);
  }
  c.nsp = spec.with_nsp ? nsp_loss(out.nsp_logit, spec.label) : zero(tape);
  if (spec.with_gem && model.config().use_gnn) {
    const auto g = gem_loss(model, out.image_nodes, out.question_nodes, out.history_nodes, res.plan, masked.layout);
    c.gem_image = g.image;
    c.gem_question = g.question;
    c.gem_history = g.history;
  } else {
    c.gem_image = c.gem_question = c.gem_history = zero(tape);
  }
  return res;
}

}  // namespace vdgr::objectives
