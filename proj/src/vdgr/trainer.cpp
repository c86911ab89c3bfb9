#include "vdgr/trainer.hpp"

#include "vdgr/dataset.hpp"
#include "vdgr/error.hpp"
#include "vdgr/objectives.hpp"
#include "vdgr/optimizer.hpp"
#include "vdgr/rng.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace vdgr {

using objectives::Stage;
using nlohmann::json;

namespace {

struct SampleRef {
  std::size_t dialog = 0;
  int round = 1;
};

ad::Var candidate_logit(const VdGrModel& model, ad::Tape& tape, const DialogInstance& inst, const ImageInput& image,
                        int round, int candidate, std::vector<mmgnn::AttentionTrace>* traces = nullptr) {
  const auto& rd = inst.rounds.at(static_cast<std::size_t>(round - 1));
  const TokenLayout layout = tokenize_and_layout(inst, round, rd.candidates.at(static_cast<std::size_t>(candidate)),
                                                 model.vocab(), model.config().max_text_tokens);
  const graphcon::Graph history = history_graph_for(inst, layout);
  VdGrModel::Input in;
  in.layout = &layout;
  in.image = &image;
  in.image_graph = &inst.image_graph;
  in.question_graph = &inst.question_graphs.at(static_cast<std::size_t>(round - 1));
  in.history_graph = &history;
  auto out = model.forward(tape, in, traces != nullptr);
  if (traces) *traces = std::move(out.traces);
  return out.nsp_logit;
}

double value_of(const ad::Var& v) { return v.value()(0, 0); }

std::string sample_dump_path(const std::string& dir, int step) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / ("nonfinite_step" + std::to_string(step) + ".json")).string();
}

}  // namespace

std::pair<double, double> stage_rates(const StageConfig& s, int step, int total_steps) {
  const double scale = s.toy_lr_scale ? 10.0 : 1.0;
  const int warm = warmup_steps_for(total_steps, s.warmup_fraction);
  const LinearSchedule b{scale * s.backbone_lr_min, scale * s.backbone_lr_max, warm, std::max(1, total_steps),
                         s.backbone_lr_warmup};
  const LinearSchedule g{scale * s.gnn_lr_min, scale * s.gnn_lr_max, warm, std::max(1, total_steps), s.gnn_lr_warmup};
  return {b.rate(step), g.rate(step)};
}

NspPair draw_nsp_pair(Rng& rng, int gt_index, int num_candidates, double negative_probability) {
  if (num_candidates > 1 && rng.bernoulli(negative_probability)) {
    int c = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_candidates - 1)));
    if (c >= gt_index) ++c;
    return {c, 0};
  }
  return {gt_index, 1};
}

TrainResult train_stage(VdGrModel& model, const std::vector<DialogInstance>& data, const StageConfig& sc,
                        const std::string& dump_dir) {
  sc.validate();
  const int n_cand = model.config().num_candidates;
  for (const auto& d : data) validate_for_training(d, n_cand);

  TrainResult result;
  std::vector<SampleRef> samples;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (int r = 1; r <= static_cast<int>(data[i].rounds.size()); ++r) {
      if (sc.stage == Stage::Dense) {
        const auto& rel = data[i].rounds[static_cast<std::size_t>(r - 1)].relevance;
        if (!rel) continue;
        bool any = false;
        for (double v : *rel) any = any || v > 0.0;
        if (!any) {
          ++result.skipped_rounds;
          continue;
        }
      }
      samples.push_back({i, r});
    }
  if (sc.stage == Stage::Dense)
    require(!samples.empty(), "dense stage needs rounds with dense relevance annotations");

  Rng rng(sc.seed);
  const int batch = sc.batch_size;
  const int per_epoch = samples.empty() ? 0 : static_cast<int>((samples.size() + batch - 1) / batch);
  int total = sc.epochs * per_epoch;
  if (sc.max_steps > 0) total = std::min(total, sc.max_steps);

  std::vector<ImageInput> images;
  for (const auto& d : data) images.push_back(make_image_input(d));

  objectives::MaskRates rates = sc.rates;
  if (sc.stage == Stage::Sparse) rates.edge = 0.0;  // no edge prediction outside warm-up

  Adam adam(model.parameters());
  std::vector<std::size_t> order(samples.size());
  std::size_t cursor = order.size();
  for (int step = 0; step < total; ++step) {
    model.parameters().zero_grad();
    TrainLogRow row;
    row.step = step;
    json dump = json::array();
    std::vector<SampleRef> this_batch;
    for (int b = 0; b < batch; ++b) {
      if (cursor == order.size()) {
        if (b > 0) break;  // last partial batch of the epoch
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = 0; i + 1 < order.size(); ++i)
          std::swap(order[i], order[i + rng.uniform_int(order.size() - i)]);
        cursor = 0;
      }
      this_batch.push_back(samples[order[cursor++]]);
    }
    const double inv = 1.0 / static_cast<double>(this_batch.size());

    for (const auto& ref : this_batch) {
      const DialogInstance& inst = data[ref.dialog];
      const DialogRound& rd = inst.rounds[static_cast<std::size_t>(ref.round - 1)];
      ad::Tape tape;
      ad::Var loss;
      json info{{"image_id", inst.image_id}, {"round", ref.round}};
      if (sc.stage == Stage::Dense) {
        std::vector<ad::Var> logits;
        for (int c = 0; c < n_cand; ++c) logits.push_back(candidate_logit(model, tape, inst, images[ref.dialog], ref.round, c));
        const ad::Var scores = ad::concat_cols(logits);
        loss = sc.dense_loss == DenseLoss::CrossEntropy ? objectives::ce_dense_loss(scores, *rd.relevance)
                                                         : objectives::listnet_loss(scores, *rd.relevance);
        row.dense += value_of(loss) * inv;
      } else {
        objectives::SampleSpec spec;
        spec.instance = &inst;
        spec.round = ref.round;
        spec.candidate = rd.gt_index;
        spec.label = 1;
        if (sc.stage == Stage::Sparse) {
          const auto pair = draw_nsp_pair(rng, rd.gt_index, n_cand, sc.negative_probability);
          spec.candidate = pair.candidate;
          spec.label = pair.label;
        }
        spec.rates = rates;
        spec.mask_seed = rng.next_u64();
        spec.with_nsp = sc.stage == Stage::Sparse;
        spec.with_gem = sc.stage == Stage::Warmup;
        const auto res = objectives::sample_losses(model, tape, spec);
        const auto& c = res.losses;
        loss = sc.stage == Stage::Warmup ? objectives::warmup_loss(c, sc.weights) : objectives::vd_loss(c);
        row.mlm += value_of(c.mlm) * inv;
        row.mrm += value_of(c.mrm) * inv;
        row.nsp += value_of(c.nsp) * inv;
        row.gem_image += value_of(c.gem_image) * inv;
        row.gem_question += value_of(c.gem_question) * inv;
        row.gem_history += value_of(c.gem_history) * inv;
        info["candidate"] = spec.candidate;
        info["label"] = spec.label;
        info["mask_plan"] = objectives::to_json(res.plan);
      }
      dump.push_back(info);
      const double lv = value_of(loss);
      if (!std::isfinite(lv)) {
        std::string where = "not written (no dump directory)";
        if (!dump_dir.empty()) {
          where = sample_dump_path(dump_dir, step);
          write_text_file(where, json{{"stage", objectives::stage_name(sc.stage)}, {"step", step}, {"batch", dump}}.dump(2));
        }
        throw Error(ErrorCode::Numeric, "non-finite loss at step " + std::to_string(step) + " (image " +
                                            std::to_string(inst.image_id) + ", round " + std::to_string(ref.round) +
                                            "); batch dump: " + where);
      }
      row.total += lv * inv;
      tape.backward(ad::scale(loss, inv));
    }
    const auto [lr_b, lr_g] = stage_rates(sc, step, total);
    row.lr_backbone = lr_b;
    row.lr_gnn = lr_g;
    row.samples = static_cast<int>(this_batch.size());
    adam.step(lr_b, lr_g);
    result.log.push_back(row);
  }
  result.steps = total;
  result.rng_state = rng.state();
  return result;
}

std::string loss_log_csv(const TrainResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "step,mlm,mrm,nsp,gem_image,gem_question,gem_history,dense,total\n";
  for (const auto& x : r.log)
    os << x.step << ',' << x.mlm << ',' << x.mrm << ',' << x.nsp << ',' << x.gem_image << ',' << x.gem_question << ','
       << x.gem_history << ',' << x.dense << ',' << x.total << '\n';
  return os.str();
}

std::string schedule_csv(const TrainResult& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "step,lr_backbone,lr_gnn\n";
  for (const auto& x : r.log) os << x.step << ',' << x.lr_backbone << ',' << x.lr_gnn << '\n';
  return os.str();
}

std::vector<double> score_candidates(const VdGrModel& model, const DialogInstance& inst, int round) {
  require(round >= 1 && round <= static_cast<int>(inst.rounds.size()), "round out of range");
  const auto& rd = inst.rounds[static_cast<std::size_t>(round - 1)];
  require(static_cast<int>(rd.candidates.size()) == model.config().num_candidates,
          "round has " + std::to_string(rd.candidates.size()) + " candidates, model is configured for " +
              std::to_string(model.config().num_candidates));
  require(inst.has_features(), "scoring needs region features");
  const ImageInput image = make_image_input(inst);
  std::vector<double> scores;
  for (int c = 0; c < static_cast<int>(rd.candidates.size()); ++c) {
    ad::Tape tape;
    scores.push_back(objectives::nsp_score(value_of(candidate_logit(model, tape, inst, image, round, c))));
  }
  return scores;
}

EvalResult evaluate(const VdGrModel& model, const std::vector<DialogInstance>& data, const EvalOptions& opts) {
  EvalResult res;
  for (const auto& inst : data) {
    const ImageInput image = opts.dump_attention ? make_image_input(inst) : ImageInput{};
    for (int r = 1; r <= static_cast<int>(inst.rounds.size()); ++r) {
      const auto& rd = inst.rounds[static_cast<std::size_t>(r - 1)];
      const auto scores = score_candidates(model, inst, r);
      res.rounds.push_back(ranking::score_round(inst.image_id, r, scores, rd.gt_index, rd.relevance ? &*rd.relevance : nullptr));
      if (opts.dump_attention && model.config().use_gnn) {
        ad::Tape tape;
        std::vector<mmgnn::AttentionTrace> traces;
        candidate_logit(model, tape, inst, image, r, rd.gt_index, &traces);
        for (const auto& t : traces) {
          auto edges = json::array();
          for (const auto& [s, d, w] : t.edges) edges.push_back({s, d, w});
          res.attention.push_back({{"image_id", inst.image_id},
                                   {"round", r},
                                   {"modality", graphcon::modality_name(t.modality)},
                                   {"vdgr_layer", t.layer},
                                   {"gnn_layer", t.gnn_layer},
                                   {"edges", edges}});
        }
      }
    }
  }
  res.report = ranking::metrics_report(res.rounds);
  return res;
}

EvalResult evaluate_ensemble(const std::vector<const VdGrModel*>& models, const std::vector<DialogInstance>& data) {
  require(!models.empty(), "ensemble needs at least one model");
  EvalResult res;
  for (const auto& inst : data)
    for (int r = 1; r <= static_cast<int>(inst.rounds.size()); ++r) {
      std::vector<std::vector<double>> member_scores;
      for (const VdGrModel* m : models) member_scores.push_back(score_candidates(*m, inst, r));
      const auto& rd = inst.rounds[static_cast<std::size_t>(r - 1)];
      res.rounds.push_back(ranking::score_round(inst.image_id, r, ranking::ensemble_scores(member_scores), rd.gt_index,
                                                rd.relevance ? &*rd.relevance : nullptr));
    }
  res.report = ranking::metrics_report(res.rounds);
  res.report["members"] = models.size();
  return res;
}

void check_config_compatible(const ModelConfig& requested, const ModelConfig& checkpoint) {
  const std::string a = config_hash(requested), b = config_hash(checkpoint);
  if (a != b)
    throw Error(ErrorCode::ConfigMismatch, "configuration mismatch: requested " + a + ", checkpoint " + b);
}

PipelineConfig load_pipeline_config(const std::string& path) {
  const RunConfig w = load_run_config(path, Stage::Warmup);
  const RunConfig s = load_run_config(path, Stage::Sparse);
  PipelineConfig p;
  p.model = s.model;
  p.warmup = w.stage;
  p.sparse = s.stage;
  return p;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const std::vector<DialogInstance>& data) {
  PipelineResult out;
  out.model = std::make_unique<VdGrModel>(cfg.model, Vocabulary::build(data));
  if (cfg.with_warmup) train_stage(*out.model, data, cfg.warmup);
  train_stage(*out.model, data, cfg.sparse);
  const auto eval = evaluate(*out.model, data);
  out.train_metrics = ranking::aggregate(eval.rounds);
  return out;
}

PipelineConfig ablated(const PipelineConfig& base, const std::string& name) {
  PipelineConfig p = base;
  if (name == "lambda0") p.model.lambda = 0.0;
  else if (name == "no_warmup") p.with_warmup = false;
  else if (name == "no_sharing") p.model.share_gnn = false;
  else if (name == "no_hub") p.model.use_hub = false;
  else fail("unknown ablation '" + name + "' (expected lambda0, no_warmup, no_sharing or no_hub)");
  return p;
}

json run_ablation(const std::string& name, const PipelineConfig& base, const std::vector<DialogInstance>& data,
                  const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), "ablation needs at least one seed");
  const PipelineConfig variant = ablated(base, name);
  auto full_runs = json::array(), ablated_runs = json::array();
  double full_mrr = 0, ablated_mrr = 0;
  for (std::uint64_t seed : seeds) {
    auto seeded = [seed](PipelineConfig p) {
      p.model.seed = seed;
      p.warmup.seed = seed;
      p.sparse.seed = seed;
      return p;
    };
    const auto f = run_pipeline(seeded(base), data).train_metrics;
    const auto a = run_pipeline(seeded(variant), data).train_metrics;
    full_runs.push_back(ranking::to_json(f));
    ablated_runs.push_back(ranking::to_json(a));
    full_mrr += f.mrr;
    ablated_mrr += a.mrr;
  }
  full_mrr /= static_cast<double>(seeds.size());
  ablated_mrr /= static_cast<double>(seeds.size());
  return {{"ablation", name},
          {"seeds", seeds},
          {"full", {{"runs", full_runs}, {"mean_mrr", full_mrr}}},
          {"ablated", {{"runs", ablated_runs}, {"mean_mrr", ablated_mrr}}},
          {"direction_holds", full_mrr >= ablated_mrr}};
}

std::string ablation_table(const json& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "ablation: " << report.at("ablation").get<std::string>() << "\n";
  os << "seed        full_mrr  full_r1   abl_mrr   abl_r1\n";
  const auto& seeds = report.at("seeds");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& f = report.at("full").at("runs")[i];
    const auto& a = report.at("ablated").at("runs")[i];
    os << std::left << std::setw(12) << seeds[i].get<std::uint64_t>() << std::right << f.at("mrr").get<double>() << "    "
       << f.at("r1").get<double>() << "    " << a.at("mrr").get<double>() << "    " << a.at("r1").get<double>() << "\n";
  }
  os << "mean        " << report.at("full").at("mean_mrr").get<double>() << "              "
     << report.at("ablated").at("mean_mrr").get<double>() << "\n";
  os << (report.at("direction_holds").get<bool>() ? "direction: full >= ablated\n"
                                                 : "direction: FLAGGED (ablated variant scored higher)\n");
  return os.str();
}

}  // namespace vdgr
