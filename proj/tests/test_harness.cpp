#include "support/fixtures.hpp"
#include "vdgr/checkpoint.hpp"
#include "vdgr/config.hpp"
#include "vdgr/dataset.hpp"
#include "vdgr/error.hpp"
#include "vdgr/graph_io.hpp"
#include "vdgr/optimizer.hpp"
#include "vdgr/toydata.hpp"
#include "vdgr/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

using namespace vdgr;
namespace fs = std::filesystem;
using objectives::Stage;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("VDGR_CACHE_DIR");
  const fs::path root = env && *env ? fs::path(env) : fs::temp_directory_path() / "vdgr_harness_tests";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ToyDataOptions small_toy(std::uint64_t seed = 1) {
  ToyDataOptions o;
  o.seed = seed;
  o.dialogs = 4;
  o.rounds = 2;
  o.regions = 4;
  return o;
}

StageConfig quick_stage(Stage s, int steps = 4) {
  StageConfig c = StageConfig::defaults(s);
  c.max_steps = steps;
  c.batch_size = s == Stage::Dense ? 1 : 4;
  c.backbone_lr_max = c.gnn_lr_max = 1e-3;
  c.backbone_lr_min = c.gnn_lr_min = 0;
  c.seed = 9;
  return c;
}

std::vector<double> flat_parameters(const VdGrModel& m) {
  std::vector<double> out;
  for (const auto& p : m.parameters().all()) out.insert(out.end(), p.value.data(), p.value.data() + p.value.size());
  return out;
}

}  // namespace

// ---- configuration ----

TEST(Config, StageDefaultsFollowThePublishedSchedule) {
  const auto w = StageConfig::defaults(Stage::Warmup), s = StageConfig::defaults(Stage::Sparse),
             d = StageConfig::defaults(Stage::Dense);
  EXPECT_EQ(w.epochs, 5);
  EXPECT_EQ(s.epochs, 20);
  EXPECT_EQ(d.epochs, 3);
  EXPECT_DOUBLE_EQ(s.backbone_lr_max, 5e-6);
  EXPECT_DOUBLE_EQ(s.gnn_lr_max, 5e-4);
  EXPECT_DOUBLE_EQ(w.rates.edge, 0.15);
  EXPECT_DOUBLE_EQ(w.rates.text, 0.1);
  EXPECT_DOUBLE_EQ(w.weights.alpha1, 1.0);
  EXPECT_DOUBLE_EQ(w.weights.alpha2, 1.0);
  const ModelConfig m;
  EXPECT_EQ(m.gnn_layers, 2);
  EXPECT_EQ(m.gnn_heads, 4);
  EXPECT_DOUBLE_EQ(m.lambda, 0.5);
}

TEST(Config, ParsesKeyValuesWithStagePrefixes) {
  const std::string text =
      "# comment\n"
      "num_gnn_layers = 1\n"
      "residual_connection_coefficient = 0.25  # trailing comment\n"
      "effective_batch_size = 8\n"
      "dense.effective_batch_size = 1\n"
      "dense_loss = listnet\n"
      "\n"
      "use_hub_nodes = false\n";
  const auto kv = parse_key_values(text);
  const auto sparse = run_config_from_map(kv, Stage::Sparse);
  const auto dense = run_config_from_map(kv, Stage::Dense);
  EXPECT_EQ(sparse.model.gnn_layers, 1);
  EXPECT_DOUBLE_EQ(sparse.model.lambda, 0.25);
  EXPECT_FALSE(sparse.model.use_hub);
  EXPECT_EQ(sparse.stage.batch_size, 8);
  EXPECT_EQ(dense.stage.batch_size, 1);
  EXPECT_EQ(dense.stage.dense_loss, DenseLoss::ListNet);
  EXPECT_EQ(get_setting(sparse, "num_gnn_layers"), "1");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(run_config_from_map(parse_key_values("no_such_key = 1\n"), Stage::Sparse), Error);
  EXPECT_THROW(run_config_from_map(parse_key_values("num_gnn_layers = many\n"), Stage::Sparse), Error);
  EXPECT_THROW(parse_key_values("just a line\n"), Error);
}

TEST(Config, RenderRoundTrips) {
  auto cfg = run_config_from_map({}, Stage::Warmup);
  apply_setting(cfg, "text_node_dim", "32");
  apply_setting(cfg, "alpha2", "0");
  apply_setting(cfg, "data_dir", "somewhere");
  const auto back = run_config_from_map(parse_key_values(render_run_config(cfg)), Stage::Warmup);
  EXPECT_EQ(back.model, cfg.model);
  EXPECT_EQ(render_run_config(back), render_run_config(cfg));
}

TEST(Config, HashIgnoresSeedButNotArchitecture) {
  ModelConfig a;
  ModelConfig b = a;
  b.seed = 99;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.use_hub = false;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(model_config_from_json(model_config_to_json(b)), b);
}

TEST(Config, MismatchQuotesBothHashes) {
  ModelConfig trained;
  ModelConfig requested = trained;
  requested.use_hub = false;
  try {
    check_config_compatible(requested, trained);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigMismatch);
    EXPECT_NE(std::string(e.what()).find(config_hash(trained)), std::string::npos);
    EXPECT_NE(std::string(e.what()).find(config_hash(requested)), std::string::npos);
  }
  EXPECT_NO_THROW(check_config_compatible(trained, trained));
}

// ---- optimisation ----

TEST(Schedule, ClosedForm) {
  const LinearSchedule s{1e-5, 1e-4, 10, 100, true};
  EXPECT_EQ(s.rate(0), 0.0);
  EXPECT_NEAR(s.rate(5), 5e-5, 1e-18);
  EXPECT_DOUBLE_EQ(s.rate(10), 1e-4);
  for (int step = 10; step <= 100; ++step)
    EXPECT_NEAR(s.rate(step), 1e-4 + (1e-5 - 1e-4) * (step - 10) / 90.0, 1e-18);
  const LinearSchedule flat{0, 2e-3, 5, 50, false};
  EXPECT_DOUBLE_EQ(flat.rate(0), 2e-3);
  EXPECT_EQ(warmup_steps_for(500, 0.1), 50);
  EXPECT_EQ(warmup_steps_for(3, 0.1), 1);
}

TEST(Schedule, EmittedLogMatchesRecomputation) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  auto st = quick_stage(Stage::Sparse, 12);
  st.backbone_lr_min = 1e-5;
  st.gnn_lr_min = 2e-4;
  st.warmup_fraction = 0.25;
  const auto res = train_stage(m, data, st);
  ASSERT_EQ(res.log.size(), 12u);
  EXPECT_EQ(res.log[0].lr_backbone, 0.0);
  double peak = 0;
  for (const auto& row : res.log) {
    const LinearSchedule b{st.backbone_lr_min, st.backbone_lr_max, 3, 12, true};
    const LinearSchedule g{st.gnn_lr_min, st.gnn_lr_max, 3, 12, true};
    EXPECT_DOUBLE_EQ(row.lr_backbone, b.rate(row.step));
    EXPECT_DOUBLE_EQ(row.lr_gnn, g.rate(row.step));
    peak = std::max(peak, row.lr_backbone);
  }
  EXPECT_DOUBLE_EQ(peak, st.backbone_lr_max);
  std::istringstream csv(schedule_csv(res));
  std::string header;
  std::getline(csv, header);
  EXPECT_NE(header.find("step"), std::string::npos);
  int lines = 0;
  for (std::string line; std::getline(csv, line);) ++lines;
  EXPECT_EQ(lines, 12);
}

TEST(Schedule, ToyScaleMultipliesRates) {
  auto st = quick_stage(Stage::Sparse);
  st.warmup_fraction = 0;
  const auto [b, g] = stage_rates(st, 0, 10);
  st.toy_lr_scale = true;
  const auto [b10, g10] = stage_rates(st, 0, 10);
  EXPECT_DOUBLE_EQ(b10, 10 * b);
  EXPECT_DOUBLE_EQ(g10, 10 * g);
}

TEST(Adam, FirstStepMovesBySignTimesRate) {
  ParameterSet ps;
  Parameter& b = ps.zeros("b", ad::ParamGroup::Backbone, 1, 2);
  Parameter& g = ps.zeros("g", ad::ParamGroup::Gnn, 1, 1);
  b.grad << 3.0, -0.5;
  g.grad << 2.0;
  Adam opt(ps);
  opt.step(0.1, 0.01);
  // Bias-corrected first step is rate * g / (|g| + eps).
  EXPECT_NEAR(b.value(0, 0), -0.1, 1e-8);
  EXPECT_NEAR(b.value(0, 1), 0.1, 1e-8);
  EXPECT_NEAR(g.value(0, 0), -0.01, 1e-8);
  EXPECT_EQ(opt.steps_taken(), 1);
}

// ---- data ----

TEST(ToyData, SameSeedSameBytes) {
  const auto a = scratch("toy_a"), b = scratch("toy_b");
  generate_toy_dataset(small_toy(5), a.string(), "train");
  generate_toy_dataset(small_toy(5), b.string(), "train");
  for (const auto& f : {"visdial_train.json", "dense_train.json", "features_train.jsonl", "parses_train.jsonl",
                        "corefs_train.jsonl"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto c = scratch("toy_c");
  generate_toy_dataset(small_toy(6), c.string(), "train");
  EXPECT_NE(slurp(a / "features_train.jsonl"), slurp(c / "features_train.jsonl"));
}

TEST(ToyData, CandidatesContainTheGroundTruth) {
  ToyDataOptions o;
  o.seed = 2;
  o.dialogs = 30;
  o.rounds = 10;
  o.candidates = 25;
  for (const auto& d : generate_toy_dialogs(o)) {
    ASSERT_EQ(d.rounds.size(), 10u);
    for (const auto& r : d.rounds) {
      ASSERT_EQ(r.candidates.size(), 25u);
      ASSERT_EQ(r.candidates[static_cast<std::size_t>(r.gt_index)], r.answer);
      ASSERT_EQ(std::set<std::string>(r.candidates.begin(), r.candidates.end()).size(), r.candidates.size());
    }
  }
}

TEST(ToyData, EmittedParsesRebuildTheSameGraphs) {
  const auto dir = scratch("toy_parse");
  ToyDataOptions o = small_toy(7);
  o.rounds = 6;
  generate_toy_dataset(o, dir.string(), "train");
  const auto in_memory = generate_toy_dialogs(o);
  const auto records = graphcon::read_jsonl((dir / "parses_train.jsonl").string());
  std::size_t i = 0;
  for (const auto& d : in_memory)
    for (std::size_t r = 0; r < d.rounds.size(); ++r, ++i) {
      const auto& rec = records.at(i);
      std::vector<graphcon::DependencyEdge> edges;
      for (const auto& e : rec.at("edges")) edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<std::string>()});
      ASSERT_EQ(graphcon::build_question_graph(edges, rec.at("num_tokens").get<int>()), d.question_graphs[r]);
      // Each parse is a tree over the question tokens.
      ASSERT_EQ(static_cast<int>(edges.size()), rec.at("num_tokens").get<int>() - 1);
    }
  EXPECT_EQ(i, records.size());
}

TEST(Dataset, MinimalHandwrittenFileLoads) {
  nlohmann::json dialog = nlohmann::json::array();
  for (int r = 0; r < 10; ++r) dialog.push_back({{"question", r % 2}, {"answer", 0}, {"answer_options", {0, 1}}, {"gt_index", 0}});
  const nlohmann::json file{{"data",
                             {{"questions", {"is it red", "what is it"}},
                              {"answers", {"yes", "no"}},
                              {"dialogs", {{{"image_id", 5}, {"caption", "a thing"}, {"dialog", dialog}}}}}}};
  const auto data = parse_visdial_json(file);
  ASSERT_EQ(data.size(), 1u);
  EXPECT_EQ(data[0].rounds.size(), 10u);
  EXPECT_EQ(data[0].rounds[1].question, "what is it");
  EXPECT_EQ(data[0].rounds[1].candidates, (std::vector<std::string>{"yes", "no"}));
}

TEST(Dataset, DenseRelevanceAttachesToItsRound) {
  auto data = generate_toy_dialogs(small_toy());
  for (auto& d : data)
    for (auto& r : d.rounds) r.relevance.reset();
  std::vector<double> rel(10, 0.0);
  rel[3] = 1.0;
  attach_dense(data, nlohmann::json::array({{{"image_id", data[2].image_id}, {"round_id", 2}, {"gt_relevance", rel}}}));
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t r = 0; r < data[i].rounds.size(); ++r)
      EXPECT_EQ(data[i].rounds[r].relevance.has_value(), i == 2 && r == 1);
  EXPECT_EQ(*data[2].rounds[1].relevance, rel);
  EXPECT_THROW(
      attach_dense(data, nlohmann::json::array({{{"image_id", 999}, {"round_id", 1}, {"gt_relevance", rel}}})), Error);
  EXPECT_THROW(attach_dense(data, nlohmann::json::array(
                                      {{{"image_id", data[0].image_id}, {"round_id", 3}, {"gt_relevance", rel}}})),
               Error);
}

TEST(Dataset, ExportLoadRoundTrip) {
  const auto dir = scratch("roundtrip");
  const auto original = generate_toy_dialogs(small_toy(8));
  write_dataset(original, dir.string(), "val");
  const auto loaded = load_dataset(DatasetFiles::in(dir.string(), "val"));
  ASSERT_EQ(loaded.size(), original.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const auto &a = original[i], &b = loaded[i];
    EXPECT_EQ(a.image_id, b.image_id);
    EXPECT_EQ(a.caption, b.caption);
    EXPECT_EQ(a.boxes, b.boxes);
    EXPECT_EQ(a.region_features, b.region_features);
    EXPECT_EQ(a.image_graph, b.image_graph);
    EXPECT_EQ(a.history_graph, b.history_graph);
    EXPECT_EQ(a.question_graphs, b.question_graphs);
    ASSERT_EQ(a.rounds.size(), b.rounds.size());
    for (std::size_t r = 0; r < a.rounds.size(); ++r) {
      EXPECT_EQ(a.rounds[r].question, b.rounds[r].question);
      EXPECT_EQ(a.rounds[r].candidates, b.rounds[r].candidates);
      EXPECT_EQ(a.rounds[r].gt_index, b.rounds[r].gt_index);
      EXPECT_EQ(a.rounds[r].relevance, b.rounds[r].relevance);
    }
  }
  // Exporting what was loaded reproduces the same files.
  const auto again = scratch("roundtrip_again");
  write_dataset(loaded, again.string(), "val");
  for (const auto& f : {"visdial_val.json", "dense_val.json", "features_val.jsonl", "parses_val.jsonl", "corefs_val.jsonl"})
    EXPECT_EQ(slurp(dir / f), slurp(again / f)) << f;
}

TEST(Dataset, TextOnlyInstancesLoadButCannotTrain) {
  const auto dir = scratch("text_only");
  const auto original = generate_toy_dialogs(small_toy(9));
  write_dataset(original, dir.string(), "train");
  fs::remove(dir / "features_train.jsonl");
  const auto loaded = load_dataset(DatasetFiles::in(dir.string(), "train"));
  ASSERT_EQ(loaded.size(), original.size());
  EXPECT_FALSE(loaded[0].has_features());
  VdGrModel m(test_support::small_config(), Vocabulary::build(loaded));
  EXPECT_THROW(train_stage(m, loaded, quick_stage(Stage::Sparse)), Error);
}

TEST(Dataset, MalformedFilesAreParseErrors) {
  const auto dir = scratch("malformed");
  {
    std::ofstream(dir / "visdial_train.json") << "{\"data\": {\"questions\": [], \"answers\": []}}";
  }
  try {
    load_dataset(DatasetFiles::in(dir.string(), "train"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Parse);
  }
  EXPECT_THROW(load_dataset(DatasetFiles::in((dir / "missing").string(), "train")), Error);
}

// ---- checkpoints ----

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto dir = scratch("ckpt");
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  const auto ck = snapshot(m, Rng(3).state(), "sparse", 17);
  save_checkpoint((dir / "a.ckpt").string(), ck);
  const auto back = load_checkpoint((dir / "a.ckpt").string());
  EXPECT_EQ(back, ck);
  save_checkpoint((dir / "b.ckpt").string(), back);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  const auto restored = restore_model(back);
  EXPECT_EQ(flat_parameters(*restored), flat_parameters(m));
  EXPECT_EQ(serialize_checkpoint(snapshot(*restored, ck.rng_state, "sparse", 17)), serialize_checkpoint(ck));
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  const std::string bytes = serialize_checkpoint(snapshot(m));
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 8)), Error);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), Error);
}

TEST(Checkpoint, LayoutMismatchRejected) {
  const auto data = generate_toy_dialogs(small_toy());
  const auto v = Vocabulary::build(data);
  VdGrModel a(test_support::small_config(), v);
  auto cfg = test_support::small_config();
  cfg.share_gnn = false;
  VdGrModel b(cfg, v);
  try {
    load_parameters(b, snapshot(a));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigMismatch);
  }
}

// ---- training ----

TEST(Train, ZeroEpochsLeavesTheInitialisation) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  const std::string before = serialize_checkpoint(snapshot(m));
  auto st = quick_stage(Stage::Sparse);
  st.epochs = 0;
  st.max_steps = 0;
  const auto res = train_stage(m, data, st);
  EXPECT_EQ(res.steps, 0);
  EXPECT_EQ(serialize_checkpoint(snapshot(m)), before);
}

TEST(Train, StagesTakeDifferentTrajectories) {
  const auto data = generate_toy_dialogs(small_toy());
  const auto v = Vocabulary::build(data);
  VdGrModel a(test_support::small_config(), v), b(test_support::small_config(), v);
  auto warm = quick_stage(Stage::Warmup);
  warm.weights.alpha2 = 0;
  const auto ra = train_stage(a, data, warm);
  const auto rb = train_stage(b, data, quick_stage(Stage::Sparse));
  EXPECT_NE(flat_parameters(a), flat_parameters(b));
  // With alpha2 = 0 the edge losses are still logged but leave the total.
  const auto& last = ra.log.back();
  EXPECT_EQ(last.nsp, 0.0);
  EXPECT_NEAR(last.total, last.mlm + last.mrm, 1e-12);
  EXPECT_GT(rb.log.back().nsp, 0.0);
}

TEST(Train, WarmupLogsEdgePrediction) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  auto st = quick_stage(Stage::Warmup, 3);
  st.rates.edge = 0.5;
  const auto res = train_stage(m, data, st);
  double gem = 0;
  for (const auto& row : res.log) {
    gem += row.gem_image + row.gem_question;
    EXPECT_TRUE(std::isfinite(row.total));
  }
  EXPECT_GT(gem, 0.0);
  const auto csv = loss_log_csv(res);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,mlm,mrm,nsp,gem_image,gem_question,gem_history,dense,total");
}

TEST(Train, DeterministicGivenSeed) {
  const auto data = generate_toy_dialogs(small_toy());
  const auto v = Vocabulary::build(data);
  VdGrModel a(test_support::small_config(), v), b(test_support::small_config(), v);
  const auto ra = train_stage(a, data, quick_stage(Stage::Sparse, 6));
  const auto rb = train_stage(b, data, quick_stage(Stage::Sparse, 6));
  EXPECT_EQ(serialize_checkpoint(snapshot(a, ra.rng_state)), serialize_checkpoint(snapshot(b, rb.rng_state)));
  EXPECT_EQ(loss_log_csv(ra), loss_log_csv(rb));
}

TEST(Train, DenseStageUsesAnnotatedRoundsAndCountsSkips) {
  auto data = generate_toy_dialogs(small_toy());
  int annotated = 0;
  for (auto& d : data)
    for (auto& r : d.rounds) annotated += r.relevance.has_value();
  ASSERT_GT(annotated, 1);
  // Blank one annotation: it must be skipped and counted, not trained on.
  for (auto& d : data)
    for (auto& r : d.rounds)
      if (r.relevance) {
        std::fill(r.relevance->begin(), r.relevance->end(), 0.0);
        goto blanked;
      }
blanked:
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  for (auto loss : {DenseLoss::CrossEntropy, DenseLoss::ListNet}) {
    auto st = quick_stage(Stage::Dense, 3);
    st.dense_loss = loss;
    const auto res = train_stage(m, data, st);
    EXPECT_EQ(res.skipped_rounds, 1);
    EXPECT_EQ(res.steps, 3);
    for (const auto& row : res.log) {
      EXPECT_GT(row.dense, 0.0);
      EXPECT_EQ(row.samples, 1);
    }
  }
}

TEST(Train, DenseStageWithoutAnnotationsRejected) {
  auto data = generate_toy_dialogs(small_toy());
  for (auto& d : data)
    for (auto& r : d.rounds) r.relevance.reset();
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  EXPECT_THROW(train_stage(m, data, quick_stage(Stage::Dense)), Error);
}

TEST(Train, NonFiniteLossDumpsTheBatch) {
  const auto dir = scratch("nan_dump");
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  m.parameters().find("head.nsp_b")->value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    train_stage(m, data, quick_stage(Stage::Sparse), dir.string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Numeric);
  }
  std::vector<fs::path> dumps;
  for (const auto& entry : fs::directory_iterator(dir)) dumps.push_back(entry.path());
  ASSERT_EQ(dumps.size(), 1u);
  const auto j = read_json_file(dumps[0].string());
  ASSERT_FALSE(j.at("batch").empty());
  EXPECT_TRUE(j["batch"][0].contains("mask_plan"));
  EXPECT_NO_THROW(objectives::mask_plan_from_json(j["batch"][0]["mask_plan"]));
}

// ---- scoring and evaluation ----

TEST(Score, IdenticalCandidatesScoreIdentically) {
  auto data = generate_toy_dialogs(small_toy());
  auto& r = data[0].rounds[0];
  r.candidates[5] = r.candidates[2];
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  const auto s = score_candidates(m, data[0], 1);
  ASSERT_EQ(s.size(), 10u);
  EXPECT_EQ(s[5], s[2]);
  for (double x : s) EXPECT_TRUE(x > 0 && x < 1);
  // Each candidate is an independent forward: scoring twice gives the same bits.
  EXPECT_EQ(score_candidates(m, data[0], 1), s);
}

TEST(Score, CandidateCountMustMatchTheConfig) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(12), Vocabulary::build(data));
  EXPECT_THROW(score_candidates(m, data[0], 1), Error);
}

TEST(Evaluate, RepeatableReportsAndAttentionExport) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  EvalOptions opts;
  opts.dump_attention = true;
  const auto a = evaluate(m, data, opts);
  const auto b = evaluate(m, data, opts);
  EXPECT_EQ(a.report.dump(), b.report.dump());
  EXPECT_EQ(a.rounds.size(), 8u);
  EXPECT_TRUE(a.report.contains("per_round"));
  // L layers x K GNN layers x 3 modalities per evaluated round.
  EXPECT_EQ(a.attention.size(), 8u * 2 * 2 * 3);
  const auto& rec = a.attention.front();
  for (const char* key : {"image_id", "round", "modality", "vdgr_layer", "gnn_layer", "edges"})
    EXPECT_TRUE(rec.contains(key)) << key;
}

TEST(Evaluate, EnsembleOfCopiesKeepsTheRanking) {
  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel m(test_support::small_config(), Vocabulary::build(data));
  const auto single = evaluate(m, data);
  const auto ens = evaluate_ensemble({&m, &m, &m}, data);
  ASSERT_EQ(single.rounds.size(), ens.rounds.size());
  for (std::size_t i = 0; i < single.rounds.size(); ++i) EXPECT_EQ(single.rounds[i].ranks, ens.rounds[i].ranks);
  EXPECT_THROW(evaluate_ensemble({}, data), Error);
}

// ---- ablations ----

TEST(Ablation, SwitchesAreWired) {
  PipelineConfig base;
  base.model = test_support::small_config();
  EXPECT_DOUBLE_EQ(ablated(base, "lambda0").model.lambda, 0.0);
  EXPECT_FALSE(ablated(base, "no_warmup").with_warmup);
  EXPECT_FALSE(ablated(base, "no_sharing").model.share_gnn);
  EXPECT_FALSE(ablated(base, "no_hub").model.use_hub);
  EXPECT_THROW(ablated(base, "no_transformer"), Error);

  const auto data = generate_toy_dialogs(small_toy());
  VdGrModel separate(ablated(base, "no_sharing").model, Vocabulary::build(data));
  EXPECT_EQ(separate.gnn_parameter_sets(), static_cast<std::size_t>(base.model.vdgr_layers));
}

TEST(Ablation, ReportComparesBothArms) {
  PipelineConfig base;
  base.model = test_support::small_config();
  base.warmup = quick_stage(Stage::Warmup, 2);
  base.sparse = quick_stage(Stage::Sparse, 3);
  const auto data = generate_toy_dialogs(small_toy());
  const auto report = run_ablation("no_hub", base, data, {1, 2});
  EXPECT_EQ(report["ablation"], "no_hub");
  EXPECT_EQ(report["full"]["runs"].size(), 2u);
  EXPECT_EQ(report["ablated"]["runs"].size(), 2u);
  EXPECT_TRUE(report["direction_holds"].is_boolean());
  const auto table = ablation_table(report);
  EXPECT_NE(table.find("no_hub"), std::string::npos);
  EXPECT_EQ(table.find("FLAGGED") != std::string::npos, !report["direction_holds"].get<bool>());
}

TEST(Pipeline, LoadsStageSectionsFromOneFile) {
  const auto dir = scratch("pipeline");
  {
    std::ofstream(dir / "run.conf") << "text_node_dim = 16\nimage_node_dim = 16\nwarmup.max_steps = 7\n"
                                       "sparse.max_steps = 9\nseed = 4\n";
  }
  const auto p = load_pipeline_config((dir / "run.conf").string());
  EXPECT_EQ(p.model.text_dim, 16);
  EXPECT_EQ(p.warmup.max_steps, 7);
  EXPECT_EQ(p.sparse.max_steps, 9);
  EXPECT_EQ(p.warmup.stage, Stage::Warmup);
  EXPECT_EQ(p.sparse.seed, 4u);
}

TEST(CacheDir, EnvironmentOverride) {
  DataConfig d;
  d.output_dir = "explicit";
  EXPECT_EQ(output_dir(d), "explicit");
  d.output_dir.clear();
  const char* env = std::getenv("VDGR_CACHE_DIR");
  EXPECT_EQ(output_dir(d), env && *env ? std::string(env) : std::string("vdgr_cache"));
}
