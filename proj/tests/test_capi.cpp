#include <vdgr/vdgr.h>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("VDGR_CACHE_DIR");
  const fs::path root = env && *env ? fs::path(env) : fs::temp_directory_path() / "vdgr_capi_tests";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string take(char* s) {
  std::string out = s ? s : "";
  vdgr_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct ConfigDeleter {
  void operator()(vdgr_config* c) const { vdgr_config_free(c); }
};
struct DatasetDeleter {
  void operator()(vdgr_dataset* d) const { vdgr_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(vdgr_model* m) const { vdgr_model_free(m); }
};
using ConfigPtr = std::unique_ptr<vdgr_config, ConfigDeleter>;
using DatasetPtr = std::unique_ptr<vdgr_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<vdgr_model, ModelDeleter>;

ConfigPtr small_config(const fs::path& data_dir, const char* stage = "sparse") {
  vdgr_config* raw = nullptr;
  EXPECT_EQ(vdgr_config_default(stage, &raw), VDGR_OK);
  ConfigPtr cfg(raw);
  const std::vector<std::pair<const char*, std::string>> settings{
      {"text_node_dim", "16"},       {"image_node_dim", "16"},    {"region_feature_dim", "16"},
      {"num_attention_heads", "2"},  {"text_ffn_dim", "32"},      {"image_ffn_dim", "32"},
      {"max_text_tokens", "64"},     {"max_image_regions", "5"},  {"num_candidates", "10"},
      {"effective_batch_size", "4"}, {"max_steps", "3"},          {"data_dir", data_dir.string()},
      {"output_dir", (data_dir / "out").string()}};
  for (const auto& [k, v] : settings) EXPECT_EQ(vdgr_config_set(cfg.get(), k, v.c_str()), VDGR_OK) << k;
  return cfg;
}

class CApi : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = scratch(::testing::UnitTest::GetInstance()->current_test_info()->name());
    ASSERT_EQ(vdgr_generate_toy_dataset(dir_.string().c_str(), "train", 3, 4, 4, 10, 2, 16), VDGR_OK)
        << vdgr_last_error();
    cfg_ = small_config(dir_);
    vdgr_dataset* raw = nullptr;
    ASSERT_EQ(vdgr_dataset_load(cfg_.get(), "train", &raw), VDGR_OK) << vdgr_last_error();
    data_.reset(raw);
  }

  ModelPtr fresh_model() {
    vdgr_model* raw = nullptr;
    EXPECT_EQ(vdgr_model_create(cfg_.get(), data_.get(), &raw), VDGR_OK) << vdgr_last_error();
    return ModelPtr(raw);
  }

  fs::path dir_;
  ConfigPtr cfg_;
  DatasetPtr data_;
};

}  // namespace

TEST(CApiBasics, VersionAndStatusNames) {
  EXPECT_FALSE(std::string(vdgr_version()).empty());
  EXPECT_STREQ(vdgr_status_name(VDGR_OK), "ok");
  EXPECT_STRNE(vdgr_status_name(VDGR_ERR_CONFIG_MISMATCH), vdgr_status_name(VDGR_ERR_PARSE));
  vdgr_string_free(nullptr);
}

TEST(CApiBasics, ConfigGetSetAndHash) {
  vdgr_config* raw = nullptr;
  ASSERT_EQ(vdgr_config_default("warmup", &raw), VDGR_OK);
  ConfigPtr cfg(raw);
  char* value = nullptr;
  ASSERT_EQ(vdgr_config_get(cfg.get(), "num_gnn_layers", &value), VDGR_OK);
  EXPECT_EQ(take(value), "2");
  char* hash = nullptr;
  ASSERT_EQ(vdgr_config_hash(cfg.get(), &hash), VDGR_OK);
  const std::string before = take(hash);
  EXPECT_EQ(before.size(), 16u);
  ASSERT_EQ(vdgr_config_set(cfg.get(), "seed", "77"), VDGR_OK);
  ASSERT_EQ(vdgr_config_hash(cfg.get(), &hash), VDGR_OK);
  EXPECT_EQ(take(hash), before);
  ASSERT_EQ(vdgr_config_set(cfg.get(), "use_hub_nodes", "false"), VDGR_OK);
  ASSERT_EQ(vdgr_config_hash(cfg.get(), &hash), VDGR_OK);
  EXPECT_NE(take(hash), before);

  EXPECT_EQ(vdgr_config_set(cfg.get(), "no_such_key", "1"), VDGR_ERR_PARSE);
  EXPECT_NE(std::string(vdgr_last_error()).find("no_such_key"), std::string::npos);
  EXPECT_EQ(vdgr_config_default("pretrain", &raw), VDGR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(vdgr_config_default("sparse", nullptr), VDGR_ERR_INVALID_ARGUMENT);
}

TEST(CApiBasics, ConfigFileLoad) {
  const auto dir = scratch("config_file");
  std::ofstream(dir / "run.conf") << "num_gnn_layers = 1\nsparse.max_steps = 4\n";
  vdgr_config* raw = nullptr;
  ASSERT_EQ(vdgr_config_load((dir / "run.conf").string().c_str(), "sparse", &raw), VDGR_OK);
  ConfigPtr cfg(raw);
  char* v = nullptr;
  ASSERT_EQ(vdgr_config_get(cfg.get(), "max_steps", &v), VDGR_OK);
  EXPECT_EQ(take(v), "4");
  EXPECT_EQ(vdgr_config_load((dir / "absent.conf").string().c_str(), "sparse", &raw), VDGR_ERR_IO);
}

TEST_F(CApi, DatasetShape) {
  EXPECT_EQ(vdgr_dataset_size(data_.get()), 4u);
  int rounds = 0;
  ASSERT_EQ(vdgr_dataset_rounds(data_.get(), 0, &rounds), VDGR_OK);
  EXPECT_EQ(rounds, 2);
  EXPECT_EQ(vdgr_dataset_rounds(data_.get(), 4, &rounds), VDGR_ERR_INVALID_ARGUMENT);
}

TEST_F(CApi, MissingSplitIsAnIoError) {
  vdgr_dataset* raw = nullptr;
  EXPECT_EQ(vdgr_dataset_load(cfg_.get(), "test", &raw), VDGR_ERR_IO);
  EXPECT_EQ(raw, nullptr);
  EXPECT_STRNE(vdgr_last_error(), "");
}

TEST_F(CApi, SaveLoadAndConfigCheck) {
  auto model = fresh_model();
  EXPECT_GT(vdgr_model_parameter_count(model.get()), 0u);
  const auto a = dir_ / "a.ckpt", b = dir_ / "b.ckpt";
  ASSERT_EQ(vdgr_model_save(model.get(), a.string().c_str()), VDGR_OK);
  vdgr_model* raw = nullptr;
  ASSERT_EQ(vdgr_model_load(a.string().c_str(), &raw), VDGR_OK);
  ModelPtr loaded(raw);
  ASSERT_EQ(vdgr_model_save(loaded.get(), b.string().c_str()), VDGR_OK);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(vdgr_model_parameter_count(loaded.get()), vdgr_model_parameter_count(model.get()));

  EXPECT_EQ(vdgr_model_check_config(loaded.get(), cfg_.get()), VDGR_OK);
  ASSERT_EQ(vdgr_config_set(cfg_.get(), "use_hub_nodes", "false"), VDGR_OK);
  EXPECT_EQ(vdgr_model_check_config(loaded.get(), cfg_.get()), VDGR_ERR_CONFIG_MISMATCH);
  const std::string message = vdgr_last_error();
  char* hash = nullptr;
  ASSERT_EQ(vdgr_config_hash(cfg_.get(), &hash), VDGR_OK);
  EXPECT_NE(message.find(take(hash)), std::string::npos) << message;

  std::ofstream(dir_ / "junk.ckpt") << "not a checkpoint";
  EXPECT_EQ(vdgr_model_load((dir_ / "junk.ckpt").string().c_str(), &raw), VDGR_ERR_PARSE);
}

TEST_F(CApi, TrainScoreEvaluate) {
  auto model = fresh_model();
  const auto logs = dir_ / "logs";
  ASSERT_EQ(vdgr_train(model.get(), cfg_.get(), data_.get(), logs.string().c_str()), VDGR_OK) << vdgr_last_error();
  EXPECT_TRUE(fs::exists(logs / "sparse_loss.csv"));
  EXPECT_TRUE(fs::exists(logs / "sparse_schedule.csv"));

  double scores[10];
  size_t n = 0;
  ASSERT_EQ(vdgr_score_candidates(model.get(), data_.get(), 0, 1, scores, 10, &n), VDGR_OK);
  EXPECT_EQ(n, 10u);
  for (double s : scores) EXPECT_TRUE(s > 0 && s < 1);
  EXPECT_EQ(vdgr_score_candidates(model.get(), data_.get(), 0, 1, scores, 5, &n), VDGR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(vdgr_score_candidates(model.get(), data_.get(), 0, 3, scores, 10, &n), VDGR_ERR_INVALID_ARGUMENT);

  char* report = nullptr;
  const auto out = dir_ / "eval";
  ASSERT_EQ(vdgr_evaluate(model.get(), data_.get(), 1, out.string().c_str(), &report), VDGR_OK) << vdgr_last_error();
  const std::string first = take(report);
  EXPECT_NE(first.find("\"mrr\""), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "metrics.json"));
  EXPECT_TRUE(fs::exists(out / "ranks.txt"));
  EXPECT_TRUE(fs::exists(out / "attention.jsonl"));
  ASSERT_EQ(vdgr_evaluate(model.get(), data_.get(), 0, nullptr, &report), VDGR_OK);
  EXPECT_EQ(take(report), first);

  const vdgr_model* copies[] = {model.get(), model.get()};
  ASSERT_EQ(vdgr_evaluate_ensemble(copies, 2, data_.get(), nullptr, &report), VDGR_OK);
  const std::string ens = take(report);
  EXPECT_NE(ens.find("\"mrr\""), std::string::npos);
  EXPECT_EQ(vdgr_evaluate_ensemble(copies, 0, data_.get(), nullptr, &report), VDGR_ERR_INVALID_ARGUMENT);
}

TEST_F(CApi, BuildGraphsAndStats) {
  const auto out = dir_ / "graphs";
  ASSERT_EQ(vdgr_build_graphs((dir_ / "features_train.jsonl").string().c_str(),
                              (dir_ / "parses_train.jsonl").string().c_str(),
                              (dir_ / "corefs_train.jsonl").string().c_str(), out.string().c_str()),
            VDGR_OK)
      << vdgr_last_error();
  for (const char* f : {"image_graphs.jsonl", "question_graphs.jsonl", "history_graphs.jsonl"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  char* stats = nullptr;
  ASSERT_EQ(vdgr_graph_stats(out.string().c_str(), "image", &stats), VDGR_OK) << vdgr_last_error();
  EXPECT_FALSE(take(stats).empty());
  EXPECT_EQ(vdgr_graph_stats(out.string().c_str(), "audio", &stats), VDGR_ERR_INVALID_ARGUMENT);

  const auto only_boxes = dir_ / "boxes_only";
  ASSERT_EQ(vdgr_build_graphs((dir_ / "features_train.jsonl").string().c_str(), nullptr, nullptr,
                              only_boxes.string().c_str()),
            VDGR_OK);
  EXPECT_TRUE(fs::exists(only_boxes / "image_graphs.jsonl"));
}

TEST_F(CApi, AblationReport) {
  const auto conf = dir_ / "ablate.conf";
  std::ofstream(conf) << "text_node_dim = 16\nimage_node_dim = 16\nregion_feature_dim = 16\nnum_attention_heads = 2\n"
                         "text_ffn_dim = 32\nimage_ffn_dim = 32\nmax_text_tokens = 64\nmax_image_regions = 5\n"
                         "num_candidates = 10\neffective_batch_size = 4\nwarmup.max_steps = 1\nsparse.max_steps = 2\n";
  const uint64_t seeds[] = {1};
  char *report = nullptr, *table = nullptr;
  ASSERT_EQ(vdgr_run_ablation(conf.string().c_str(), "lambda0", data_.get(), seeds, 1, &report, &table), VDGR_OK)
      << vdgr_last_error();
  EXPECT_NE(take(report).find("direction_holds"), std::string::npos);
  EXPECT_NE(take(table).find("lambda0"), std::string::npos);
  EXPECT_EQ(vdgr_run_ablation(conf.string().c_str(), "no_attention", data_.get(), seeds, 1, &report, &table),
            VDGR_ERR_INVALID_ARGUMENT);
}

TEST(CApiBasics, NullHandlesAreRejected) {
  EXPECT_EQ(vdgr_model_save(nullptr, "x"), VDGR_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(vdgr_dataset_size(nullptr), 0u);
  EXPECT_EQ(vdgr_model_parameter_count(nullptr), 0u);
  vdgr_config_free(nullptr);
  vdgr_dataset_free(nullptr);
  vdgr_model_free(nullptr);
}
