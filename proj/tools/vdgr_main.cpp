// Command-line front end. Talks to the library only through the C API.

#include "vdgr/vdgr.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace {

struct Failure {
  vdgr_status status;
};

void check(vdgr_status s) {
  if (s != VDGR_OK) throw Failure{s};
}

struct ConfigPtr {
  vdgr_config* p = nullptr;
  ~ConfigPtr() { vdgr_config_free(p); }
};
struct DatasetPtr {
  vdgr_dataset* p = nullptr;
  ~DatasetPtr() { vdgr_dataset_free(p); }
};
struct ModelPtr {
  vdgr_model* p = nullptr;
  ModelPtr() = default;
  ModelPtr(ModelPtr&& o) noexcept : p(o.p) { o.p = nullptr; }
  ~ModelPtr() { vdgr_model_free(p); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  vdgr_string_free(s);
  return out;
}

std::string setting(const vdgr_config* cfg, const char* key) {
  char* v = nullptr;
  check(vdgr_config_get(cfg, key, &v));
  return take(v);
}

std::string default_out_dir(const vdgr_config* cfg) {
  std::string dir = setting(cfg, "output_dir");
  if (!dir.empty()) return dir;
  const char* env = std::getenv("VDGR_CACHE_DIR");
  return env && *env ? env : "vdgr_cache";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vdgr: graph-augmented visual dialog answer ranking"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write a synthetic toy dataset");
  std::string gen_out, gen_split = "train";
  std::uint64_t gen_seed = 0;
  int gen_dialogs = 8, gen_regions = 4, gen_candidates = 10, gen_rounds = 3, gen_dim = 16;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--split", gen_split, "split name");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--dialogs", gen_dialogs, "number of dialogs");
  gen->add_option("--regions", gen_regions, "regions per image");
  gen->add_option("--candidates", gen_candidates, "answer candidates per round");
  gen->add_option("--rounds", gen_rounds, "rounds per dialog");
  gen->add_option("--region-dim", gen_dim, "region feature width");

  // build-graphs
  auto* bg = app.add_subcommand("build-graphs", "build image/question/history graphs from annotations");
  std::string bg_boxes, bg_parses, bg_corefs, bg_out;
  bg->add_option("--boxes", bg_boxes, "JSONL with image_id and boxes")->required();
  bg->add_option("--parses", bg_parses, "JSONL dependency parses");
  bg->add_option("--corefs", bg_corefs, "JSONL coreference links");
  bg->add_option("--out", bg_out, "output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "run one training stage");
  std::string tr_stage, tr_config, tr_init, tr_out;
  tr->add_option("--stage", tr_stage, "warmup, sparse or dense")->required()->check(CLI::IsMember({"warmup", "sparse", "dense"}));
  tr->add_option("--config", tr_config, "config file")->required();
  tr->add_option("--init", tr_init, "checkpoint to start from");
  tr->add_option("--out", tr_out, "checkpoint to write (default <output_dir>/<stage>.ckpt)");

  // eval
  auto* ev = app.add_subcommand("eval", "rank candidates and report metrics");
  std::string ev_ckpt, ev_split = "val", ev_config, ev_out;
  bool ev_attention = false;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
  ev->add_option("--split", ev_split, "split to evaluate");
  ev->add_option("--config", ev_config, "config file (data location, architecture check)")->required();
  ev->add_option("--out", ev_out, "directory for metrics.json / ranks.txt");
  ev->add_flag("--dump-attention", ev_attention, "write per-node GNN attention traces");

  // ensemble
  auto* en = app.add_subcommand("ensemble", "evaluate the mean score of several checkpoints");
  std::vector<std::string> en_ckpts;
  std::string en_split = "val", en_config, en_out;
  en->add_option("--ckpts", en_ckpts, "checkpoints")->required()->expected(1, -1);
  en->add_option("--split", en_split, "split to evaluate");
  en->add_option("--config", en_config, "config file")->required();
  en->add_option("--out", en_out, "output directory");

  // ablate
  auto* ab = app.add_subcommand("ablate", "train full and ablated pipelines and compare");
  std::string ab_name, ab_config, ab_split = "train";
  std::vector<std::uint64_t> ab_seeds{0};
  ab->add_option("--name", ab_name, "lambda0, no_warmup, no_sharing or no_hub")
      ->required()
      ->check(CLI::IsMember({"lambda0", "no_warmup", "no_sharing", "no_hub"}));
  ab->add_option("--config", ab_config, "config file")->required();
  ab->add_option("--split", ab_split, "training split");
  ab->add_option("--seeds", ab_seeds, "seeds")->delimiter(',');

  // stats
  auto* st = app.add_subcommand("stats", "relation-type histogram of built graphs");
  std::string st_graphs, st_modality;
  st->add_option("--graphs", st_graphs, "directory written by build-graphs")->required();
  st->add_option("--modality", st_modality, "image, question or history")
      ->required()
      ->check(CLI::IsMember({"image", "question", "history"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      check(vdgr_generate_toy_dataset(gen_out.c_str(), gen_split.c_str(), gen_seed, gen_dialogs, gen_regions,
                                      gen_candidates, gen_rounds, gen_dim));
      std::cout << "wrote " << gen_split << " split to " << gen_out << "\n";
    } else if (bg->parsed()) {
      check(vdgr_build_graphs(bg_boxes.c_str(), bg_parses.empty() ? nullptr : bg_parses.c_str(),
                              bg_corefs.empty() ? nullptr : bg_corefs.c_str(), bg_out.c_str()));
      std::cout << "graphs written to " << bg_out << "\n";
    } else if (tr->parsed()) {
      ConfigPtr cfg;
      check(vdgr_config_load(tr_config.c_str(), tr_stage.c_str(), &cfg.p));
      DatasetPtr data;
      check(vdgr_dataset_load(cfg.p, setting(cfg.p, "train_split").c_str(), &data.p));
      ModelPtr model;
      if (!tr_init.empty()) {
        check(vdgr_model_load(tr_init.c_str(), &model.p));
        check(vdgr_model_check_config(model.p, cfg.p));
      } else {
        check(vdgr_model_create(cfg.p, data.p, &model.p));
      }
      const std::string dir = default_out_dir(cfg.p);
      check(vdgr_train(model.p, cfg.p, data.p, dir.c_str()));
      const std::string out = tr_out.empty() ? (std::filesystem::path(dir) / (tr_stage + ".ckpt")).string() : tr_out;
      check(vdgr_model_save(model.p, out.c_str()));
      std::cout << "checkpoint: " << out << "\nlogs: " << dir << "\n";
    } else if (ev->parsed()) {
      ConfigPtr cfg;
      check(vdgr_config_load(ev_config.c_str(), "sparse", &cfg.p));
      ModelPtr model;
      check(vdgr_model_load(ev_ckpt.c_str(), &model.p));
      check(vdgr_model_check_config(model.p, cfg.p));
      DatasetPtr data;
      check(vdgr_dataset_load(cfg.p, ev_split.c_str(), &data.p));
      char* report = nullptr;
      const std::string dir = ev_out.empty() ? default_out_dir(cfg.p) : ev_out;
      check(vdgr_evaluate(model.p, data.p, ev_attention ? 1 : 0, dir.c_str(), &report));
      std::cout << take(report) << "\n";
    } else if (en->parsed()) {
      ConfigPtr cfg;
      check(vdgr_config_load(en_config.c_str(), "sparse", &cfg.p));
      std::vector<ModelPtr> models;
      std::vector<const vdgr_model*> raw;
      for (const auto& path : en_ckpts) {
        ModelPtr m;
        check(vdgr_model_load(path.c_str(), &m.p));
        check(vdgr_model_check_config(m.p, cfg.p));
        raw.push_back(m.p);
        models.push_back(std::move(m));
      }
      DatasetPtr data;
      check(vdgr_dataset_load(cfg.p, en_split.c_str(), &data.p));
      char* report = nullptr;
      const std::string dir = en_out.empty() ? default_out_dir(cfg.p) : en_out;
      check(vdgr_evaluate_ensemble(raw.data(), raw.size(), data.p, dir.c_str(), &report));
      std::cout << take(report) << "\n";
    } else if (ab->parsed()) {
      ConfigPtr cfg;
      check(vdgr_config_load(ab_config.c_str(), "sparse", &cfg.p));
      DatasetPtr data;
      check(vdgr_dataset_load(cfg.p, ab_split.c_str(), &data.p));
      char* report = nullptr;
      char* table = nullptr;
      check(vdgr_run_ablation(ab_config.c_str(), ab_name.c_str(), data.p, ab_seeds.data(), ab_seeds.size(), &report,
                              &table));
      std::cout << take(table);
      const std::string dir = default_out_dir(cfg.p);
      std::filesystem::create_directories(dir);
      const auto path = std::filesystem::path(dir) / ("ablation_" + ab_name + ".json");
      if (FILE* f = std::fopen(path.string().c_str(), "wb")) {
        const std::string text = take(report) + "\n";
        std::fwrite(text.data(), 1, text.size(), f);
        std::fclose(f);
        std::cout << "report: " << path.string() << "\n";
      } else {
        std::cerr << "warning: could not write " << path.string() << "\n";
      }
    } else if (st->parsed()) {
      char* out = nullptr;
      check(vdgr_graph_stats(st_graphs.c_str(), st_modality.c_str(), &out));
      std::cout << take(out) << "\n";
    }
  } catch (const Failure& f) {
    std::cerr << "vdgr: " << vdgr_status_name(f.status) << ": " << vdgr_last_error() << "\n";
    return static_cast<int>(f.status);
  }
  return 0;
}
