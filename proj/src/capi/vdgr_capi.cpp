#include "vdgr/vdgr.h"

#include "vdgr/checkpoint.hpp"
#include "vdgr/config.hpp"
#include "vdgr/dataset.hpp"
#include "vdgr/error.hpp"
#include "vdgr/graph_io.hpp"
#include "vdgr/toydata.hpp"
#include "vdgr/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <string>

struct vdgr_config {
  vdgr::RunConfig run;
  vdgr::objectives::Stage stage;
};

struct vdgr_dataset {
  std::vector<vdgr::DialogInstance> dialogs;
};

struct vdgr_model {
  std::unique_ptr<vdgr::VdGrModel> model;
  std::string rng_state;
  std::string stage;
  std::int64_t step = 0;
};

namespace {

thread_local std::string g_last_error;

vdgr_status to_status(vdgr::ErrorCode c) {
  switch (c) {
    case vdgr::ErrorCode::InvalidArgument: return VDGR_ERR_INVALID_ARGUMENT;
    case vdgr::ErrorCode::Io: return VDGR_ERR_IO;
    case vdgr::ErrorCode::Parse: return VDGR_ERR_PARSE;
    case vdgr::ErrorCode::ConfigMismatch: return VDGR_ERR_CONFIG_MISMATCH;
    case vdgr::ErrorCode::Numeric: return VDGR_ERR_NUMERIC;
    case vdgr::ErrorCode::Skipped: return VDGR_ERR_SKIPPED;
    case vdgr::ErrorCode::Internal: return VDGR_ERR_INTERNAL;
  }
  return VDGR_ERR_INTERNAL;
}

template <class F>
vdgr_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return VDGR_OK;
  } catch (const vdgr::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return VDGR_ERR_INTERNAL;
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return VDGR_ERR_PARSE;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return VDGR_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return VDGR_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) vdgr::fail(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_stage_logs(const std::string& dir, const std::string& stage, const vdgr::TrainResult& r) {
  namespace fs = std::filesystem;
  vdgr::write_text_file((fs::path(dir) / (stage + "_loss.csv")).string(), vdgr::loss_log_csv(r));
  vdgr::write_text_file((fs::path(dir) / (stage + "_schedule.csv")).string(), vdgr::schedule_csv(r));
}

void write_eval_outputs(const std::string& dir, const vdgr::EvalResult& r) {
  namespace fs = std::filesystem;
  vdgr::write_text_file((fs::path(dir) / "metrics.json").string(), r.report.dump(2) + "\n");
  vdgr::write_text_file((fs::path(dir) / "ranks.txt").string(), vdgr::ranking::ranks_text(r.rounds));
  if (!r.attention.empty()) vdgr::graphcon::write_jsonl((fs::path(dir) / "attention.jsonl").string(), r.attention);
}

}  // namespace

extern "C" {

const char* vdgr_version(void) { return "1.0.0"; }

const char* vdgr_last_error(void) { return g_last_error.c_str(); }

const char* vdgr_status_name(vdgr_status status) {
  switch (status) {
    case VDGR_OK: return "ok";
    case VDGR_ERR_INVALID_ARGUMENT: return "invalid argument";
    case VDGR_ERR_IO: return "i/o error";
    case VDGR_ERR_PARSE: return "parse error";
    case VDGR_ERR_CONFIG_MISMATCH: return "configuration mismatch";
    case VDGR_ERR_NUMERIC: return "numeric error";
    case VDGR_ERR_SKIPPED: return "skipped";
    case VDGR_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void vdgr_string_free(char* s) { std::free(s); }

vdgr_status vdgr_config_default(const char* stage, vdgr_config** out) {
  return guarded([&] {
    need(stage, "stage");
    need(out, "out");
    const auto st = vdgr::objectives::parse_stage(stage);
    *out = new vdgr_config{vdgr::run_config_from_map({}, st), st};
  });
}

vdgr_status vdgr_config_load(const char* path, const char* stage, vdgr_config** out) {
  return guarded([&] {
    need(path, "path");
    need(stage, "stage");
    need(out, "out");
    const auto st = vdgr::objectives::parse_stage(stage);
    *out = new vdgr_config{vdgr::load_run_config(path, st), st};
  });
}

vdgr_status vdgr_config_set(vdgr_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    vdgr::RunConfig next = cfg->run;
    vdgr::apply_setting(next, key, value);
    next.model.validate();
    next.stage.validate();
    cfg->run = next;
  });
}

vdgr_status vdgr_config_get(const vdgr_config* cfg, const char* key, char** value) {
  return guarded([&] {
    need(cfg, "config");
    need(key, "key");
    need(value, "value");
    *value = dup_string(vdgr::get_setting(cfg->run, key));
  });
}

vdgr_status vdgr_config_hash(const vdgr_config* cfg, char** hash) {
  return guarded([&] {
    need(cfg, "config");
    need(hash, "hash");
    *hash = dup_string(vdgr::config_hash(cfg->run.model));
  });
}

void vdgr_config_free(vdgr_config* cfg) { delete cfg; }

vdgr_status vdgr_generate_toy_dataset(const char* out_dir, const char* split, uint64_t seed, int dialogs, int regions,
                                      int candidates, int rounds, int region_dim) {
  return guarded([&] {
    need(out_dir, "out_dir");
    need(split, "split");
    vdgr::ToyDataOptions o;
    o.seed = seed;
    o.dialogs = dialogs;
    o.regions = regions;
    o.candidates = candidates;
    o.rounds = rounds;
    o.region_dim = region_dim;
    vdgr::generate_toy_dataset(o, out_dir, split);
  });
}

vdgr_status vdgr_dataset_load(const vdgr_config* cfg, const char* split, vdgr_dataset** out) {
  return guarded([&] {
    need(cfg, "config");
    need(split, "split");
    need(out, "out");
    auto files = vdgr::DatasetFiles::in(cfg->run.data.data_dir, split);
    *out = new vdgr_dataset{vdgr::load_dataset(files)};
  });
}

size_t vdgr_dataset_size(const vdgr_dataset* data) { return data ? data->dialogs.size() : 0; }

vdgr_status vdgr_dataset_rounds(const vdgr_dataset* data, size_t dialog, int* rounds) {
  return guarded([&] {
    need(data, "dataset");
    need(rounds, "rounds");
    vdgr::require(dialog < data->dialogs.size(), "dialog index out of range");
    *rounds = static_cast<int>(data->dialogs[dialog].rounds.size());
  });
}

void vdgr_dataset_free(vdgr_dataset* data) { delete data; }

vdgr_status vdgr_build_graphs(const char* boxes_path, const char* parses_path, const char* corefs_path,
                              const char* out_dir) {
  return guarded([&] {
    need(boxes_path, "boxes path");
    need(out_dir, "out_dir");
    using nlohmann::json;
    namespace gc = vdgr::graphcon;
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);

    std::vector<json> image_out;
    for (const auto& rec : gc::read_jsonl(boxes_path)) {
      std::vector<gc::BoundingBox> boxes;
      for (const auto& b : rec.at("boxes")) boxes.push_back({b.at(0), b.at(1), b.at(2), b.at(3)});
      json j = gc::to_json(gc::build_image_graph(boxes));
      j["image_id"] = rec.at("image_id");
      image_out.push_back(j);
    }
    gc::write_jsonl((dir / "image_graphs.jsonl").string(), image_out);

    if (parses_path) {
      std::vector<json> out;
      for (const auto& rec : gc::read_jsonl(parses_path)) {
        std::vector<gc::DependencyEdge> edges;
        int max_index = -1;
        for (const auto& e : rec.at("edges")) {
          edges.push_back({e.at(0), e.at(1), e.at(2)});
          max_index = std::max({max_index, edges.back().head, edges.back().dependent});
        }
        const int n = rec.contains("num_tokens") ? rec.at("num_tokens").get<int>() : max_index + 1;
        json j = gc::to_json(gc::build_question_graph(edges, n));
        j["image_id"] = rec.at("image_id");
        j["round"] = rec.at("round");
        out.push_back(j);
      }
      gc::write_jsonl((dir / "question_graphs.jsonl").string(), out);
    }
    if (corefs_path) {
      std::vector<json> out;
      for (const auto& rec : gc::read_jsonl(corefs_path)) {
        std::vector<gc::CoreferenceLink> links;
        int max_round = 0;
        for (const auto& l : rec.at("links")) {
          links.push_back({l.at(0), l.at(1)});
          max_round = std::max(max_round, links.back().from_round);
        }
        const int rounds = rec.contains("rounds") ? rec.at("rounds").get<int>() : max_round;
        json j = gc::to_json(gc::build_history_graph(links, rounds + 1));
        j["image_id"] = rec.at("image_id");
        out.push_back(j);
      }
      gc::write_jsonl((dir / "history_graphs.jsonl").string(), out);
    }
  });
}

vdgr_status vdgr_graph_stats(const char* graphs_dir, const char* modality, char** json_out) {
  return guarded([&] {
    need(graphs_dir, "graphs_dir");
    need(modality, "modality");
    need(json_out, "json");
    namespace gc = vdgr::graphcon;
    const auto m = gc::parse_modality(modality);
    const auto path = (std::filesystem::path(graphs_dir) / (std::string(modality) + "_graphs.jsonl")).string();
    std::vector<gc::Graph> corpus;
    for (const auto& rec : gc::read_jsonl(path)) corpus.push_back(gc::graph_from_json(rec));
    const auto h = gc::graph_stats(corpus, m);
    auto counts = nlohmann::json::array();
    const auto& lex = gc::RelationLexicon::builtin();
    for (std::size_t t = 1; t < h.counts.size(); ++t) {
      nlohmann::json row{{"type", t}, {"count", h.counts[t]}};
      if (m == gc::Modality::Question) row["label"] = lex.label(static_cast<int>(t));
      counts.push_back(row);
    }
    *json_out = dup_string(
        nlohmann::json{{"modality", modality}, {"graphs", corpus.size()}, {"edges", h.total()}, {"counts", counts}}.dump(2));
  });
}

vdgr_status vdgr_model_create(const vdgr_config* cfg, const vdgr_dataset* vocab_source, vdgr_model** out) {
  return guarded([&] {
    need(cfg, "config");
    need(vocab_source, "vocabulary source");
    need(out, "out");
    auto m = std::make_unique<vdgr_model>();
    m->model = std::make_unique<vdgr::VdGrModel>(cfg->run.model, vdgr::Vocabulary::build(vocab_source->dialogs));
    *out = m.release();
  });
}

vdgr_status vdgr_model_load(const char* checkpoint_path, vdgr_model** out) {
  return guarded([&] {
    need(checkpoint_path, "checkpoint path");
    need(out, "out");
    const auto ckpt = vdgr::load_checkpoint(checkpoint_path);
    auto m = std::make_unique<vdgr_model>();
    m->model = vdgr::restore_model(ckpt);
    m->rng_state = ckpt.rng_state;
    m->stage = ckpt.stage;
    m->step = ckpt.step;
    *out = m.release();
  });
}

vdgr_status vdgr_model_save(const vdgr_model* model, const char* checkpoint_path) {
  return guarded([&] {
    need(model, "model");
    need(checkpoint_path, "checkpoint path");
    vdgr::save_checkpoint(checkpoint_path, vdgr::snapshot(*model->model, model->rng_state, model->stage, model->step));
  });
}

vdgr_status vdgr_model_check_config(const vdgr_model* model, const vdgr_config* cfg) {
  return guarded([&] {
    need(model, "model");
    need(cfg, "config");
    vdgr::check_config_compatible(cfg->run.model, model->model->config());
  });
}

size_t vdgr_model_parameter_count(const vdgr_model* model) {
  return model ? model->model->parameters().scalar_count() : 0;
}

void vdgr_model_free(vdgr_model* model) { delete model; }

vdgr_status vdgr_train(vdgr_model* model, const vdgr_config* cfg, const vdgr_dataset* data, const char* log_dir) {
  return guarded([&] {
    need(model, "model");
    need(cfg, "config");
    need(data, "dataset");
    vdgr::check_config_compatible(cfg->run.model, model->model->config());
    const std::string stage = vdgr::objectives::stage_name(cfg->stage);
    const std::string dump_dir = log_dir ? std::string(log_dir) : vdgr::output_dir(cfg->run.data);
    auto r = vdgr::train_stage(*model->model, data->dialogs, cfg->run.stage, dump_dir);
    model->rng_state = r.rng_state;
    model->stage = stage;
    model->step = r.steps;
    if (log_dir) write_stage_logs(log_dir, stage, r);
  });
}

vdgr_status vdgr_score_candidates(const vdgr_model* model, const vdgr_dataset* data, size_t dialog, int round,
                                  double* scores, size_t capacity, size_t* n) {
  return guarded([&] {
    need(model, "model");
    need(data, "dataset");
    need(n, "n");
    vdgr::require(dialog < data->dialogs.size(), "dialog index out of range");
    const auto s = vdgr::score_candidates(*model->model, data->dialogs[dialog], round);
    *n = s.size();
    vdgr::require(scores != nullptr && capacity >= s.size(), "score buffer too small");
    std::copy(s.begin(), s.end(), scores);
  });
}

vdgr_status vdgr_evaluate(const vdgr_model* model, const vdgr_dataset* data, int dump_attention, const char* out_dir,
                          char** report) {
  return guarded([&] {
    need(model, "model");
    need(data, "dataset");
    need(report, "report");
    vdgr::EvalOptions opts;
    opts.dump_attention = dump_attention != 0;
    const auto r = vdgr::evaluate(*model->model, data->dialogs, opts);
    if (out_dir) write_eval_outputs(out_dir, r);
    *report = dup_string(r.report.dump(2));
  });
}

vdgr_status vdgr_evaluate_ensemble(const vdgr_model* const* models, size_t count, const vdgr_dataset* data,
                                   const char* out_dir, char** report) {
  return guarded([&] {
    need(data, "dataset");
    need(report, "report");
    vdgr::require(count > 0 && models != nullptr, "ensemble needs at least one model");
    std::vector<const vdgr::VdGrModel*> ms;
    for (size_t i = 0; i < count; ++i) {
      need(models[i], "ensemble member");
      ms.push_back(models[i]->model.get());
    }
    const auto r = vdgr::evaluate_ensemble(ms, data->dialogs);
    if (out_dir) write_eval_outputs(out_dir, r);
    *report = dup_string(r.report.dump(2));
  });
}

vdgr_status vdgr_run_ablation(const char* config_path, const char* name, const vdgr_dataset* data,
                              const uint64_t* seeds, size_t seed_count, char** report_json, char** table) {
  return guarded([&] {
    need(config_path, "config path");
    need(name, "name");
    need(data, "dataset");
    vdgr::require(seeds != nullptr && seed_count > 0, "ablation needs at least one seed");
    const auto base = vdgr::load_pipeline_config(config_path);
    const auto report = vdgr::run_ablation(name, base, data->dialogs, std::vector<std::uint64_t>(seeds, seeds + seed_count));
    if (report_json) *report_json = dup_string(report.dump(2));
    if (table) *table = dup_string(vdgr::ablation_table(report));
  });
}

}  // extern "C"
