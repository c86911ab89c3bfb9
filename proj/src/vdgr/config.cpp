#include "vdgr/config.hpp"

#include "vdgr/error.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace vdgr {

using objectives::Stage;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    require(used == v.size(), "");
    return static_cast<int>(x);
  } catch (...) {
    throw Error(ErrorCode::Parse, "config: '" + key + "' expects an integer, got '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    require(used == v.size() && v[0] != '-', "");
    return x;
  } catch (...) {
    throw Error(ErrorCode::Parse, "config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    require(used == v.size(), "");
    return x;
  } catch (...) {
    throw Error(ErrorCode::Parse, "config: '" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "True" || v == "1") return true;
  if (v == "false" || v == "False" || v == "0") return false;
  throw Error(ErrorCode::Parse, "config: '" + key + "' expects true/false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt(bool b) { return b ? "true" : "false"; }

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Get>
Field int_field(Get g) {
  return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_int(k, v); },
          [g](const RunConfig& c) { return std::to_string(g(const_cast<RunConfig&>(c))); }};
}
template <class Get>
Field double_field(Get g) {
  return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_double(k, v); },
          [g](const RunConfig& c) { return fmt(g(const_cast<RunConfig&>(c))); }};
}
template <class Get>
Field bool_field(Get g) {
  return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_bool(k, v); },
          [g](const RunConfig& c) { return fmt(g(const_cast<RunConfig&>(c))); }};
}
template <class Get>
Field u64_field(Get g) {
  return {[g](RunConfig& c, const std::string& k, const std::string& v) { g(c) = to_u64(k, v); },
          [g](const RunConfig& c) { return std::to_string(g(const_cast<RunConfig&>(c))); }};
}
template <class Get>
Field string_field(Get g) {
  return {[g](RunConfig& c, const std::string&, const std::string& v) { g(c) = v; },
          [g](const RunConfig& c) { return g(const_cast<RunConfig&>(c)); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> f;
    // model
    f["num_vdgr_layers"] = int_field([](RunConfig& c) -> int& { return c.model.vdgr_layers; });
    f["num_gnn_layers"] = int_field([](RunConfig& c) -> int& { return c.model.gnn_layers; });
    f["num_gnn_heads"] = int_field([](RunConfig& c) -> int& { return c.model.gnn_heads; });
    f["residual_connection_coefficient"] = double_field([](RunConfig& c) -> double& { return c.model.lambda; });
    f["image_node_dim"] = int_field([](RunConfig& c) -> int& { return c.model.image_dim; });
    f["text_node_dim"] = int_field([](RunConfig& c) -> int& { return c.model.text_dim; });
    f["region_feature_dim"] = int_field([](RunConfig& c) -> int& { return c.model.region_dim; });
    f["num_attention_heads"] = int_field([](RunConfig& c) -> int& { return c.model.attention_heads; });
    f["text_ffn_dim"] = int_field([](RunConfig& c) -> int& { return c.model.text_ffn_dim; });
    f["image_ffn_dim"] = int_field([](RunConfig& c) -> int& { return c.model.image_ffn_dim; });
    f["share_gnn_weights"] = bool_field([](RunConfig& c) -> bool& { return c.model.share_gnn; });
    f["use_hub_nodes"] = bool_field([](RunConfig& c) -> bool& { return c.model.use_hub; });
    f["use_gnn"] = bool_field([](RunConfig& c) -> bool& { return c.model.use_gnn; });
    f["co_attention"] = bool_field([](RunConfig& c) -> bool& { return c.model.co_attention; });
    f["learned_edge_embedding"] = bool_field([](RunConfig& c) -> bool& { return c.model.learned_edge_embedding; });
    f["image_hub_source"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "gathered") c.model.image_hub_source = mmgnn::ImageHubSource::Gathered;
          else if (v == "previous_output") c.model.image_hub_source = mmgnn::ImageHubSource::PreviousOutput;
          else throw Error(ErrorCode::Parse, "config: '" + k + "' expects gathered or previous_output");
        },
        [](const RunConfig& c) {
          return std::string(c.model.image_hub_source == mmgnn::ImageHubSource::Gathered ? "gathered" : "previous_output");
        }};
    f["max_text_tokens"] = int_field([](RunConfig& c) -> int& { return c.model.max_text_tokens; });
    // counts the [IMG] slot, as the published table does
    f["max_image_regions"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) { c.model.max_regions = to_int(k, v) - 1; },
        [](const RunConfig& c) { return std::to_string(c.model.max_regions + 1); }};
    f["num_candidates"] = int_field([](RunConfig& c) -> int& { return c.model.num_candidates; });
    f["model_seed"] = u64_field([](RunConfig& c) -> std::uint64_t& { return c.model.seed; });
    // stage
    f["num_epochs"] = int_field([](RunConfig& c) -> int& { return c.stage.epochs; });
    f["effective_batch_size"] = int_field([](RunConfig& c) -> int& { return c.stage.batch_size; });
    f["min_lr_bert"] = double_field([](RunConfig& c) -> double& { return c.stage.backbone_lr_min; });
    f["max_lr_bert"] = double_field([](RunConfig& c) -> double& { return c.stage.backbone_lr_max; });
    f["min_lr_gnn"] = double_field([](RunConfig& c) -> double& { return c.stage.gnn_lr_min; });
    f["max_lr_gnn"] = double_field([](RunConfig& c) -> double& { return c.stage.gnn_lr_max; });
    f["lr_warmup_bert"] = bool_field([](RunConfig& c) -> bool& { return c.stage.backbone_lr_warmup; });
    f["lr_warmup_gnn"] = bool_field([](RunConfig& c) -> bool& { return c.stage.gnn_lr_warmup; });
    f["lr_warmup_fraction"] = double_field([](RunConfig& c) -> double& { return c.stage.warmup_fraction; });
    f["toy_lr_scale"] = bool_field([](RunConfig& c) -> bool& { return c.stage.toy_lr_scale; });
    f["max_steps"] = int_field([](RunConfig& c) -> int& { return c.stage.max_steps; });
    f["seed"] = u64_field([](RunConfig& c) -> std::uint64_t& { return c.stage.seed; });
    f["text_mask_probability"] = double_field([](RunConfig& c) -> double& { return c.stage.rates.text; });
    f["region_mask_probability"] = double_field([](RunConfig& c) -> double& { return c.stage.rates.region; });
    f["edge_mask_probability"] = double_field([](RunConfig& c) -> double& { return c.stage.rates.edge; });
    f["alpha1"] = double_field([](RunConfig& c) -> double& { return c.stage.weights.alpha1; });
    f["alpha2"] = double_field([](RunConfig& c) -> double& { return c.stage.weights.alpha2; });
    f["negative_probability"] = double_field([](RunConfig& c) -> double& { return c.stage.negative_probability; });
    f["dense_loss"] = {
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "ce") c.stage.dense_loss = DenseLoss::CrossEntropy;
          else if (v == "listnet") c.stage.dense_loss = DenseLoss::ListNet;
          else throw Error(ErrorCode::Parse, "config: '" + k + "' expects ce or listnet");
        },
        [](const RunConfig& c) { return dense_loss_name(c.stage.dense_loss); }};
    // data
    f["data_dir"] = string_field([](RunConfig& c) -> std::string& { return c.data.data_dir; });
    f["train_split"] = string_field([](RunConfig& c) -> std::string& { return c.data.train_split; });
    f["output_dir"] = string_field([](RunConfig& c) -> std::string& { return c.data.output_dir; });
    return f;
  }();
  return table;
}

}  // namespace

std::string dense_loss_name(DenseLoss l) { return l == DenseLoss::CrossEntropy ? "ce" : "listnet"; }

StageConfig StageConfig::defaults(Stage stage) {
  StageConfig s;
  s.stage = stage;
  switch (stage) {
    case Stage::Warmup:
      s.epochs = 5;
      s.batch_size = 64;
      s.rates = {0.1, 0.1, 0.15};
      break;
    case Stage::Sparse:
      s.epochs = 20;
      s.batch_size = 64;
      s.rates = {0.1, 0.1, 0.0};
      break;
    case Stage::Dense:
      s.epochs = 3;
      s.batch_size = 1;
      s.backbone_lr_min = 1e-5;
      s.backbone_lr_max = 2e-5;
      s.gnn_lr_min = 1e-5;
      s.gnn_lr_max = 1e-4;
      s.rates = {0.0, 0.0, 0.0};
      break;
  }
  return s;
}

void StageConfig::validate() const {
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch size must be positive");
  require(backbone_lr_min >= 0 && backbone_lr_min <= backbone_lr_max, "backbone learning rates must satisfy 0 <= min <= max");
  require(gnn_lr_min >= 0 && gnn_lr_min <= gnn_lr_max, "GNN learning rates must satisfy 0 <= min <= max");
  require(warmup_fraction >= 0 && warmup_fraction < 1, "warm-up fraction must lie in [0, 1)");
  require(max_steps >= 0, "max_steps must be non-negative");
  require(negative_probability >= 0 && negative_probability <= 1, "negative probability must lie in [0, 1]");
  require(weights.alpha1 >= 0 && weights.alpha2 >= 0, "loss weights must be non-negative");
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Parse, "config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorCode::Parse, "config line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw Error(ErrorCode::Parse, "config: unknown key '" + key + "'");
  it->second.set(cfg, key, value);
}

std::string get_setting(const RunConfig& cfg, const std::string& key) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + key + "'");
  return it->second.get(cfg);
}

RunConfig run_config_from_map(const std::map<std::string, std::string>& kv, Stage stage) {
  RunConfig cfg;
  cfg.stage = StageConfig::defaults(stage);
  // "sparse.num_epochs = 3" applies only when the sparse stage is loaded and
  // wins over an unprefixed "num_epochs".
  std::vector<std::pair<std::string, std::string>> scoped;
  for (const auto& [k, v] : kv) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      apply_setting(cfg, k, v);
      continue;
    }
    const std::string prefix = k.substr(0, dot), key = k.substr(dot + 1);
    const Stage target = objectives::parse_stage(prefix);
    if (fields().find(key) == fields().end()) throw Error(ErrorCode::Parse, "config: unknown key '" + k + "'");
    if (target == stage) scoped.emplace_back(key, v);
  }
  for (const auto& [k, v] : scoped) apply_setting(cfg, k, v);
  cfg.model.validate();
  cfg.stage.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, Stage stage) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return run_config_from_map(parse_key_values(ss.str()), stage);
}

std::string render_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + " = " + f.get(cfg) + "\n";
  return out;
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"text_dim", c.text_dim},
          {"image_dim", c.image_dim},
          {"region_dim", c.region_dim},
          {"vdgr_layers", c.vdgr_layers},
          {"gnn_layers", c.gnn_layers},
          {"gnn_heads", c.gnn_heads},
          {"attention_heads", c.attention_heads},
          {"text_ffn_dim", c.text_ffn_dim},
          {"image_ffn_dim", c.image_ffn_dim},
          {"lambda", c.lambda},
          {"share_gnn", c.share_gnn},
          {"use_hub", c.use_hub},
          {"use_gnn", c.use_gnn},
          {"co_attention", c.co_attention},
          {"learned_edge_embedding", c.learned_edge_embedding},
          {"image_hub_source", c.image_hub_source == mmgnn::ImageHubSource::Gathered ? "gathered" : "previous_output"},
          {"max_text_tokens", c.max_text_tokens},
          {"max_regions", c.max_regions},
          {"num_candidates", c.num_candidates},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.text_dim = j.at("text_dim");
    c.image_dim = j.at("image_dim");
    c.region_dim = j.at("region_dim");
    c.vdgr_layers = j.at("vdgr_layers");
    c.gnn_layers = j.at("gnn_layers");
    c.gnn_heads = j.at("gnn_heads");
    c.attention_heads = j.at("attention_heads");
    c.text_ffn_dim = j.at("text_ffn_dim");
    c.image_ffn_dim = j.at("image_ffn_dim");
    c.lambda = j.at("lambda");
    c.share_gnn = j.at("share_gnn");
    c.use_hub = j.at("use_hub");
    c.use_gnn = j.at("use_gnn");
    c.co_attention = j.at("co_attention");
    c.learned_edge_embedding = j.at("learned_edge_embedding");
    c.image_hub_source = j.at("image_hub_source").get<std::string>() == "gathered"
                             ? mmgnn::ImageHubSource::Gathered
                             : mmgnn::ImageHubSource::PreviousOutput;
    c.max_text_tokens = j.at("max_text_tokens");
    c.max_regions = j.at("max_regions");
    c.num_candidates = j.at("num_candidates");
    c.seed = j.at("seed");
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("model config: ") + e.what());
  }
}

std::string config_hash(const ModelConfig& c) {
  nlohmann::json j = model_config_to_json(c);
  j.erase("seed");
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string cache_dir() {
  const char* env = std::getenv("VDGR_CACHE_DIR");
  return env && *env ? std::string(env) : std::string("vdgr_cache");
}

std::string output_dir(const DataConfig& d) { return d.output_dir.empty() ? cache_dir() : d.output_dir; }

}  // namespace vdgr
