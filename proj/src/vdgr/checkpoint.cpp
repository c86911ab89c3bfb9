#include "vdgr/checkpoint.hpp"

#include "vdgr/config.hpp"
#include "vdgr/dataset.hpp"
#include "vdgr/error.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vdgr {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'D', 'G', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error(ErrorCode::Parse, "checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

Checkpoint snapshot(const VdGrModel& model, const std::string& rng_state, const std::string& stage, std::int64_t step) {
  Checkpoint c;
  c.config = model.config();
  c.vocab = model.vocab().tokens();
  c.rng_state = rng_state;
  c.stage = stage;
  c.step = step;
  for (const Parameter& p : model.parameters().all()) c.tensors.push_back({p.name, p.group, p.value});
  return c;
}

void load_parameters(VdGrModel& model, const Checkpoint& ckpt) {
  auto& params = model.parameters().all();
  if (params.size() != ckpt.tensors.size())
    throw Error(ErrorCode::ConfigMismatch, "checkpoint has " + std::to_string(ckpt.tensors.size()) +
                                               " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    Parameter& p = params[i];
    if (p.name != t.name || p.group != t.group || p.value.rows() != t.value.rows() || p.value.cols() != t.value.cols())
      throw Error(ErrorCode::ConfigMismatch, "checkpoint tensor '" + t.name + "' does not match model parameter '" +
                                                 p.name + "'");
    p.value = t.value;
  }
}

std::unique_ptr<VdGrModel> restore_model(const Checkpoint& ckpt) {
  auto model = std::make_unique<VdGrModel>(ckpt.config, Vocabulary::from_tokens(ckpt.vocab));
  load_parameters(*model, ckpt);
  return model;
}

std::string serialize_checkpoint(const Checkpoint& c) {
  nlohmann::json h;
  h["config"] = model_config_to_json(c.config);
  h["config_hash"] = config_hash(c.config);
  h["vocab"] = c.vocab;
  h["rng_state"] = c.rng_state;
  h["stage"] = c.stage;
  h["step"] = c.step;
  auto tensors = nlohmann::json::array();
  for (const auto& t : c.tensors)
    tensors.push_back({{"name", t.name},
                       {"group", t.group == ParamGroup::Gnn ? "gnn" : "backbone"},
                       {"rows", t.value.rows()},
                       {"cols", t.value.cols()}});
  h["tensors"] = tensors;
  const std::string header = h.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header.size());
  out += header;
  for (const auto& t : c.tensors)
    out.append(reinterpret_cast<const char*>(t.value.data()), static_cast<std::size_t>(t.value.size()) * sizeof(double));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& in) {
  if (in.size() < sizeof kMagic || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
    throw Error(ErrorCode::Parse, "not a checkpoint (bad magic)");
  std::size_t pos = sizeof kMagic;
  const auto version = take<std::uint32_t>(in, pos);
  if (version != kVersion) throw Error(ErrorCode::Parse, "unsupported checkpoint version " + std::to_string(version));
  const auto header_len = take<std::uint64_t>(in, pos);
  if (pos + header_len > in.size()) throw Error(ErrorCode::Parse, "checkpoint truncated");
  Checkpoint c;
  try {
    const auto h = nlohmann::json::parse(in.substr(pos, header_len));
    pos += header_len;
    c.config = model_config_from_json(h.at("config"));
    if (h.at("config_hash").get<std::string>() != config_hash(c.config))
      throw Error(ErrorCode::Parse, "checkpoint header hash does not match its config");
    c.vocab = h.at("vocab").get<std::vector<std::string>>();
    c.rng_state = h.at("rng_state").get<std::string>();
    c.stage = h.at("stage").get<std::string>();
    c.step = h.at("step").get<std::int64_t>();
    for (const auto& tj : h.at("tensors")) {
      Checkpoint::Tensor t;
      t.name = tj.at("name").get<std::string>();
      t.group = tj.at("group").get<std::string>() == "gnn" ? ParamGroup::Gnn : ParamGroup::Backbone;
      const auto rows = tj.at("rows").get<Eigen::Index>(), cols = tj.at("cols").get<Eigen::Index>();
      if (rows < 0 || cols < 0) throw Error(ErrorCode::Parse, "negative tensor shape");
      const std::size_t bytes = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (pos + bytes > in.size()) throw Error(ErrorCode::Parse, "checkpoint truncated");
      t.value.resize(rows, cols);
      std::memcpy(t.value.data(), in.data() + pos, bytes);
      pos += bytes;
      c.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("checkpoint header: ") + e.what());
  }
  if (pos != in.size()) throw Error(ErrorCode::Parse, "trailing bytes after checkpoint tensors");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_text_file(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace vdgr
