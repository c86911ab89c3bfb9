#include "vdgr/dataset.hpp"

#include "vdgr/error.hpp"
#include "vdgr/graph_io.hpp"
#include "vdgr/layout.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace vdgr {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetFiles DatasetFiles::in(const std::string& dir, const std::string& split) {
  const fs::path d(dir);
  return {(d / ("visdial_" + split + ".json")).string(), (d / ("dense_" + split + ".json")).string(),
          (d / ("features_" + split + ".jsonl")).string(), (d / ("parses_" + split + ".jsonl")).string(),
          (d / ("corefs_" + split + ".jsonl")).string()};
}

std::string dump_json(const json& j) { return j.dump(); }

bool file_exists(const std::string& path) { return fs::exists(path); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

namespace {

std::map<std::int64_t, DialogInstance*> index_by_image(std::vector<DialogInstance>& data) {
  std::map<std::int64_t, DialogInstance*> idx;
  for (auto& d : data) {
    require(idx.emplace(d.image_id, &d).second, "duplicate image id " + std::to_string(d.image_id));
  }
  return idx;
}

DialogInstance& lookup(std::map<std::int64_t, DialogInstance*>& idx, std::int64_t id, const char* what) {
  const auto it = idx.find(id);
  if (it == idx.end())
    throw Error(ErrorCode::Parse, std::string(what) + ": unknown image id " + std::to_string(id));
  return *it->second;
}

DialogRound& round_of(DialogInstance& d, int round, const char* what) {
  if (round < 1 || round > static_cast<int>(d.rounds.size()))
    throw Error(ErrorCode::Parse, std::string(what) + ": round " + std::to_string(round) + " out of range for image " +
                                      std::to_string(d.image_id));
  return d.rounds[static_cast<std::size_t>(round - 1)];
}

template <class F>
auto parse_guard(const char* what, F f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::vector<DialogInstance> parse_visdial_json(const json& j) {
  return parse_guard("dialog file", [&] {
    const json& data = j.at("data");
    const auto questions = data.at("questions").get<std::vector<std::string>>();
    const auto answers = data.at("answers").get<std::vector<std::string>>();
    auto text_at = [](const std::vector<std::string>& table, const json& ix, const char* name) {
      const auto i = ix.get<long long>();
      if (i < 0 || i >= static_cast<long long>(table.size()))
        throw Error(ErrorCode::Parse, std::string("dialog file: ") + name + " index out of range");
      return table[static_cast<std::size_t>(i)];
    };
    std::vector<DialogInstance> out;
    for (const auto& dj : data.at("dialogs")) {
      DialogInstance d;
      d.image_id = dj.at("image_id").get<std::int64_t>();
      d.caption = dj.at("caption").get<std::string>();
      for (const auto& rj : dj.at("dialog")) {
        DialogRound r;
        r.question = text_at(questions, rj.at("question"), "question");
        if (rj.contains("answer")) r.answer = text_at(answers, rj.at("answer"), "answer");
        if (rj.contains("answer_options"))
          for (const auto& a : rj.at("answer_options")) r.candidates.push_back(text_at(answers, a, "answer option"));
        r.gt_index = rj.value("gt_index", 0);
        d.rounds.push_back(std::move(r));
      }
      require(d.rounds.size() <= 10, "dialog " + std::to_string(d.image_id) + " has more than 10 rounds");
      out.push_back(std::move(d));
    }
    return out;
  });
}

std::vector<DialogInstance> load_visdial_json(const std::string& path) { return parse_visdial_json(read_json_file(path)); }

void attach_dense(std::vector<DialogInstance>& data, const json& dense) {
  auto idx = index_by_image(data);
  parse_guard("dense file", [&] {
    for (const auto& e : dense) {
      DialogInstance& d = lookup(idx, e.at("image_id").get<std::int64_t>(), "dense file");
      DialogRound& r = round_of(d, e.at("round_id").get<int>(), "dense file");
      std::vector<double> rel = e.at("gt_relevance").get<std::vector<double>>();
      require(r.candidates.empty() || rel.size() == r.candidates.size(), "dense file: relevance length mismatch");
      for (double v : rel) require(v >= 0.0 && v <= 1.0, "dense file: relevance outside [0, 1]");
      r.relevance = std::move(rel);
    }
    return 0;
  });
}

void attach_features(std::vector<DialogInstance>& data, const std::vector<json>& records) {
  auto idx = index_by_image(data);
  parse_guard("features file", [&] {
    for (const auto& rec : records) {
      DialogInstance& d = lookup(idx, rec.at("image_id").get<std::int64_t>(), "features file");
      d.boxes.clear();
      for (const auto& b : rec.at("boxes")) {
        require(b.size() == 4, "features file: boxes are [x1, y1, x2, y2]");
        d.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
      }
      if (rec.contains("features")) {
        const auto rows = rec.at("features").get<std::vector<std::vector<double>>>();
        require(rows.size() == d.boxes.size(), "features file: one feature row per box");
        const std::size_t dim = rows.empty() ? 0 : rows.front().size();
        d.region_features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          require(rows[i].size() == dim, "features file: ragged feature rows");
          for (std::size_t k = 0; k < dim; ++k)
            d.region_features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
      }
    }
    return 0;
  });
}

void attach_parses(std::vector<DialogInstance>& data, const std::vector<json>& records) {
  auto idx = index_by_image(data);
  parse_guard("parses file", [&] {
    for (const auto& rec : records) {
      DialogInstance& d = lookup(idx, rec.at("image_id").get<std::int64_t>(), "parses file");
      DialogRound& r = round_of(d, rec.at("round").get<int>(), "parses file");
      r.parse.clear();
      for (const auto& e : rec.at("edges")) {
        require(e.size() == 3, "parses file: edges are [head, dependent, label]");
        r.parse.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<std::string>()});
      }
    }
    return 0;
  });
}

void attach_corefs(std::vector<DialogInstance>& data, const std::vector<json>& records) {
  auto idx = index_by_image(data);
  parse_guard("coreference file", [&] {
    for (const auto& rec : records) {
      DialogInstance& d = lookup(idx, rec.at("image_id").get<std::int64_t>(), "coreference file");
      d.corefs.clear();
      for (const auto& l : rec.at("links")) {
        require(l.size() == 2, "coreference file: links are [from_round, to_round]");
        d.corefs.push_back({l[0].get<int>(), l[1].get<int>()});
      }
    }
    return 0;
  });
}

std::vector<DialogInstance> load_dataset(const DatasetFiles& files) {
  auto data = load_visdial_json(files.dialogs);
  if (file_exists(files.dense)) attach_dense(data, read_json_file(files.dense));
  if (file_exists(files.features)) attach_features(data, graphcon::read_jsonl(files.features));
  if (file_exists(files.parses)) attach_parses(data, graphcon::read_jsonl(files.parses));
  if (file_exists(files.corefs)) attach_corefs(data, graphcon::read_jsonl(files.corefs));
  for (auto& d : data) prepare_graphs(d);
  return data;
}

json export_visdial_json(const std::vector<DialogInstance>& data, const std::string& split) {
  std::vector<std::string> questions, answers;
  std::map<std::string, int> qix, aix;
  auto intern = [](std::vector<std::string>& table, std::map<std::string, int>& ix, const std::string& s) {
    auto [it, fresh] = ix.emplace(s, static_cast<int>(table.size()));
    if (fresh) table.push_back(s);
    return it->second;
  };
  auto dialogs = json::array();
  for (const auto& d : data) {
    auto rounds = json::array();
    for (const auto& r : d.rounds) {
      json rj;
      rj["question"] = intern(questions, qix, r.question);
      rj["answer"] = intern(answers, aix, r.answer);
      auto opts = json::array();
      for (const auto& c : r.candidates) opts.push_back(intern(answers, aix, c));
      rj["answer_options"] = opts;
      rj["gt_index"] = r.gt_index;
      rounds.push_back(rj);
    }
    dialogs.push_back({{"image_id", d.image_id}, {"caption", d.caption}, {"dialog", rounds}});
  }
  return {{"version", "1.0"},
          {"split", split},
          {"data", {{"questions", questions}, {"answers", answers}, {"dialogs", dialogs}}}};
}

json export_dense(const std::vector<DialogInstance>& data) {
  auto out = json::array();
  for (const auto& d : data)
    for (std::size_t r = 0; r < d.rounds.size(); ++r)
      if (d.rounds[r].relevance)
        out.push_back({{"image_id", d.image_id}, {"round_id", r + 1}, {"gt_relevance", *d.rounds[r].relevance}});
  return out;
}

std::vector<json> export_features(const std::vector<DialogInstance>& data) {
  std::vector<json> out;
  for (const auto& d : data) {
    auto boxes = json::array();
    for (const auto& b : d.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    json rec{{"image_id", d.image_id}, {"boxes", boxes}};
    if (d.region_features.rows() > 0) {
      auto rows = json::array();
      for (Eigen::Index i = 0; i < d.region_features.rows(); ++i) {
        auto row = json::array();
        for (Eigen::Index k = 0; k < d.region_features.cols(); ++k) row.push_back(d.region_features(i, k));
        rows.push_back(row);
      }
      rec["features"] = rows;
    }
    out.push_back(rec);
  }
  return out;
}

std::vector<json> export_parses(const std::vector<DialogInstance>& data) {
  std::vector<json> out;
  for (const auto& d : data)
    for (std::size_t r = 0; r < d.rounds.size(); ++r) {
      auto edges = json::array();
      for (const auto& e : d.rounds[r].parse) edges.push_back({e.head, e.dependent, e.relation});
      out.push_back({{"image_id", d.image_id},
                     {"round", r + 1},
                     {"num_tokens", split_words(d.rounds[r].question).size()},
                     {"edges", edges}});
    }
  return out;
}

std::vector<json> export_corefs(const std::vector<DialogInstance>& data) {
  std::vector<json> out;
  for (const auto& d : data) {
    auto links = json::array();
    for (const auto& l : d.corefs) links.push_back({l.from_round, l.to_round});
    out.push_back({{"image_id", d.image_id}, {"rounds", d.rounds.size()}, {"links", links}});
  }
  return out;
}

void write_dataset(const std::vector<DialogInstance>& data, const std::string& dir, const std::string& split) {
  fs::create_directories(dir);
  const auto files = DatasetFiles::in(dir, split);
  write_text_file(files.dialogs, dump_json(export_visdial_json(data, split)) + "\n");
  write_text_file(files.dense, dump_json(export_dense(data)) + "\n");
  graphcon::write_jsonl(files.features, export_features(data));
  graphcon::write_jsonl(files.parses, export_parses(data));
  graphcon::write_jsonl(files.corefs, export_corefs(data));
}

}  // namespace vdgr
