#include "vdgr/graph_io.hpp"

#include "vdgr/error.hpp"

#include <fstream>

namespace vdgr::graphcon {

nlohmann::json to_json(const Graph& g) {
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges) edges.push_back({e.src, e.dst, e.type});
  return {{"modality", modality_name(g.modality)},
          {"num_nodes", g.num_nodes},
          {"hub_present", g.hub_present},
          {"edges", edges}};
}

Graph graph_from_json(const nlohmann::json& j) {
  try {
    Graph g;
    g.modality = parse_modality(j.at("modality").get<std::string>());
    g.num_nodes = j.at("num_nodes").get<int>();
    g.hub_present = j.at("hub_present").get<bool>();
    for (const auto& e : j.at("edges")) {
      require(e.is_array() && e.size() == 3, "graph edges are [src, dst, type]");
      g.edges.push_back({e[0].get<int>(), e[1].get<int>(), e[2].get<int>()});
    }
    validate(g);
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("graph: ") + e.what());
  }
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Parse, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

}  // namespace vdgr::graphcon
