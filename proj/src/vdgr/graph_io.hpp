#pragma once

// JSON form of a graph: {modality, num_nodes, hub_present, edges: [[src, dst, type], ...]}.

#include "vdgr/graphcon.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace vdgr::graphcon {

nlohmann::json to_json(const Graph& g);
/// Parses and validates.
Graph graph_from_json(const nlohmann::json& j);

/// One JSON object per line.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& records);

}  // namespace vdgr::graphcon
