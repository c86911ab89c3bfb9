#pragma once

// Reading and writing dialog data in the public VisDial layout plus the
// sidecar files this project adds (region features, parses, coreference).
//
// Files for split S in a data directory:
//   visdial_S.json    data.questions / data.answers / data.dialogs tables
//   dense_S.json      [{image_id, round_id (1-based), gt_relevance}]
//   features_S.jsonl  {image_id, boxes: [[x1,y1,x2,y2]], features: [[...]]}
//   parses_S.jsonl    {image_id, round, num_tokens, edges: [[head, dependent, label]]}
//   corefs_S.jsonl    {image_id, rounds, links: [[from_round, to_round]]}

#include "vdgr/dialog.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace vdgr {

struct DatasetFiles {
  std::string dialogs, dense, features, parses, corefs;

  static DatasetFiles in(const std::string& dir, const std::string& split);
};

/// De-indexes the question/answer tables. Instances carry text only.
std::vector<DialogInstance> parse_visdial_json(const nlohmann::json& j);
std::vector<DialogInstance> load_visdial_json(const std::string& path);

void attach_dense(std::vector<DialogInstance>& data, const nlohmann::json& dense);
void attach_features(std::vector<DialogInstance>& data, const std::vector<nlohmann::json>& records);
void attach_parses(std::vector<DialogInstance>& data, const std::vector<nlohmann::json>& records);
void attach_corefs(std::vector<DialogInstance>& data, const std::vector<nlohmann::json>& records);

/// Loads every file that exists (only the dialog file is mandatory) and builds
/// the graphs. Without a features file the instances are text-only.
std::vector<DialogInstance> load_dataset(const DatasetFiles& files);

nlohmann::json export_visdial_json(const std::vector<DialogInstance>& data, const std::string& split);
nlohmann::json export_dense(const std::vector<DialogInstance>& data);
std::vector<nlohmann::json> export_features(const std::vector<DialogInstance>& data);
std::vector<nlohmann::json> export_parses(const std::vector<DialogInstance>& data);
std::vector<nlohmann::json> export_corefs(const std::vector<DialogInstance>& data);

void write_dataset(const std::vector<DialogInstance>& data, const std::string& dir, const std::string& split);

/// Text of a JSON value in the canonical form used for every written file.
std::string dump_json(const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
bool file_exists(const std::string& path);

}  // namespace vdgr
