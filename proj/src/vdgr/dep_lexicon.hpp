#pragma once

#include <map>
#include <string>
#include <vector>

namespace vdgr::graphcon {

/// Maps dependency relation labels to question-graph type ids 1..47.
class RelationLexicon {
public:
  /// The built-in inventory; identical to data/dependency_relations.txt.
  static const RelationLexicon& builtin();
  /// Reads one label per line; '#' lines and blanks are skipped.
  static RelationLexicon load(const std::string& path);

  explicit RelationLexicon(std::vector<std::string> labels);

  int id(const std::string& label) const;  // throws on unknown labels
  const std::string& label(int id) const;
  int size() const { return static_cast<int>(labels_.size()); }

private:
  std::vector<std::string> labels_;
  std::map<std::string, int> ids_;
};

}  // namespace vdgr::graphcon
