#include "vdgr/dep_lexicon.hpp"

#include "vdgr/error.hpp"

#include <fstream>

namespace vdgr::graphcon {

const RelationLexicon& RelationLexicon::builtin() {
  static const RelationLexicon lexicon({
      "acl",
      "acl:relcl",
      "advcl",
      "advmod",
      "amod",
      "appos",
      "aux",
      "aux:pass",
      "case",
      "cc",
      "cc:preconj",
      "ccomp",
      "compound",
      "compound:prt",
      "conj",
      "cop",
      "csubj",
      "csubj:pass",
      "dep",
      "det",
      "det:predet",
      "discourse",
      "dislocated",
      "expl",
      "fixed",
      "flat",
      "goeswith",
      "iobj",
      "list",
      "mark",
      "nmod",
      "nmod:npmod",
      "nmod:poss",
      "nmod:tmod",
      "nsubj",
      "nsubj:pass",
      "nummod",
      "obj",
      "obl",
      "obl:npmod",
      "obl:tmod",
      "orphan",
      "parataxis",
      "punct",
      "reparandum",
      "vocative",
      "xcomp",
  });
  return lexicon;
}

RelationLexicon RelationLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open relation lexicon " + path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    labels.push_back(line);
  }
  return RelationLexicon(std::move(labels));
}

RelationLexicon::RelationLexicon(std::vector<std::string> labels) : labels_(std::move(labels)) {
  require(!labels_.empty(), "relation lexicon is empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const bool inserted = ids_.emplace(labels_[i], static_cast<int>(i) + 1).second;
    require(inserted, "duplicate relation label '" + labels_[i] + "'");
  }
}

int RelationLexicon::id(const std::string& label) const {
  auto it = ids_.find(label);
  if (it == ids_.end()) fail("unknown dependency relation '" + label + "'");
  return it->second;
}

const std::string& RelationLexicon::label(int id) const {
  require(id >= 1 && id <= size(), "relation id out of range");
  return labels_[static_cast<std::size_t>(id - 1)];
}

}  // namespace vdgr::graphcon
