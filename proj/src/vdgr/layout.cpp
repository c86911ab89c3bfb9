#include "vdgr/layout.hpp"

#include "vdgr/error.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace vdgr {

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string w;
  while (is >> w) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(w);
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  require(tokens.size() >= 5, "vocabulary is missing reserved tokens");
  for (std::size_t i = 0; i < 5; ++i) require(tokens[i] == v.tokens_[i], "vocabulary reserved tokens out of order");
  for (std::size_t i = 5; i < tokens.size(); ++i) {
    require(v.ids_.emplace(tokens[i], static_cast<int>(i)).second, "duplicate vocabulary token " + tokens[i]);
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

Vocabulary Vocabulary::build(const std::vector<DialogInstance>& corpus) {
  std::set<std::string> words;
  auto add = [&](const std::string& s) {
    for (auto& w : split_words(s)) words.insert(w);
  };
  for (const auto& inst : corpus) {
    add(inst.caption);
    for (const auto& r : inst.rounds) {
      add(r.question);
      add(r.answer);
      for (const auto& c : r.candidates) add(c);
    }
  }
  Vocabulary v;
  for (const auto& w : words) {
    if (v.ids_.count(w) != 0) continue;
    v.ids_[w] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

bool TokenLayout::is_special_position(int pos) const {
  const int id = token_ids.at(static_cast<std::size_t>(pos));
  return id == Vocabulary::kCls || id == Vocabulary::kSep || id == Vocabulary::kPad;
}

namespace {

std::vector<int> encode(const std::string& text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
  return ids;
}

}  // namespace

TokenLayout tokenize_and_layout(const DialogInstance& inst, int round, const std::string& candidate,
                                const Vocabulary& vocab, int max_tokens) {
  require(round >= 1 && round <= static_cast<int>(inst.rounds.size()), "round index out of range");
  std::vector<int> caption = encode(inst.caption, vocab);
  const std::vector<int> question = encode(inst.rounds[static_cast<std::size_t>(round - 1)].question, vocab);
  const std::vector<int> answer = encode(candidate, vocab);
  require(!question.empty(), "current question is empty");

  std::vector<std::pair<std::vector<int>, std::vector<int>>> history;
  for (int r = 1; r < round; ++r) {
    const auto& rd = inst.rounds[static_cast<std::size_t>(r - 1)];
    history.emplace_back(encode(rd.question, vocab), encode(rd.answer, vocab));
  }
  std::vector<int> kept;
  for (int r = 1; r < round; ++r) kept.push_back(r);

  auto length = [&]() {
    int n = 1 + static_cast<int>(caption.size()) + 1;  // [CLS] C [SEP]
    for (int r : kept) {
      const auto& h = history[static_cast<std::size_t>(r - 1)];
      n += static_cast<int>(h.first.size() + h.second.size()) + 2;
    }
    return n + static_cast<int>(question.size() + answer.size()) + 2;
  };
  while (length() > max_tokens && !kept.empty()) kept.erase(kept.begin());
  if (length() > max_tokens) {
    const int excess = length() - max_tokens;
    require(excess <= static_cast<int>(caption.size()), "current question and answer exceed the token budget");
    caption.resize(caption.size() - static_cast<std::size_t>(excess));
  }

  TokenLayout lay;
  auto& ids = lay.token_ids;
  auto push_sep = [&]() {
    lay.sep_positions.push_back(static_cast<int>(ids.size()));
    ids.push_back(Vocabulary::kSep);
  };
  ids.push_back(Vocabulary::kCls);
  ids.insert(ids.end(), caption.begin(), caption.end());
  lay.idx_h.push_back(static_cast<int>(ids.size()));
  lay.history_rounds.push_back(0);
  push_sep();
  for (int r : kept) {
    const auto& h = history[static_cast<std::size_t>(r - 1)];
    ids.insert(ids.end(), h.first.begin(), h.first.end());
    push_sep();
    ids.insert(ids.end(), h.second.begin(), h.second.end());
    // The separator closing a round segment represents that round.
    lay.idx_h.push_back(static_cast<int>(ids.size()));
    lay.history_rounds.push_back(r);
    push_sep();
  }
  lay.question_start = static_cast<int>(ids.size());
  lay.question_length = static_cast<int>(question.size());
  ids.insert(ids.end(), question.begin(), question.end());
  push_sep();
  lay.answer_start = static_cast<int>(ids.size());
  lay.answer_length = static_cast<int>(answer.size());
  ids.insert(ids.end(), answer.begin(), answer.end());
  push_sep();

  for (int i = 0; i < lay.question_length; ++i) lay.idx_q.push_back(lay.question_start + i);
  lay.num_regions = inst.num_regions();
  for (int i = 1; i <= lay.num_regions; ++i) lay.idx_v.push_back(i);
  return lay;
}

ImageInput make_image_input(const DialogInstance& inst) {
  require(inst.has_features(), "instance has no region features");
  const auto n = static_cast<Eigen::Index>(inst.boxes.size());
  require(inst.region_features.rows() == n, "region feature rows do not match the boxes");
  ImageInput in;
  in.features.resize(n + 1, inst.region_features.cols());
  in.features.row(0) = inst.region_features.colwise().mean();
  in.features.bottomRows(n) = inst.region_features;

  double w = 0, h = 0;
  for (const auto& b : inst.boxes) {
    w = std::max(w, b.x2);
    h = std::max(h, b.y2);
  }
  if (w <= 0) w = 1;
  if (h <= 0) h = 1;
  in.geometry.resize(n + 1, 5);
  in.geometry.row(0) << 0.0, 0.0, 1.0, 1.0, 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& b = inst.boxes[static_cast<std::size_t>(i)];
    in.geometry.row(i + 1) << b.x1 / w, b.y1 / h, b.x2 / w, b.y2 / h, b.area() / (w * h);
  }
  return in;
}

graphcon::Graph history_graph_for(const DialogInstance& inst, const TokenLayout& layout) {
  return graphcon::induced(inst.history_graph, layout.history_rounds);
}

}  // namespace vdgr
