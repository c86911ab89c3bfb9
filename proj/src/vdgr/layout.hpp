#pragma once

// Tokenization and the text/image stream layout: where the question, the
// round separators and the region slots sit inside the transformer inputs.

#include "vdgr/autograd.hpp"
#include "vdgr/dialog.hpp"
#include "vdgr/graphcon.hpp"

#include <map>
#include <string>
#include <vector>

namespace vdgr {

/// Lower-cased whitespace vocabulary with five reserved ids.
class Vocabulary {
public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kMask = 4;

  Vocabulary();
  /// Collects every caption, question, answer and candidate word; ids follow
  /// sorted order so the result does not depend on corpus order.
  static Vocabulary build(const std::vector<DialogInstance>& corpus);
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& word) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_special(int id) const { return id < 5; }

private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

std::vector<std::string> split_words(const std::string& text);

struct TokenLayout {
  std::vector<int> token_ids;
  int cls_position = 0;
  std::vector<int> sep_positions;
  int question_start = 0;   // s_q
  int question_length = 0;  // N_q
  int answer_start = 0;
  int answer_length = 0;
  int num_regions = 0;      // image slots = num_regions + 1 ([IMG] at slot 0)
  /// History node ids kept after truncation: 0 is the caption, r the r-th round.
  std::vector<int> history_rounds;

  std::vector<int> idx_v;  // image slots of the region nodes (1..N_i)
  std::vector<int> idx_q;  // text positions of the question nodes
  std::vector<int> idx_h;  // text positions of the round separators

  int text_length() const { return static_cast<int>(token_ids.size()); }
  int image_slots() const { return num_regions + 1; }
  bool is_special_position(int pos) const;
};

struct ImageInput {
  ad::Matrix features;  // image_slots x region_dim; row 0 is the mean of the regions
  ad::Matrix geometry;  // image_slots x 5 normalised (x1, y1, x2, y2, area)
};

/// Text layout for round `round` (1-based) with `candidate` as the appended
/// answer. Oldest completed rounds are dropped first when the sequence would
/// exceed `max_tokens`; the caption is shortened only if that is not enough.
TokenLayout tokenize_and_layout(const DialogInstance& inst, int round, const std::string& candidate,
                                const Vocabulary& vocab, int max_tokens = 256);

ImageInput make_image_input(const DialogInstance& inst);

/// History graph restricted to the rounds kept in the layout.
graphcon::Graph history_graph_for(const DialogInstance& inst, const TokenLayout& layout);

}  // namespace vdgr
