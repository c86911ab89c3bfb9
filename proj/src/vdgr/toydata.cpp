#include "vdgr/toydata.hpp"

#include "vdgr/dataset.hpp"
#include "vdgr/error.hpp"
#include "vdgr/layout.hpp"
#include "vdgr/rng.hpp"

#include <algorithm>
#include <set>

namespace vdgr {

namespace {

const std::vector<std::string> kClasses = {"dog", "cat", "car", "tree", "ball", "bird", "man", "cup"};
const std::vector<std::string> kPlurals = {"dogs", "cats", "cars", "trees", "balls", "birds", "men", "cups"};
const std::vector<std::string> kNumbers = {"zero", "one", "two", "three", "four", "five",
                                           "six",  "seven", "eight", "nine", "ten"};
const std::vector<std::string> kFillers = {"i can not tell", "not sure", "maybe", "i think so", "hard to say"};

constexpr std::uint64_t kCentroidSeed = 0x5eed0fc1a55e5ULL;

using graphcon::DependencyEdge;

std::vector<std::vector<double>> class_centroids(int dim) {
  Rng rng(kCentroidSeed);
  std::vector<std::vector<double>> c(kClasses.size(), std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& row : c)
    for (double& v : row) v = rng.normal();
  return c;
}

int count_of(const std::vector<int>& classes, int cls) {
  return static_cast<int>(std::count(classes.begin(), classes.end(), cls));
}

struct QA {
  std::string question, answer;
  std::vector<DependencyEdge> parse;
  int mentioned_class = -1;  // class named by this round, if any
  int refers_to = -1;        // round (0 = caption) a pronoun points back to
};

QA count_question(int cls, const std::vector<int>& classes) {
  // how many dogs are there
  return {"how many " + kPlurals[static_cast<std::size_t>(cls)] + " are there",
          kNumbers[static_cast<std::size_t>(count_of(classes, cls))],
          {{1, 0, "advmod"}, {2, 1, "amod"}, {3, 2, "nsubj"}, {3, 4, "expl"}},
          cls,
          -1};
}

QA exists_question(int cls, const std::vector<int>& classes) {
  // is there a cat
  return {"is there a " + kClasses[static_cast<std::size_t>(cls)], count_of(classes, cls) > 0 ? "yes" : "no",
          {{0, 1, "expl"}, {3, 2, "det"}, {0, 3, "nsubj"}},
          cls,
          -1};
}

QA left_question(const std::vector<int>& classes, const std::vector<graphcon::BoundingBox>& boxes) {
  // what is on the left
  std::size_t best = 0;
  for (std::size_t i = 1; i < boxes.size(); ++i)
    if (boxes[i].center_x() < boxes[best].center_x()) best = i;
  return {"what is on the left", "a " + kClasses[static_cast<std::size_t>(classes[best])],
          {{0, 1, "cop"}, {4, 2, "case"}, {4, 3, "det"}, {0, 4, "nsubj"}},
          -1,
          -1};
}

QA coref_question(int cls, int source_round, const std::vector<int>& classes) {
  // how many of them are there
  return {"how many of them are there",
          kNumbers[static_cast<std::size_t>(count_of(classes, cls))],
          {{1, 0, "advmod"}, {4, 1, "nsubj"}, {3, 2, "case"}, {1, 3, "nmod"}, {4, 5, "expl"}},
          -1,
          source_round};
}

std::vector<std::string> pick_candidates(const std::string& gt, int n, Rng& rng, int& gt_index) {
  std::vector<std::string> pool;
  for (const auto& a : toy_answer_pool())
    if (a != gt) pool.push_back(a);
  require(n >= 1 && n <= static_cast<int>(pool.size()) + 1,
          "toy data: at most " + std::to_string(pool.size() + 1) + " candidates are available");
  for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(pool.size() - i)));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::string> out(pool.begin(), pool.begin() + (n - 1));
  gt_index = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  out.insert(out.begin() + gt_index, gt);
  return out;
}

std::vector<double> relevance_for(const std::vector<std::string>& cands, const std::string& gt) {
  std::set<std::string> gt_words;
  for (const auto& w : split_words(gt)) gt_words.insert(w);
  std::vector<double> rel;
  for (const auto& c : cands) {
    if (c == gt) {
      rel.push_back(1.0);
      continue;
    }
    bool shares = false;
    for (const auto& w : split_words(c))
      if (gt_words.count(w) && w != "a") shares = true;
    rel.push_back(shares ? 0.5 : 0.0);
  }
  return rel;
}

}  // namespace

const std::vector<std::string>& toy_answer_pool() {
  static const std::vector<std::string> pool = [] {
    std::vector<std::string> p(kNumbers.begin(), kNumbers.end());
    p.push_back("yes");
    p.push_back("no");
    for (const auto& c : kClasses) p.push_back("a " + c);
    for (const auto& f : kFillers) p.push_back(f);
    for (std::size_t n = 2; n < kNumbers.size(); ++n)
      for (const auto& c : kPlurals) p.push_back(kNumbers[n] + " " + c);
    return p;
  }();
  return pool;
}

std::vector<DialogInstance> generate_toy_dialogs(const ToyDataOptions& opts) {
  require(opts.dialogs >= 1 && opts.regions >= 1 && opts.candidates >= 1 && opts.rounds >= 1 && opts.region_dim >= 1,
          "toy data: sizes must be at least 1");
  require(opts.regions <= 10, "toy data: at most 10 regions per image");
  require(opts.rounds <= 10, "toy data: at most 10 rounds per dialog");
  require(opts.feature_noise >= 0, "toy data: noise must be non-negative");
  const auto centroids = class_centroids(opts.region_dim);
  Rng rng(opts.seed);
  const int num_classes = static_cast<int>(kClasses.size());

  std::vector<DialogInstance> out;
  for (int di = 0; di < opts.dialogs; ++di) {
    DialogInstance d;
    d.image_id = opts.first_image_id + di;

    std::vector<int> classes;
    d.region_features.resize(opts.regions, opts.region_dim);
    for (int r = 0; r < opts.regions; ++r) {
      const int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_classes)));
      classes.push_back(cls);
      const double w = rng.uniform(40, 160), h = rng.uniform(40, 160);
      const double x = rng.uniform(0, 640 - w), y = rng.uniform(0, 480 - h);
      d.boxes.push_back({x, y, x + w, y + h});
      for (int k = 0; k < opts.region_dim; ++k)
        d.region_features(r, k) = centroids[static_cast<std::size_t>(cls)][static_cast<std::size_t>(k)] +
                                  opts.feature_noise * rng.normal();
    }
    d.caption = "a picture with a " + kClasses[static_cast<std::size_t>(classes[0])];
    if (classes.size() > 1) d.caption += " and a " + kClasses[static_cast<std::size_t>(classes[1])];

    int last_class = classes[0], last_round = 0;
    for (int r = 1; r <= opts.rounds; ++r) {
      const auto kind = rng.uniform_int(4);
      // questions mostly ask about classes that are present
      int cls = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_classes)));
      if (rng.bernoulli(0.7)) cls = classes[static_cast<std::size_t>(rng.uniform_int(classes.size()))];
      QA qa = kind == 0   ? count_question(cls, classes)
              : kind == 1 ? exists_question(cls, classes)
              : kind == 2 ? left_question(classes, d.boxes)
                          : coref_question(last_class, last_round, classes);
      if (qa.refers_to >= 0) d.corefs.push_back({r, qa.refers_to});
      if (qa.mentioned_class >= 0) {
        last_class = qa.mentioned_class;
        last_round = r;
      }
      DialogRound round;
      round.question = qa.question;
      round.answer = qa.answer;
      round.parse = qa.parse;
      round.candidates = pick_candidates(qa.answer, opts.candidates, rng, round.gt_index);
      d.rounds.push_back(std::move(round));
    }
    if (opts.dense) {
      auto& rd = d.rounds[static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(opts.rounds)))];
      rd.relevance = relevance_for(rd.candidates, rd.answer);
    }
    prepare_graphs(d);
    out.push_back(std::move(d));
  }
  return out;
}

void generate_toy_dataset(const ToyDataOptions& opts, const std::string& dir, const std::string& split) {
  write_dataset(generate_toy_dialogs(opts), dir, split);
}

}  // namespace vdgr
