#include "vdgr/graphcon.hpp"

#include "vdgr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace vdgr::graphcon {

std::string modality_name(Modality m) {
  switch (m) {
    case Modality::Image: return "image";
    case Modality::Question: return "question";
    case Modality::History: return "history";
  }
  return "image";
}

Modality parse_modality(const std::string& name) {
  if (name == "image") return Modality::Image;
  if (name == "question") return Modality::Question;
  if (name == "history") return Modality::History;
  fail("unknown modality '" + name + "'");
}

int relation_class_count(Modality m) {
  switch (m) {
    case Modality::Image: return 11;
    case Modality::Question: return 47;
    case Modality::History: return 1;
  }
  return 0;
}

int hub_type(Modality m) { return relation_class_count(m) + 1; }

void validate(const BoundingBox& b) {
  require(std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) && std::isfinite(b.y2),
          "bounding box has non-finite coordinates");
  require(b.x1 < b.x2 && b.y1 < b.y2, "degenerate bounding box (zero or negative area)");
}

std::size_t Graph::relation_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges.begin(), edges.end(), [this](const Edge& e) { return !is_hub_edge(e); }));
}

void canonicalize(Graph& g) {
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  validate(g);
}

void validate(const Graph& g) {
  require(g.num_nodes >= 0, "graph has negative node count");
  const int total = g.total_nodes();
  const int hub = hub_type(g.modality);
  std::set<Edge> seen;
  std::set<int> hub_in, hub_out;
  for (const Edge& e : g.edges) {
    require(e.src >= 0 && e.src < total && e.dst >= 0 && e.dst < total, "edge endpoint out of range");
    require(e.src != e.dst, "self-loop in graph");
    require(seen.insert(e).second, "duplicate edge in graph");
    if (g.is_hub_edge(e)) {
      require(e.type == hub, "hub edge must carry the hub type");
      (e.src == g.num_nodes ? hub_out : hub_in).insert(e.src == g.num_nodes ? e.dst : e.src);
    } else {
      require(e.type >= 1 && e.type < hub, "relation type out of range for modality");
    }
  }
  if (g.hub_present) {
    require(static_cast<int>(hub_in.size()) == g.num_nodes && static_cast<int>(hub_out.size()) == g.num_nodes,
            "hub must connect to every node in both directions");
  }
}

void attach_hub(Graph& g) {
  require(!g.hub_present, "graph already has a hub");
  g.hub_present = true;
  const int hub = g.num_nodes;
  const int type = hub_type(g.modality);
  for (int v = 0; v < g.num_nodes; ++v) {
    g.edges.push_back({hub, v, type});
    g.edges.push_back({v, hub, type});
  }
  canonicalize(g);
}

Graph without_hub(const Graph& g) {
  Graph out{g.modality, g.num_nodes, false, {}};
  for (const Edge& e : g.edges)
    if (!g.is_hub_edge(e)) out.edges.push_back(e);
  return out;
}

Graph induced(const Graph& g, std::span<const int> keep) {
  std::vector<int> remap(static_cast<std::size_t>(g.num_nodes), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    require(keep[i] >= 0 && keep[i] < g.num_nodes, "induced: node out of range");
    require(remap[static_cast<std::size_t>(keep[i])] < 0, "induced: node listed twice");
    remap[static_cast<std::size_t>(keep[i])] = static_cast<int>(i);
  }
  Graph out{g.modality, static_cast<int>(keep.size()), false, {}};
  for (const Edge& e : g.edges) {
    if (g.is_hub_edge(e)) continue;
    const int s = remap[static_cast<std::size_t>(e.src)], d = remap[static_cast<std::size_t>(e.dst)];
    if (s >= 0 && d >= 0) out.edges.push_back({s, d, e.type});
  }
  if (g.hub_present)
    attach_hub(out);
  else
    canonicalize(out);
  return out;
}

// ---------------------------------------------------------------------------

double iou(const BoundingBox& a, const BoundingBox& b) {
  validate(a);
  validate(b);
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double center_angle(const BoundingBox& a, const BoundingBox& b) {
  const double dx = b.center_x() - a.center_x();
  const double dy = b.center_y() - a.center_y();
  require(dx != 0.0 || dy != 0.0, "angle undefined: box centres coincide");
  const double phi = std::atan2(dy, dx);
  return phi > 0.0 ? phi : phi + 2.0 * std::numbers::pi;
}

int angular_class(double dx, double dy) {
  require(dx != 0.0 || dy != 0.0, "angle undefined: zero displacement");
  const double ax = std::abs(dx), ay = std::abs(dy);
  int sector;
  if (dx > 0 && dy > 0 && ay <= ax) sector = 1;         // (0, pi/4]
  else if (dy > 0 && dx >= 0) sector = 2;               // (pi/4, pi/2]
  else if (dx < 0 && dy > 0 && ay >= ax) sector = 3;    // (pi/2, 3pi/4]
  else if (dx < 0 && dy >= 0) sector = 4;               // (3pi/4, pi]
  else if (dx < 0 && dy < 0 && ay <= ax) sector = 5;    // (pi, 5pi/4]
  else if (dy < 0 && dx <= 0) sector = 6;               // (5pi/4, 3pi/2]
  else if (dx > 0 && dy < 0 && ax <= ay) sector = 7;    // (3pi/2, 7pi/4]
  else sector = 8;                                      // (7pi/4, 2pi]
  return sector + 3;
}

bool strictly_contains(const BoundingBox& outer, const BoundingBox& inner) {
  return outer.x1 <= inner.x1 && outer.y1 <= inner.y1 && outer.x2 >= inner.x2 && outer.y2 >= inner.y2 &&
         !(outer == inner);
}

int classify_spatial_relation(const BoundingBox& a, const BoundingBox& b) {
  validate(a);
  validate(b);
  if (strictly_contains(a, b)) return kInside;
  if (strictly_contains(b, a)) return kCover;
  if (iou(a, b) >= 0.5) return kOverlap;
  const double dx = b.center_x() - a.center_x();
  const double dy = b.center_y() - a.center_y();
  // Coincident centres without containment or heavy overlap: no angle exists.
  if (dx == 0.0 && dy == 0.0) return kOverlap;
  return angular_class(dx, dy);
}

int symmetric_partner(int c) {
  require(c >= 1 && c <= 11, "spatial class out of range");
  if (c == kInside) return kCover;
  if (c == kCover) return kInside;
  if (c == kOverlap) return kOverlap;
  return ((c - 4 + 4) % 8) + 4;
}

// ---------------------------------------------------------------------------

Graph build_image_graph(std::span<const BoundingBox> boxes, int max_regions) {
  require(!boxes.empty(), "image graph needs at least one box");
  require(static_cast<int>(boxes.size()) <= max_regions, "too many regions for the image graph");
  for (const auto& b : boxes) validate(b);
  Graph g{Modality::Image, static_cast<int>(boxes.size()), false, {}};
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = 0; j < g.num_nodes; ++j)
      if (i != j)
        g.edges.push_back({i, j, classify_spatial_relation(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)])});
  attach_hub(g);
  return g;
}

Graph build_question_graph(std::span<const DependencyEdge> edges, int num_tokens, const RelationLexicon& lexicon) {
  require(num_tokens >= 1, "question graph needs at least one token");
  Graph g{Modality::Question, num_tokens, false, {}};
  std::vector<int> heads(static_cast<std::size_t>(num_tokens), 0);
  for (const auto& e : edges) {
    require(e.head >= 0 && e.head < num_tokens && e.dependent >= 0 && e.dependent < num_tokens,
            "dependency edge index out of range");
    require(e.head != e.dependent, "dependency edge with head == dependent");
    const int type = lexicon.id(e.relation);
    require(type <= relation_class_count(Modality::Question), "lexicon id exceeds question relation count");
    require(++heads[static_cast<std::size_t>(e.dependent)] == 1, "token has more than one head");
    g.edges.push_back({e.head, e.dependent, type});
  }
  attach_hub(g);
  return g;
}

Graph build_history_graph(std::span<const CoreferenceLink> links, int num_rounds) {
  require(num_rounds >= 1, "history graph needs at least the caption round");
  Graph g{Modality::History, num_rounds, false, {}};
  for (int r = 1; r < num_rounds; ++r) {
    g.edges.push_back({0, r, kCoreference});
    g.edges.push_back({r, 0, kCoreference});
  }
  for (const auto& l : links) {
    require(l.to_round >= 0 && l.to_round < l.from_round && l.from_round < num_rounds,
            "coreference link out of range (need 0 <= to < from < num_rounds)");
    g.edges.push_back({l.from_round, l.to_round, kCoreference});
    g.edges.push_back({l.to_round, l.from_round, kCoreference});
  }
  attach_hub(g);
  return g;
}

// ---------------------------------------------------------------------------

std::uint64_t RelationHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

RelationHistogram graph_stats(std::span<const Graph> corpus, Modality modality) {
  RelationHistogram h{modality, std::vector<std::uint64_t>(static_cast<std::size_t>(relation_class_count(modality)) + 1, 0)};
  for (const Graph& g : corpus) {
    require(g.modality == modality, "graph_stats: corpus mixes modalities");
    for (const Edge& e : g.edges)
      if (!g.is_hub_edge(e)) ++h.counts.at(static_cast<std::size_t>(e.type));
  }
  return h;
}

}  // namespace vdgr::graphcon
