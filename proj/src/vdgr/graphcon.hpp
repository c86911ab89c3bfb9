#pragma once

// Construction of the image, question and history graphs from raw
// annotations. Everything here is a pure function of its inputs.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vdgr/dep_lexicon.hpp"

namespace vdgr::graphcon {

enum class Modality { Image, Question, History };

std::string modality_name(Modality m);
Modality parse_modality(const std::string& name);

/// Number of non-hub relation classes per modality (11 / 47 / 1).
int relation_class_count(Modality m);
/// Type id reserved for hub edges; also the edge-feature dimension (12 / 48 / 2).
int hub_type(Modality m);

inline constexpr int kInside = 1;
inline constexpr int kCover = 2;
inline constexpr int kOverlap = 3;
inline constexpr int kCoreference = 1;
inline constexpr int kMaxRegions = 36;

struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool operator==(const BoundingBox&) const = default;
};

/// Throws when the box has non-positive area or non-finite coordinates.
void validate(const BoundingBox& b);

struct Edge {
  int src = 0;
  int dst = 0;
  int type = 0;

  auto operator<=>(const Edge&) const = default;
};

/// Typed directed edge list. When `hub_present`, node `num_nodes` is the hub
/// and the matrix of node features has num_nodes + 1 rows.
struct Graph {
  Modality modality = Modality::Image;
  int num_nodes = 0;
  bool hub_present = false;
  std::vector<Edge> edges;

  int total_nodes() const { return num_nodes + (hub_present ? 1 : 0); }
  int hub_index() const { return num_nodes; }
  bool is_hub_edge(const Edge& e) const { return hub_present && (e.src == num_nodes || e.dst == num_nodes); }
  std::size_t relation_edge_count() const;

  bool operator==(const Graph&) const = default;
};

/// Sorts edges, removes duplicates and checks every Graph invariant.
void canonicalize(Graph& g);
/// Throws on any invariant violation (range, self-loops, duplicates, hub fan).
void validate(const Graph& g);

/// Appends the hub node with bidirectional hub-type edges to every node.
void attach_hub(Graph& g);
/// Copy without hub node and hub edges.
Graph without_hub(const Graph& g);
/// Subgraph induced on `keep` (renumbered in the given order); hub re-attached
/// if the source had one.
Graph induced(const Graph& g, std::span<const int> keep);

struct DependencyEdge {
  int head = 0;
  int dependent = 0;
  std::string relation;
};

struct CoreferenceLink {
  int from_round = 0;
  int to_round = 0;
};

double iou(const BoundingBox& a, const BoundingBox& b);

/// Angle of the vector from a's centre to b's centre, counter-clockwise from
/// +x, in (0, 2*pi]. Exact 0 is reported as 2*pi. Throws when the centres
/// coincide.
double center_angle(const BoundingBox& a, const BoundingBox& b);

/// Sector class ceil(phi / (pi/4)) + 3 in 4..11 for the displacement (dx, dy),
/// decided with exact comparisons so that (dx, dy) and (-dx, -dy) always land
/// in partner sectors.
int angular_class(double dx, double dy);

/// Strict containment of `inner` in `outer` (containment with inequality).
bool strictly_contains(const BoundingBox& outer, const BoundingBox& inner);

/// Relation id in 1..11: inside, cover, overlap, then angular sectors.
int classify_spatial_relation(const BoundingBox& a, const BoundingBox& b);

/// Partner class of `c` when the argument order is swapped.
int symmetric_partner(int c);

Graph build_image_graph(std::span<const BoundingBox> boxes, int max_regions = kMaxRegions);
Graph build_question_graph(std::span<const DependencyEdge> edges, int num_tokens,
                           const RelationLexicon& lexicon = RelationLexicon::builtin());
Graph build_history_graph(std::span<const CoreferenceLink> links, int num_rounds);

/// Frequency of each relation class (index = type id) over non-hub edges.
struct RelationHistogram {
  Modality modality = Modality::Image;
  std::vector<std::uint64_t> counts;  // size relation_class_count + 1, slot 0 unused
  std::uint64_t total() const;
};

RelationHistogram graph_stats(std::span<const Graph> corpus, Modality modality);

}  // namespace vdgr::graphcon
