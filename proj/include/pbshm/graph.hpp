#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace pbshm {

enum class ElementTag { ground, deck, pillar, plate, other };

/// Irreducible-element type. `name` is only meaningful for `other`.
struct ElementKind {
  ElementTag tag = ElementTag::ground;
  std::string name;

  static ElementKind ground() { return {ElementTag::ground, {}}; }
  static ElementKind deck() { return {ElementTag::deck, {}}; }
  static ElementKind pillar() { return {ElementTag::pillar, {}}; }
  static ElementKind plate() { return {ElementTag::plate, {}}; }
  static ElementKind other(std::string n) { return {ElementTag::other, std::move(n)}; }

  static ElementKind parse(std::string_view text);
  std::string str() const;
  bool is_ground() const { return tag == ElementTag::ground; }

  friend bool operator==(const ElementKind& a, const ElementKind& b) {
    return a.tag == b.tag && (a.tag != ElementTag::other || a.name == b.name);
  }
};

/// Attribute order inside a block: l, w, t (m), E (Pa), rho (kg/m^3), nu.
enum class Param : std::size_t { l = 0, w, t, E, rho, nu };
inline constexpr std::size_t kParamCount = 6;
using AttributeBlock = std::array<double, kParamCount>;

std::string_view param_name(Param p);
std::optional<Param> parse_param(std::string_view name);

struct IEVertex {
  std::string id;
  ElementKind kind;
  std::optional<AttributeBlock> attributes;  // empty for ground
};

enum class Provenance { real, simulated };

std::string_view to_string(Provenance p);

/// A structure in the base space. Immutable after construction; the
/// constructor enforces every invariant (connected, >= 1 ground, sensors on
/// vertices, attribute ranges).
class AttributedGraph {
 public:
  using Edge = std::pair<std::string, std::string>;

  AttributedGraph(std::string id, std::vector<IEVertex> vertices, std::vector<Edge> edges,
                  std::map<std::string, std::string> sensors = {},
                  Provenance provenance = Provenance::simulated);

  const std::string& id() const { return id_; }
  Provenance provenance() const { return provenance_; }
  std::size_t size() const { return vertices_.size(); }
  const std::vector<IEVertex>& vertices() const { return vertices_; }
  const IEVertex& vertex(std::size_t i) const { return vertices_.at(i); }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::map<std::string, std::string>& sensors() const { return sensors_; }

  bool adjacent(std::size_t a, std::size_t b) const { return adjacency_[a * size() + b] != 0; }
  std::optional<std::size_t> index_of(std::string_view vertex_id) const;
  std::vector<std::size_t> neighbours(std::size_t i) const;

  AttributedGraph with_id(std::string new_id) const;

  nlohmann::json to_json() const;
  static AttributedGraph from_json(const nlohmann::json& doc);

 private:
  std::string id_;
  std::vector<IEVertex> vertices_;
  std::vector<Edge> edges_;
  std::map<std::string, std::string> sensors_;
  Provenance provenance_;
  std::vector<unsigned char> adjacency_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

bool is_connected(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Configuration of the base-space metric.
struct MetricConfig {
  /// Weight of the attribute term relative to the topological term.
  double lambda_attr = 1.0;
  /// Per-parameter normalisation (family box widths); defaults match the
  /// built-in bridge families.
  AttributeBlock attribute_scale = default_attribute_scale();
  /// Exact search is refused above this many vertices unless greedy is on.
  std::size_t exact_vertex_limit = 12;
  bool allow_greedy = false;

  static AttributeBlock default_attribute_scale();
};

/// One maximum common induced subgraph, with the attribute mismatch of its
/// vertex correspondence. Among all maximum ones the cheapest is returned.
struct CommonSubgraph {
  std::vector<std::pair<std::size_t, std::size_t>> mapping;  // (index in g1, index in g2)
  double attribute_sq = 0.0;                                  // sum of squared normalised differences
  bool exact = true;
};

CommonSubgraph maximum_common_subgraph(const AttributedGraph& g1, const AttributedGraph& g2,
                                       const MetricConfig& cfg = {});

std::size_t mcs_size(const AttributedGraph& g1, const AttributedGraph& g2, const MetricConfig& cfg = {});

struct DistanceBreakdown {
  std::size_t mcs = 0;
  double topological = 0.0;
  double attribute = 0.0;  // unweighted Euclidean norm over the correspondence
  double total = 0.0;
};

DistanceBreakdown distance_breakdown(const AttributedGraph& g1, const AttributedGraph& g2,
                                     const MetricConfig& cfg = {});

double graph_distance(const AttributedGraph& g1, const AttributedGraph& g2, const MetricConfig& cfg = {});

/// Kind-preserving isomorphism test (maximum common subgraph covers both).
bool kind_isomorphic(const AttributedGraph& g1, const AttributedGraph& g2);

}  // namespace pbshm
