#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pbshm/graph.hpp"

namespace pbshm {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains_open(double x) const { return x > lo && x < hi; }
};

struct SlotSpec {
  std::string id;
  ElementKind kind;
};

/// What happens to the graph when a slot shrinks to zero length: edges added
/// among the survivors and ground vertices that disappear with it.
struct CollapseRule {
  std::vector<AttributedGraph::Edge> rewire;
  std::vector<std::string> drop;
};

/// Declared deformation from this family into `target` by driving
/// `zero_set` coordinates to zero.
struct ContractionSpec {
  std::string target;
  std::vector<std::pair<std::string, Param>> zero_set;
  std::map<std::string, std::string> correspondence;  // surviving vertex id -> target vertex id
  std::map<std::string, CollapseRule> collapse;        // keyed by collapsing slot id

  /// Slots touched by the zero set (these vanish from the graph at alpha = 0).
  std::set<std::string> removed_slots() const;
  /// Removed slots whose only zeroed parameter is their length. Their collapse
  /// rules apply; slots losing material or section simply disappear.
  std::set<std::string> collapsing_slots() const;
};

class ThetaVector {
 public:
  ThetaVector() = default;
  explicit ThetaVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::vector<double>& values() const { return values_; }

  friend bool operator==(const ThetaVector&, const ThetaVector&) = default;

 private:
  std::vector<double> values_;
};

/// Parametric family: IE slots with {l,w,t,E,rho,nu} blocks, fixed topology
/// and an open parameter box. Coordinates are slot-major.
class FamilyTemplate {
 public:
  FamilyTemplate(std::string name, std::vector<SlotSpec> slots, std::vector<AttributedGraph::Edge> edges,
                 std::vector<std::pair<std::string, std::string>> ground_attachments, std::vector<Interval> box,
                 std::vector<ContractionSpec> contractions = {}, std::map<std::string, std::string> sensors = {});

  const std::string& name() const { return name_; }
  const std::vector<SlotSpec>& slots() const { return slots_; }
  const std::vector<AttributedGraph::Edge>& edges() const { return edges_; }
  const std::vector<std::pair<std::string, std::string>>& ground_attachments() const { return grounds_; }
  const std::vector<ContractionSpec>& contractions() const { return contractions_; }
  const std::map<std::string, std::string>& sensors() const { return sensors_; }

  std::size_t dimension() const { return slots_.size() * kParamCount; }
  std::size_t coordinate(std::string_view slot, Param p) const;
  std::optional<std::size_t> slot_index(std::string_view slot) const;
  std::string coordinate_name(std::size_t i) const;
  const Interval& box(std::size_t i) const { return box_.at(i); }
  std::vector<Interval> boxes() const { return box_; }

  /// Coordinates that some contraction may drive to zero.
  bool zero_permitted(std::size_t i) const { return zero_permitted_.contains(i); }
  const ContractionSpec* contraction_to(std::string_view target) const;

  ThetaVector midpoint() const;

  nlohmann::json to_json() const;
  static FamilyTemplate from_json(const nlohmann::json& doc);

 private:
  std::string name_;
  std::vector<SlotSpec> slots_;
  std::vector<AttributedGraph::Edge> edges_;
  std::vector<std::pair<std::string, std::string>> grounds_;
  std::vector<Interval> box_;
  std::vector<ContractionSpec> contractions_;
  std::map<std::string, std::string> sensors_;
  std::set<std::size_t> zero_permitted_;
};

using FamilyPtr = std::shared_ptr<const FamilyTemplate>;

/// Default per-parameter box for the bridge families.
std::array<Interval, kParamCount> default_bridge_box();

/// G-D1-G with a single deck; handy for closed-form checks.
FamilyPtr single_span_family();
/// G-D1-P1(-G)-D2-G, 18 coordinates.
FamilyPtr two_span_family();
/// G-D1-P1(-G)-D2-P2(-G)-D3-G, 30 coordinates, contractible onto the two-span
/// family by shrinking P2 and D3 to zero length.
FamilyPtr three_span_family();

/// A structure as (family, theta).
struct StructureInstance {
  std::string id;
  FamilyPtr family;
  ThetaVector theta;

  AttributedGraph graph(Provenance provenance = Provenance::simulated) const;
  double param(std::string_view slot, Param p) const { return theta[family->coordinate(slot, p)]; }
};

/// Writes theta into the family topology. Coordinates must lie strictly
/// inside the box; contractible coordinates may also take values in
/// [0, lo], and a slot whose contractible coordinates are exactly zero is
/// removed together with the matching contraction's collapse rules.
AttributedGraph instantiate(const FamilyTemplate& family, const ThetaVector& theta, std::string graph_id = {},
                            Provenance provenance = Provenance::simulated);

/// Reads the attribute blocks of an instantiated graph back into theta.
/// Removed slots read as zero.
ThetaVector theta_from_graph(const FamilyTemplate& family, const AttributedGraph& g);

/// Euclidean distance of box-normalised coordinates.
double family_distance(const FamilyTemplate& family, const ThetaVector& a, const ThetaVector& b);

class ContractionMap {
 public:
  ContractionMap(FamilyPtr source, FamilyPtr target, ContractionSpec spec);

  const FamilyTemplate& source() const { return *source_; }
  const FamilyTemplate& target() const { return *target_; }
  const ContractionSpec& spec() const { return spec_; }
  const std::vector<std::size_t>& zero_indices() const { return zero_indices_; }

  /// Full application (alpha = 0): the target-family theta read off the
  /// corresponding slots.
  ThetaVector apply(const ThetaVector& source_theta) const;

  /// A target-family instance expressed in the source family: corresponding
  /// slots copied, zero set at 0, every other coordinate taken from `free`.
  ThetaVector representative(const ThetaVector& target_theta, const ThetaVector& free) const;

 private:
  FamilyPtr source_;
  FamilyPtr target_;
  ContractionSpec spec_;
  std::vector<std::size_t> zero_indices_;
  std::vector<std::pair<std::size_t, std::size_t>> copied_;  // (source coord, target coord)
};

/// Validates the declared contraction from `src` onto `dst`: it must keep
/// the graph connected and land on a graph kind-isomorphic to `dst`.
ContractionMap contract(const FamilyPtr& src, const FamilyPtr& dst);

class EmbeddingMap {
 public:
  EmbeddingMap(FamilyPtr small, FamilyPtr big, std::vector<std::pair<std::size_t, std::size_t>> copied);

  ThetaVector embed(const ThetaVector& small_theta) const;
  ThetaVector project(const ThetaVector& big_theta) const;
  std::vector<std::size_t> image_indices() const;
  const FamilyTemplate& small() const { return *small_; }
  const FamilyTemplate& big() const { return *big_; }

 private:
  FamilyPtr small_;
  FamilyPtr big_;
  std::vector<std::pair<std::size_t, std::size_t>> copied_;  // (small coord, big coord)
};

/// Injective map placing `small` inside `big` (remaining coordinates zero);
/// `big` must declare a contraction onto `small`.
EmbeddingMap embed(const FamilyPtr& small, const FamilyPtr& big);

/// Straight line in one family's coordinates. When the endpoints sit in
/// different families the path lives in the larger one, and the contracted
/// coordinates travel to zero while everything else moves linearly.
class GeodesicPath {
 public:
  GeodesicPath(FamilyPtr family, ThetaVector start, ThetaVector end, std::vector<std::size_t> zero_indices,
               std::string start_id = {}, std::string end_id = {});

  const FamilyTemplate& family() const { return *family_; }
  const FamilyPtr& family_ptr() const { return family_; }
  const ThetaVector& start() const { return start_; }
  const ThetaVector& end() const { return end_; }
  const std::vector<std::size_t>& zero_indices() const { return zero_indices_; }

  /// (1 - s) * start + s * end; exact at s = 0 and s = 1.
  ThetaVector theta_at(double s) const;
  /// Unnamed endpoints take the ids of the structures the path was built from.
  StructureInstance point_at(double s, std::string id = {}) const;
  double length() const { return family_distance(*family_, start_, end_); }

 private:
  FamilyPtr family_;
  ThetaVector start_;
  ThetaVector end_;
  std::vector<std::size_t> zero_indices_;
  std::string start_id_;
  std::string end_id_;
};

GeodesicPath geodesic(const StructureInstance& a, const StructureInstance& b);

/// Midpoint of the geodesic between the two structures in their common family.
StructureInstance interpolating_structure(const StructureInstance& s_s, const StructureInstance& s_t,
                                          std::string id = "S*");

/// Named families available to file loaders.
class FamilyRegistry {
 public:
  /// Holds the three built-in bridge families.
  static FamilyRegistry builtin();

  void add(FamilyPtr family);
  FamilyPtr find(std::string_view name) const;
  bool contains(std::string_view name) const;

 private:
  std::map<std::string, FamilyPtr, std::less<>> families_;
};

}  // namespace pbshm
