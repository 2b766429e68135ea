#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pbshm/families.hpp"
#include "pbshm/fibre.hpp"
#include "pbshm/graph.hpp"

namespace pbshm {

struct PopulationMember {
  AttributedGraph graph;
  std::optional<StructureInstance> instance;  // set when the member comes from a family
  std::shared_ptr<const Fibre> fibre;         // null when no data has been gathered
  std::vector<int> labels;                    // per-acquisition condition labels, if known

  Provenance provenance() const { return graph.provenance(); }
  bool has_data() const { return fibre && !fibre->empty(); }
};

/// Real and simulated structures side by side. Adding members is not
/// thread-safe; everything else is read-only.
class Population {
 public:
  void add(PopulationMember member);
  void add(const StructureInstance& instance, Provenance provenance = Provenance::simulated);
  void attach_fibre(const std::string& id, std::shared_ptr<const Fibre> fibre, std::vector<int> labels = {});

  bool contains(const std::string& id) const { return members_.contains(id); }
  const PopulationMember& at(const std::string& id) const;
  std::size_t size() const { return members_.size(); }
  std::vector<std::string> ids() const;
  const std::map<std::string, PopulationMember>& members() const { return members_; }

  nlohmann::json to_json() const;
  /// Members are structures in graph form or {id, family, theta} instances.
  static Population from_json(const nlohmann::json& doc, const FamilyRegistry& families = FamilyRegistry::builtin());

 private:
  std::map<std::string, PopulationMember> members_;
};

struct SourceChoice {
  std::string id;
  double distance = 0.0;
};

/// Closest data-carrying structure to `target` when within `d_s`. Ties go to
/// the lexicographically smallest id.
std::optional<SourceChoice> select_source(const Population& population, const std::string& target, double d_s,
                                          const MetricConfig& cfg = {});

}  // namespace pbshm
