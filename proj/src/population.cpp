#include "pbshm/population.hpp"

#include "pbshm/error.hpp"

namespace pbshm {

void Population::add(PopulationMember member) {
  const std::string id = member.graph.id();
  if (members_.contains(id)) fail(ErrorKind::conflict, "structure '" + id + "' already in population");
  members_.emplace(id, std::move(member));
}

void Population::add(const StructureInstance& instance, Provenance provenance) {
  add(PopulationMember{instance.graph(provenance), instance, nullptr, {}});
}

void Population::attach_fibre(const std::string& id, std::shared_ptr<const Fibre> fibre, std::vector<int> labels) {
  const auto it = members_.find(id);
  if (it == members_.end()) fail(ErrorKind::not_found, "unknown structure '" + id + "'");
  it->second.fibre = std::move(fibre);
  it->second.labels = std::move(labels);
}

const PopulationMember& Population::at(const std::string& id) const {
  const auto it = members_.find(id);
  if (it == members_.end()) fail(ErrorKind::not_found, "unknown structure '" + id + "'");
  return it->second;
}

std::vector<std::string> Population::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, m] : members_) out.push_back(id);
  return out;
}

nlohmann::json Population::to_json() const {
  nlohmann::json structures = nlohmann::json::array();
  for (const auto& [id, m] : members_) {
    if (m.instance) {
      structures.push_back({{"id", id},
                            {"family", m.instance->family->name()},
                            {"theta", m.instance->theta.values()},
                            {"provenance", std::string(to_string(m.provenance()))}});
    } else {
      structures.push_back(m.graph.to_json());
    }
  }
  return {{"structures", structures}};
}

Population Population::from_json(const nlohmann::json& doc, const FamilyRegistry& families) {
  Population pop;
  try {
    for (const auto& s : doc.at("structures")) {
      if (s.contains("family")) {
        const auto prov = s.value("provenance", std::string("simulated")) == "real" ? Provenance::real : Provenance::simulated;
        StructureInstance inst{s.at("id").get<std::string>(), families.find(s.at("family").get<std::string>()),
                               ThetaVector(s.at("theta").get<std::vector<double>>())};
        pop.add(inst, prov);
      } else {
        pop.add(PopulationMember{AttributedGraph::from_json(s), std::nullopt, nullptr, {}});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed population document: ") + e.what());
  }
  return pop;
}

std::optional<SourceChoice> select_source(const Population& population, const std::string& target, double d_s,
                                          const MetricConfig& cfg) {
  const auto& t = population.at(target);
  std::optional<SourceChoice> best;
  // Members iterate in id order, so a strict comparison keeps the smallest id on ties.
  for (const auto& [id, m] : population.members()) {
    if (id == target || !m.has_data()) continue;
    const double d = graph_distance(m.graph, t.graph, cfg);
    if (!best || d < best->distance) best = SourceChoice{id, d};
  }
  if (best && best->distance <= d_s) return best;
  return std::nullopt;
}

}  // namespace pbshm
