#include "pbshm/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "pbshm/error.hpp"
#include "pbshm/mcs.hpp"

namespace pbshm {

ElementKind ElementKind::parse(std::string_view text) {
  if (text == "ground") return ground();
  if (text == "deck") return deck();
  if (text == "pillar") return pillar();
  if (text == "plate") return plate();
  if (text.starts_with("other:")) return other(std::string(text.substr(6)));
  if (text.empty()) fail(ErrorKind::invalid_input, "empty element kind");
  return other(std::string(text));
}

std::string ElementKind::str() const {
  switch (tag) {
    case ElementTag::ground: return "ground";
    case ElementTag::deck: return "deck";
    case ElementTag::pillar: return "pillar";
    case ElementTag::plate: return "plate";
    case ElementTag::other: return "other:" + name;
  }
  return "other:" + name;
}

std::string_view param_name(Param p) {
  static constexpr std::string_view names[] = {"l", "w", "t", "E", "rho", "nu"};
  return names[static_cast<std::size_t>(p)];
}

std::optional<Param> parse_param(std::string_view name) {
  for (std::size_t i = 0; i < kParamCount; ++i)
    if (param_name(static_cast<Param>(i)) == name) return static_cast<Param>(i);
  return std::nullopt;
}

std::string_view to_string(Provenance p) { return p == Provenance::real ? "real" : "simulated"; }

bool is_connected(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (n == 0) return false;
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::size_t components = n;
  for (auto [a, b] : edges) {
    const auto ra = find(a);
    const auto rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

AttributedGraph::AttributedGraph(std::string id, std::vector<IEVertex> vertices, std::vector<Edge> edges,
                                 std::map<std::string, std::string> sensors, Provenance provenance)
    : id_(std::move(id)),
      vertices_(std::move(vertices)),
      edges_(std::move(edges)),
      sensors_(std::move(sensors)),
      provenance_(provenance) {
  if (vertices_.empty()) fail(ErrorKind::invalid_input, "graph '" + id_ + "' has no vertices");
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const auto& v = vertices_[i];
    if (v.id.empty()) fail(ErrorKind::invalid_input, "graph '" + id_ + "': vertex with empty id");
    if (!index_.emplace(v.id, i).second)
      fail(ErrorKind::invalid_input, "graph '" + id_ + "': duplicate vertex id '" + v.id + "'");
    if (v.kind.is_ground()) {
      if (v.attributes) fail(ErrorKind::invalid_input, "ground vertex '" + v.id + "' must not carry attributes");
      continue;
    }
    if (!v.attributes) fail(ErrorKind::invalid_input, "vertex '" + v.id + "' lacks its attribute block");
    for (std::size_t p = 0; p < kParamCount; ++p) {
      const double x = (*v.attributes)[p];
      if (!std::isfinite(x) || x <= 0.0)
        fail(ErrorKind::invalid_input, "vertex '" + v.id + "': attribute " +
                                           std::string(param_name(static_cast<Param>(p))) + " must be positive");
    }
    if ((*v.attributes)[static_cast<std::size_t>(Param::nu)] >= 0.5)
      fail(ErrorKind::invalid_input, "vertex '" + v.id + "': Poisson ratio must lie in (0, 0.5)");
  }
  const auto n = vertices_.size();
  adjacency_.assign(n * n, 0);
  std::vector<std::pair<std::size_t, std::size_t>> idx_edges;
  for (const auto& [a, b] : edges_) {
    const auto ia = index_of(a);
    const auto ib = index_of(b);
    if (!ia || !ib) fail(ErrorKind::invalid_input, "graph '" + id_ + "': edge references unknown vertex " + a + "-" + b);
    if (*ia == *ib) fail(ErrorKind::invalid_input, "graph '" + id_ + "': self-loop on '" + a + "'");
    adjacency_[*ia * n + *ib] = adjacency_[*ib * n + *ia] = 1;
    idx_edges.emplace_back(*ia, *ib);
  }
  if (!is_connected(n, idx_edges)) fail(ErrorKind::invalid_input, "graph '" + id_ + "' is not connected");
  if (std::none_of(vertices_.begin(), vertices_.end(), [](const IEVertex& v) { return v.kind.is_ground(); }))
    fail(ErrorKind::invalid_input, "graph '" + id_ + "' has no ground vertex");
  for (const auto& [sensor, vertex] : sensors_)
    if (!index_of(vertex))
      fail(ErrorKind::invalid_input, "sensor '" + sensor + "' placed on unknown vertex '" + vertex + "'");
}

std::optional<std::size_t> AttributedGraph::index_of(std::string_view vertex_id) const {
  const auto it = index_.find(vertex_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> AttributedGraph::neighbours(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < size(); ++j)
    if (adjacent(i, j)) out.push_back(j);
  return out;
}

AttributedGraph AttributedGraph::with_id(std::string new_id) const {
  AttributedGraph copy = *this;
  copy.id_ = std::move(new_id);
  return copy;
}

nlohmann::json AttributedGraph::to_json() const {
  nlohmann::json doc;
  doc["id"] = id_;
  auto& verts = doc["vertices"] = nlohmann::json::array();
  for (const auto& v : vertices_) {
    nlohmann::json jv{{"id", v.id}, {"kind", v.kind.str()}};
    if (v.attributes) jv["attributes"] = std::vector<double>(v.attributes->begin(), v.attributes->end());
    verts.push_back(std::move(jv));
  }
  auto& edges = doc["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : edges_) edges.push_back({a, b});
  doc["sensors"] = nlohmann::json::object();
  for (const auto& [s, v] : sensors_) doc["sensors"][s] = v;
  doc["provenance"] = std::string(to_string(provenance_));
  return doc;
}

AttributedGraph AttributedGraph::from_json(const nlohmann::json& doc) {
  try {
    std::vector<IEVertex> vertices;
    for (const auto& jv : doc.at("vertices")) {
      IEVertex v{jv.at("id").get<std::string>(), ElementKind::parse(jv.at("kind").get<std::string>()), std::nullopt};
      if (jv.contains("attributes")) {
        const auto a = jv.at("attributes").get<std::vector<double>>();
        if (a.size() != kParamCount)
          fail(ErrorKind::invalid_input, "vertex '" + v.id + "': attributes must have 6 entries [l,w,t,E,rho,nu]");
        AttributeBlock block{};
        std::copy(a.begin(), a.end(), block.begin());
        v.attributes = block;
      }
      vertices.push_back(std::move(v));
    }
    std::vector<Edge> edges;
    for (const auto& je : doc.at("edges")) {
      if (!je.is_array() || je.size() != 2) fail(ErrorKind::invalid_input, "edge entries must be [id, id] pairs");
      edges.emplace_back(je[0].get<std::string>(), je[1].get<std::string>());
    }
    std::map<std::string, std::string> sensors;
    if (doc.contains("sensors"))
      for (const auto& [k, v] : doc.at("sensors").items()) sensors[k] = v.get<std::string>();
    Provenance prov = Provenance::simulated;
    if (doc.contains("provenance")) {
      const auto p = doc.at("provenance").get<std::string>();
      if (p == "real")
        prov = Provenance::real;
      else if (p != "simulated")
        fail(ErrorKind::invalid_input, "provenance must be \"real\" or \"simulated\", got \"" + p + "\"");
    }
    return AttributedGraph(doc.at("id").get<std::string>(), std::move(vertices), std::move(edges), std::move(sensors),
                           prov);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("structure document: ") + e.what());
  }
}

AttributeBlock MetricConfig::default_attribute_scale() {
  // Widths of the default bridge-family boxes.
  return {100.0 - 1.0, 30.0 - 0.1, 5.0 - 0.05, 5e11 - 1e9, 10000.0 - 500.0, 0.45 - 0.1};
}

namespace {

int kind_label(const ElementKind& k, std::map<std::string, int>& others) {
  if (k.tag != ElementTag::other) return static_cast<int>(k.tag);
  const auto [it, inserted] = others.emplace(k.name, static_cast<int>(ElementTag::other) + static_cast<int>(others.size()));
  return it->second;
}

std::pair<LabelledGraph, LabelledGraph> labelled_pair(const AttributedGraph& g1, const AttributedGraph& g2) {
  std::map<std::string, int> others;
  auto convert = [&](const AttributedGraph& g) {
    LabelledGraph lg;
    lg.labels.reserve(g.size());
    for (const auto& v : g.vertices()) lg.labels.push_back(kind_label(v.kind, others));
    lg.adjacency.resize(g.size() * g.size());
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t b = 0; b < g.size(); ++b) lg.adjacency[a * g.size() + b] = g.adjacent(a, b) ? 1 : 0;
    return lg;
  };
  auto a = convert(g1);
  auto b = convert(g2);
  return {std::move(a), std::move(b)};
}

}  // namespace

CommonSubgraph maximum_common_subgraph(const AttributedGraph& g1, const AttributedGraph& g2, const MetricConfig& cfg) {
  const bool too_big = std::max(g1.size(), g2.size()) > cfg.exact_vertex_limit;
  if (too_big && !cfg.allow_greedy)
    fail(ErrorKind::invalid_input, "exact common-subgraph search limited to " + std::to_string(cfg.exact_vertex_limit) +
                                       " vertices; enable the greedy mode for larger graphs");
  const auto [a, b] = labelled_pair(g1, g2);
  auto cost = [&](std::size_t u, std::size_t v) {
    const auto& au = g1.vertex(u).attributes;
    const auto& bv = g2.vertex(v).attributes;
    if (!au || !bv) return 0.0;
    double s = 0.0;
    for (std::size_t p = 0; p < kParamCount; ++p) {
      const double d = ((*au)[p] - (*bv)[p]) / cfg.attribute_scale[p];
      s += d * d;
    }
    return s;
  };
  const auto found = max_common_induced_subgraph(a, b, cost, too_big);
  return {found.mapping, found.cost, !too_big};
}

std::size_t mcs_size(const AttributedGraph& g1, const AttributedGraph& g2, const MetricConfig& cfg) {
  return maximum_common_subgraph(g1, g2, cfg).mapping.size();
}

DistanceBreakdown distance_breakdown(const AttributedGraph& g1, const AttributedGraph& g2, const MetricConfig& cfg) {
  const auto common = maximum_common_subgraph(g1, g2, cfg);
  DistanceBreakdown d;
  d.mcs = common.mapping.size();
  const auto largest = static_cast<double>(std::max(g1.size(), g2.size()));
  d.topological = 1.0 - static_cast<double>(d.mcs) / largest;
  d.attribute = std::sqrt(common.attribute_sq);
  d.total = d.topological + cfg.lambda_attr * d.attribute;
  return d;
}

double graph_distance(const AttributedGraph& g1, const AttributedGraph& g2, const MetricConfig& cfg) {
  return distance_breakdown(g1, g2, cfg).total;
}

bool kind_isomorphic(const AttributedGraph& g1, const AttributedGraph& g2) {
  if (g1.size() != g2.size()) return false;
  MetricConfig cfg;
  cfg.exact_vertex_limit = std::max(g1.size(), cfg.exact_vertex_limit);
  return mcs_size(g1, g2, cfg) == g1.size();
}

}  // namespace pbshm
