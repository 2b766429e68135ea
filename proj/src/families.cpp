#include "pbshm/families.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pbshm/error.hpp"

namespace pbshm {

namespace {

std::string coord_label(std::string_view slot, Param p) {
  return std::string(slot) + "." + std::string(param_name(p));
}

std::pair<std::string, Param> parse_coord(const std::string& text) {
  const auto dot = text.rfind('.');
  if (dot == std::string::npos) fail(ErrorKind::invalid_input, "coordinate '" + text + "' is not slot.param");
  const auto p = parse_param(text.substr(dot + 1));
  if (!p) fail(ErrorKind::invalid_input, "unknown parameter in '" + text + "'");
  return {text.substr(0, dot), *p};
}

}  // namespace

std::set<std::string> ContractionSpec::removed_slots() const {
  std::set<std::string> out;
  for (const auto& [slot, p] : zero_set) out.insert(slot);
  return out;
}

std::set<std::string> ContractionSpec::collapsing_slots() const {
  std::map<std::string, bool> length_only;
  for (const auto& [slot, p] : zero_set) {
    auto [it, fresh] = length_only.try_emplace(slot, true);
    if (p != Param::l) it->second = false;
  }
  std::set<std::string> out;
  for (const auto& [slot, only] : length_only)
    if (only) out.insert(slot);
  return out;
}

FamilyTemplate::FamilyTemplate(std::string name, std::vector<SlotSpec> slots, std::vector<AttributedGraph::Edge> edges,
                               std::vector<std::pair<std::string, std::string>> ground_attachments,
                               std::vector<Interval> box, std::vector<ContractionSpec> contractions,
                               std::map<std::string, std::string> sensors)
    : name_(std::move(name)),
      slots_(std::move(slots)),
      edges_(std::move(edges)),
      grounds_(std::move(ground_attachments)),
      box_(std::move(box)),
      contractions_(std::move(contractions)),
      sensors_(std::move(sensors)) {
  if (name_.empty()) fail(ErrorKind::invalid_input, "family needs a name");
  if (slots_.empty()) fail(ErrorKind::invalid_input, "family '" + name_ + "' has no slots");
  std::set<std::string> ids;
  for (const auto& s : slots_) {
    if (s.kind.is_ground()) fail(ErrorKind::invalid_input, "slot '" + s.id + "' is ground; grounds are attachments");
    if (!ids.insert(s.id).second) fail(ErrorKind::invalid_input, "duplicate slot '" + s.id + "'");
  }
  for (const auto& [a, b] : edges_)
    if (!ids.contains(a) || !ids.contains(b)) fail(ErrorKind::invalid_input, "edge " + a + "-" + b + " names an unknown slot");
  std::set<std::string> ground_ids;
  for (const auto& [slot, g] : grounds_) {
    if (!ids.contains(slot)) fail(ErrorKind::invalid_input, "ground " + g + " attaches to unknown slot " + slot);
    if (ids.contains(g)) fail(ErrorKind::invalid_input, "ground id " + g + " clashes with a slot");
    if (!ground_ids.insert(g).second) fail(ErrorKind::invalid_input, "ground " + g + " attached twice");
  }
  if (grounds_.empty()) fail(ErrorKind::invalid_input, "family '" + name_ + "' has no ground attachment");
  if (box_.size() != dimension())
    fail(ErrorKind::invalid_input, "family '" + name_ + "' box has " + std::to_string(box_.size()) +
                                       " intervals, expected " + std::to_string(dimension()));
  for (std::size_t i = 0; i < box_.size(); ++i)
    if (!(box_[i].lo > 0.0) || !(box_[i].hi > box_[i].lo))
      fail(ErrorKind::invalid_input, "box for " + coordinate_name(i) + " must satisfy 0 < lo < hi");
  for (const auto& c : contractions_) {
    if (c.zero_set.empty()) fail(ErrorKind::invalid_input, "contraction to " + c.target + " has an empty zero set");
    for (const auto& [slot, p] : c.zero_set) zero_permitted_.insert(coordinate(slot, p));
    for (const auto& [from, to] : c.correspondence)
      if (!ids.contains(from) && !ground_ids.contains(from))
        fail(ErrorKind::invalid_input, "correspondence names unknown vertex " + from);
    for (const auto& [slot, rule] : c.collapse) {
      if (!ids.contains(slot)) fail(ErrorKind::invalid_input, "collapse rule for unknown slot " + slot);
      for (const auto& [a, b] : rule.rewire)
        if ((!ids.contains(a) && !ground_ids.contains(a)) || (!ids.contains(b) && !ground_ids.contains(b)))
          fail(ErrorKind::invalid_input, "rewire " + a + "-" + b + " names an unknown vertex");
      for (const auto& g : rule.drop)
        if (!ground_ids.contains(g)) fail(ErrorKind::invalid_input, "collapse drops unknown ground " + g);
    }
  }
  for (const auto& [sensor, vertex] : sensors_)
    if (!ids.contains(vertex) && !ground_ids.contains(vertex))
      fail(ErrorKind::invalid_input, "sensor " + sensor + " sits on unknown vertex " + vertex);
}

std::optional<std::size_t> FamilyTemplate::slot_index(std::string_view slot) const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    if (slots_[i].id == slot) return i;
  return std::nullopt;
}

std::size_t FamilyTemplate::coordinate(std::string_view slot, Param p) const {
  const auto s = slot_index(slot);
  if (!s) fail(ErrorKind::not_found, "family '" + name_ + "' has no slot '" + std::string(slot) + "'");
  return *s * kParamCount + static_cast<std::size_t>(p);
}

std::string FamilyTemplate::coordinate_name(std::size_t i) const {
  return coord_label(slots_.at(i / kParamCount).id, static_cast<Param>(i % kParamCount));
}

const ContractionSpec* FamilyTemplate::contraction_to(std::string_view target) const {
  for (const auto& c : contractions_)
    if (c.target == target) return &c;
  return nullptr;
}

ThetaVector FamilyTemplate::midpoint() const {
  std::vector<double> v(dimension());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 * (box_[i].lo + box_[i].hi);
  return ThetaVector(std::move(v));
}

nlohmann::json FamilyTemplate::to_json() const {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : slots_) slots.push_back({{"id", s.id}, {"kind", s.kind.str()}});
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : edges_) edges.push_back({a, b});
  nlohmann::json grounds = nlohmann::json::array();
  for (const auto& [s, g] : grounds_) grounds.push_back({s, g});
  nlohmann::json box = nlohmann::json::object();
  for (std::size_t i = 0; i < box_.size(); ++i) box[coordinate_name(i)] = {box_[i].lo, box_[i].hi};
  nlohmann::json cs = nlohmann::json::array();
  for (const auto& c : contractions_) {
    nlohmann::json zero = nlohmann::json::array();
    for (const auto& [slot, p] : c.zero_set) zero.push_back(coord_label(slot, p));
    nlohmann::json collapse = nlohmann::json::object();
    for (const auto& [slot, rule] : c.collapse) {
      nlohmann::json rw = nlohmann::json::array();
      for (const auto& [a, b] : rule.rewire) rw.push_back({a, b});
      collapse[slot] = {{"rewire", rw}, {"drop", rule.drop}};
    }
    cs.push_back({{"target", c.target},
                  {"zero_set", zero},
                  {"correspondence", {{"vertices", c.correspondence}, {"collapse", collapse}}}});
  }
  return {{"name", name_}, {"slots", slots},       {"edges", edges},     {"ground_attachments", grounds},
          {"box", box},    {"contractions", cs},   {"sensors", sensors_}};
}

FamilyTemplate FamilyTemplate::from_json(const nlohmann::json& doc) {
  try {
    std::vector<SlotSpec> slots;
    for (const auto& s : doc.at("slots")) slots.push_back({s.at("id").get<std::string>(), ElementKind::parse(s.at("kind").get<std::string>())});
    std::vector<AttributedGraph::Edge> edges;
    for (const auto& e : doc.value("edges", nlohmann::json::array())) edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    std::vector<std::pair<std::string, std::string>> grounds;
    for (const auto& g : doc.at("ground_attachments")) grounds.emplace_back(g.at(0).get<std::string>(), g.at(1).get<std::string>());

    // Box entries may be per coordinate ("D1.E") or per parameter ("E");
    // anything unspecified takes the built-in bridge default.
    const auto defaults = default_bridge_box();
    const auto box_doc = doc.value("box", nlohmann::json::object());
    std::vector<Interval> box;
    for (const auto& s : slots) {
      for (std::size_t p = 0; p < kParamCount; ++p) {
        const std::string pname(param_name(static_cast<Param>(p)));
        Interval iv = defaults[p];
        if (box_doc.contains(pname)) iv = {box_doc[pname].at(0).get<double>(), box_doc[pname].at(1).get<double>()};
        const auto key = s.id + "." + pname;
        if (box_doc.contains(key)) iv = {box_doc[key].at(0).get<double>(), box_doc[key].at(1).get<double>()};
        box.push_back(iv);
      }
    }

    std::vector<ContractionSpec> contractions;
    for (const auto& c : doc.value("contractions", nlohmann::json::array())) {
      ContractionSpec spec;
      spec.target = c.at("target").get<std::string>();
      for (const auto& z : c.at("zero_set")) spec.zero_set.push_back(parse_coord(z.get<std::string>()));
      const auto& corr = c.at("correspondence");
      spec.correspondence = corr.at("vertices").get<std::map<std::string, std::string>>();
      const auto collapse = corr.value("collapse", nlohmann::json::object());
      for (const auto& [slot, rule] : collapse.items()) {
        CollapseRule r;
        for (const auto& e : rule.value("rewire", nlohmann::json::array()))
          r.rewire.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
        r.drop = rule.value("drop", std::vector<std::string>{});
        spec.collapse[slot] = std::move(r);
      }
      contractions.push_back(std::move(spec));
    }
    auto sensors = doc.value("sensors", std::map<std::string, std::string>{});
    return FamilyTemplate(doc.at("name").get<std::string>(), std::move(slots), std::move(edges), std::move(grounds),
                          std::move(box), std::move(contractions), std::move(sensors));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("malformed family document: ") + e.what());
  }
}

std::array<Interval, kParamCount> default_bridge_box() {
  return {Interval{1.0, 100.0}, Interval{0.1, 30.0}, Interval{0.05, 5.0},
          Interval{1e9, 5e11},  Interval{500.0, 1e4}, Interval{0.1, 0.45}};
}

namespace {

std::vector<Interval> repeat_box(std::size_t slots) {
  const auto b = default_bridge_box();
  std::vector<Interval> out;
  for (std::size_t s = 0; s < slots; ++s) out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::map<std::string, std::string> slot_sensors(const std::vector<SlotSpec>& slots) {
  std::map<std::string, std::string> out;
  for (const auto& s : slots) out["s_" + s.id] = s.id;
  return out;
}

}  // namespace

FamilyPtr single_span_family() {
  std::vector<SlotSpec> slots{{"D1", ElementKind::deck()}};
  return std::make_shared<const FamilyTemplate>("single_span", slots, std::vector<AttributedGraph::Edge>{},
                                                std::vector<std::pair<std::string, std::string>>{{"D1", "G1"}, {"D1", "G2"}},
                                                repeat_box(1), std::vector<ContractionSpec>{}, slot_sensors(slots));
}

FamilyPtr two_span_family() {
  std::vector<SlotSpec> slots{{"D1", ElementKind::deck()}, {"P1", ElementKind::pillar()}, {"D2", ElementKind::deck()}};
  return std::make_shared<const FamilyTemplate>(
      "two_span", slots, std::vector<AttributedGraph::Edge>{{"D1", "D2"}, {"D1", "P1"}, {"D2", "P1"}},
      std::vector<std::pair<std::string, std::string>>{{"D1", "G1"}, {"P1", "G2"}, {"D2", "G3"}}, repeat_box(3),
      std::vector<ContractionSpec>{}, slot_sensors(slots));
}

FamilyPtr three_span_family() {
  std::vector<SlotSpec> slots{{"D1", ElementKind::deck()},
                              {"P1", ElementKind::pillar()},
                              {"D2", ElementKind::deck()},
                              {"P2", ElementKind::pillar()},
                              {"D3", ElementKind::deck()}};
  ContractionSpec to_two;
  to_two.target = "two_span";
  to_two.zero_set = {{"P2", Param::l}, {"D3", Param::l}};
  to_two.correspondence = {{"D1", "D1"}, {"P1", "P1"}, {"D2", "D2"}, {"G1", "G1"}, {"G2", "G2"}, {"G4", "G3"}};
  // With D3 shrunk to nothing its far ground reaches D2 directly; the
  // vanished pillar takes its own ground with it.
  to_two.collapse["D3"] = CollapseRule{{{"D2", "G4"}}, {}};
  to_two.collapse["P2"] = CollapseRule{{}, {"G3"}};
  return std::make_shared<const FamilyTemplate>(
      "three_span", slots,
      std::vector<AttributedGraph::Edge>{{"D1", "D2"}, {"D1", "P1"}, {"D2", "P1"}, {"D2", "D3"}, {"D2", "P2"}, {"D3", "P2"}},
      std::vector<std::pair<std::string, std::string>>{{"D1", "G1"}, {"P1", "G2"}, {"P2", "G3"}, {"D3", "G4"}},
      repeat_box(5), std::vector<ContractionSpec>{to_two}, slot_sensors(slots));
}

AttributedGraph StructureInstance::graph(Provenance provenance) const {
  if (!family) fail(ErrorKind::invalid_input, "structure '" + id + "' has no family");
  return instantiate(*family, theta, id, provenance);
}

namespace {

struct Removal {
  std::set<std::string> removed;
  const ContractionSpec* contraction = nullptr;
};

// Decides which slots are absent at this theta and validates the box.
Removal classify(const FamilyTemplate& f, const ThetaVector& theta) {
  if (theta.size() != f.dimension())
    fail(ErrorKind::domain, "theta has " + std::to_string(theta.size()) + " coordinates, family '" + f.name() +
                                "' needs " + std::to_string(f.dimension()));
  Removal r;
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (f.zero_permitted(i) && theta[i] == 0.0) r.removed.insert(f.slots()[i / kParamCount].id);

  if (!r.removed.empty()) {
    for (const auto& c : f.contractions()) {
      if (c.removed_slots() != r.removed) continue;
      bool all_zero = true;
      for (const auto& [slot, p] : c.zero_set) all_zero = all_zero && theta[f.coordinate(slot, p)] == 0.0;
      if (all_zero) {
        r.contraction = &c;
        break;
      }
    }
    if (!r.contraction) {
      std::string names;
      for (const auto& s : r.removed) names += (names.empty() ? "" : ", ") + s;
      fail(ErrorKind::domain, "zeroed coordinates on {" + names + "} do not complete a declared contraction of '" +
                                  f.name() + "'");
    }
  }

  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto& slot = f.slots()[i / kParamCount].id;
    const double x = theta[i];
    if (!std::isfinite(x)) fail(ErrorKind::domain, "coordinate " + f.coordinate_name(i) + " is not finite");
    if (r.removed.contains(slot)) {
      if (x < 0.0) fail(ErrorKind::domain, "coordinate " + f.coordinate_name(i) + " is negative");
      continue;
    }
    const auto& box = f.box(i);
    const bool ok = f.zero_permitted(i) ? (x > 0.0 && x < box.hi) : box.contains_open(x);
    if (!ok) {
      std::ostringstream msg;
      msg << "coordinate " << f.coordinate_name(i) << " = " << x << " outside (" << box.lo << ", " << box.hi << ")";
      fail(ErrorKind::domain, msg.str());
    }
  }
  return r;
}

}  // namespace

AttributedGraph instantiate(const FamilyTemplate& f, const ThetaVector& theta, std::string graph_id,
                            Provenance provenance) {
  const Removal r = classify(f, theta);
  std::set<std::string> dropped_grounds;
  std::vector<AttributedGraph::Edge> extra;
  if (r.contraction) {
    const auto collapsing = r.contraction->collapsing_slots();
    for (const auto& slot : collapsing) {
      const auto it = r.contraction->collapse.find(slot);
      if (it == r.contraction->collapse.end()) continue;
      extra.insert(extra.end(), it->second.rewire.begin(), it->second.rewire.end());
      dropped_grounds.insert(it->second.drop.begin(), it->second.drop.end());
    }
  }

  std::vector<IEVertex> vertices;
  std::set<std::string> present;
  for (std::size_t s = 0; s < f.slots().size(); ++s) {
    const auto& slot = f.slots()[s];
    if (r.removed.contains(slot.id)) continue;
    AttributeBlock block{};
    for (std::size_t p = 0; p < kParamCount; ++p) block[p] = theta[s * kParamCount + p];
    vertices.push_back({slot.id, slot.kind, block});
    present.insert(slot.id);
  }
  for (const auto& [slot, g] : f.ground_attachments()) {
    if (dropped_grounds.contains(g)) continue;
    vertices.push_back({g, ElementKind::ground(), std::nullopt});
    present.insert(g);
  }

  std::vector<AttributedGraph::Edge> edges;
  auto keep = [&](const AttributedGraph::Edge& e) {
    if (present.contains(e.first) && present.contains(e.second)) edges.push_back(e);
  };
  for (const auto& e : f.edges()) keep(e);
  for (const auto& [slot, g] : f.ground_attachments()) keep({slot, g});
  for (const auto& e : extra) {
    if (!present.contains(e.first) || !present.contains(e.second))
      fail(ErrorKind::connectivity, "rewire " + e.first + "-" + e.second + " touches a removed vertex");
    keep(e);
  }

  // Connectivity must be checked here so the failure carries the right kind.
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < vertices.size(); ++i) idx[vertices[i].id] = i;
  std::vector<std::pair<std::size_t, std::size_t>> ie;
  for (const auto& [a, b] : edges) ie.emplace_back(idx.at(a), idx.at(b));
  if (!is_connected(vertices.size(), ie)) {
    std::string names;
    for (const auto& s : r.removed) names += (names.empty() ? "" : ", ") + s;
    fail(ErrorKind::connectivity, "removing {" + names + "} disconnects '" + f.name() + "'");
  }

  std::map<std::string, std::string> sensors;
  for (const auto& [sensor, vertex] : f.sensors())
    if (present.contains(vertex)) sensors[sensor] = vertex;

  return AttributedGraph(graph_id.empty() ? f.name() : std::move(graph_id), std::move(vertices), std::move(edges),
                         std::move(sensors), provenance);
}

ThetaVector theta_from_graph(const FamilyTemplate& f, const AttributedGraph& g) {
  std::vector<double> v(f.dimension(), 0.0);
  for (std::size_t s = 0; s < f.slots().size(); ++s) {
    const auto i = g.index_of(f.slots()[s].id);
    if (!i) continue;
    const auto& attrs = g.vertex(*i).attributes;
    if (!attrs) fail(ErrorKind::invalid_input, "vertex " + f.slots()[s].id + " carries no attributes");
    for (std::size_t p = 0; p < kParamCount; ++p) v[s * kParamCount + p] = (*attrs)[p];
  }
  return ThetaVector(std::move(v));
}

double family_distance(const FamilyTemplate& f, const ThetaVector& a, const ThetaVector& b) {
  if (a.size() != f.dimension() || b.size() != f.dimension())
    fail(ErrorKind::domain, "theta length does not match family '" + f.name() + "'");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / f.box(i).width();
    sum += d * d;
  }
  return std::sqrt(sum);
}

ContractionMap::ContractionMap(FamilyPtr source, FamilyPtr target, ContractionSpec spec)
    : source_(std::move(source)), target_(std::move(target)), spec_(std::move(spec)) {
  for (const auto& [slot, p] : spec_.zero_set) zero_indices_.push_back(source_->coordinate(slot, p));
  std::sort(zero_indices_.begin(), zero_indices_.end());
  const auto removed = spec_.removed_slots();
  for (const auto& s : source_->slots()) {
    if (removed.contains(s.id)) continue;
    const auto it = spec_.correspondence.find(s.id);
    if (it == spec_.correspondence.end())
      fail(ErrorKind::configuration, "slot " + s.id + " of '" + source_->name() + "' has no counterpart in '" +
                                         target_->name() + "'");
    const auto t = target_->slot_index(it->second);
    if (!t) fail(ErrorKind::configuration, "correspondence target " + it->second + " is not a slot of '" + target_->name() + "'");
    if (!(target_->slots()[*t].kind == s.kind))
      fail(ErrorKind::configuration, "correspondence " + s.id + "->" + it->second + " changes element kind");
    const auto src = *source_->slot_index(s.id);
    for (std::size_t p = 0; p < kParamCount; ++p) copied_.emplace_back(src * kParamCount + p, *t * kParamCount + p);
  }
  if (copied_.size() != target_->dimension())
    fail(ErrorKind::configuration, "correspondence from '" + source_->name() + "' does not cover every slot of '" +
                                       target_->name() + "'");
}

ThetaVector ContractionMap::apply(const ThetaVector& source_theta) const {
  if (source_theta.size() != source_->dimension()) fail(ErrorKind::domain, "theta does not belong to '" + source_->name() + "'");
  std::vector<double> out(target_->dimension(), 0.0);
  for (const auto& [s, t] : copied_) out[t] = source_theta[s];
  return ThetaVector(std::move(out));
}

ThetaVector ContractionMap::representative(const ThetaVector& target_theta, const ThetaVector& free) const {
  if (target_theta.size() != target_->dimension()) fail(ErrorKind::domain, "theta does not belong to '" + target_->name() + "'");
  if (free.size() != source_->dimension()) fail(ErrorKind::domain, "theta does not belong to '" + source_->name() + "'");
  ThetaVector out = free;
  for (const auto& [s, t] : copied_) out[s] = target_theta[t];
  for (const auto i : zero_indices_) out[i] = 0.0;
  return out;
}

ContractionMap contract(const FamilyPtr& src, const FamilyPtr& dst) {
  const ContractionSpec* spec = src->contraction_to(dst->name());
  if (!spec) fail(ErrorKind::no_path, "'" + src->name() + "' declares no contraction onto '" + dst->name() + "'");
  ContractionMap map(src, dst, *spec);

  // Full application at the box midpoint: must stay connected (instantiate
  // raises the connectivity error) and land on the target topology.
  const ThetaVector at_zero = map.representative(map.apply(src->midpoint()), src->midpoint());
  const AttributedGraph contracted = instantiate(*src, at_zero, src->name() + "*");
  const AttributedGraph reference = instantiate(*dst, dst->midpoint());
  if (!kind_isomorphic(contracted, reference))
    fail(ErrorKind::configuration, "contracting '" + src->name() + "' does not reach the topology of '" + dst->name() + "'");
  for (const auto& [from, to] : spec->correspondence) {
    const auto i = contracted.index_of(from);
    const auto j = reference.index_of(to);
    if (i && j && !(contracted.vertex(*i).kind == reference.vertex(*j).kind))
      fail(ErrorKind::configuration, "correspondence " + from + "->" + to + " changes element kind");
  }
  return map;
}

EmbeddingMap::EmbeddingMap(FamilyPtr small, FamilyPtr big, std::vector<std::pair<std::size_t, std::size_t>> copied)
    : small_(std::move(small)), big_(std::move(big)), copied_(std::move(copied)) {}

ThetaVector EmbeddingMap::embed(const ThetaVector& small_theta) const {
  if (small_theta.size() != small_->dimension()) fail(ErrorKind::domain, "theta does not belong to '" + small_->name() + "'");
  std::vector<double> out(big_->dimension(), 0.0);
  for (const auto& [s, b] : copied_) out[b] = small_theta[s];
  return ThetaVector(std::move(out));
}

ThetaVector EmbeddingMap::project(const ThetaVector& big_theta) const {
  if (big_theta.size() != big_->dimension()) fail(ErrorKind::domain, "theta does not belong to '" + big_->name() + "'");
  std::vector<double> out(small_->dimension(), 0.0);
  for (const auto& [s, b] : copied_) out[s] = big_theta[b];
  return ThetaVector(std::move(out));
}

std::vector<std::size_t> EmbeddingMap::image_indices() const {
  std::vector<std::size_t> out;
  for (const auto& [s, b] : copied_) out.push_back(b);
  std::sort(out.begin(), out.end());
  return out;
}

EmbeddingMap embed(const FamilyPtr& small, const FamilyPtr& big) {
  const ContractionSpec* spec = big->contraction_to(small->name());
  if (!spec) fail(ErrorKind::configuration, "no slot correspondence from '" + big->name() + "' onto '" + small->name() + "'");
  const ContractionMap map(big, small, *spec);
  std::vector<std::pair<std::size_t, std::size_t>> copied;
  // Reuse the contraction's coordinate pairing, oriented small -> big.
  const ThetaVector probe = [&] {
    std::vector<double> v(big->dimension());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    return ThetaVector(std::move(v));
  }();
  const ThetaVector image = map.apply(probe);
  for (std::size_t s = 0; s < image.size(); ++s) copied.emplace_back(s, static_cast<std::size_t>(image[s]));
  return EmbeddingMap(small, big, std::move(copied));
}

GeodesicPath::GeodesicPath(FamilyPtr family, ThetaVector start, ThetaVector end, std::vector<std::size_t> zero_indices,
                           std::string start_id, std::string end_id)
    : family_(std::move(family)),
      start_(std::move(start)),
      end_(std::move(end)),
      zero_indices_(std::move(zero_indices)),
      start_id_(std::move(start_id)),
      end_id_(std::move(end_id)) {
  if (start_.size() != family_->dimension() || end_.size() != family_->dimension())
    fail(ErrorKind::domain, "geodesic endpoints do not belong to '" + family_->name() + "'");
}

ThetaVector GeodesicPath::theta_at(double s) const {
  if (!(s >= 0.0 && s <= 1.0)) fail(ErrorKind::domain, "path parameter must lie in [0, 1]");
  if (s == 0.0) return start_;
  if (s == 1.0) return end_;
  std::vector<double> v(start_.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - s) * start_[i] + s * end_[i];
  return ThetaVector(std::move(v));
}

StructureInstance GeodesicPath::point_at(double s, std::string id) const {
  if (id.empty() && s == 0.0) id = start_id_;
  if (id.empty() && s == 1.0) id = end_id_;
  if (id.empty()) {
    std::ostringstream name;
    name << family_->name() << "@" << s;
    id = name.str();
  }
  return StructureInstance{std::move(id), family_, theta_at(s)};
}

GeodesicPath geodesic(const StructureInstance& a, const StructureInstance& b) {
  if (!a.family || !b.family) fail(ErrorKind::invalid_input, "geodesic endpoints need families");
  if (a.family->name() == b.family->name()) return GeodesicPath(a.family, a.theta, b.theta, {}, a.id, b.id);
  if (a.family->contraction_to(b.family->name())) {
    const ContractionMap map = contract(a.family, b.family);
    return GeodesicPath(a.family, a.theta, map.representative(b.theta, a.theta), map.zero_indices(), a.id, b.id);
  }
  if (b.family->contraction_to(a.family->name())) {
    const ContractionMap map = contract(b.family, a.family);
    return GeodesicPath(b.family, map.representative(a.theta, b.theta), b.theta, map.zero_indices(), a.id, b.id);
  }
  fail(ErrorKind::no_path, "no contraction links '" + a.family->name() + "' and '" + b.family->name() + "'");
}

StructureInstance interpolating_structure(const StructureInstance& s_s, const StructureInstance& s_t, std::string id) {
  return geodesic(s_t, s_s).point_at(0.5, std::move(id));
}

FamilyRegistry FamilyRegistry::builtin() {
  FamilyRegistry r;
  r.add(single_span_family());
  r.add(two_span_family());
  r.add(three_span_family());
  return r;
}

void FamilyRegistry::add(FamilyPtr family) {
  const std::string name = family->name();
  families_[name] = std::move(family);
}

FamilyPtr FamilyRegistry::find(std::string_view name) const {
  const auto it = families_.find(name);
  if (it == families_.end()) fail(ErrorKind::not_found, "unknown family '" + std::string(name) + "'");
  return it->second;
}

bool FamilyRegistry::contains(std::string_view name) const { return families_.find(name) != families_.end(); }

}  // namespace pbshm
