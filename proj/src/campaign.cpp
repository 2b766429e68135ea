#include "pbshm/campaign.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "pbshm/error.hpp"
#include "pbshm/io.hpp"

namespace pbshm::campaign {

namespace {

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, what + ": " + e.what());
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ThetaVector theta_of(const FamilyTemplate& family, const json& doc) {
  if (doc.is_array()) return ThetaVector(doc.get<std::vector<double>>());
  // Object form: {"D1.l": 20, ...} over every coordinate.
  std::vector<double> v(family.dimension());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = doc.at(family.coordinate_name(i)).get<double>();
  return ThetaVector(std::move(v));
}

void sample_members(Population& pop, const FamilyPtr& family, const json& sampling, std::uint64_t seed) {
  const auto count = sampling.at("count").get<std::size_t>();
  const auto prefix = sampling.value("prefix", family->name() + "_");
  std::mt19937_64 rng(splitmix64(seed ^ fnv1a(prefix)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool has_base = sampling.contains("base");
  const ThetaVector base = has_base ? theta_of(*family, sampling.at("base")) : family->midpoint();
  const double eps = sampling.value("perturbation", 0.05);
  if (eps < 0.0 || eps >= 1.0) fail(ErrorKind::invalid_input, "sampling.perturbation must lie in [0, 1)");
  // The first member sits at the base point when `include_base` is set.
  const bool include_base = sampling.value("include_base", has_base);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> v = base.values();
    if (!(include_base && i == 0)) {
      for (std::size_t c = 0; c < v.size(); ++c) {
        const double u = unit(rng);
        if (has_base || sampling.contains("perturbation"))
          v[c] *= 1.0 + eps * (2.0 * u - 1.0);
        else
          v[c] = family->box(c).lo + family->box(c).width() * (0.05 + 0.9 * u);
      }
    }
    pop.add(StructureInstance{prefix + std::to_string(i), family, ThetaVector(std::move(v))});
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

FeatureSet member_features(const Population& pop, const std::string& id) {
  const auto& m = pop.at(id);
  if (!m.has_data()) fail(ErrorKind::invalid_input, "structure '" + id + "' has no data");
  return feature_set(*m.fibre, feature_stratum(*m.fibre), m.labels);
}

const StructureInstance& member_instance(const Population& pop, const std::string& id) {
  const auto& m = pop.at(id);
  if (!m.instance) fail(ErrorKind::invalid_input, "structure '" + id + "' is not a family member");
  return *m.instance;
}

}  // namespace

std::uint64_t resolve_seed(const json& cfg, std::optional<std::uint64_t> override_seed) {
  if (override_seed) return *override_seed;
  return guarded("seed", [&] { return cfg.value("seed", std::uint64_t{0}); });
}

Population population_from_config(const json& cfg, std::uint64_t seed, const FamilyRegistry& families) {
  return guarded("population config", [&] {
    Population pop;
    if (cfg.contains("structures")) {
      Population listed = Population::from_json(cfg, families);
      for (const auto& [id, m] : listed.members()) pop.add(m);
    }
    if (cfg.contains("family")) {
      const FamilyPtr family = families.find(cfg.at("family").get<std::string>());
      if (cfg.contains("theta")) {
        const auto id = cfg.value("id", family->name() + "_0");
        pop.add(StructureInstance{id, family, theta_of(*family, cfg.at("theta"))});
      }
      if (cfg.contains("sampling")) sample_members(pop, family, cfg.at("sampling"), seed);
    }
    if (cfg.contains("groups"))
      for (const auto& g : cfg.at("groups")) {
        Population part = population_from_config(g, seed, families);
        for (const auto& [id, m] : part.members()) pop.add(m);
      }
    if (pop.size() == 0) fail(ErrorKind::invalid_input, "population config defines no structures");
    return pop;
  });
}

SimulationSettings simulation_from_config(const json& cfg, std::uint64_t seed) {
  return guarded("simulation config", [&] {
    SimulationSettings s;
    if (cfg.contains("conditions")) {
      for (const auto& c : cfg.at("conditions")) {
        Condition cond{c.at("label").get<std::string>(), std::nullopt};
        if (c.contains("slot") && !c.at("slot").is_null())
          cond.damage = DamageState{c.at("slot").get<std::string>(), c.value("delta", 0.0)};
        s.conditions.push_back(std::move(cond));
      }
    } else {
      s.conditions.push_back({"healthy", std::nullopt});
    }
    s.n_r = cfg.value("N_R", s.n_r);
    s.populate.n_t = cfg.value("N_T", s.populate.n_t);
    s.populate.fs = cfg.value("f_s", s.populate.fs);
    s.populate.n_w = cfg.value("N_w", std::size_t{0});
    s.populate.dtau = cfg.value("dtau", s.populate.dtau);
    s.populate.n_modes = cfg.value("n_modes", s.populate.n_modes);
    s.populate.assembly.n_e = cfg.value("n_e", s.populate.assembly.n_e);
    s.populate.assembly.pillar_mass = cfg.value("pillar_mass", false);
    s.synthesis.zeta = cfg.value("zeta", s.synthesis.zeta);
    s.synthesis.noise_std = cfg.value("noise_std", s.synthesis.noise_std);
    s.synthesis.seed = seed;
    return s;
  });
}

std::vector<MemberData> simulate_members(const Population& population, const SimulationSettings& settings) {
  std::vector<MemberData> out;
  for (const auto& [id, m] : population.members()) {
    if (!m.instance) continue;
    SynthesisConfig cfg = settings.synthesis;
    cfg.seed = splitmix64(settings.synthesis.seed ^ fnv1a(id));
    out.push_back({id, populate_fibre(*m.instance, settings.conditions, settings.n_r, cfg, settings.populate)});
  }
  return out;
}

void simulate_into(Population& population, const SimulationSettings& settings) {
  for (auto& m : simulate_members(population, settings))
    population.attach_fibre(m.id, std::make_shared<const Fibre>(std::move(m.data.fibre)), m.data.labels);
}

std::string labels_csv(const std::vector<int>& labels, const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "acquisition,label,condition\n";
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const auto l = static_cast<std::size_t>(labels[k]);
    os << k << ',' << labels[k] << ',' << csv_field(l < names.size() ? names[l] : std::string()) << '\n';
  }
  return os.str();
}

std::vector<int> parse_labels_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (line.rfind("acquisition,label", 0) != 0) fail(ErrorKind::invalid_input, "labels CSV: unexpected header");
  std::vector<int> labels;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    try {
      if (c1 == std::string::npos) throw std::invalid_argument("missing column");
      if (std::stoul(line.substr(0, c1)) != labels.size()) throw std::invalid_argument("acquisition out of order");
      labels.push_back(std::stoi(line.substr(c1 + 1, c2 == std::string::npos ? std::string::npos : c2 - c1 - 1)));
    } catch (const std::exception& e) {
      fail(ErrorKind::invalid_input, "labels CSV line " + std::to_string(row) + ": " + e.what());
    }
  }
  return labels;
}

std::vector<fs::path> save_member(const fs::path& dir, const MemberData& m) {
  const fs::path d = dir / m.id;
  fs::create_directories(d);
  m.data.fibre.save(d);
  io::write_atomic(d / "labels.csv", labels_csv(m.data.labels, m.data.label_names));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(d))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

void load_fibres(Population& population, const fs::path& dir) {
  for (const auto& id : population.ids()) {
    const fs::path d = dir / id;
    if (!fs::exists(d / "meta.json")) continue;
    auto fibre = std::make_shared<const Fibre>(Fibre::load(d));
    std::vector<int> labels;
    if (fs::exists(d / "labels.csv")) labels = parse_labels_csv(io::read_text(d / "labels.csv"));
    population.attach_fibre(id, std::move(fibre), std::move(labels));
  }
}

std::size_t feature_stratum(const Fibre& fibre) {
  for (std::size_t m = fibre.stratum_count(); m-- > 1;) {
    const auto& chain = fibre.stratum(m).chain;
    if (!chain.empty() && chain.back().name == "modal_peaks") return m;
  }
  fail(ErrorKind::not_found, "fibre '" + fibre.structure_id() + "' has no modal-peak stratum");
}

TransferSpec transfer_from_config(const json& cfg) {
  return guarded("transfer config", [&] {
    TransferSpec spec;
    if (cfg.contains("pairs") && cfg.at("pairs").is_array())
      for (const auto& p : cfg.at("pairs")) spec.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    else if (cfg.contains("pairs") && cfg.at("pairs") != "all")
      fail(ErrorKind::invalid_input, "pairs must be \"all\" or a list of [source, target]");
    spec.ddt.steps = cfg.value("steps", spec.ddt.steps);
    const auto align = cfg.value("alignment", std::string("diagonal"));
    if (align == "full") spec.ddt.alignment = Alignment::full;
    else if (align != "diagonal") fail(ErrorKind::invalid_input, "alignment must be diagonal or full");
    spec.use_interpolator = cfg.value("use_interpolator", false);
    if (cfg.contains("classifier")) {
      const auto& c = cfg.at("classifier");
      spec.localiser.k = c.value("k", spec.localiser.k);
      const auto w = c.value("weighting", std::string("distance"));
      if (w != "distance" && w != "uniform") fail(ErrorKind::invalid_input, "classifier.weighting must be distance or uniform");
      spec.localiser.distance_weighted = w == "distance";
      spec.localiser.standardise = c.value("standardise", false);
    }
    spec.target_accuracy = cfg.value("target_accuracy", spec.target_accuracy);
    if (cfg.contains("scatter"))
      spec.scatter = std::pair{cfg.at("scatter").at(0).get<std::string>(), cfg.at("scatter").at(1).get<std::string>()};
    spec.metric.lambda_attr = cfg.value("lambda_attr", spec.metric.lambda_attr);
    return spec;
  });
}

std::vector<std::pair<std::string, std::string>> resolve_pairs(const Population& population, const TransferSpec& spec) {
  std::vector<std::pair<std::string, std::string>> pairs = spec.pairs;
  if (pairs.empty()) {
    for (const auto& [s, ms] : population.members())
      for (const auto& [t, mt] : population.members())
        if (s != t && ms.has_data() && mt.has_data()) pairs.emplace_back(s, t);
  }
  for (const auto& [s, t] : pairs) {
    population.at(s);
    population.at(t);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<PairOutcome> run_transfers(Population& population, const TransferSpec& spec,
                                       const SimulationSettings& settings) {
  const auto pairs = resolve_pairs(population, spec);
  const NcOracle oracle = simulation_oracle(settings);
  std::vector<PairOutcome> out;
  out.reserve(pairs.size());
  for (const auto& [s, t] : pairs) {
    const FeatureSet src = member_features(population, s);
    const FeatureSet tgt = member_features(population, t);
    PairOutcome o;
    if (spec.use_interpolator) {
      TwoStepOptions opts;
      opts.ddt = spec.ddt;
      opts.localiser = spec.localiser;
      opts.simulation = settings;
      opts.metric = spec.metric;
      opts.interpolator_id = "S*(" + s + "," + t + ")";
      if (population.contains(opts.interpolator_id)) fail(ErrorKind::conflict, "duplicate pair " + s + " -> " + t);
      auto r = two_step_transfer(s, t, population, opts);
      o.report = std::move(r.report);
      o.map = std::move(r.map);
      o.interpolated = true;
    } else {
      const auto& si = member_instance(population, s);
      const auto& ti = member_instance(population, t);
      const GeodesicPath path = geodesic(ti, si);
      o.map = ddt_map(src, tgt, path, spec.ddt, oracle);
      const Localiser task(src.X, src.labels, spec.localiser);
      o.report = evaluate_transfer(task, o.map, tgt.X, tgt.labels);
      o.report.source_id = s;
      o.report.target_id = t;
      o.report.distance = graph_distance(si.graph(), ti.graph(), spec.metric);
      o.report.path_length = path.length();
      o.report.leg_distances = {o.report.distance};
    }
    const DomainAdaptation da = domain_adaptation_baseline(src, tgt, spec.localiser);
    o.report.da_accuracy = accuracy(da.predict_target(tgt.X), tgt.labels);
    const Localiser own(tgt.X, tgt.labels, spec.localiser);
    o.report.in_domain_accuracy = accuracy(own.predict(tgt.X), tgt.labels);
    o.cv_accuracy = cross_validate(tgt.X, tgt.labels, spec.localiser);
    out.push_back(std::move(o));
  }
  return out;
}

std::string report_csv(const std::vector<PairOutcome>& outcomes) {
  std::ostringstream os;
  os << "source,target,distance,path_length,leg_distances,method,raw_accuracy,ddt_accuracy,da_accuracy,"
        "in_domain_accuracy,cv_accuracy\n";
  for (const auto& o : outcomes) {
    const auto& r = o.report;
    std::string legs;
    for (std::size_t i = 0; i < r.leg_distances.size(); ++i)
      legs += (i ? ";" : "") + io::format_double(r.leg_distances[i]);
    os << csv_field(r.source_id) << ',' << csv_field(r.target_id) << ',' << io::format_double(r.distance) << ','
       << io::format_double(r.path_length) << ',' << legs << ',' << (o.interpolated ? "two_step" : "ddt") << ','
       << io::format_double(r.raw_accuracy) << ',' << io::format_double(r.mapped_accuracy) << ','
       << io::format_double(r.da_accuracy) << ',' << io::format_double(r.in_domain_accuracy) << ','
       << io::format_double(o.cv_accuracy) << '\n';
  }
  return os.str();
}

json summary_json(const std::vector<PairOutcome>& outcomes, const TransferSpec& spec) {
  json pairs = json::array();
  double min_raw = 1.0, min_ddt = 1.0, sum_ddt = 0.0, sum_raw = 0.0, sum_da = 0.0;
  std::size_t worse = 0;
  for (const auto& o : outcomes) {
    const auto& r = o.report;
    min_raw = std::min(min_raw, r.raw_accuracy);
    min_ddt = std::min(min_ddt, r.mapped_accuracy);
    sum_raw += r.raw_accuracy;
    sum_ddt += r.mapped_accuracy;
    sum_da += r.da_accuracy;
    if (r.mapped_accuracy < r.raw_accuracy) ++worse;
    pairs.push_back({{"source", r.source_id},
                     {"target", r.target_id},
                     {"distance", r.distance},
                     {"ddt_accuracy", r.mapped_accuracy},
                     {"confusion", [&] {
                        json rows = json::array();
                        for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
                          json row = json::array();
                          for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
                          rows.push_back(row);
                        }
                        return rows;
                      }()}});
  }
  const double n = outcomes.empty() ? 1.0 : static_cast<double>(outcomes.size());
  return {{"pair_count", outcomes.size()},
          {"steps", spec.ddt.steps},
          {"alignment", spec.ddt.alignment == Alignment::full ? "full" : "diagonal"},
          {"use_interpolator", spec.use_interpolator},
          {"mean_raw_accuracy", sum_raw / n},
          {"mean_ddt_accuracy", sum_ddt / n},
          {"mean_da_accuracy", sum_da / n},
          {"min_raw_accuracy", min_raw},
          {"min_ddt_accuracy", min_ddt},
          {"pairs_worse_than_raw", worse},
          {"calibration_source", "simulated"},
          {"pairs", pairs}};
}

std::vector<CurveRow> calibration_curve(const std::vector<PairOutcome>& outcomes, const CalibrationResult& fit) {
  std::vector<CurveRow> rows;
  for (const auto& o : outcomes) {
    const double d = o.report.distance;
    const auto it = std::lower_bound(fit.distances.begin(), fit.distances.end(), d);
    const double f = it == fit.distances.end() ? fit.fitted.back() : fit.fitted[static_cast<std::size_t>(it - fit.distances.begin())];
    rows.push_back({d, o.report.mapped_accuracy, f});
  }
  std::sort(rows.begin(), rows.end(), [](const CurveRow& a, const CurveRow& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.accuracy < b.accuracy);
  });
  return rows;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::ostringstream os;
  os << "distance,accuracy,fitted\n";
  for (const auto& r : rows)
    os << io::format_double(r.distance) << ',' << io::format_double(r.accuracy) << ',' << io::format_double(r.fitted)
       << '\n';
  return os.str();
}

json RunManifest::to_json() const {
  json files = json::array();
  for (const auto& p : outputs) {
    json entry = {{"path", p.generic_string()}};
    if (fs::is_regular_file(p)) entry["sha256"] = io::sha256_hex(io::read_text(p));
    files.push_back(entry);
  }
  return {{"command", command},   {"config_digest", config_digest}, {"seed", seed},
          {"tool_version", tool_version}, {"outputs", files}, {"wall_time_s", wall_time_s}};
}

std::string config_digest(const json& cfg, std::uint64_t seed) {
  return io::sha256_hex(cfg.dump() + "\nseed=" + std::to_string(seed));
}

void write_manifest(const fs::path& out_dir, const RunManifest& manifest) {
  fs::create_directories(out_dir);
  io::write_json(out_dir / "manifest.json", manifest.to_json());
}

}  // namespace pbshm::campaign
