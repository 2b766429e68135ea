#include "cli_app.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "pbshm/campaign.hpp"
#include "pbshm/error.hpp"
#include "pbshm/io.hpp"
#include "pbshm/kernels.hpp"
#include "pbshm/svg.hpp"

namespace pbshm::cli {

namespace {

namespace fs = std::filesystem;
using campaign::json;

/// Broken internal invariant (as opposed to bad user input).
struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  bool verbose = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Campaign or structure config (JSON)");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "Output directory (default: $PBSHM_OUT or ./pbshm_out)");
  cmd->add_option("--seed", c.seed, "Seed overriding the config");
  cmd->add_option("--jobs", c.jobs, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("--verbose", c.verbose, "Progress on stderr");
}

fs::path out_dir(const Common& c, const std::string& command) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("PBSHM_OUT"); env && *env) return fs::path(env) / command;
  return fs::path("pbshm_out") / command;
}

/// A config value that is either inline JSON or a path relative to the
/// config file.
json section(const json& cfg, const std::string& key, const fs::path& base) {
  const auto& v = cfg.at(key);
  if (v.is_string()) return io::read_json(base / v.get<std::string>());
  return v;
}

struct Loaded {
  json cfg;
  fs::path base;
  std::uint64_t seed = 0;
};

Loaded load(const Common& c) {
  Loaded l;
  l.cfg = io::read_json(c.config);
  if (!l.cfg.is_object()) fail(ErrorKind::invalid_input, c.config + ": top level must be an object");
  l.base = fs::path(c.config).parent_path();
  l.seed = campaign::resolve_seed(l.cfg, c.seed);
  // A referenced simulation block supplies the seed when the top level has none.
  if (!c.seed && !l.cfg.contains("seed") && l.cfg.contains("simulation"))
    l.seed = campaign::resolve_seed(section(l.cfg, "simulation", l.base), std::nullopt);
  return l;
}

/// Population and simulation settings of a campaign config. The simulation
/// block may live under "simulation" (inline or a path) or at top level;
/// structures under "population" or inside the simulation block.
struct CampaignInputs {
  Population population;
  SimulationSettings settings;
};

CampaignInputs campaign_inputs(const Loaded& l, bool verbose, std::ostream& err) {
  const json sim = l.cfg.contains("simulation") ? section(l.cfg, "simulation", l.base) : l.cfg;
  const json pop = l.cfg.contains("population") ? section(l.cfg, "population", l.base) : sim;
  CampaignInputs in{campaign::population_from_config(pop, l.seed), campaign::simulation_from_config(sim, l.seed)};
  if (l.cfg.contains("fibres")) campaign::load_fibres(in.population, l.base / l.cfg.at("fibres").get<std::string>());
  Population missing;
  for (const auto& [id, m] : in.population.members())
    if (!m.has_data() && m.instance) missing.add(m);
  if (missing.size() > 0) {
    if (verbose) err << "simulating " << missing.size() << " structure(s)\n";
    for (auto& m : campaign::simulate_members(missing, in.settings))
      in.population.attach_fibre(m.id, std::make_shared<const Fibre>(std::move(m.data.fibre)), m.data.labels);
  }
  return in;
}

void finish(const fs::path& dir, const std::string& command, const Loaded& l, std::vector<fs::path> outputs,
            std::chrono::steady_clock::time_point t0, std::ostream& out) {
  campaign::RunManifest m;
  m.command = command;
  m.config_digest = campaign::config_digest(l.cfg, l.seed);
  m.seed = l.seed;
  m.outputs = std::move(outputs);
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  campaign::write_manifest(dir, m);
  out << "manifest: " << (dir / "manifest.json").string() << '\n';
}

std::string distance_csv(const std::vector<std::string>& ids, const Eigen::MatrixXd& d) {
  std::ostringstream os;
  os << "id";
  for (const auto& id : ids) os << ',' << id;
  os << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << ids[i];
    for (std::size_t j = 0; j < ids.size(); ++j)
      os << ',' << io::format_double(d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    os << '\n';
  }
  return os.str();
}

int cmd_population_build(const Common& c, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded l = load(c);
  const Population pop = campaign::population_from_config(l.cfg, l.seed);
  const fs::path dir = out_dir(c, "population");
  fs::create_directories(dir);
  io::write_json(dir / "population.json", pop.to_json());
  out << "population: " << pop.size() << " structure(s) -> " << (dir / "population.json").string() << '\n';
  finish(dir, "population build", l, {dir / "population.json"}, t0, out);
  return ok;
}

Population read_population(const std::string& path) {
  return campaign::population_from_config(io::read_json(path), 0);
}

int cmd_population_list(const std::string& path, const std::string& fibres, std::ostream& out) {
  Population pop = read_population(path);
  if (!fibres.empty()) campaign::load_fibres(pop, fibres);
  out << std::left << std::setw(16) << "id" << std::setw(12) << "family" << std::setw(11) << "provenance"
      << std::setw(10) << "vertices" << "data\n";
  for (const auto& [id, m] : pop.members()) {
    out << std::setw(16) << id << std::setw(12) << (m.instance ? m.instance->family->name() : std::string("-"))
        << std::setw(11) << to_string(m.provenance()) << std::setw(10) << m.graph.size();
    if (m.has_data())
      out << m.fibre->stratum_count() << " strata, " << m.fibre->constants().n_acquisitions << " acquisitions";
    else
      out << "-";
    out << '\n';
  }
  return ok;
}

int cmd_population_matrix(const Common& c, const std::string& path, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  Loaded l;
  l.cfg = io::read_json(path);
  const Population pop = campaign::population_from_config(l.cfg, 0);
  std::vector<AttributedGraph> graphs;
  for (const auto& [id, m] : pop.members()) graphs.push_back(m.graph);
  const Eigen::MatrixXd d = kernels::distance_matrix(graphs, MetricConfig{}, Execution::parallel);
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    if (d(i, i) != 0.0) throw InternalError("distance matrix diagonal is not zero");
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(d(i, j) - d(j, i)) > 1e-12) throw InternalError("distance matrix is not symmetric");
  }
  const fs::path dir = out_dir(c, "population");
  fs::create_directories(dir);
  io::write_atomic(dir / "distance_matrix.csv", distance_csv(pop.ids(), d));
  out << "distance matrix: " << pop.size() << "x" << pop.size() << " -> " << (dir / "distance_matrix.csv").string()
      << '\n';
  finish(dir, "population distance-matrix", l, {dir / "distance_matrix.csv"}, t0, out);
  return ok;
}

int cmd_simulate(const Common& c, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded l = load(c);
  const json sim = l.cfg.contains("simulation") ? section(l.cfg, "simulation", l.base) : l.cfg;
  const json pop_cfg = l.cfg.contains("population") ? section(l.cfg, "population", l.base) : sim;
  const Population pop = campaign::population_from_config(pop_cfg, l.seed);
  const SimulationSettings settings = campaign::simulation_from_config(sim, l.seed);
  const fs::path dir = out_dir(c, "simulate");
  fs::create_directories(dir / "fibres");
  std::vector<fs::path> outputs;
  if (c.verbose) err << "simulating " << pop.size() << " structure(s)\n";
  for (const auto& m : campaign::simulate_members(pop, settings)) {
    auto files = campaign::save_member(dir / "fibres", m);
    outputs.insert(outputs.end(), files.begin(), files.end());
    const Fibre& f = m.data.fibre;
    out << m.id << ": " << f.constants().n_channels << " channel(s) x " << f.constants().n_acquisitions
        << " acquisition(s)\n";
    for (std::size_t s = 0; s < f.stratum_count(); ++s) {
      const auto& st = f.stratum(s);
      out << "  stratum " << s << ": record_dim " << st.record_dim << ", " << st.grid.size() << " records, chain [";
      for (std::size_t i = 0; i < st.chain.size(); ++i) out << (i ? " -> " : "") << st.chain[i].name;
      out << "]\n";
    }
  }
  io::write_json(dir / "population.json", pop.to_json());
  outputs.push_back(dir / "population.json");
  finish(dir, "simulate", l, outputs, t0, out);
  return ok;
}

int cmd_transfer(const Common& c, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded l = load(c);
  CampaignInputs in = campaign_inputs(l, c.verbose, err);
  const auto spec = campaign::transfer_from_config(l.cfg);
  const Population before = in.population;
  const auto outcomes = campaign::run_transfers(in.population, spec, in.settings);
  const fs::path dir = out_dir(c, "transfer");
  fs::create_directories(dir);
  io::write_atomic(dir / "report.csv", campaign::report_csv(outcomes));
  io::write_json(dir / "summary.json", campaign::summary_json(outcomes, spec));
  std::vector<fs::path> outputs{dir / "report.csv", dir / "summary.json"};

  if (!outcomes.empty()) {
    const auto pick = spec.scatter.value_or(std::pair{outcomes.front().report.source_id, outcomes.front().report.target_id});
    const auto it = std::find_if(outcomes.begin(), outcomes.end(), [&](const campaign::PairOutcome& o) {
      return o.report.source_id == pick.first && o.report.target_id == pick.second;
    });
    if (it == outcomes.end()) fail(ErrorKind::invalid_input, "scatter pair " + pick.first + " -> " + pick.second + " is not in the campaign");
    const auto& ms = before.at(pick.first);
    const auto& mt = before.at(pick.second);
    const auto src = feature_set(*ms.fibre, campaign::feature_stratum(*ms.fibre), ms.labels);
    const auto tgt = feature_set(*mt.fibre, campaign::feature_stratum(*mt.fibre), mt.labels);
    std::vector<std::string> names;
    for (const auto& cond : in.settings.conditions) names.push_back(cond.label);
    const std::string svg = svg::scatter({{"source " + pick.first, src.X, src.labels, false},
                                          {"mapped target " + pick.second, it->map.apply(tgt.X), tgt.labels, true}},
                                         names, pick.second + " -> " + pick.first);
    io::write_atomic(dir / "scatter.svg", svg);
    outputs.push_back(dir / "scatter.svg");
  }
  for (const auto& o : outcomes)
    out << o.report.source_id << " <- " << o.report.target_id << "  D=" << std::setprecision(4) << o.report.distance
        << "  raw=" << o.report.raw_accuracy << "  ddt=" << o.report.mapped_accuracy << "  da=" << o.report.da_accuracy
        << '\n';
  finish(dir, "transfer", l, outputs, t0, out);
  return ok;
}

int cmd_calibrate(const Common& c, std::optional<double> target, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const Loaded l = load(c);
  CampaignInputs in = campaign_inputs(l, c.verbose, err);
  auto spec = campaign::transfer_from_config(l.cfg);
  if (target) spec.target_accuracy = *target;
  if (!(spec.target_accuracy >= 0.0 && spec.target_accuracy <= 1.0))
    fail(ErrorKind::invalid_input, "target accuracy must lie in [0, 1]");
  const auto outcomes = campaign::run_transfers(in.population, spec, in.settings);
  std::vector<std::pair<double, double>> points;
  for (const auto& o : outcomes) points.emplace_back(o.report.distance, o.report.mapped_accuracy);
  const CalibrationResult fit = calibrate_threshold(points, spec.target_accuracy);
  const fs::path dir = out_dir(c, "calibrate");
  fs::create_directories(dir);
  io::write_atomic(dir / "curve.csv", campaign::curve_csv(campaign::calibration_curve(outcomes, fit)));
  io::write_json(dir / "calibration.json", {{"d_s", fit.d_s},
                                            {"warning", fit.warning},
                                            {"target_accuracy", spec.target_accuracy},
                                            {"pair_count", points.size()},
                                            {"calibration_source", "simulated"}});
  out << "d_s = " << io::format_double(fit.d_s) << (fit.warning ? "  (warning: no distance reaches the target)" : "")
      << '\n';
  finish(dir, "calibrate", l, {dir / "curve.csv", dir / "calibration.json"}, t0, out);
  return ok;
}

int cmd_export(const std::string& fibre_dir, std::size_t m, const std::string& csv, std::ostream& out) {
  const Fibre f = Fibre::load(fibre_dir);
  const Stratum& st = f.stratum(m);
  std::ostringstream os;
  os << "channel,acquisition";
  for (std::size_t i = 0; i < st.record_dim; ++i) os << ",v" << i;
  os << '\n';
  for (const auto& [cell, values] : st.grid) {
    os << cell.channel << ',' << cell.acquisition;
    for (double v : values) os << ',' << io::format_double(v);
    os << '\n';
  }
  io::write_atomic(csv, os.str());
  out << "stratum " << m << ": " << st.grid.size() << " records -> " << csv << '\n';
  return ok;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Population-based SHM toolkit: structures, fibres, transfer campaigns"};
  app.name("pbshm");
  app.require_subcommand(1);

  Common common;
  std::string pop_file, fibres_dir, export_dir, export_csv;
  std::size_t export_stratum = 0;
  std::optional<double> target;

  auto* population = app.add_subcommand("population", "Build, list or compare structure populations");
  population->require_subcommand(1);
  auto* build = population->add_subcommand("build", "Write population.json from a structure config");
  add_common(build, common, true);
  auto* list = population->add_subcommand("list", "List the members of a population file");
  list->add_option("--population", pop_file, "population.json")->required();
  list->add_option("--fibres", fibres_dir, "Directory of simulated fibres");
  auto* matrix = population->add_subcommand("distance-matrix", "Pairwise graph distances as CSV");
  matrix->add_option("--population", pop_file, "population.json")->required();
  add_common(matrix, common, false);

  auto* simulate = app.add_subcommand("simulate", "Simulate fibres for a campaign");
  add_common(simulate, common, true);
  auto* transfer = app.add_subcommand("transfer", "Run a transfer campaign");
  add_common(transfer, common, true);
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate the transfer threshold d_s");
  add_common(calibrate, common, true);
  calibrate->add_option("--target-accuracy", target, "Required accuracy (overrides the config)");
  auto* exporter = app.add_subcommand("export", "Write one stratum of a fibre as CSV");
  exporter->add_option("--fibre", export_dir, "Fibre directory")->required();
  exporter->add_option("--stratum", export_stratum, "Stratum index")->required();
  exporter->add_option("--csv", export_csv, "Output CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : user_error;
  }

  if (common.jobs > 0) omp_set_num_threads(common.jobs);
  try {
    if (build->parsed()) return cmd_population_build(common, out);
    if (list->parsed()) return cmd_population_list(pop_file, fibres_dir, out);
    if (matrix->parsed()) return cmd_population_matrix(common, pop_file, out);
    if (simulate->parsed()) return cmd_simulate(common, out, err);
    if (transfer->parsed()) return cmd_transfer(common, out, err);
    if (calibrate->parsed()) return cmd_calibrate(common, target, out, err);
    if (exporter->parsed()) return cmd_export(export_dir, export_stratum, export_csv, out);
  } catch (const InternalError& e) {
    err << "internal error: " << e.what() << '\n';
    return internal_error;
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return user_error;
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return user_error;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return internal_error;
  }
  return internal_error;
}

}  // namespace pbshm::cli
