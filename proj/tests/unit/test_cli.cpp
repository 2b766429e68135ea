#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"
#include "doctest.h"
#include "pbshm/campaign.hpp"
#include "pbshm/io.hpp"

using namespace pbshm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "pbshm_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Five perturbed two-span bridges, three conditions, short records.
json simulation_config() {
  return json::parse(R"({
    "family": "two_span",
    "sampling": {"count": 5, "perturbation": 0.05,
                 "base": [20, 2, 0.3, 3e10, 2500, 0.3, 50, 0.15, 0.15, 1e10, 2500, 0.3, 30, 2, 0.3, 3e10, 2500, 0.3]},
    "conditions": [{"label": "healthy"}, {"label": "D1", "slot": "D1", "delta": 0.25},
                   {"label": "D2", "slot": "D2", "delta": 0.25}],
    "N_R": 6, "N_T": 2048, "f_s": 20, "N_w": 512, "noise_std": 0.02, "zeta": 0.005, "seed": 7
  })");
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& doc) {
  io::write_json(dir / name, doc);
  return dir / name;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(io::read_text(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

void check_manifest(const fs::path& dir, const std::string& command) {
  const auto m = io::read_json(dir / "manifest.json");
  CHECK(m.at("command") == command);
  CHECK(m.at("tool_version") == campaign::kToolVersion);
  CHECK(m.at("config_digest").get<std::string>().size() == 64);
  for (const auto& o : m.at("outputs"))
    CHECK(o.at("sha256") == io::sha256_hex(io::read_text(o.at("path").get<std::string>())));
}

}  // namespace

TEST_CASE("population build and distance matrix") {
  const auto dir = scratch("population");
  const auto cfg = write_config(dir, "pop.json", simulation_config());
  REQUIRE(run({"population", "build", "--config", cfg.string(), "--out", (dir / "build").string()}).code == 0);
  check_manifest(dir / "build", "population build");
  const auto pop_file = dir / "build" / "population.json";
  const auto pop = Population::from_json(io::read_json(pop_file));
  CHECK(pop.size() == 5);

  const auto listed = run({"population", "list", "--population", pop_file.string()});
  CHECK(listed.code == 0);
  for (const auto& id : pop.ids()) CHECK(listed.out.find(id) != std::string::npos);

  REQUIRE(run({"population", "distance-matrix", "--population", pop_file.string(), "--out", (dir / "dm").string()})
              .code == 0);
  const auto rows = read_csv(dir / "dm" / "distance_matrix.csv");
  const auto ids = pop.ids();
  REQUIRE(rows.size() == ids.size() + 1);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CHECK(rows[i + 1][0] == ids[i]);
    CHECK(std::stod(rows[i + 1][i + 1]) == 0.0);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      CHECK(rows[i + 1][j + 1] == rows[j + 1][i + 1]);
      CHECK(std::stod(rows[i + 1][j + 1]) == graph_distance(pop.at(ids[i]).graph, pop.at(ids[j]).graph));
    }
  }
}

TEST_CASE("simulate is deterministic and matches the in-process simulation") {
  const auto dir = scratch("simulate");
  const auto sim = simulation_config();
  const auto cfg = write_config(dir, "sim.json", sim);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "a").string()}).code == 0);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "b").string(), "--jobs", "1"}).code == 0);
  check_manifest(dir / "a", "simulate");

  const auto pop = campaign::population_from_config(sim, 7);
  const auto settings = campaign::simulation_from_config(sim, 7);
  const auto members = campaign::simulate_members(pop, settings);
  REQUIRE(members.size() == 5);
  for (const auto& m : members) {
    const auto a = dir / "a" / "fibres" / m.id, b = dir / "b" / "fibres" / m.id;
    for (const auto& entry : fs::directory_iterator(a))
      CHECK(io::read_text(entry.path()) == io::read_text(b / entry.path().filename()));
    const auto f = Fibre::load(a);
    const auto& c = f.constants();
    CHECK(f.stratum(0).grid.size() == c.n_channels * 6 * 3);
    CHECK(c.n_acquisitions == 18);
    const auto m_feat = campaign::feature_stratum(f);
    CHECK(f.stratum(m_feat).grid == m.data.fibre.stratum(m.data.feature_stratum).grid);
    CHECK(campaign::parse_labels_csv(io::read_text(a / "labels.csv")) == m.data.labels);
  }
}

TEST_CASE("transfer report") {
  const auto dir = scratch("transfer");
  write_config(dir, "sim.json", simulation_config());
  const auto pop = campaign::population_from_config(simulation_config(), 7);
  const auto ids = pop.ids();

  SUBCASE("all pairs") {
    const auto cfg = write_config(dir, "tr.json", {{"simulation", "sim.json"}, {"pairs", "all"}, {"steps", 2}});
    REQUIRE(run({"transfer", "--config", cfg.string(), "--out", (dir / "all").string()}).code == 0);
    check_manifest(dir / "all", "transfer");
    CHECK(fs::exists(dir / "all" / "scatter.svg"));
    const auto rows = read_csv(dir / "all" / "report.csv");
    CHECK(rows.size() == 1 + ids.size() * (ids.size() - 1));
    const auto summary = io::read_json(dir / "all" / "summary.json");
    CHECK(summary.at("calibration_source") == "simulated");

    // Recompute the first pair in-process.
    auto p = campaign::population_from_config(simulation_config(), 7);
    const auto settings = campaign::simulation_from_config(simulation_config(), 7);
    campaign::simulate_into(p, settings);
    const auto& s = p.at(rows[1][0]);
    const auto& t = p.at(rows[1][1]);
    const auto fs_s = feature_set(*s.fibre, campaign::feature_stratum(*s.fibre), s.labels);
    const auto fs_t = feature_set(*t.fibre, campaign::feature_stratum(*t.fibre), t.labels);
    const auto map = ddt_map(fs_s, fs_t, geodesic(*t.instance, *s.instance), {2}, simulation_oracle(settings));
    const auto report = evaluate_transfer(train_localiser(fs_s.X, fs_s.labels), map, fs_t.X, fs_t.labels);
    CHECK(rows[1][6] == io::format_double(report.raw_accuracy));
    CHECK(rows[1][7] == io::format_double(report.mapped_accuracy));
    CHECK(rows[1][2] == io::format_double(graph_distance(s.graph, t.graph)));
  }

  SUBCASE("identity pair") {
    const auto cfg = write_config(
        dir, "id.json", {{"simulation", "sim.json"}, {"pairs", json::array({json::array({ids[0], ids[0]})})}});
    REQUIRE(run({"transfer", "--config", cfg.string(), "--out", (dir / "id").string()}).code == 0);
    const auto rows = read_csv(dir / "id" / "report.csv");
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][6] == rows[1][7]);
    CHECK(rows[1][7] == rows[1][9]);
    CHECK(std::stod(rows[1][2]) == 0.0);
  }
}

TEST_CASE("calibrate") {
  const auto dir = scratch("calibrate");
  write_config(dir, "sim.json", simulation_config());
  const auto cfg = write_config(dir, "cal.json", {{"simulation", "sim.json"}, {"pairs", "all"}, {"steps", 1}});
  const auto r = run({"calibrate", "--config", cfg.string(), "--out", (dir / "c").string(), "--target-accuracy", "0"});
  REQUIRE(r.code == 0);
  check_manifest(dir / "c", "calibrate");
  const auto cal = io::read_json(dir / "c" / "calibration.json");
  CHECK(cal.at("pair_count") == 20);
  CHECK_FALSE(cal.at("warning").get<bool>());
  // Every pair passes a zero target, so d_s is the largest distance seen.
  const auto curve = read_csv(dir / "c" / "curve.csv");
  double largest = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) largest = std::max(largest, std::stod(curve[i][0]));
  CHECK(cal.at("d_s").get<double>() == largest);

  const auto strict = run({"calibrate", "--config", cfg.string(), "--out", (dir / "s").string(), "--target-accuracy", "1.5"});
  CHECK(strict.code == 1);
}

TEST_CASE("default output directory and exit codes") {
  const auto dir = scratch("exit");
  const auto cfg = write_config(dir, "pop.json", simulation_config());
  ::setenv("PBSHM_OUT", (dir / "env").c_str(), 1);
  CHECK(run({"population", "build", "--config", cfg.string()}).code == 0);
  ::unsetenv("PBSHM_OUT");
  CHECK(fs::exists(dir / "env" / "population" / "population.json"));

  CHECK(run({"--help"}).code == 0);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"simulate"}).code == 1);
  CHECK(run({"simulate", "--config", (dir / "missing.json").string()}).code == 1);
  std::ofstream(dir / "broken.json") << "{\"family\": ";
  const auto broken = run({"simulate", "--config", (dir / "broken.json").string(), "--out", (dir / "x").string()});
  CHECK(broken.code == 1);
  CHECK_FALSE(broken.err.empty());
  auto bad_family = simulation_config();
  bad_family["family"] = "four_span";
  const auto bf = write_config(dir, "bad.json", bad_family);
  CHECK(run({"simulate", "--config", bf.string(), "--out", (dir / "y").string()}).code == 1);
  CHECK(run({"export", "--fibre", (dir / "nowhere").string(), "--stratum", "0", "--csv", (dir / "e.csv").string()}).code ==
        1);
}

TEST_CASE("export writes a stratum as CSV") {
  const auto dir = scratch("export");
  auto sim = simulation_config();
  sim["sampling"]["count"] = 1;
  const auto cfg = write_config(dir, "sim.json", sim);
  REQUIRE(run({"simulate", "--config", cfg.string(), "--out", (dir / "s").string()}).code == 0);
  const auto fibre_dir = *fs::directory_iterator(dir / "s" / "fibres");
  const auto f = Fibre::load(fibre_dir.path());
  const auto m = campaign::feature_stratum(f);
  REQUIRE(run({"export", "--fibre", fibre_dir.path().string(), "--stratum", std::to_string(m), "--csv",
               (dir / "features.csv").string()})
              .code == 0);
  const auto rows = read_csv(dir / "features.csv");
  CHECK(rows.size() == 1 + f.stratum(m).grid.size());
  CHECK(rows[0].size() == 2 + f.stratum(m).record_dim);
  CHECK(std::stod(rows[1][2]) == f.stratum(m).grid.begin()->second[0]);
  CHECK(run({"export", "--fibre", fibre_dir.path().string(), "--stratum", "99", "--csv", (dir / "f.csv").string()})
            .code == 1);
}
