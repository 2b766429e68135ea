#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pbshm/population.hpp"
#include "pbshm/transfer.hpp"

namespace pbshm::campaign {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

/// Builds a population from a structure document. Accepted keys:
///   structures: [{id, family, theta} | graph]      explicit members
///   family + theta (+ id)                          one instance
///   family + sampling {count, base?, perturbation?, prefix?}
/// Sampling perturbs each coordinate of `base` (default: the family box
/// midpoint) by a uniform relative factor in [-perturbation, perturbation];
/// without `base` it draws uniformly inside the family box.
Population population_from_config(const json& cfg, std::uint64_t seed,
                                  const FamilyRegistry& families = FamilyRegistry::builtin());

/// Simulation settings from {conditions:[{label, slot?, delta?}], N_R, N_T,
/// f_s, N_w?, noise_std, zeta, seed, n_e, dtau?, n_modes?}.
SimulationSettings simulation_from_config(const json& cfg, std::uint64_t seed);

/// Seed from the config ("seed", default 0) unless overridden.
std::uint64_t resolve_seed(const json& cfg, std::optional<std::uint64_t> override_seed);

struct MemberData {
  std::string id;
  PopulatedFibre data;
};

/// Simulates every family member of the population (in id order).
/// Each member gets its own seed derived from the run seed and its id.
std::vector<MemberData> simulate_members(const Population& population, const SimulationSettings& settings);

/// Simulates members and attaches the fibres; members without a family are
/// left without data.
void simulate_into(Population& population, const SimulationSettings& settings);

/// Loads `<dir>/<id>` fibres and their labels CSV where present.
void load_fibres(Population& population, const fs::path& dir);

/// Writes `<dir>/<id>/` (fibre format) and `<dir>/<id>/labels.csv`.
std::vector<fs::path> save_member(const fs::path& dir, const MemberData& m);

std::string labels_csv(const std::vector<int>& labels, const std::vector<std::string>& names);
std::vector<int> parse_labels_csv(const std::string& text);

/// Index of the stratum holding modal-peak features (last one derived by
/// modal_peaks).
std::size_t feature_stratum(const Fibre& fibre);

struct TransferSpec {
  std::vector<std::pair<std::string, std::string>> pairs;  // (source, target); empty = all ordered pairs
  DdtOptions ddt;
  bool use_interpolator = false;
  LocaliserConfig localiser;
  std::optional<std::pair<std::string, std::string>> scatter;
  double target_accuracy = 0.9;
  MetricConfig metric;
};

/// {pairs: "all" | [[source, target], ...], steps, use_interpolator,
///  alignment: "diagonal"|"full", classifier: {k, weighting, standardise},
///  target_accuracy, scatter: [source, target]}
TransferSpec transfer_from_config(const json& cfg);

struct PairOutcome {
  TransferReport report;
  TransferMap map;
  bool interpolated = false;
  double cv_accuracy = 0.0;  // 5-fold in-domain accuracy of the target
};

/// Runs DDT (or two-step through S*) on every pair, DA alongside. Pairs are
/// processed in (source, target) order; S* members are added to the
/// population under "S*(<source>,<target>)".
std::vector<PairOutcome> run_transfers(Population& population, const TransferSpec& spec,
                                       const SimulationSettings& settings);

std::vector<std::pair<std::string, std::string>> resolve_pairs(const Population& population,
                                                               const TransferSpec& spec);

std::string report_csv(const std::vector<PairOutcome>& outcomes);
json summary_json(const std::vector<PairOutcome>& outcomes, const TransferSpec& spec);

/// Isotonic accuracy curve over the campaign's (D, DDT accuracy) points.
struct CurveRow {
  double distance;
  double accuracy;
  double fitted;
};
std::vector<CurveRow> calibration_curve(const std::vector<PairOutcome>& outcomes, const CalibrationResult& fit);
std::string curve_csv(const std::vector<CurveRow>& rows);

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<fs::path> outputs;
  double wall_time_s = 0.0;

  json to_json() const;
};

/// SHA-256 over the canonical config document and the seed.
std::string config_digest(const json& cfg, std::uint64_t seed);

void write_manifest(const fs::path& out_dir, const RunManifest& manifest);

}  // namespace pbshm::campaign
