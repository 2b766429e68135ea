#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pbshm/execution.hpp"

namespace pbshm {

/// (channel j, acquisition k)
struct CellIndex {
  std::size_t channel = 0;
  std::size_t acquisition = 0;
  auto operator<=>(const CellIndex&) const = default;
};

/// Named, parameterised per-record operator. `params` is a JSON object so
/// that defaults applied at invocation time are recorded with the chain.
struct OperatorSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();

  nlohmann::json to_json() const { return {{"name", name}, {"params", params}}; }
  static OperatorSpec from_json(const nlohmann::json& doc);
  friend bool operator==(const OperatorSpec& a, const OperatorSpec& b) {
    return a.name == b.name && a.params == b.params;
  }
};

OperatorSpec op_mean();
OperatorSpec op_demean();
OperatorSpec op_dft();
OperatorSpec op_welch(std::size_t n_w);
OperatorSpec op_modal_peaks(std::size_t n);
OperatorSpec op_band(std::size_t lo, std::size_t hi);

/// A registered operator: pure function of one record plus parameters.
struct OperatorDefinition {
  /// Validates `params` against the input dimension and returns out_dim.
  std::function<std::size_t(std::size_t in_dim, const nlohmann::json& params)> out_dim;
  std::function<std::vector<double>(std::span<const double> record, const nlohmann::json& params)> apply;
};

class OperatorRegistry {
 public:
  /// mean, demean, dft, welch, modal_peaks, band.
  static const OperatorRegistry& standard();

  void add(std::string name, OperatorDefinition def);
  const OperatorDefinition& find(const std::string& name) const;
  bool contains(const std::string& name) const { return ops_.contains(name); }

 private:
  std::map<std::string, OperatorDefinition> ops_;
};

struct RecordRef {
  CellIndex cell;
  std::span<const double> values;
};

struct Stratum {
  std::size_t index = 0;
  std::size_t record_dim = 0;
  std::map<CellIndex, std::vector<double>> grid;
  std::vector<OperatorSpec> chain;

  /// SHA-256 of the canonical chain document; used to deduplicate strata.
  std::string chain_digest() const;
  std::size_t flat_dim() const { return grid.size() * record_dim; }
};

std::string chain_digest(const std::vector<OperatorSpec>& chain);

struct AcquisitionConstants {
  std::size_t n_channels = 0;      // N_S
  std::size_t n_samples = 0;       // N_T
  std::size_t n_acquisitions = 0;  // N_R
  double fs = 0.0;                 // Hz
  double dtau = 0.0;               // s, acquisition period
};

/// Stratified data space of one structure. Stratum 0 holds raw time records;
/// derived strata are append-only and never change once created. A fibre
/// accepts one writer or many readers.
class Fibre {
 public:
  Fibre(std::string structure_id, AcquisitionConstants constants, std::map<std::size_t, std::string> channel_sensors = {});

  const std::string& structure_id() const { return structure_id_; }
  const AcquisitionConstants& constants() const { return constants_; }
  const std::map<std::size_t, std::string>& channel_sensors() const { return channel_sensors_; }
  std::size_t stratum_count() const { return 1 + derived_.size(); }
  bool empty() const { return raw_.grid.empty(); }

  /// Raw acquisitions start at t0 + k * dtau; t0 is fixed by the first ingest.
  std::optional<double> origin_time() const { return t0_; }

  void ingest(std::size_t channel, std::size_t acquisition, std::vector<double> samples, double start_time);

  std::vector<RecordRef> project_channel(std::size_t m, std::size_t channel) const;
  std::vector<RecordRef> project_time(std::size_t m, std::size_t acquisition) const;
  RecordRef project_cell(std::size_t m, std::size_t channel, std::size_t acquisition) const;
  Stratum project_stratum(std::size_t m) const;
  const Stratum& stratum(std::size_t m) const;
  std::vector<OperatorSpec> provenance(std::size_t m) const;

  /// Applies `op` cell-wise to stratum `m_in` and appends the result. An
  /// identical chain already present is returned instead of duplicated.
  std::size_t apply_operator(std::size_t m_in, const OperatorSpec& op,
                             const OperatorRegistry& registry = OperatorRegistry::standard(),
                             Execution exec = Execution::parallel);

  /// Rebuilds stratum m from stratum 0 by replaying its chain.
  Stratum replay(std::size_t m, const OperatorRegistry& registry = OperatorRegistry::standard()) const;

  void save(const std::filesystem::path& dir) const;
  static Fibre load(const std::filesystem::path& dir);

  /// Fills defaults (fs for spectral operators, window conventions) so the
  /// recorded spec fully determines the result.
  OperatorSpec complete(const OperatorSpec& op, std::size_t in_dim) const;

 private:
  void require_stratum(std::size_t m) const;
  Stratum derive(const Stratum& input, const OperatorSpec& op, const OperatorRegistry& registry,
                 Execution exec) const;

  std::string structure_id_;
  AcquisitionConstants constants_;
  std::map<std::size_t, std::string> channel_sensors_;
  std::optional<double> t0_;
  Stratum raw_;
  std::vector<std::shared_ptr<const Stratum>> derived_;  // index m lives at m - 1
};

}  // namespace pbshm
