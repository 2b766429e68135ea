#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbshm/execution.hpp"
#include "pbshm/families.hpp"
#include "pbshm/fibre.hpp"
#include "pbshm/graph.hpp"

namespace pbshm {

struct AssemblyOptions {
  std::size_t n_e = 8;       // beam elements per deck
  bool pillar_mass = false;  // lump half the pillar mass on its junction
};

/// Beam-and-spring model of a bridge graph. Decks are chained along their
/// deck-deck adjacency; junctions carried by a pillar are hinges, other
/// junctions are continuous; deck ends touching ground are pinned.
struct BridgeModel {
  Eigen::MatrixXd K;  // over free DOFs only
  Eigen::MatrixXd M;
  std::vector<double> node_x;                                 // longitudinal node positions, m
  std::vector<std::string> deck_order;                        // decks from the start of the chain
  std::map<std::string, std::pair<std::size_t, std::size_t>> slot_nodes;  // deck -> [first, last] node
  std::map<std::string, std::size_t> pillar_node;             // pillar -> junction node
  std::map<std::string, double> pillar_stiffness;             // pillar -> k = E w t / l
  std::vector<std::string> sensor_ids;                        // channel order
  std::vector<std::optional<std::size_t>> sensor_dof;         // free transverse DOF, none if pinned

  std::size_t dof_count() const { return static_cast<std::size_t>(K.rows()); }
};

BridgeModel assemble(const AttributedGraph& g, const AssemblyOptions& opts = {});
BridgeModel assemble(const StructureInstance& inst, const AssemblyOptions& opts = {});

struct ModalResult {
  std::vector<double> frequencies;  // Hz, ascending
  Eigen::MatrixXd sensor_shapes;    // sensors x modes, mass-normalised
  Eigen::MatrixXd shapes;           // free DOFs x modes
};

/// Lowest n eigenpairs of K phi = w^2 M phi.
ModalResult natural_frequencies(const BridgeModel& model, std::size_t n);

struct DamageState {
  std::string slot;
  double delta = 0.0;  // stiffness reduction factor, [0, 1)
};

/// Returns a copy with E of the slot scaled by (1 - delta).
StructureInstance apply_damage(const StructureInstance& inst, const DamageState& d);

struct SynthesisConfig {
  double zeta = 0.01;       // modal damping ratio
  double noise_std = 0.0;   // fraction of each record's clean RMS
  std::uint64_t seed = 0;
  double amplitude_lo = 0.5;
  double amplitude_hi = 1.5;
};

/// Free decay of every mode with random amplitude and phase, sampled at the
/// model's sensors. One record per sensor, each of length n_t.
std::vector<std::vector<double>> synthesize_timeseries(const BridgeModel& model, const ModalResult& modal,
                                                       const SynthesisConfig& cfg, std::size_t n_t, double fs);

/// 64-bit mixer used to derive per-acquisition seeds.
std::uint64_t splitmix64(std::uint64_t x);

struct Condition {
  std::string label;
  std::optional<DamageState> damage;
};

struct PopulateOptions {
  std::size_t n_t = 4096;
  double fs = 50.0;
  std::size_t n_w = 0;     // 0 selects n_t / 4
  double dtau = 600.0;     // s between acquisitions
  std::size_t n_modes = 4;  // modes simulated and peaks extracted
  AssemblyOptions assembly;
  Execution exec = Execution::parallel;
};

struct PopulatedFibre {
  Fibre fibre;
  std::vector<int> labels;               // per acquisition, index into label_names
  std::vector<std::string> label_names;  // condition labels in input order
  std::size_t feature_stratum = 0;       // stratum holding the modal-peak features
};

/// Acquisitions are condition-major: k = c * n_r + r. Raw records are
/// ingested, then demean -> welch -> modal_peaks is applied.
PopulatedFibre populate_fibre(const StructureInstance& inst, const std::vector<Condition>& conditions, std::size_t n_r,
                              const SynthesisConfig& cfg, const PopulateOptions& opts = {});

/// One feature row per acquisition: the element-wise median over channels
/// of stratum m. Rows follow acquisition order.
Eigen::MatrixXd acquisition_features(const Fibre& fibre, std::size_t m);

/// Noise-free modal frequencies of an instance (first n), a shortcut used
/// for intermediate structures whose NC statistics are simulated.
std::vector<double> instance_frequencies(const StructureInstance& inst, std::size_t n, const AssemblyOptions& opts = {});

}  // namespace pbshm
