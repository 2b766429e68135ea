#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbshm/execution.hpp"
#include "pbshm/families.hpp"
#include "pbshm/physics.hpp"
#include "pbshm/population.hpp"

namespace pbshm {

/// Samples in rows plus their marginal summary.
struct Domain {
  Eigen::MatrixXd X;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;  // population standard deviation

  static Domain from(Eigen::MatrixXd X);
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }
};

/// y = scale .* x + shift, or y = linear * x + shift when `linear` is set.
struct AffineStep {
  Eigen::RowVectorXd scale;
  Eigen::RowVectorXd shift;
  std::optional<Eigen::MatrixXd> linear;

  static AffineStep identity(std::size_t dim);
  std::size_t dim() const { return static_cast<std::size_t>(shift.size()); }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  AffineStep inverse() const;
  /// Full matrix form A (y = A x + b).
  Eigen::MatrixXd matrix() const;
};

/// Ordered affine steps; applying the empty map is the identity.
class TransferMap {
 public:
  TransferMap() = default;
  explicit TransferMap(std::vector<AffineStep> steps, std::vector<std::string> path = {});

  const std::vector<AffineStep>& steps() const { return steps_; }
  const std::vector<std::string>& path() const { return path_; }
  bool empty() const { return steps_.empty(); }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  TransferMap inverse() const;
  /// Single affine step equivalent to the whole chain.
  AffineStep flatten(std::size_t dim) const;

  /// `first` then `second`.
  static TransferMap compose(const TransferMap& first, const TransferMap& second);

 private:
  std::vector<AffineStep> steps_;
  std::vector<std::string> path_;
};

struct NcaResult {
  Eigen::MatrixXd aligned;
  AffineStep step;
};

/// Standardises by the normal-condition rows: NC mean to 0, NC std to 1
/// (dimensions with zero spread are only shifted).
NcaResult nca(const Eigen::MatrixXd& X, const std::vector<std::size_t>& nc_rows);

/// First two moments of normal-condition features.
struct NcStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
  Eigen::MatrixXd cov;

  static NcStats of(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows);
};

/// Healthy-state feature samples of a structure, one per acquisition.
struct FeatureSet {
  Eigen::MatrixXd X;
  std::vector<int> labels;
  std::vector<std::size_t> nc_rows;
};

/// Extracts acquisition features and the rows whose label is `healthy_label`.
FeatureSet feature_set(const Fibre& fibre, std::size_t stratum, const std::vector<int>& labels, int healthy_label = 0);

/// NC statistics of an intermediate structure; `step` seeds the simulation.
using NcOracle = std::function<NcStats(const StructureInstance& inst, std::size_t step)>;

/// Settings for simulating structures (intermediates, S*, campaign members).
struct SimulationSettings {
  std::vector<Condition> conditions;
  std::size_t n_r = 30;
  SynthesisConfig synthesis;
  PopulateOptions populate;
};

/// Oracle that simulates `settings.synthesis.seed + step` healthy acquisitions
/// of the given instance and returns their NC statistics.
NcOracle simulation_oracle(const SimulationSettings& settings);

enum class Alignment {
  diagonal,  // per-dimension mean/std re-anchoring
  full,      // Gaussian optimal-transport map, full covariance
};

struct DdtOptions {
  std::size_t steps = 4;
  Alignment alignment = Alignment::diagonal;
};

/// Map sending target features into the source frame. `path` runs from the
/// target (s = 0) to the source (s = 1); NC statistics at s_0 and s_K come
/// from the data, those in between from the oracle, and consecutive frames
/// are chained by moment matching. A zero-length path gives one direct step.
TransferMap ddt_map(const FeatureSet& source, const FeatureSet& target, const GeodesicPath& path, const DdtOptions& opts,
                    const NcOracle& oracle);

struct LocaliserConfig {
  std::size_t k = 3;
  bool distance_weighted = true;
  bool standardise = false;  // z-score by training spread before distances
  Execution exec = Execution::parallel;
};

/// Distance-weighted kNN damage localiser. Labels are arbitrary ints; scores
/// follow the ascending label set.
class Localiser {
 public:
  Localiser(Eigen::MatrixXd X, std::vector<int> y, LocaliserConfig cfg);

  const std::vector<int>& label_set() const { return label_set_; }
  std::vector<int> predict(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd scores(const Eigen::MatrixXd& X) const;
  const LocaliserConfig& config() const { return cfg_; }

 private:
  Eigen::MatrixXd prepare(const Eigen::MatrixXd& X) const;

  Eigen::MatrixXd X_;
  std::vector<int> label_index_;
  std::vector<int> label_set_;
  Eigen::RowVectorXd centre_;
  Eigen::RowVectorXd spread_;
  LocaliserConfig cfg_;
};

Localiser train_localiser(const Eigen::MatrixXd& X, const std::vector<int>& y, const LocaliserConfig& cfg = {});

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Stratified k-fold accuracy: the i-th sample of each label goes to fold i % folds.
double cross_validate(const Eigen::MatrixXd& X, const std::vector<int>& y, const LocaliserConfig& cfg = {},
                      std::size_t folds = 5);

struct TransferReport {
  std::string source_id;
  std::string target_id;
  double distance = 0.0;               // graph distance D(S_s, S_t)
  double path_length = 0.0;            // family distance along the geodesic
  std::vector<double> leg_distances;   // graph distances of consecutive path nodes
  double raw_accuracy = 0.0;           // source classifier on unmapped target data
  double mapped_accuracy = 0.0;        // after the transfer map
  double da_accuracy = std::numeric_limits<double>::quiet_NaN();
  double in_domain_accuracy = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> label_set;
  Eigen::MatrixXi confusion;  // rows truth, cols prediction (mapped)
};

TransferReport evaluate_transfer(const Localiser& task, const TransferMap& map, const Eigen::MatrixXd& target_X,
                                 const std::vector<int>& target_y);

/// Per-domain NCA into a shared frame, localiser trained there.
struct DomainAdaptation {
  AffineStep source_step;
  AffineStep target_step;
  Localiser task;

  std::vector<int> predict_target(const Eigen::MatrixXd& target_X) const;
};

DomainAdaptation domain_adaptation_baseline(const FeatureSet& source, const FeatureSet& target,
                                            const LocaliserConfig& cfg = {});

struct TwoStepOptions {
  DdtOptions ddt;
  LocaliserConfig localiser;
  SimulationSettings simulation;  // used for S* and the intermediate oracle
  MetricConfig metric;
  std::string interpolator_id = "S*";
};

struct TwoStepResult {
  TransferReport report;
  StructureInstance interpolator;
  TransferMap map;
  double leg_target = 0.0;  // family distance target -> S*
  double leg_source = 0.0;  // family distance S* -> source
};

/// Transfers target -> S* -> source, S* being the geodesic midpoint. S* is
/// simulated and added to `population` as a simulated member.
TwoStepResult two_step_transfer(const std::string& source_id, const std::string& target_id, Population& population,
                                const TwoStepOptions& opts);

struct CalibrationResult {
  double d_s = 0.0;
  bool warning = false;  // no distance reached the target accuracy
  std::vector<double> distances;  // distinct distances, ascending
  std::vector<double> fitted;     // non-increasing accuracy at those distances
};

/// Non-increasing isotonic fit of accuracy against distance; d_s is the
/// largest distance whose fitted accuracy meets `target_accuracy`.
CalibrationResult calibrate_threshold(const std::vector<std::pair<double, double>>& distance_accuracy,
                                      double target_accuracy);

}  // namespace pbshm
