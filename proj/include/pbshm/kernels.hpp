#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "pbshm/execution.hpp"
#include "pbshm/fibre.hpp"
#include "pbshm/graph.hpp"
#include "pbshm/physics.hpp"

// Data-parallel hot loops. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp with identical
// results (every output element is computed by the same arithmetic,
// independently of scheduling).
namespace pbshm::kernels {

using Grid = std::map<CellIndex, std::vector<double>>;

struct KnnQueryResult {
  std::vector<int> labels;
  Eigen::MatrixXd scores;  // rows = queries, cols = label set order
};

/// Distance-weighted kNN over a training set whose labels are indices into
/// a label set of size `label_count`.
struct KnnProblem {
  const Eigen::MatrixXd* train = nullptr;
  const std::vector<int>* train_label_index = nullptr;
  std::size_t label_count = 0;
  std::size_t k = 3;
  bool distance_weighted = true;
};

/// One simulated acquisition: every sensor record of one free-decay run.
struct SynthesisJob {
  const BridgeModel* model = nullptr;
  const ModalResult* modal = nullptr;
  SynthesisConfig cfg;
};
using Records = std::vector<std::vector<double>>;

namespace serial {
Grid apply_cellwise(const Grid& grid, const OperatorDefinition& def, const nlohmann::json& params);
Eigen::MatrixXd distance_matrix(std::span<const AttributedGraph> graphs, const MetricConfig& cfg);
KnnQueryResult knn_predict(const KnnProblem& problem, const Eigen::MatrixXd& queries);
std::vector<Records> synthesize_batch(const std::vector<SynthesisJob>& jobs, std::size_t n_t, double fs);
}  // namespace serial

namespace omp {
Grid apply_cellwise(const Grid& grid, const OperatorDefinition& def, const nlohmann::json& params);
Eigen::MatrixXd distance_matrix(std::span<const AttributedGraph> graphs, const MetricConfig& cfg);
KnnQueryResult knn_predict(const KnnProblem& problem, const Eigen::MatrixXd& queries);
std::vector<Records> synthesize_batch(const std::vector<SynthesisJob>& jobs, std::size_t n_t, double fs);
}  // namespace omp

Grid apply_cellwise(const Grid& grid, const OperatorDefinition& def, const nlohmann::json& params, Execution exec);
Eigen::MatrixXd distance_matrix(std::span<const AttributedGraph> graphs, const MetricConfig& cfg, Execution exec);
KnnQueryResult knn_predict(const KnnProblem& problem, const Eigen::MatrixXd& queries, Execution exec);
std::vector<Records> synthesize_batch(const std::vector<SynthesisJob>& jobs, std::size_t n_t, double fs, Execution exec);

/// Per-query kNN vote shared by both variants.
void knn_score_one(const KnnProblem& problem, const Eigen::Ref<const Eigen::RowVectorXd>& query, int& label,
                   Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> scores);

}  // namespace pbshm::kernels
