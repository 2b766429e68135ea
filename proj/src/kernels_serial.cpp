#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pbshm/error.hpp"
#include "pbshm/kernels.hpp"

namespace pbshm::kernels {

void knn_score_one(const KnnProblem& problem, const Eigen::Ref<const Eigen::RowVectorXd>& query, int& label,
                   Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> scores) {
  const auto& train = *problem.train;
  const auto& idx = *problem.train_label_index;
  const auto n = static_cast<std::size_t>(train.rows());
  const auto k = std::min(problem.k, n);

  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i)
    dist[i] = {(train.row(static_cast<Eigen::Index>(i)) - query).squaredNorm(), i};
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

  scores.setZero();
  const bool exact_hit = dist.front().first == 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const auto [d2, i] = dist[r];
    double w = 1.0;
    if (exact_hit) {
      if (d2 != 0.0) continue;
    } else if (problem.distance_weighted) {
      w = 1.0 / std::sqrt(d2);
    }
    scores(idx[i]) += w;
  }
  scores /= scores.sum();
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < scores.size(); ++c)
    if (scores(c) > scores(best)) best = c;
  label = static_cast<int>(best);
}

namespace serial {

Grid apply_cellwise(const Grid& grid, const OperatorDefinition& def, const nlohmann::json& params) {
  Grid out;
  for (const auto& [cell, record] : grid) out.emplace(cell, def.apply(record, params));
  return out;
}

Eigen::MatrixXd distance_matrix(std::span<const AttributedGraph> graphs, const MetricConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(graphs.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = graph_distance(graphs[i], graphs[j], cfg);
  return d;
}

KnnQueryResult knn_predict(const KnnProblem& problem, const Eigen::MatrixXd& queries) {
  KnnQueryResult out;
  out.labels.resize(static_cast<std::size_t>(queries.rows()));
  out.scores.resize(queries.rows(), static_cast<Eigen::Index>(problem.label_count));
  for (Eigen::Index q = 0; q < queries.rows(); ++q)
    knn_score_one(problem, queries.row(q), out.labels[static_cast<std::size_t>(q)], out.scores.row(q));
  return out;
}

std::vector<Records> synthesize_batch(const std::vector<SynthesisJob>& jobs, std::size_t n_t, double fs) {
  std::vector<Records> out;
  out.reserve(jobs.size());
  for (const auto& job : jobs) out.push_back(synthesize_timeseries(*job.model, *job.modal, job.cfg, n_t, fs));
  return out;
}

}  // namespace serial

Grid apply_cellwise(const Grid& grid, const OperatorDefinition& def, const nlohmann::json& params, Execution exec) {
  return exec == Execution::serial ? serial::apply_cellwise(grid, def, params) : omp::apply_cellwise(grid, def, params);
}

Eigen::MatrixXd distance_matrix(std::span<const AttributedGraph> graphs, const MetricConfig& cfg, Execution exec) {
  return exec == Execution::serial ? serial::distance_matrix(graphs, cfg) : omp::distance_matrix(graphs, cfg);
}

KnnQueryResult knn_predict(const KnnProblem& problem, const Eigen::MatrixXd& queries, Execution exec) {
  return exec == Execution::serial ? serial::knn_predict(problem, queries) : omp::knn_predict(problem, queries);
}

}  // namespace pbshm::kernels

namespace pbshm::kernels {

std::vector<Records> synthesize_batch(const std::vector<SynthesisJob>& jobs, std::size_t n_t, double fs, Execution exec) {
  return exec == Execution::serial ? serial::synthesize_batch(jobs, n_t, fs) : omp::synthesize_batch(jobs, n_t, fs);
}

}  // namespace pbshm::kernels
