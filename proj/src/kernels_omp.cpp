#include <omp.h>

#include <exception>

#include "pbshm/kernels.hpp"

namespace pbshm::kernels::omp {

namespace {

// Exceptions must not cross an OpenMP region boundary; keep the first one.
class FirstError {
 public:
  template <typename F>
  void guard(F&& f) {
    try {
      f();
    } catch (...) {
#pragma omp critical(pbshm_first_error)
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
};

}  // namespace

Grid apply_cellwise(const Grid& grid, const OperatorDefinition& def, const nlohmann::json& params) {
  std::vector<const Grid::value_type*> cells;
  cells.reserve(grid.size());
  for (const auto& entry : grid) cells.push_back(&entry);
  std::vector<std::vector<double>> results(cells.size());
  FirstError err;
  const auto n = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    err.guard([&] { results[static_cast<std::size_t>(i)] = def.apply(cells[static_cast<std::size_t>(i)]->second, params); });
  err.rethrow();
  Grid out;
  for (std::size_t i = 0; i < cells.size(); ++i) out.emplace_hint(out.end(), cells[i]->first, std::move(results[i]));
  return out;
}

Eigen::MatrixXd distance_matrix(std::span<const AttributedGraph> graphs, const MetricConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(graphs.size());
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  FirstError err;
  const auto np = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t p = 0; p < np; ++p)
    err.guard([&] {
      const auto [i, j] = pairs[static_cast<std::size_t>(p)];
      d(i, j) = d(j, i) = graph_distance(graphs[i], graphs[j], cfg);
    });
  err.rethrow();
  return d;
}

KnnQueryResult knn_predict(const KnnProblem& problem, const Eigen::MatrixXd& queries) {
  KnnQueryResult out;
  out.labels.resize(static_cast<std::size_t>(queries.rows()));
  out.scores.resize(queries.rows(), static_cast<Eigen::Index>(problem.label_count));
  const auto nq = static_cast<std::ptrdiff_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t q = 0; q < nq; ++q)
    knn_score_one(problem, queries.row(q), out.labels[static_cast<std::size_t>(q)], out.scores.row(q));
  return out;
}

std::vector<Records> synthesize_batch(const std::vector<SynthesisJob>& jobs, std::size_t n_t, double fs) {
  std::vector<Records> out(jobs.size());
  FirstError err;
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    err.guard([&] {
      const auto& job = jobs[static_cast<std::size_t>(i)];
      out[static_cast<std::size_t>(i)] = synthesize_timeseries(*job.model, *job.modal, job.cfg, n_t, fs);
    });
  err.rethrow();
  return out;
}

}  // namespace pbshm::kernels::omp
