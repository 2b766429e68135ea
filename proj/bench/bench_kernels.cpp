// Serial reference vs OpenMP for each data-parallel kernel.

#include <benchmark/benchmark.h>

#include <random>

#include "pbshm/families.hpp"
#include "pbshm/kernels.hpp"

using namespace pbshm;

namespace {

kernels::Grid random_grid(std::size_t channels, std::size_t acquisitions, std::size_t n_t) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  kernels::Grid grid;
  for (std::size_t j = 0; j < channels; ++j)
    for (std::size_t k = 0; k < acquisitions; ++k) {
      std::vector<double> r(n_t);
      for (double& x : r) x = g(rng);
      grid[{j, k}] = std::move(r);
    }
  return grid;
}

std::vector<AttributedGraph> bridge_graphs(std::size_t n) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.9, 1.1);
  std::vector<AttributedGraph> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = i % 2 ? three_span_family() : two_span_family();
    auto theta = f->midpoint();
    for (std::size_t c = 0; c < theta.size(); ++c) theta[c] *= u(rng);
    out.push_back(instantiate(*f, theta, "g" + std::to_string(i)));
  }
  return out;
}

template <bool Parallel>
void BM_apply_cellwise(benchmark::State& state) {
  const auto grid = random_grid(5, static_cast<std::size_t>(state.range(0)), 8192);
  const auto& def = OperatorRegistry::standard().find("welch");
  const nlohmann::json params = {{"n_w", 2048}, {"fs", 20.0}};
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::omp::apply_cellwise(grid, def, params)
                                      : kernels::serial::apply_cellwise(grid, def, params));
}

template <bool Parallel>
void BM_distance_matrix(benchmark::State& state) {
  const auto graphs = bridge_graphs(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::omp::distance_matrix(graphs, {})
                                      : kernels::serial::distance_matrix(graphs, {}));
}

template <bool Parallel>
void BM_knn_predict(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  const Eigen::MatrixXd train = Eigen::MatrixXd::NullaryExpr(120, 4, [&] { return g(rng); });
  std::vector<int> idx(120);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i % 4);
  const Eigen::MatrixXd queries = Eigen::MatrixXd::NullaryExpr(state.range(0), 4, [&] { return g(rng); });
  const kernels::KnnProblem p{&train, &idx, 4, 3, true};
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::omp::knn_predict(p, queries) : kernels::serial::knn_predict(p, queries));
}

template <bool Parallel>
void BM_synthesize_batch(benchmark::State& state) {
  const auto f = two_span_family();
  const auto model = assemble(StructureInstance{"b", f, f->midpoint()});
  const auto modal = natural_frequencies(model, 4);
  std::vector<kernels::SynthesisJob> jobs;
  for (std::int64_t s = 0; s < state.range(0); ++s) jobs.push_back({&model, &modal, {0.005, 0.02, static_cast<std::uint64_t>(s)}});
  const double fs = 4.0 * modal.frequencies.back();
  for (auto _ : state)
    benchmark::DoNotOptimize(Parallel ? kernels::omp::synthesize_batch(jobs, 8192, fs)
                                      : kernels::serial::synthesize_batch(jobs, 8192, fs));
}

}  // namespace

BENCHMARK(BM_apply_cellwise<false>)->Name("apply_cellwise/serial")->Arg(24)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_apply_cellwise<true>)->Name("apply_cellwise/omp")->Arg(24)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_distance_matrix<false>)->Name("distance_matrix/serial")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_distance_matrix<true>)->Name("distance_matrix/omp")->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_predict<false>)->Name("knn_predict/serial")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_knn_predict<true>)->Name("knn_predict/omp")->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_synthesize_batch<false>)->Name("synthesize_batch/serial")->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_synthesize_batch<true>)->Name("synthesize_batch/omp")->Arg(32)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
