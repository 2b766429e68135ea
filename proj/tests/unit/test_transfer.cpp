#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "pbshm/error.hpp"
#include "pbshm/transfer.hpp"

using namespace pbshm;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;

namespace {

ErrorKind kind_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::io;
}

// Gaussian clusters: label c is centred at centres.row(c) with spread sigma.
FeatureSet clusters(const MatrixXd& centres, const RowVectorXd& sigma, std::size_t per_label, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FeatureSet fs;
  fs.X.resize(static_cast<Eigen::Index>(centres.rows() * per_label), centres.cols());
  Eigen::Index r = 0;
  for (Eigen::Index c = 0; c < centres.rows(); ++c)
    for (std::size_t i = 0; i < per_label; ++i, ++r) {
      for (Eigen::Index d = 0; d < centres.cols(); ++d) fs.X(r, d) = centres(c, d) + sigma(d) * g(rng);
      fs.labels.push_back(static_cast<int>(c));
      if (c == 0) fs.nc_rows.push_back(static_cast<std::size_t>(r));
    }
  return fs;
}

// Neighbouring centres differ by `separation` in every dimension.
MatrixXd three_centres(double separation) {
  MatrixXd c(3, 2);
  c << 0, 0, separation, separation, 2 * separation, 0;
  return c;
}

// Cheap analytic oracle: NC statistics move smoothly along the path.
NcOracle smooth_oracle() {
  return [](const StructureInstance& inst, std::size_t) {
    NcStats s;
    const double e = inst.param("D1", Param::E) / 3e10;
    s.mean = RowVectorXd(2);
    s.mean << std::sqrt(e), 2.0 * e;
    s.std = RowVectorXd(2);
    s.std << 0.1 * e, 0.05 + 0.01 * e;
    s.cov = MatrixXd(s.std.array().square().matrix().asDiagonal());
    return s;
  };
}

GeodesicPath e_path(double e_target, double e_source) {
  return geodesic(fixture::with(fixture::b2("t"), "D1", Param::E, e_target),
                  fixture::with(fixture::b2("s"), "D1", Param::E, e_source));
}

double max_abs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

AffineStep random_step(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> u(0.5, 2.0), v(-1.0, 1.0);
  AffineStep s = AffineStep::identity(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    s.scale(static_cast<Eigen::Index>(d)) = u(rng);
    s.shift(static_cast<Eigen::Index>(d)) = v(rng);
  }
  return s;
}

}  // namespace

TEST_CASE("normal-condition alignment") {
  RowVectorXd sigma(2);
  sigma << 0.3, 2.0;
  MatrixXd centre(1, 2);
  centre << 5, -3;
  const auto fs = clusters(centre, sigma, 200, 1);
  const auto r = nca(fs.X, fs.nc_rows);
  CHECK(max_abs(r.aligned.colwise().mean()) < 1e-12);
  const RowVectorXd sd = (r.aligned.rowwise() - r.aligned.colwise().mean()).array().square().colwise().mean().sqrt();
  CHECK(max_abs(sd.array() - 1.0) < 1e-12);

  // Idempotent once aligned.
  const auto again = nca(r.aligned, fs.nc_rows);
  CHECK(max_abs(again.aligned - r.aligned) < 1e-12);

  // Fresh draws from the same distribution land near zero mean; both the
  // fitted and the fresh sample means contribute to the spread.
  const auto fresh = clusters(centre, sigma, 400, 2);
  const MatrixXd mapped = r.step.apply(fresh.X);
  for (Eigen::Index d = 0; d < 2; ++d) CHECK(std::abs(mapped.col(d).mean()) < 3.0 * std::sqrt(1.0 / 200 + 1.0 / 400));

  MatrixXd flat = MatrixXd::Constant(4, 2, 7.0);
  flat(0, 1) = 1.0;
  const auto c = nca(flat, {1, 2, 3});
  CHECK(c.step.scale(0) == 1.0);
  CHECK(c.aligned(1, 0) == 0.0);
  CHECK(c.aligned.allFinite());
  CHECK(kind_of([&] { nca(flat, {}); }) == ErrorKind::alignment);
}

TEST_CASE("affine algebra") {
  std::mt19937_64 rng(4);
  const auto a = random_step(rng, 3), b = random_step(rng, 3), c = random_step(rng, 3);
  const MatrixXd x = MatrixXd::Random(10, 3);
  const TransferMap A({a}), B({b}), C({c});
  const auto left = TransferMap::compose(TransferMap::compose(A, B), C);
  const auto right = TransferMap::compose(A, TransferMap::compose(B, C));
  CHECK(max_abs(left.apply(x) - right.apply(x)) < 1e-12);
  CHECK(max_abs(TransferMap().apply(x) - x) < 1e-15);
  CHECK(max_abs(TransferMap({AffineStep::identity(3)}).apply(x) - x) < 1e-15);
  CHECK(max_abs(left.inverse().apply(left.apply(x)) - x) < 1e-12);
  const auto flat = left.flatten(3);
  CHECK(max_abs(flat.apply(x) - left.apply(x)) < 1e-12);

  AffineStep bad = AffineStep::identity(2);
  bad.scale(1) = 0.0;
  CHECK(kind_of([&] { bad.inverse(); }) == ErrorKind::alignment);
  CHECK(kind_of([&] { A.apply(MatrixXd::Zero(2, 2)); }) == ErrorKind::compatibility);
  CHECK(TransferMap::compose(TransferMap({a}, {"t", "m"}), TransferMap({b}, {"m", "s"})).path() ==
        std::vector<std::string>{"t", "m", "s"});
}

TEST_CASE("ddt map") {
  RowVectorXd sigma(2);
  sigma << 0.1, 0.06;
  MatrixXd ct(3, 2), cs(3, 2);
  ct << 1.0, 2.0, 0.6, 2.0, 1.0, 1.6;
  cs << 1.2, 2.9, 0.8, 2.9, 1.2, 2.5;
  const auto target = clusters(ct, sigma * 0.8, 20, 5);
  const auto source = clusters(cs, sigma, 20, 6);
  const auto path = e_path(3e10, 4.5e10);

  SUBCASE("zero-length path is the identity") {
    const auto m = ddt_map(target, target, geodesic(fixture::b2(), fixture::b2()), {4}, smooth_oracle());
    CHECK(m.steps().size() == 1);
    CHECK(max_abs(m.apply(target.X) - target.X) < 1e-12);
  }

  SUBCASE("one step matches the first two moments") {
    const auto m = ddt_map(source, target, path, {1}, smooth_oracle());
    const NcStats want = NcStats::of(source.X, source.nc_rows);
    const NcStats got = NcStats::of(m.apply(target.X), target.nc_rows);
    CHECK(max_abs(got.mean - want.mean) < 1e-9);
    CHECK(max_abs(got.std - want.std) < 1e-9);
  }

  SUBCASE("full alignment matches mean and covariance") {
    const auto m = ddt_map(source, target, path, {1, Alignment::full}, smooth_oracle());
    const NcStats want = NcStats::of(source.X, source.nc_rows);
    const NcStats got = NcStats::of(m.apply(target.X), target.nc_rows);
    CHECK(max_abs(got.mean - want.mean) < 1e-9);
    CHECK(max_abs(got.cov - want.cov) < 1e-9);
  }

  SUBCASE("diagonal re-anchoring telescopes over the path") {
    // Each step maps one frame's NC moments onto the next, so the chain
    // collapses to the end-to-end map whatever the intermediate frames are.
    const auto one = ddt_map(source, target, path, {1}, smooth_oracle());
    const auto eight = ddt_map(source, target, path, {8}, smooth_oracle());
    CHECK(eight.steps().size() == 8);
    CHECK(eight.path().size() == 9);
    CHECK(max_abs(one.apply(target.X) - eight.apply(target.X)) < 1e-12);
  }

  SUBCASE("errors") {
    FeatureSet narrow = target;
    narrow.X = target.X.leftCols(1);
    CHECK(kind_of([&] { ddt_map(source, narrow, path, {4}, smooth_oracle()); }) == ErrorKind::compatibility);
    CHECK(kind_of([&] { ddt_map(source, target, path, {0}, smooth_oracle()); }) == ErrorKind::invalid_input);
    const NcOracle broken = [](const StructureInstance&, std::size_t) -> NcStats { throw std::runtime_error("boom"); };
    try {
      ddt_map(source, target, path, {2}, broken);
      FAIL("expected a path error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::path);
      CHECK(std::string(e.what()).find("s = 0.5") != std::string::npos);
    }
  }
}

TEST_CASE("localiser") {
  RowVectorXd sigma(2);
  sigma << 1.0, 1.0;

  SUBCASE("single label") {
    const auto fs = clusters(MatrixXd::Zero(1, 2), sigma, 10, 7);
    const auto task = train_localiser(fs.X, fs.labels);
    CHECK(task.predict(MatrixXd::Random(5, 2) * 50) == std::vector<int>(5, 0));
  }

  SUBCASE("k = 1 returns a training point's own label") {
    const auto fs = clusters(three_centres(1.0), sigma, 10, 8);
    const auto task = train_localiser(fs.X, fs.labels, {1});
    CHECK(task.predict(fs.X) == fs.labels);
  }

  SUBCASE("well-separated clusters are localised") {
    const auto fs = clusters(three_centres(4.0), sigma, 40, 9);
    CHECK(cross_validate(fs.X, fs.labels, {}, 5) >= 0.95);
  }

  SUBCASE("predictions ignore a common rescaling") {
    const auto fs = clusters(three_centres(2.0), sigma, 20, 10);
    const auto probe = clusters(three_centres(2.0), sigma, 10, 11);
    const auto a = train_localiser(fs.X, fs.labels).predict(probe.X);
    const auto b = train_localiser(fs.X * 37.0, fs.labels).predict(probe.X * 37.0);
    CHECK(a == b);
  }

  SUBCASE("training errors") {
    const auto fs = clusters(three_centres(2.0), sigma, 2, 12);
    CHECK(kind_of([&] { train_localiser(fs.X, fs.labels, {3}); }) == ErrorKind::training);
    CHECK(kind_of([&] { train_localiser(fs.X, fs.labels, {0}); }) == ErrorKind::training);
    CHECK(kind_of([&] { train_localiser(MatrixXd(0, 2), {}); }) == ErrorKind::training);
  }
}

TEST_CASE("transfer evaluation") {
  RowVectorXd sigma(2);
  sigma << 1.0, 1.0;
  const auto train = clusters(three_centres(3.0), sigma, 30, 13);
  const auto held = clusters(three_centres(3.0), sigma, 30, 14);
  const auto task = train_localiser(train.X, train.labels);

  const auto r = evaluate_transfer(task, TransferMap(), held.X, held.labels);
  CHECK(r.mapped_accuracy == accuracy(task.predict(held.X), held.labels));
  CHECK(r.raw_accuracy == r.mapped_accuracy);
  CHECK(r.confusion.sum() == held.X.rows());
  CHECK(r.confusion.trace() == static_cast<int>(std::lround(r.mapped_accuracy * held.X.rows())));

  // Labels unrelated to the features score at chance.
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> pick(0, 2);
  const auto noise = clusters(MatrixXd::Zero(1, 2), sigma * 3.0, 600, 16);
  std::vector<int> random_labels(600);
  for (auto& l : random_labels) l = pick(rng);
  const double acc = evaluate_transfer(task, TransferMap(), noise.X, random_labels).mapped_accuracy;
  CHECK(std::abs(acc - 1.0 / 3.0) < 3.0 * std::sqrt((1.0 / 3) * (2.0 / 3) / 600));
}

TEST_CASE("domain adaptation baseline") {
  RowVectorXd sigma(2);
  sigma << 0.5, 0.5;
  const auto source = clusters(three_centres(3.0), sigma, 100, 17);

  const auto same = domain_adaptation_baseline(source, source);
  const auto aligned = nca(source.X, source.nc_rows).aligned;
  const Localiser in_frame(aligned, source.labels, {});
  CHECK(same.predict_target(source.X) == in_frame.predict(aligned));

  // A pure mean shift is undone by aligning each domain separately.
  auto shifted = clusters(three_centres(3.0), sigma, 100, 18);
  const double in_domain = accuracy(train_localiser(source.X, source.labels).predict(shifted.X), shifted.labels);
  shifted.X.rowwise() += RowVectorXd::Constant(2, 25.0);
  const auto da = domain_adaptation_baseline(source, shifted);
  CHECK(std::abs(accuracy(da.predict_target(shifted.X), shifted.labels) - in_domain) <= 0.02);
}

TEST_CASE("calibration") {
  std::vector<std::pair<double, double>> pairs;
  for (int i = 0; i < 40; ++i) pairs.emplace_back(0.02 * i, 0.97);

  SUBCASE("all successful") {
    const auto r = calibrate_threshold(pairs, 0.9);
    CHECK(r.d_s == 0.02 * 39);
    CHECK_FALSE(r.warning);
  }
  SUBCASE("all failing") {
    for (auto& p : pairs) p.second = 0.4;
    const auto r = calibrate_threshold(pairs, 0.9);
    CHECK(r.d_s == 0.0);
    CHECK(r.warning);
  }
  SUBCASE("planted breakpoint") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> jitter(-0.03, 0.03);
    for (auto& [d, a] : pairs) a = (d < 0.3 ? 0.96 : 0.6) + jitter(rng);
    const auto r = calibrate_threshold(pairs, 0.9);
    CHECK(std::abs(r.d_s - 0.3) <= 0.02 + 1e-12);
    for (std::size_t i = 1; i < r.fitted.size(); ++i) CHECK(r.fitted[i] <= r.fitted[i - 1]);
    // Asking for more accuracy never widens the threshold.
    double previous = INFINITY;
    for (double target : {0.5, 0.7, 0.9, 0.95, 0.99}) {
      const double d = calibrate_threshold(pairs, target).d_s;
      CHECK(d <= previous);
      previous = d;
    }
  }
  SUBCASE("too few pairs") {
    pairs.resize(19);
    CHECK(kind_of([&] { calibrate_threshold(pairs, 0.9); }) == ErrorKind::calibration);
  }
}

TEST_CASE("two-step transfer through the interpolating structure") {
  SimulationSettings sim;
  sim.conditions = {{"healthy", std::nullopt}, {"D1", DamageState{"D1", 0.25}}, {"D2", DamageState{"D2", 0.25}}};
  sim.n_r = 8;
  sim.synthesis = {0.005, 0.02, 3};
  sim.populate.n_t = 4096;
  sim.populate.fs = 20.0;
  sim.populate.n_w = 1024;

  const auto t = fixture::b2("T");
  const auto s = fixture::with(fixture::with(fixture::b2("S"), "D1", Param::E, 3.6e10), "D2", Param::E, 3.3e10);
  Population pop;
  for (const auto* inst : {&t, &s}) {
    auto pf = populate_fibre(*inst, sim.conditions, sim.n_r, {0.005, 0.02, inst->id == "T" ? 41u : 42u}, sim.populate);
    pop.add(*inst);
    pop.attach_fibre(inst->id, std::make_shared<const Fibre>(std::move(pf.fibre)), pf.labels);
  }

  TwoStepOptions opts;
  opts.simulation = sim;
  opts.ddt.steps = 2;
  const auto r = two_step_transfer("S", "T", pop, opts);
  CHECK(pop.contains("S*"));
  CHECK(pop.at("S*").provenance() == Provenance::simulated);
  CHECK(r.leg_target == doctest::Approx(r.report.path_length / 2).epsilon(1e-12));
  CHECK(r.leg_source == doctest::Approx(r.report.path_length / 2).epsilon(1e-12));
  REQUIRE(r.report.leg_distances.size() == 2);
  CHECK(r.report.leg_distances[0] == doctest::Approx(r.report.distance / 2).epsilon(1e-12));
  CHECK(r.report.leg_distances[1] == doctest::Approx(r.report.distance / 2).epsilon(1e-12));
  CHECK(r.map.path().size() == 5);
  CHECK(r.map.path().front() == "T");
  CHECK(r.map.path()[2] == "S*");
  CHECK(r.map.path().back() == "S");

  // With collinear legs the composed map equals one map with twice the steps.
  const auto fs_t = feature_set(*pop.at("T").fibre, pop.at("T").fibre->stratum_count() - 1, pop.at("T").labels);
  const auto fs_s = feature_set(*pop.at("S").fibre, pop.at("S").fibre->stratum_count() - 1, pop.at("S").labels);
  const auto direct = ddt_map(fs_s, fs_t, geodesic(t, s), {4}, simulation_oracle(sim));
  const auto a = r.map.flatten(4), b = direct.flatten(4);
  CHECK(max_abs(a.scale - b.scale) < 1e-12 * max_abs(b.scale));
  CHECK(max_abs(a.shift - b.shift) < 1e-12 * max_abs(b.shift) + 1e-12);
}
