#include "pbshm/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "pbshm/error.hpp"
#include "pbshm/kernels.hpp"

namespace pbshm {

namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

RowVectorXd safe_std(const RowVectorXd& s) { return s.unaryExpr([](double v) { return v > 0.0 ? v : 1.0; }); }

MatrixXd select_rows(const MatrixXd& X, const std::vector<std::size_t>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(X.rows())) fail(ErrorKind::alignment, "row index outside the sample matrix");
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

// Symmetric PSD square root and inverse square root via eigen-decomposition.
std::pair<MatrixXd, MatrixXd> sqrt_pair(const MatrixXd& S) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  const double floor = std::max(ev.maxCoeff(), 1.0) * 1e-14;
  const Eigen::VectorXd r = ev.cwiseMax(floor).cwiseSqrt();
  return {es.eigenvectors() * r.asDiagonal() * es.eigenvectors().transpose(),
          es.eigenvectors() * r.cwiseInverse().asDiagonal() * es.eigenvectors().transpose()};
}

AffineStep moment_step(const NcStats& from, const NcStats& to, Alignment alignment) {
  AffineStep step;
  if (alignment == Alignment::diagonal) {
    step.scale = safe_std(to.std).cwiseQuotient(safe_std(from.std));
    step.shift = to.mean - step.scale.cwiseProduct(from.mean);
    return step;
  }
  // Gaussian optimal transport: A = S1^-1/2 (S1^1/2 S2 S1^1/2)^1/2 S1^-1/2.
  const auto [s1h, s1ih] = sqrt_pair(from.cov);
  const MatrixXd mid = sqrt_pair(s1h * to.cov * s1h).first;
  MatrixXd a = s1ih * mid * s1ih;
  a = 0.5 * (a + a.transpose()).eval();
  step.scale = a.diagonal().transpose();
  step.shift = to.mean - (a * from.mean.transpose()).transpose();
  step.linear = a;
  return step;
}

}  // namespace

Domain Domain::from(Eigen::MatrixXd X) {
  if (X.rows() == 0) fail(ErrorKind::invalid_input, "a domain needs at least one sample");
  if (!X.allFinite()) fail(ErrorKind::invalid_input, "domain samples must be finite");
  Domain d;
  d.mean = X.colwise().mean();
  d.std = ((X.rowwise() - d.mean).array().square().colwise().mean()).sqrt();
  d.X = std::move(X);
  return d;
}

AffineStep AffineStep::identity(std::size_t dim) {
  return {RowVectorXd::Ones(static_cast<Eigen::Index>(dim)), RowVectorXd::Zero(static_cast<Eigen::Index>(dim)), std::nullopt};
}

MatrixXd AffineStep::apply(const MatrixXd& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != dim())
    fail(ErrorKind::compatibility, "feature dimension " + std::to_string(rows.cols()) + " does not match map dimension " +
                                       std::to_string(dim()));
  if (linear) return (rows * linear->transpose()).rowwise() + shift;
  return (rows.array().rowwise() * scale.array()).matrix().rowwise() + shift;
}

AffineStep AffineStep::inverse() const {
  AffineStep inv;
  if (linear) {
    const MatrixXd ai = linear->inverse();
    inv.linear = ai;
    inv.scale = ai.diagonal().transpose();
    inv.shift = -(ai * shift.transpose()).transpose();
    return inv;
  }
  if ((scale.array() <= 0.0).any()) fail(ErrorKind::alignment, "affine step with non-positive scale is not invertible");
  inv.scale = scale.cwiseInverse();
  inv.shift = -shift.cwiseQuotient(scale);
  return inv;
}

MatrixXd AffineStep::matrix() const { return linear ? *linear : MatrixXd(scale.asDiagonal()); }

TransferMap::TransferMap(std::vector<AffineStep> steps, std::vector<std::string> path)
    : steps_(std::move(steps)), path_(std::move(path)) {
  for (std::size_t i = 1; i < steps_.size(); ++i)
    if (steps_[i].dim() != steps_[0].dim()) fail(ErrorKind::compatibility, "transfer steps disagree on dimension");
}

MatrixXd TransferMap::apply(const MatrixXd& rows) const {
  MatrixXd out = rows;
  for (const auto& s : steps_) out = s.apply(out);
  return out;
}

TransferMap TransferMap::inverse() const {
  std::vector<AffineStep> inv;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) inv.push_back(it->inverse());
  return TransferMap(std::move(inv), std::vector<std::string>(path_.rbegin(), path_.rend()));
}

AffineStep TransferMap::flatten(std::size_t dim) const {
  AffineStep total = AffineStep::identity(dim);
  bool diagonal = true;
  MatrixXd a = MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (const auto& s : steps_) {
    if (s.dim() != dim) fail(ErrorKind::compatibility, "flatten dimension mismatch");
    diagonal = diagonal && !s.linear;
    const MatrixXd m = s.matrix();
    a = m * a;
    total.shift = (m * total.shift.transpose()).transpose() + s.shift;
    if (!s.linear) total.scale = total.scale.cwiseProduct(s.scale);
  }
  if (!diagonal) {
    total.linear = a;
    total.scale = a.diagonal().transpose();
  }
  return total;
}

TransferMap TransferMap::compose(const TransferMap& first, const TransferMap& second) {
  std::vector<AffineStep> steps = first.steps_;
  steps.insert(steps.end(), second.steps_.begin(), second.steps_.end());
  std::vector<std::string> path = first.path_;
  auto it = second.path_.begin();
  if (!path.empty() && it != second.path_.end() && *it == path.back()) ++it;
  path.insert(path.end(), it, second.path_.end());
  return TransferMap(std::move(steps), std::move(path));
}

NcStats NcStats::of(const MatrixXd& X, const std::vector<std::size_t>& rows) {
  if (rows.empty()) fail(ErrorKind::alignment, "normal-condition set is empty");
  const MatrixXd nc = select_rows(X, rows);
  NcStats s;
  s.mean = nc.colwise().mean();
  const MatrixXd c = nc.rowwise() - s.mean;
  s.cov = (c.transpose() * c) / static_cast<double>(nc.rows());
  s.std = c.array().square().colwise().mean().sqrt();
  return s;
}

NcaResult nca(const MatrixXd& X, const std::vector<std::size_t>& nc_rows) {
  const NcStats s = NcStats::of(X, nc_rows);
  AffineStep step;
  step.scale = safe_std(s.std).cwiseInverse();
  step.shift = -s.mean.cwiseProduct(step.scale);
  return {step.apply(X), step};
}

FeatureSet feature_set(const Fibre& fibre, std::size_t stratum, const std::vector<int>& labels, int healthy_label) {
  FeatureSet fs;
  fs.X = acquisition_features(fibre, stratum);
  if (static_cast<std::size_t>(fs.X.rows()) != labels.size())
    fail(ErrorKind::invalid_input, "fibre '" + fibre.structure_id() + "' has " + std::to_string(fs.X.rows()) +
                                       " acquisitions but " + std::to_string(labels.size()) + " labels");
  fs.labels = labels;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == healthy_label) fs.nc_rows.push_back(i);
  return fs;
}

NcOracle simulation_oracle(const SimulationSettings& settings) {
  return [settings](const StructureInstance& inst, std::size_t step) {
    SynthesisConfig cfg = settings.synthesis;
    cfg.seed = settings.synthesis.seed + step;
    const PopulatedFibre pf = populate_fibre(inst, {Condition{"healthy", std::nullopt}}, settings.n_r, cfg, settings.populate);
    const MatrixXd X = acquisition_features(pf.fibre, pf.feature_stratum);
    std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return NcStats::of(X, rows);
  };
}

TransferMap ddt_map(const FeatureSet& source, const FeatureSet& target, const GeodesicPath& path, const DdtOptions& opts,
                    const NcOracle& oracle) {
  if (source.X.cols() != target.X.cols())
    fail(ErrorKind::compatibility, "source and target features differ in dimension (" + std::to_string(source.X.cols()) +
                                       " vs " + std::to_string(target.X.cols()) + ")");
  if (opts.steps == 0) fail(ErrorKind::invalid_input, "a transfer path needs at least one step");
  const NcStats first = NcStats::of(target.X, target.nc_rows);
  const NcStats last = NcStats::of(source.X, source.nc_rows);

  const bool degenerate = path.start() == path.end();
  const std::size_t k = degenerate ? 1 : opts.steps;
  std::vector<NcStats> frames{first};
  std::vector<std::string> ids{path.point_at(0.0).id};
  for (std::size_t i = 1; i < k; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(k);
    const StructureInstance inst = path.point_at(s);
    try {
      NcStats st = oracle(inst, i);
      if (st.mean.size() != first.mean.size())
        fail(ErrorKind::compatibility, "oracle features have dimension " + std::to_string(st.mean.size()));
      frames.push_back(std::move(st));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "intermediate structure at s = " << s << " failed: " << e.what();
      fail(ErrorKind::path, msg.str());
    }
    ids.push_back(inst.id);
  }
  frames.push_back(last);
  ids.push_back(path.point_at(1.0).id);

  std::vector<AffineStep> steps;
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) steps.push_back(moment_step(frames[i], frames[i + 1], opts.alignment));
  return TransferMap(std::move(steps), std::move(ids));
}

Localiser::Localiser(MatrixXd X, std::vector<int> y, LocaliserConfig cfg) : cfg_(cfg) {
  if (X.rows() == 0) fail(ErrorKind::training, "no training samples");
  if (static_cast<std::size_t>(X.rows()) != y.size()) fail(ErrorKind::training, "feature rows and labels differ in count");
  if (!X.allFinite()) fail(ErrorKind::training, "training features must be finite");
  if (cfg_.k == 0) fail(ErrorKind::training, "k must be at least 1");
  const std::set<int> distinct(y.begin(), y.end());
  label_set_.assign(distinct.begin(), distinct.end());
  for (const int l : label_set_) {
    const auto n = static_cast<std::size_t>(std::count(y.begin(), y.end(), l));
    if (n < cfg_.k)
      fail(ErrorKind::training, "label " + std::to_string(l) + " has " + std::to_string(n) + " samples, fewer than k = " +
                                    std::to_string(cfg_.k));
  }
  for (const int l : y)
    label_index_.push_back(static_cast<int>(std::lower_bound(label_set_.begin(), label_set_.end(), l) - label_set_.begin()));
  if (cfg_.standardise) {
    centre_ = X.colwise().mean();
    spread_ = safe_std(((X.rowwise() - centre_).array().square().colwise().mean()).sqrt().matrix());
  } else {
    centre_ = RowVectorXd::Zero(X.cols());
    spread_ = RowVectorXd::Ones(X.cols());
  }
  X_ = prepare(X);
}

MatrixXd Localiser::prepare(const MatrixXd& X) const {
  if (X.cols() != centre_.size())
    fail(ErrorKind::compatibility, "query dimension " + std::to_string(X.cols()) + " != training dimension " +
                                       std::to_string(centre_.size()));
  return ((X.rowwise() - centre_).array().rowwise() / spread_.array()).matrix();
}

MatrixXd Localiser::scores(const MatrixXd& X) const {
  const kernels::KnnProblem problem{&X_, &label_index_, label_set_.size(), cfg_.k, cfg_.distance_weighted};
  return kernels::knn_predict(problem, prepare(X), cfg_.exec).scores;
}

std::vector<int> Localiser::predict(const MatrixXd& X) const {
  const kernels::KnnProblem problem{&X_, &label_index_, label_set_.size(), cfg_.k, cfg_.distance_weighted};
  const auto r = kernels::knn_predict(problem, prepare(X), cfg_.exec);
  std::vector<int> out;
  out.reserve(r.labels.size());
  for (const int i : r.labels) out.push_back(label_set_[static_cast<std::size_t>(i)]);
  return out;
}

Localiser train_localiser(const MatrixXd& X, const std::vector<int>& y, const LocaliserConfig& cfg) {
  return Localiser(X, y, cfg);
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) fail(ErrorKind::invalid_input, "accuracy needs matching, non-empty label lists");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double cross_validate(const MatrixXd& X, const std::vector<int>& y, const LocaliserConfig& cfg, std::size_t folds) {
  if (folds < 2) fail(ErrorKind::invalid_input, "cross-validation needs at least two folds");
  if (static_cast<std::size_t>(X.rows()) != y.size()) fail(ErrorKind::training, "feature rows and labels differ in count");
  std::vector<std::size_t> fold(y.size());
  std::map<int, std::size_t> seen;
  for (std::size_t i = 0; i < y.size(); ++i) fold[i] = seen[y[i]]++ % folds;

  std::size_t hit = 0, total = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, test;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? test : train).push_back(i);
    if (test.empty()) continue;
    std::vector<int> ytr, yte;
    for (const auto i : train) ytr.push_back(y[i]);
    for (const auto i : test) yte.push_back(y[i]);
    const Localiser task(select_rows(X, train), ytr, cfg);
    const auto pred = task.predict(select_rows(X, test));
    for (std::size_t i = 0; i < yte.size(); ++i) hit += pred[i] == yte[i];
    total += yte.size();
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

TransferReport evaluate_transfer(const Localiser& task, const TransferMap& map, const MatrixXd& target_X,
                                 const std::vector<int>& target_y) {
  TransferReport r;
  r.label_set = task.label_set();
  r.raw_accuracy = accuracy(task.predict(target_X), target_y);
  const auto mapped = task.predict(map.apply(target_X));
  r.mapped_accuracy = accuracy(mapped, target_y);
  const auto n = static_cast<Eigen::Index>(r.label_set.size());
  r.confusion = Eigen::MatrixXi::Zero(n, n);
  auto pos = [&](int l) -> std::optional<Eigen::Index> {
    const auto it = std::lower_bound(r.label_set.begin(), r.label_set.end(), l);
    if (it == r.label_set.end() || *it != l) return std::nullopt;
    return static_cast<Eigen::Index>(it - r.label_set.begin());
  };
  for (std::size_t i = 0; i < target_y.size(); ++i) {
    const auto t = pos(target_y[i]), p = pos(mapped[i]);
    if (t && p) ++r.confusion(*t, *p);
  }
  return r;
}

std::vector<int> DomainAdaptation::predict_target(const MatrixXd& target_X) const {
  return task.predict(target_step.apply(target_X));
}

DomainAdaptation domain_adaptation_baseline(const FeatureSet& source, const FeatureSet& target, const LocaliserConfig& cfg) {
  if (source.X.cols() != target.X.cols()) fail(ErrorKind::compatibility, "source and target features differ in dimension");
  auto s = nca(source.X, source.nc_rows);
  auto t = nca(target.X, target.nc_rows);
  return DomainAdaptation{s.step, t.step, Localiser(s.aligned, source.labels, cfg)};
}

namespace {

const StructureInstance& member_instance(const Population& pop, const std::string& id) {
  const auto& m = pop.at(id);
  if (!m.instance) fail(ErrorKind::no_path, "structure '" + id + "' is not a family member");
  return *m.instance;
}

FeatureSet member_features(const Population& pop, const std::string& id) {
  const auto& m = pop.at(id);
  if (!m.has_data()) fail(ErrorKind::invalid_input, "structure '" + id + "' has no data");
  return feature_set(*m.fibre, m.fibre->stratum_count() - 1, m.labels);
}

}  // namespace

TwoStepResult two_step_transfer(const std::string& source_id, const std::string& target_id, Population& population,
                                const TwoStepOptions& opts) {
  const StructureInstance source = member_instance(population, source_id);
  const StructureInstance target = member_instance(population, target_id);
  const FeatureSet fs_source = member_features(population, source_id);
  const FeatureSet fs_target = member_features(population, target_id);

  const GeodesicPath whole = geodesic(target, source);
  StructureInstance star = whole.point_at(0.5, opts.interpolator_id);

  PopulatedFibre simulated = populate_fibre(star, opts.simulation.conditions, opts.simulation.n_r,
                                            opts.simulation.synthesis, opts.simulation.populate);
  const FeatureSet fs_star = feature_set(simulated.fibre, simulated.feature_stratum, simulated.labels);
  population.add(star, Provenance::simulated);
  population.attach_fibre(star.id, std::make_shared<const Fibre>(std::move(simulated.fibre)), simulated.labels);

  const NcOracle oracle = simulation_oracle(opts.simulation);
  const GeodesicPath leg1 = geodesic(target, star);
  const GeodesicPath leg2 = geodesic(star, source);
  const TransferMap map = TransferMap::compose(ddt_map(fs_star, fs_target, leg1, opts.ddt, oracle),
                                               ddt_map(fs_source, fs_star, leg2, opts.ddt, oracle));

  const Localiser task(fs_source.X, fs_source.labels, opts.localiser);
  TwoStepResult out{evaluate_transfer(task, map, fs_target.X, fs_target.labels), star, map,
                    family_distance(leg1.family(), leg1.start(), leg1.end()),
                    family_distance(leg2.family(), leg2.start(), leg2.end())};
  const auto g_source = source.graph(), g_target = target.graph(), g_star = star.graph();
  out.report.source_id = source_id;
  out.report.target_id = target_id;
  out.report.distance = graph_distance(g_source, g_target, opts.metric);
  out.report.path_length = whole.length();
  out.report.leg_distances = {graph_distance(g_target, g_star, opts.metric), graph_distance(g_star, g_source, opts.metric)};
  return out;
}

CalibrationResult calibrate_threshold(const std::vector<std::pair<double, double>>& distance_accuracy,
                                      double target_accuracy) {
  if (distance_accuracy.size() < 20)
    fail(ErrorKind::calibration, "calibration needs at least 20 (distance, accuracy) pairs, got " +
                                     std::to_string(distance_accuracy.size()));
  auto pairs = distance_accuracy;
  for (const auto& [d, a] : pairs)
    if (!std::isfinite(d) || !std::isfinite(a) || d < 0.0) fail(ErrorKind::calibration, "calibration pairs must be finite with D >= 0");
  std::sort(pairs.begin(), pairs.end());

  // Pool equal distances, then pool adjacent violators of a non-increasing fit.
  struct Block {
    double value, weight;
    std::size_t first, last;  // range over distinct distances
  };
  std::vector<double> xs;
  std::vector<Block> blocks;
  for (const auto& [d, a] : pairs) {
    if (!xs.empty() && xs.back() == d) {
      auto& b = blocks.back();
      b.value = (b.value * b.weight + a) / (b.weight + 1.0);
      b.weight += 1.0;
    } else {
      xs.push_back(d);
      blocks.push_back({a, 1.0, xs.size() - 1, xs.size() - 1});
    }
    while (blocks.size() > 1 && blocks[blocks.size() - 2].value < blocks.back().value) {
      const Block b = blocks.back();
      blocks.pop_back();
      auto& p = blocks.back();
      p.value = (p.value * p.weight + b.value * b.weight) / (p.weight + b.weight);
      p.weight += b.weight;
      p.last = b.last;
    }
  }
  CalibrationResult r;
  r.distances = xs;
  r.fitted.resize(xs.size());
  for (const auto& b : blocks)
    for (std::size_t i = b.first; i <= b.last; ++i) r.fitted[i] = b.value;
  r.warning = true;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (r.fitted[i] >= target_accuracy) {
      r.d_s = xs[i];
      r.warning = false;
    }
  return r;
}

}  // namespace pbshm
