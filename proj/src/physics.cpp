#include "pbshm/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "pbshm/error.hpp"
#include "pbshm/kernels.hpp"

namespace pbshm {

namespace {

using Eigen::MatrixXd;

double attr(const IEVertex& v, Param p) { return (*v.attributes)[static_cast<std::size_t>(p)]; }

// Hermite cubic beam element, DOFs (w1, theta1, w2, theta2).
Eigen::Matrix4d beam_stiffness(double ei, double len) {
  const double l = len, l2 = len * len;
  Eigen::Matrix4d k;
  k << 12, 6 * l, -12, 6 * l,
       6 * l, 4 * l2, -6 * l, 2 * l2,
       -12, -6 * l, 12, -6 * l,
       6 * l, 2 * l2, -6 * l, 4 * l2;
  return k * (ei / (l2 * l));
}

Eigen::Matrix4d beam_mass(double m_per_len, double len) {
  const double l = len, l2 = len * len;
  Eigen::Matrix4d m;
  m << 156, 22 * l, 54, -13 * l,
       22 * l, 4 * l2, 13 * l, -3 * l2,
       54, 13 * l, 156, -22 * l,
       -13 * l, -3 * l2, -22 * l, 4 * l2;
  return m * (m_per_len * len / 420.0);
}

// Decks ordered along their mutual adjacency, starting from the end deck
// with the smallest id.
std::vector<std::size_t> deck_chain(const AttributedGraph& g, const std::vector<std::size_t>& decks) {
  std::map<std::size_t, std::vector<std::size_t>> nb;
  std::size_t edge_count = 0;
  for (const auto a : decks) {
    nb[a];
    for (const auto b : decks)
      if (a != b && g.adjacent(a, b)) {
        nb[a].push_back(b);
        if (a < b) ++edge_count;
      }
  }
  for (const auto& [d, list] : nb)
    if (list.size() > 2) fail(ErrorKind::unsupported_model, "deck " + g.vertex(d).id + " meets more than two decks");
  if (edge_count + 1 != decks.size())
    fail(ErrorKind::unsupported_model, "decks of '" + g.id() + "' do not form a single chain");

  std::optional<std::size_t> start;
  for (const auto d : decks)
    if (nb[d].size() <= 1 && (!start || g.vertex(d).id < g.vertex(*start).id)) start = d;
  if (!start) fail(ErrorKind::unsupported_model, "decks of '" + g.id() + "' form a loop");

  std::vector<std::size_t> order{*start};
  std::set<std::size_t> seen{*start};
  while (order.size() < decks.size()) {
    std::optional<std::size_t> next;
    for (const auto n : nb[order.back()])
      if (!seen.contains(n)) next = n;
    if (!next) fail(ErrorKind::unsupported_model, "decks of '" + g.id() + "' are not connected to each other");
    order.push_back(*next);
    seen.insert(*next);
  }
  return order;
}

bool touches_ground(const AttributedGraph& g, std::size_t v) {
  for (const auto n : g.neighbours(v))
    if (g.vertex(n).kind.is_ground()) return true;
  return false;
}

}  // namespace

BridgeModel assemble(const StructureInstance& inst, const AssemblyOptions& opts) { return assemble(inst.graph(), opts); }

BridgeModel assemble(const AttributedGraph& g, const AssemblyOptions& opts) {
  if (opts.n_e < 2) fail(ErrorKind::invalid_input, "at least two beam elements per deck are required");
  std::vector<std::size_t> decks, pillars;
  for (std::size_t i = 0; i < g.size(); ++i) {
    switch (g.vertex(i).kind.tag) {
      case ElementTag::deck: decks.push_back(i); break;
      case ElementTag::pillar: pillars.push_back(i); break;
      case ElementTag::ground: break;
      default:
        fail(ErrorKind::unsupported_model, "element " + g.vertex(i).id + " of kind " + g.vertex(i).kind.str() +
                                               " has no beam model");
    }
  }
  if (decks.empty()) fail(ErrorKind::unsupported_model, "'" + g.id() + "' has no deck");

  const std::vector<std::size_t> chain = deck_chain(g, decks);
  const std::size_t nd = chain.size(), ne = opts.n_e;
  const std::size_t n_nodes = nd * ne + 1;
  std::map<std::size_t, std::size_t> position;  // graph vertex -> chain position
  for (std::size_t i = 0; i < nd; ++i) position[chain[i]] = i;

  BridgeModel model;
  // Pillars sit on the junction of the two decks they touch, or on the
  // outer end of a terminal deck.
  std::set<std::size_t> hinged;  // junction node indices
  struct Spring {
    std::string id;
    std::size_t node;
    double k, mass;
  };
  std::vector<Spring> springs;
  for (const auto p : pillars) {
    const auto& v = g.vertex(p);
    if (!touches_ground(g, p)) fail(ErrorKind::unsupported_model, "pillar " + v.id + " does not reach the ground");
    std::vector<std::size_t> on;
    for (const auto n : g.neighbours(p))
      if (position.contains(n)) on.push_back(position[n]);
    std::sort(on.begin(), on.end());
    std::size_t node = 0;
    if (on.size() == 2 && on[1] == on[0] + 1) {
      node = (on[0] + 1) * ne;
      hinged.insert(node);
    } else if (on.size() == 1 && (on[0] == 0 || on[0] + 1 == nd)) {
      node = on[0] == 0 ? 0 : n_nodes - 1;
    } else {
      fail(ErrorKind::unsupported_model, "pillar " + v.id + " is not at a deck junction or deck end");
    }
    const double l = attr(v, Param::l), w = attr(v, Param::w), t = attr(v, Param::t);
    const double k = attr(v, Param::E) * w * t / l;
    springs.push_back({v.id, node, k, opts.pillar_mass ? 0.5 * attr(v, Param::rho) * w * t * l : 0.0});
    model.pillar_node[v.id] = node;
    model.pillar_stiffness[v.id] = k;
  }

  // Global numbering: one transverse DOF per node, rotations shared across
  // continuous junctions and split at hinges.
  std::vector<std::size_t> w_dof(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) w_dof[i] = i;
  std::size_t next = n_nodes;
  std::vector<std::vector<std::size_t>> r_dof(nd, std::vector<std::size_t>(ne + 1));
  for (std::size_t d = 0; d < nd; ++d)
    for (std::size_t q = 0; q <= ne; ++q) {
      if (q == 0 && d > 0 && !hinged.contains(d * ne))
        r_dof[d][q] = r_dof[d - 1][ne];
      else
        r_dof[d][q] = next++;
    }
  const std::size_t n_dof = next;

  MatrixXd K = MatrixXd::Zero(static_cast<Eigen::Index>(n_dof), static_cast<Eigen::Index>(n_dof));
  MatrixXd M = K;
  double x0 = 0.0;
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& v = g.vertex(chain[d]);
    const double l = attr(v, Param::l), w = attr(v, Param::w), t = attr(v, Param::t);
    const double ei = attr(v, Param::E) * w * t * t * t / 12.0;
    const double mu = attr(v, Param::rho) * w * t;
    const double le = l / static_cast<double>(ne);
    const Eigen::Matrix4d ke = beam_stiffness(ei, le), me = beam_mass(mu, le);
    for (std::size_t q = 0; q < ne; ++q) {
      const std::size_t node = d * ne + q;
      const std::array<std::size_t, 4> dofs{w_dof[node], r_dof[d][q], w_dof[node + 1], r_dof[d][q + 1]};
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          K(static_cast<Eigen::Index>(dofs[a]), static_cast<Eigen::Index>(dofs[b])) += ke(a, b);
          M(static_cast<Eigen::Index>(dofs[a]), static_cast<Eigen::Index>(dofs[b])) += me(a, b);
        }
    }
    for (std::size_t q = (d == 0 ? 0 : 1); q <= ne; ++q)
      model.node_x.push_back(x0 + le * static_cast<double>(q));
    model.slot_nodes[v.id] = {d * ne, (d + 1) * ne};
    model.deck_order.push_back(v.id);
    x0 += l;
  }
  for (const auto& s : springs) {
    const auto i = static_cast<Eigen::Index>(w_dof[s.node]);
    K(i, i) += s.k;
    M(i, i) += s.mass;
  }

  std::set<std::size_t> pinned;
  if (nd == 1) {
    if (touches_ground(g, chain[0])) pinned = {0, n_nodes - 1};
  } else {
    if (touches_ground(g, chain.front())) pinned.insert(0);
    if (touches_ground(g, chain.back())) pinned.insert(n_nodes - 1);
  }

  std::vector<std::optional<std::size_t>> free_index(n_dof);
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < n_dof; ++i) {
    if (i < n_nodes && pinned.contains(i)) continue;
    free_index[i] = keep.size();
    keep.push_back(static_cast<Eigen::Index>(i));
  }
  const auto nf = static_cast<Eigen::Index>(keep.size());
  model.K.resize(nf, nf);
  model.M.resize(nf, nf);
  for (Eigen::Index a = 0; a < nf; ++a)
    for (Eigen::Index b = 0; b < nf; ++b) {
      model.K(a, b) = K(keep[a], keep[b]);
      model.M(a, b) = M(keep[a], keep[b]);
    }

  // Deck sensors sit at the node nearest 0.4 l, pillar sensors on their node.
  const auto q_sensor = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(0.4 * static_cast<double>(ne))), 1, ne - 1);
  for (const auto& [sensor, vertex] : g.sensors()) {
    std::optional<std::size_t> node;
    const auto vi = *g.index_of(vertex);
    if (position.contains(vi)) node = position[vi] * ne + q_sensor;
    else if (model.pillar_node.contains(vertex)) node = model.pillar_node[vertex];
    model.sensor_ids.push_back(sensor);
    model.sensor_dof.push_back(node ? free_index[w_dof[*node]] : std::nullopt);
  }
  return model;
}

ModalResult natural_frequencies(const BridgeModel& model, std::size_t n) {
  const auto nf = model.dof_count();
  if (n == 0 || n > nf)
    fail(ErrorKind::invalid_input, "requested " + std::to_string(n) + " modes of a model with " + std::to_string(nf) + " DOFs");
  if (Eigen::LLT<MatrixXd>(model.M).info() != Eigen::Success) fail(ErrorKind::model, "mass matrix is not positive definite");

  std::vector<double> lambda(n);
  MatrixXd phi(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(n));
  const Eigen::LLT<MatrixXd> kchol(model.K);
  if (kchol.info() == Eigen::Success) {
    // Inverse form: L^-1 M L^-T y = (1 / lambda) y with K = L L^T. The lowest
    // modes become the dominant ones, which keeps them accurate when very
    // short (nearly contracted) elements make K badly conditioned.
    const MatrixXd lm = kchol.matrixL().solve(model.M);
    MatrixXd a = kchol.matrixL().solve(lm.transpose());
    a = 0.5 * (a + a.transpose()).eval();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
    if (es.info() != Eigen::Success) fail(ErrorKind::model, "eigensolver did not converge");
    const auto top = static_cast<Eigen::Index>(nf) - 1;
    for (std::size_t m = 0; m < n; ++m) {
      const double mu = es.eigenvalues()(top - static_cast<Eigen::Index>(m));
      if (!(mu > 0.0)) fail(ErrorKind::model, "non-positive eigenvalue in the flexibility form");
      lambda[m] = 1.0 / mu;
      phi.col(static_cast<Eigen::Index>(m)) =
          kchol.matrixU().solve(es.eigenvectors().col(top - static_cast<Eigen::Index>(m))) / std::sqrt(mu);
    }
  } else {
    const Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> es(model.K, model.M);
    if (es.info() != Eigen::Success) fail(ErrorKind::model, "generalised eigensolver failed");
    for (std::size_t m = 0; m < n; ++m) {
      lambda[m] = es.eigenvalues()(static_cast<Eigen::Index>(m));
      if (!(lambda[m] > 0.0)) fail(ErrorKind::model, "structure has a rigid-body mode; add supports");
      phi.col(static_cast<Eigen::Index>(m)) = es.eigenvectors().col(static_cast<Eigen::Index>(m));
    }
  }

  ModalResult out;
  out.frequencies.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    out.frequencies[m] = std::sqrt(lambda[m]) / (2.0 * std::numbers::pi);
    auto col = phi.col(static_cast<Eigen::Index>(m));
    Eigen::Index imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    if (col(imax) < 0.0) col = -col;
  }
  out.shapes = phi;
  out.sensor_shapes = MatrixXd::Zero(static_cast<Eigen::Index>(model.sensor_ids.size()), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < model.sensor_ids.size(); ++s)
    if (model.sensor_dof[s])
      out.sensor_shapes.row(static_cast<Eigen::Index>(s)) = phi.row(static_cast<Eigen::Index>(*model.sensor_dof[s]));
  return out;
}

StructureInstance apply_damage(const StructureInstance& inst, const DamageState& d) {
  if (!inst.family) fail(ErrorKind::invalid_input, "instance '" + inst.id + "' has no family");
  for (const auto& [slot, ground] : inst.family->ground_attachments())
    if (ground == d.slot) fail(ErrorKind::invalid_target, "cannot damage ground vertex " + d.slot);
  if (!inst.family->slot_index(d.slot)) fail(ErrorKind::invalid_target, "no element '" + d.slot + "' to damage");
  if (!(d.delta >= 0.0 && d.delta < 1.0)) fail(ErrorKind::invalid_input, "damage severity must lie in [0, 1)");
  StructureInstance out = inst;
  out.theta[inst.family->coordinate(d.slot, Param::E)] *= (1.0 - d.delta);
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::vector<double>> synthesize_timeseries(const BridgeModel& model, const ModalResult& modal,
                                                       const SynthesisConfig& cfg, std::size_t n_t, double fs) {
  if (n_t < 64) fail(ErrorKind::sampling, "records need at least 64 samples");
  if (!(fs > 0.0)) fail(ErrorKind::sampling, "sampling frequency must be positive");
  for (const double f : modal.frequencies)
    if (!(fs > 2.0 * f))
      fail(ErrorKind::sampling, "fs = " + std::to_string(fs) + " Hz does not resolve a " + std::to_string(f) + " Hz mode");
  if (!(cfg.zeta >= 0.0 && cfg.zeta < 0.2)) fail(ErrorKind::invalid_input, "damping ratio must lie in [0, 0.2)");
  if (!(cfg.noise_std >= 0.0)) fail(ErrorKind::invalid_input, "noise_std must be non-negative");

  const std::size_t n_modes = modal.frequencies.size();
  const std::size_t n_s = model.sensor_ids.size();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> amp(cfg.amplitude_lo, cfg.amplitude_hi);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> a(n_modes), ph(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    a[m] = amp(rng);
    ph[m] = phase(rng);
  }

  std::vector<std::vector<double>> out(n_s, std::vector<double>(n_t, 0.0));
  for (std::size_t m = 0; m < n_modes; ++m) {
    const double omega = 2.0 * std::numbers::pi * modal.frequencies[m];
    for (std::size_t s = 0; s < n_s; ++s) {
      const double c = modal.sensor_shapes(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(m)) * a[m];
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < n_t; ++i) {
        const double t = static_cast<double>(i) / fs;
        out[s][i] += c * std::exp(-cfg.zeta * omega * t) * std::cos(omega * t + ph[m]);
      }
    }
  }
  if (cfg.noise_std > 0.0) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& rec : out) {
      double ss = 0.0;
      for (const double x : rec) ss += x * x;
      const double sigma = cfg.noise_std * std::sqrt(ss / static_cast<double>(n_t));
      for (double& x : rec) x += sigma * gauss(rng);
    }
  }
  return out;
}

PopulatedFibre populate_fibre(const StructureInstance& inst, const std::vector<Condition>& conditions, std::size_t n_r,
                              const SynthesisConfig& cfg, const PopulateOptions& opts) {
  if (conditions.empty()) fail(ErrorKind::invalid_input, "at least one condition is required");
  if (n_r == 0) fail(ErrorKind::invalid_input, "N_R must be at least 1");
  const std::size_t n_w = opts.n_w == 0 ? opts.n_t / 4 : opts.n_w;

  std::vector<BridgeModel> models;
  std::vector<ModalResult> modes;
  models.reserve(conditions.size());
  modes.reserve(conditions.size());
  for (const auto& c : conditions) {
    const StructureInstance state = c.damage ? apply_damage(inst, *c.damage) : inst;
    models.push_back(assemble(state, opts.assembly));
    modes.push_back(natural_frequencies(models.back(), std::min(opts.n_modes, models.back().dof_count())));
  }
  const auto& sensors = models.front().sensor_ids;
  if (sensors.empty()) fail(ErrorKind::invalid_input, "structure '" + inst.id + "' carries no sensors");

  const std::size_t n_acq = conditions.size() * n_r;
  std::vector<kernels::SynthesisJob> jobs;
  jobs.reserve(n_acq);
  for (std::size_t k = 0; k < n_acq; ++k) {
    SynthesisConfig c = cfg;
    c.seed = splitmix64(cfg.seed ^ static_cast<std::uint64_t>(k));
    jobs.push_back({&models[k / n_r], &modes[k / n_r], c});
  }
  auto records = kernels::synthesize_batch(jobs, opts.n_t, opts.fs, opts.exec);

  std::map<std::size_t, std::string> channels;
  for (std::size_t j = 0; j < sensors.size(); ++j) channels[j] = sensors[j];
  Fibre fibre(inst.id, AcquisitionConstants{sensors.size(), opts.n_t, n_acq, opts.fs, opts.dtau}, channels);
  for (std::size_t k = 0; k < n_acq; ++k)
    for (std::size_t j = 0; j < sensors.size(); ++j)
      fibre.ingest(j, k, std::move(records[k][j]), static_cast<double>(k) * opts.dtau);

  const auto m1 = fibre.apply_operator(0, op_demean(), OperatorRegistry::standard(), opts.exec);
  const auto m2 = fibre.apply_operator(m1, op_welch(n_w), OperatorRegistry::standard(), opts.exec);
  const auto m3 = fibre.apply_operator(m2, op_modal_peaks(opts.n_modes), OperatorRegistry::standard(), opts.exec);

  PopulatedFibre out{std::move(fibre), {}, {}, m3};
  for (const auto& c : conditions) out.label_names.push_back(c.label);
  for (std::size_t k = 0; k < n_acq; ++k) out.labels.push_back(static_cast<int>(k / n_r));
  return out;
}

Eigen::MatrixXd acquisition_features(const Fibre& fibre, std::size_t m) {
  const Stratum& st = fibre.stratum(m);
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> column;
  for (std::size_t k = 0; k < fibre.constants().n_acquisitions; ++k) {
    const auto recs = fibre.project_time(m, k);
    if (recs.empty()) continue;
    Eigen::RowVectorXd row(static_cast<Eigen::Index>(st.record_dim));
    for (std::size_t i = 0; i < st.record_dim; ++i) {
      column.clear();
      for (const auto& r : recs) column.push_back(r.values[i]);
      std::sort(column.begin(), column.end());
      const std::size_t h = column.size() / 2;
      row(static_cast<Eigen::Index>(i)) = column.size() % 2 ? column[h] : 0.5 * (column[h - 1] + column[h]);
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(st.record_dim));
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = rows[r];
  return out;
}

std::vector<double> instance_frequencies(const StructureInstance& inst, std::size_t n, const AssemblyOptions& opts) {
  return natural_frequencies(assemble(inst, opts), n).frequencies;
}

}  // namespace pbshm
