#include "pbshm/fibre.hpp"

#include <cmath>

#include "pbshm/error.hpp"
#include "pbshm/io.hpp"
#include "pbshm/kernels.hpp"
#include "pbshm/spectral.hpp"

namespace pbshm {

using nlohmann::json;

OperatorSpec OperatorSpec::from_json(const json& doc) {
  try {
    OperatorSpec op{doc.at("name").get<std::string>(), doc.value("params", json::object())};
    if (!op.params.is_object()) fail(ErrorKind::invalid_input, "operator params must be an object");
    return op;
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, std::string("operator spec: ") + e.what());
  }
}

OperatorSpec op_mean() { return {"mean", json::object()}; }
OperatorSpec op_demean() { return {"demean", json::object()}; }
OperatorSpec op_dft() { return {"dft", json::object()}; }
OperatorSpec op_welch(std::size_t n_w) { return {"welch", {{"n_w", n_w}}}; }
OperatorSpec op_modal_peaks(std::size_t n) { return {"modal_peaks", {{"n", n}}}; }
OperatorSpec op_band(std::size_t lo, std::size_t hi) { return {"band", {{"lo", lo}, {"hi", hi}}}; }

namespace {

std::size_t size_param(const json& params, const char* key) {
  if (!params.contains(key)) fail(ErrorKind::operator_contract, std::string("missing operator parameter '") + key + "'");
  const auto& v = params.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(ErrorKind::operator_contract, std::string("operator parameter '") + key + "' must be a non-negative integer");
  return v.get<std::size_t>();
}

double real_param(const json& params, const char* key) {
  if (!params.contains(key) || !params.at(key).is_number())
    fail(ErrorKind::operator_contract, std::string("missing numeric operator parameter '") + key + "'");
  return params.at(key).get<double>();
}

OperatorRegistry build_standard() {
  OperatorRegistry reg;
  reg.add("mean", {[](std::size_t in, const json&) {
                     if (in == 0) fail(ErrorKind::operator_contract, "mean of an empty record");
                     return std::size_t{1};
                   },
                   [](std::span<const double> r, const json&) {
                     double s = 0.0;
                     for (double x : r) s += x;
                     return std::vector<double>{s / static_cast<double>(r.size())};
                   }});
  reg.add("demean", {[](std::size_t in, const json&) {
                       if (in == 0) fail(ErrorKind::operator_contract, "demean of an empty record");
                       return in;
                     },
                     [](std::span<const double> r, const json&) {
                       double s = 0.0;
                       for (double x : r) s += x;
                       const double mean = s / static_cast<double>(r.size());
                       std::vector<double> out(r.begin(), r.end());
                       for (double& x : out) x -= mean;
                       return out;
                     }});
  reg.add("dft", {[](std::size_t in, const json&) {
                    if (in < 2 || in % 2 != 0)
                      fail(ErrorKind::operator_contract, "dft needs an even record length, got " + std::to_string(in));
                    return in;
                  },
                  [](std::span<const double> r, const json&) { return spectral::dft_packed(r); }});
  reg.add("welch", {[](std::size_t in, const json& p) {
                      const auto n_w = size_param(p, "n_w");
                      real_param(p, "fs");
                      if (n_w < 4 || n_w % 2 != 0 || n_w > in)
                        fail(ErrorKind::operator_contract, "welch window " + std::to_string(n_w) +
                                                               " must be even, >= 4 and <= record length " +
                                                               std::to_string(in));
                      return n_w / 2 + 1;
                    },
                    [](std::span<const double> r, const json& p) {
                      return spectral::welch_psd(r, size_param(p, "n_w"), real_param(p, "fs"));
                    }});
  reg.add("modal_peaks", {[](std::size_t in, const json& p) {
                            const auto n = size_param(p, "n");
                            const auto n_w = size_param(p, "n_w");
                            real_param(p, "fs");
                            if (in < 3) fail(ErrorKind::operator_contract, "modal_peaks needs a spectrum of >= 3 bins");
                            if (n_w != 2 * (in - 1))
                              fail(ErrorKind::operator_contract, "modal_peaks n_w does not match the spectrum length");
                            if (n == 0) fail(ErrorKind::operator_contract, "modal_peaks needs n >= 1");
                            return n;
                          },
                          [](std::span<const double> r, const json& p) {
                            return spectral::modal_peaks(r, size_param(p, "n"), real_param(p, "fs"),
                                                         size_param(p, "n_w"), size_param(p, "min_separation"));
                          }});
  reg.add("band", {[](std::size_t in, const json& p) {
                     const auto lo = size_param(p, "lo");
                     const auto hi = size_param(p, "hi");
                     if (lo >= hi || hi > in)
                       fail(ErrorKind::operator_contract, "band [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                                              ") outside record of length " + std::to_string(in));
                     return hi - lo;
                   },
                   [](std::span<const double> r, const json& p) {
                     const auto lo = size_param(p, "lo");
                     const auto hi = size_param(p, "hi");
                     return std::vector<double>(r.begin() + static_cast<std::ptrdiff_t>(lo),
                                                r.begin() + static_cast<std::ptrdiff_t>(hi));
                   }});
  return reg;
}

}  // namespace

const OperatorRegistry& OperatorRegistry::standard() {
  static const OperatorRegistry reg = build_standard();
  return reg;
}

void OperatorRegistry::add(std::string name, OperatorDefinition def) { ops_[std::move(name)] = std::move(def); }

const OperatorDefinition& OperatorRegistry::find(const std::string& name) const {
  const auto it = ops_.find(name);
  if (it == ops_.end()) fail(ErrorKind::operator_contract, "operator '" + name + "' is not registered");
  return it->second;
}

std::string chain_digest(const std::vector<OperatorSpec>& chain) {
  json doc = json::array();
  for (const auto& op : chain) doc.push_back(op.to_json());
  return io::sha256_hex(doc.dump());
}

std::string Stratum::chain_digest() const { return pbshm::chain_digest(chain); }

Fibre::Fibre(std::string structure_id, AcquisitionConstants constants, std::map<std::size_t, std::string> channel_sensors)
    : structure_id_(std::move(structure_id)), constants_(constants), channel_sensors_(std::move(channel_sensors)) {
  const auto& c = constants_;
  if (c.n_channels == 0 || c.n_samples == 0 || c.n_acquisitions == 0)
    fail(ErrorKind::invalid_input, "fibre needs N_S, N_T, N_R >= 1");
  if (!(c.fs > 0.0)) fail(ErrorKind::invalid_input, "fibre sampling frequency must be positive");
  if (!(c.dtau >= static_cast<double>(c.n_samples) / c.fs))
    fail(ErrorKind::invalid_input, "acquisition period shorter than one record (dtau < N_T / fs)");
  for (const auto& [ch, sensor] : channel_sensors_)
    if (ch >= c.n_channels) fail(ErrorKind::invalid_input, "channel map entry " + std::to_string(ch) + " >= N_S");
  raw_.index = 0;
  raw_.record_dim = c.n_samples;
}

void Fibre::ingest(std::size_t channel, std::size_t acquisition, std::vector<double> samples, double start_time) {
  if (!derived_.empty())
    fail(ErrorKind::conflict, "fibre '" + structure_id_ + "': raw stratum is sealed once derived strata exist");
  if (channel >= constants_.n_channels || acquisition >= constants_.n_acquisitions)
    fail(ErrorKind::invalid_input, "cell (" + std::to_string(channel) + ", " + std::to_string(acquisition) +
                                       ") outside the N_S x N_R grid");
  if (samples.size() != constants_.n_samples)
    fail(ErrorKind::record_shape, "record length " + std::to_string(samples.size()) + " != N_T = " +
                                      std::to_string(constants_.n_samples));
  const CellIndex cell{channel, acquisition};
  if (raw_.grid.contains(cell))
    fail(ErrorKind::conflict, "cell (" + std::to_string(channel) + ", " + std::to_string(acquisition) +
                                  ") already holds a record");
  if (t0_) {
    const double expected = *t0_ + static_cast<double>(acquisition) * constants_.dtau;
    const double tol = 1e-9 * std::max(1.0, std::abs(expected));
    if (std::abs(start_time - expected) > tol)
      fail(ErrorKind::synchronisation, "acquisition " + std::to_string(acquisition) + " starts at " +
                                           io::format_double(start_time) + " s, expected " +
                                           io::format_double(expected) + " s");
  } else {
    t0_ = start_time - static_cast<double>(acquisition) * constants_.dtau;
  }
  raw_.grid.emplace(cell, std::move(samples));
}

void Fibre::require_stratum(std::size_t m) const {
  if (m >= stratum_count())
    fail(ErrorKind::not_found, "fibre '" + structure_id_ + "' has no stratum " + std::to_string(m));
}

const Stratum& Fibre::stratum(std::size_t m) const {
  require_stratum(m);
  return m == 0 ? raw_ : *derived_[m - 1];
}

std::vector<RecordRef> Fibre::project_channel(std::size_t m, std::size_t channel) const {
  const auto& grid = stratum(m).grid;
  std::vector<RecordRef> out;
  for (auto it = grid.lower_bound({channel, 0}); it != grid.end() && it->first.channel == channel; ++it)
    out.push_back({it->first, it->second});
  return out;
}

std::vector<RecordRef> Fibre::project_time(std::size_t m, std::size_t acquisition) const {
  std::vector<RecordRef> out;
  for (const auto& [cell, values] : stratum(m).grid)
    if (cell.acquisition == acquisition) out.push_back({cell, values});
  return out;
}

RecordRef Fibre::project_cell(std::size_t m, std::size_t channel, std::size_t acquisition) const {
  const auto& grid = stratum(m).grid;
  const auto it = grid.find({channel, acquisition});
  if (it == grid.end())
    fail(ErrorKind::not_found, "stratum " + std::to_string(m) + " has no record at (" + std::to_string(channel) + ", " +
                                   std::to_string(acquisition) + ")");
  return {it->first, it->second};
}

Stratum Fibre::project_stratum(std::size_t m) const { return stratum(m); }

std::vector<OperatorSpec> Fibre::provenance(std::size_t m) const { return stratum(m).chain; }

OperatorSpec Fibre::complete(const OperatorSpec& op, std::size_t in_dim) const {
  OperatorSpec out = op;
  auto& p = out.params;
  if (op.name == "welch") {
    if (!p.contains("fs")) p["fs"] = constants_.fs;
    p["window"] = "hann";
    p["overlap"] = 0.5;
    p["sides"] = "one";
    p["scaling"] = "density";
  } else if (op.name == "modal_peaks") {
    if (!p.contains("fs")) p["fs"] = constants_.fs;
    if (!p.contains("n_w") && in_dim >= 1) p["n_w"] = 2 * (in_dim - 1);
    if (!p.contains("min_separation")) p["min_separation"] = 2;
    p["interpolation"] = "quadratic";
  }
  return out;
}

Stratum Fibre::derive(const Stratum& input, const OperatorSpec& op, const OperatorRegistry& registry,
                      Execution exec) const {
  const auto& def = registry.find(op.name);
  Stratum out;
  out.record_dim = def.out_dim(input.record_dim, op.params);
  out.chain = input.chain;
  out.chain.push_back(op);
  out.grid = kernels::apply_cellwise(input.grid, def, op.params, exec);
  for (const auto& [cell, values] : out.grid)
    if (values.size() != out.record_dim)
      fail(ErrorKind::operator_contract, "operator '" + op.name + "' produced " + std::to_string(values.size()) +
                                             " values, declared " + std::to_string(out.record_dim));
  return out;
}

std::size_t Fibre::apply_operator(std::size_t m_in, const OperatorSpec& op, const OperatorRegistry& registry,
                                  Execution exec) {
  const auto& input = stratum(m_in);
  const auto completed = complete(op, input.record_dim);
  auto chain = input.chain;
  chain.push_back(completed);
  const auto digest = chain_digest(chain);
  for (const auto& s : derived_)
    if (s->chain_digest() == digest) return s->index;
  auto out = derive(input, completed, registry, exec);
  out.index = stratum_count();
  derived_.push_back(std::make_shared<const Stratum>(std::move(out)));
  return derived_.back()->index;
}

Stratum Fibre::replay(std::size_t m, const OperatorRegistry& registry) const {
  const auto& target = stratum(m);
  Stratum current = raw_;
  for (const auto& op : target.chain) current = derive(current, op, registry, Execution::serial);
  current.index = m;
  return current;
}

void Fibre::save(const std::filesystem::path& dir) const {
  json meta;
  meta["structure_id"] = structure_id_;
  meta["N_S"] = constants_.n_channels;
  meta["N_T"] = constants_.n_samples;
  meta["N_R"] = constants_.n_acquisitions;
  meta["f_s"] = constants_.fs;
  meta["dtau"] = constants_.dtau;
  meta["t0"] = t0_ ? json(*t0_) : json(nullptr);
  meta["channels"] = json::object();
  for (const auto& [ch, sensor] : channel_sensors_) meta["channels"][std::to_string(ch)] = sensor;
  meta["strata"] = json::array();
  json chains = json::array();
  for (std::size_t m = 0; m < stratum_count(); ++m) {
    const auto& s = stratum(m);
    json cells = json::array();
    std::vector<double> flat;
    flat.reserve(s.flat_dim());
    for (const auto& [cell, values] : s.grid) {
      cells.push_back({cell.channel, cell.acquisition});
      flat.insert(flat.end(), values.begin(), values.end());
    }
    const auto file = "stratum_" + std::to_string(m) + ".bin";
    meta["strata"].push_back({{"index", m}, {"record_dim", s.record_dim}, {"file", file}, {"cells", cells}});
    io::write_atomic_bytes(dir / file, io::encode_f64_le(flat));
    json chain = json::array();
    for (const auto& op : s.chain) chain.push_back(op.to_json());
    chains.push_back({{"stratum", m}, {"digest", s.chain_digest()}, {"chain", chain}});
  }
  io::write_json(dir / "chains.json", chains);
  io::write_json(dir / "meta.json", meta);
}

Fibre Fibre::load(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "meta.json");
  const auto chains = io::read_json(dir / "chains.json");
  try {
    AcquisitionConstants c{meta.at("N_S").get<std::size_t>(), meta.at("N_T").get<std::size_t>(),
                           meta.at("N_R").get<std::size_t>(), meta.at("f_s").get<double>(),
                           meta.at("dtau").get<double>()};
    std::map<std::size_t, std::string> channels;
    for (const auto& [k, v] : meta.at("channels").items()) channels[std::stoul(k)] = v.get<std::string>();
    Fibre fibre(meta.at("structure_id").get<std::string>(), c, std::move(channels));
    if (!meta.at("t0").is_null()) fibre.t0_ = meta.at("t0").get<double>();
    const auto& strata = meta.at("strata");
    for (std::size_t m = 0; m < strata.size(); ++m) {
      const auto& sm = strata[m];
      Stratum s;
      s.index = m;
      s.record_dim = sm.at("record_dim").get<std::size_t>();
      const auto text = io::read_text(dir / sm.at("file").get<std::string>());
      const auto flat = io::decode_f64_le({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
      const auto& cells = sm.at("cells");
      if (flat.size() != cells.size() * s.record_dim)
        fail(ErrorKind::invalid_input, dir.string() + ": stratum " + std::to_string(m) + " size mismatch");
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const CellIndex cell{cells[i].at(0).get<std::size_t>(), cells[i].at(1).get<std::size_t>()};
        const auto first = flat.begin() + static_cast<std::ptrdiff_t>(i * s.record_dim);
        s.grid.emplace(cell, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(s.record_dim)));
      }
      for (const auto& op : chains.at(m).at("chain")) s.chain.push_back(OperatorSpec::from_json(op));
      if (m == 0) {
        if (!s.chain.empty()) fail(ErrorKind::invalid_input, "raw stratum must have an empty chain");
        fibre.raw_ = std::move(s);
      } else {
        fibre.derived_.push_back(std::make_shared<const Stratum>(std::move(s)));
      }
    }
    return fibre;
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_input, dir.string() + ": " + e.what());
  }
}

}  // namespace pbshm
