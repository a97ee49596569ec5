#include "qsky/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <limits>
#include <sstream>
#include <thread>

#include "qsky/error.hpp"
#include "qsky/ghz.hpp"

#ifndef QSKY_VERSION
#define QSKY_VERSION "0.1.0"
#endif

namespace qsky::cli {

using hilbert::DensityMatrix;
using hilbert::Photon;
using hilbert::PureState;
using io::json;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

const std::pair<Scenario, const char*> kScenarioNames[] = {
    {Scenario::entangled_nonlocal, "entangled_nonlocal"},
    {Scenario::heralded_local_A, "heralded_local_A"},
    {Scenario::heralded_local_B, "heralded_local_B"},
    {Scenario::trivial, "trivial"},
    {Scenario::ghz, "ghz"},
    {Scenario::chsh, "chsh"},
    {Scenario::sweep, "sweep"},
};

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

template <class T>
void read_into(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config key '" + (where.empty() ? std::string(key) : where + "." + key) +
                          "' has the wrong type: " + e.what());
  }
}

std::string photon_name(Photon p) { return hilbert::to_string(p); }

std::string normalization_name(tomography::Normalization n) {
  return n == tomography::Normalization::grand_total ? "grand_total" : "per_group";
}

tomography::Normalization parse_normalization(const std::string& s) {
  if (s == "grand_total") return tomography::Normalization::grand_total;
  if (s == "per_group") return tomography::Normalization::per_group;
  throw ValidationError("unknown normalization '" + s + "' (expected grand_total or per_group)");
}

device::DeviceParams effective_device(const RunConfig& c) {
  device::DeviceParams p = c.device;
  if (!c.retardation_table.empty()) p.table = device::load_retardation_table(c.retardation_table);
  return p;
}

device::QPlateOptions qplate_options(const RunConfig& c) {
  device::QPlateOptions o;
  o.convention = c.convention;
  o.q = c.device.q_charge;
  o.ell_max = c.source.ell_max;
  return o;
}

json eta_json(device::EtaByWavelength e) { return {{"lambda1", e.lambda1}, {"lambda2", e.lambda2}}; }

json header(const RunConfig& c) {
  return {{"tool", "qsky"}, {"version", version()}, {"config", to_json(c)}};
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(row);
  }
  return out;
}

json complex_matrix_json(const Eigen::MatrixXcd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    out.push_back(row);
  }
  return out;
}

json reconstruction_json(const tomography::Reconstruction& r) {
  return {{"chi2", r.chi2},
          {"chi2_linear", r.chi2_linear},
          {"iterations", r.iterations},
          {"linear_residual", r.residual},
          {"eigenvalues", io::to_json(r.eigenvalues)}};
}

json set_json(const tomography::ProjectorSet& set) {
  json j = {{"kind", tomography::to_string(set.kind)}};
  json slots = json::array();
  for (const auto& s : set.slots)
    slots.push_back({{"photon", photon_name(s.photon)}, {"dof", hilbert::to_string(s.dof)}, {"zero", s.zero},
                     {"one", s.one}});
  j["slots"] = slots;
  return j;
}

tomography::ProjectorSet pipeline_set(Scenario s) {
  switch (s) {
    case Scenario::heralded_local_A:
      return tomography::projector_set(tomography::SetKind::hybrid36, Photon::A, Photon::A);
    case Scenario::heralded_local_B:
      return tomography::projector_set(tomography::SetKind::hybrid36, Photon::B, Photon::B);
    default:
      return tomography::projector_set(tomography::SetKind::hybrid36, Photon::A, Photon::B);
  }
}

struct PointResult {
  explicit PointResult(PipelineState p) : pipeline(std::move(p)) {}

  PipelineState pipeline;
  std::uint64_t seed = 0;
  TopologyReport model_topology;
  topology::StokesField field;
  double model_fidelity = 0.0;
  std::vector<experiment::CountRecord> counts;
  std::optional<tomography::Reconstruction> reconstruction;
  std::optional<double> reconstructed_fidelity;
  std::optional<TopologyReport> reconstructed_topology;
  std::vector<std::string> errors;
};

PointResult evaluate_point(const RunConfig& c, Scenario s, double voltage) {
  PointResult r{prepare_pipeline(c, s, voltage)};
  r.seed = point_seed(c.seed, voltage, s);
  r.model_topology = analyze_topology(r.pipeline.rho, c.grid, &r.field);
  r.model_fidelity = hilbert::fidelity(r.pipeline.rho, r.pipeline.ideal);
  if (!c.tomography.noisy) return r;

  experiment::CountModel model = c.tomography.counts;
  model.rate_max *= r.pipeline.herald_probability;
  r.counts = tomography::simulate_tomography(r.pipeline.rho.matrix(), r.pipeline.set, model, r.seed);
  try {
    r.reconstruction = tomography::reconstruct(r.counts, r.pipeline.set, c.tomography.reconstruct);
    r.reconstructed_fidelity = hilbert::fidelity(r.reconstruction->rho, r.pipeline.ideal);
  } catch (const Error& e) {
    r.errors.push_back(std::string("reconstruction: ") + e.what());
    return r;
  }
  try {
    r.reconstructed_topology = analyze_topology(r.reconstruction->rho, c.grid);
  } catch (const Error& e) {
    r.errors.push_back(std::string("reconstructed topology: ") + e.what());
  }
  return r;
}

RunResult run_pipeline(const RunConfig& c) {
  const double v = c.effective_voltage();
  PointResult p = evaluate_point(c, c.scenario, v);
  RunResult out;
  json rep = header(c);
  rep["scenario"] = to_string(c.scenario);
  rep["voltage"] = v;
  rep["point_seed"] = p.seed;
  rep["eta"] = eta_json(p.pipeline.eta);
  rep["herald_probability"] = p.pipeline.herald_probability;
  rep["tomography_set"] = set_json(p.pipeline.set);
  rep["skyrme_number"] = p.model_topology.solid_angle.n;
  rep["coverage"] = p.model_topology.coverage;
  rep["fidelity"] = p.model_fidelity;
  rep["model"] = {{"fidelity", p.model_fidelity}, {"topology", to_json(p.model_topology)}};
  if (p.reconstruction) {
    json rec = reconstruction_json(*p.reconstruction);
    rec["fidelity"] = *p.reconstructed_fidelity;
    if (p.reconstructed_topology) rec["topology"] = to_json(*p.reconstructed_topology);
    rep["reconstructed"] = rec;
  }
  rep["errors"] = p.errors;
  out.ok = p.errors.empty();
  rep["ok"] = out.ok;
  out.report = std::move(rep);
  out.counts = std::move(p.counts);
  out.rho_model = p.pipeline.rho;
  out.rho = p.reconstruction ? p.reconstruction->rho : p.pipeline.rho;
  out.stokes = std::move(p.field);
  return out;
}

RunResult run_chsh(const RunConfig& c) {
  const std::uint64_t seed = point_seed(c.seed, c.effective_voltage(), Scenario::chsh);
  const DensityMatrix rho = experiment::werner_state(c.chsh.visibility);
  RunResult out;
  json rep = header(c);
  rep["scenario"] = "chsh";
  rep["point_seed"] = seed;
  rep["visibility"] = c.chsh.visibility;

  const double s_analytic = experiment::chsh(experiment::chsh_probabilities(rho));
  experiment::CountModel cm = c.tomography.counts;
  cm.integration_s = c.chsh.integration_s;
  std::vector<experiment::CountRecord> chsh_records;
  const double s_counts = experiment::chsh(experiment::chsh_counts(rho, cm, seed, {}, &chsh_records));
  std::int64_t total = 0;
  json settings = json::array();
  for (const auto& r : chsh_records) {
    total += r.counts;
    settings.push_back({{"setting_a", r.setting_a}, {"setting_b", r.setting_b}, {"counts", r.counts}});
  }
  rep["chsh"] = {{"S_analytic", s_analytic},
                 {"S_counts", s_counts},
                 {"S_max_scan", experiment::chsh_max_scan(rho, c.chsh.n_theta_b)},
                 {"total_counts", total},
                 {"records", settings}};

  const auto set = tomography::projector_set(tomography::SetKind::oam36_pm2, Photon::A, Photon::B);
  const DensityMatrix truth = tomography::to_set_basis(rho, set);
  const DensityMatrix bell =
      tomography::to_set_basis(hilbert::density_from_pure(experiment::oam_bell_state()), set);
  rep["tomography_set"] = set_json(set);
  DensityMatrix est = truth;
  if (c.tomography.noisy) {
    out.counts = tomography::simulate_tomography(truth.matrix(), set, c.tomography.counts,
                                                 experiment::derive_seed(seed, 1));
    const auto rec = tomography::reconstruct(out.counts, set, c.tomography.reconstruct);
    rep["reconstructed"] = reconstruction_json(rec);
    est = rec.rho;
  }
  rep["fidelity"] = hilbert::fidelity(est, bell);
  rep["pauli_correlations"] = matrix_json(tomography::pauli_coefficients(est.matrix()).b());
  rep["errors"] = json::array();
  rep["ok"] = true;
  out.report = std::move(rep);
  out.rho = est;
  out.rho_model = truth;
  return out;
}

json six_qubit_json(const PureState& s, int ell) {
  json out = json::array();
  for (const auto& [k, a] : s.terms()) {
    if (std::norm(a) < 1e-24) continue;
    std::string bits;
    for (Photon p : {Photon::A, Photon::B}) {
      const auto* l = hilbert::find_photon(k, p);
      const int lam = *hilbert::dof_value(*l, hilbert::Dof::wavelength);
      const int pol = *hilbert::dof_value(*l, hilbert::Dof::pol);
      const int m = l->oam->ell;
      const int zero = p == Photon::A ? ell : -ell;
      const int one = zero - 2;
      if (m != zero && m != one) {
        bits += std::to_string(lam) + std::to_string(pol) + "?";
        continue;
      }
      bits += std::to_string(lam) + std::to_string(pol) + (m == zero ? "0" : "1");
    }
    out.push_back({{"bits", bits}, {"amplitude", {a.real(), a.imag()}}});
  }
  return out;
}

RunResult run_ghz(const RunConfig& c) {
  const double v = c.effective_voltage();
  const int ell = c.ghz.ell;
  RunResult out;
  json rep = header(c);
  rep["scenario"] = "ghz";
  rep["ell"] = ell;

  const device::EtaByWavelength eta = c.ghz.ideal_operating_point
                                          ? device::EtaByWavelength{1.0, 0.0}
                                          : device::efficiencies(v, effective_device(c), c.wavelengths);
  rep["eta"] = eta_json(eta);
  rep["operating_point_met"] = ghz::operating_point_met(eta);
  if (!c.ghz.ideal_operating_point) rep["voltage"] = v;

  ghz::PrepareOptions po;
  po.qplate = qplate_options(c);
  po.force = c.ghz.force;
  const PureState prepared = ghz::ghz_prepare(ghz::ghz_source(ell), eta, po);
  rep["prepared_six_qubit"] = six_qubit_json(prepared, ell);

  const DensityMatrix marginal = ghz::wavelength_marginal(prepared, Photon::A);
  const Eigen::MatrixXcd half = Eigen::MatrixXcd::Identity(marginal.dim(), marginal.dim()) / 2.0;
  rep["wavelength_marginal"] = {{"matrix", complex_matrix_json(marginal.matrix())},
                                {"purity", (marginal.matrix() * marginal.matrix()).trace().real()},
                                {"trace_distance_from_mixed", hilbert::trace_distance(marginal.matrix(), half)}};

  const ghz::Heralded h = ghz::ghz_project(prepared, ell);
  rep["herald_probability"] = h.probability;
  rep["warnings"] = h.warnings;
  if (!h.state) throw NumericalError("GHZ heralding has zero probability");
  const ghz::QubitRegister reg = ghz::logical_map(*h.state, ghz::heralded_mapping(ell));
  rep["fidelity"] = ghz::ghz_fidelity(reg);
  json amps = json::array();
  for (Eigen::Index i = 0; i < reg.amplitudes.size(); ++i)
    amps.push_back({reg.amplitudes(i).real(), reg.amplitudes(i).imag()});
  rep["logical_amplitudes"] = amps;
  json marg = json::array();
  for (int q = 0; q < 3; ++q) {
    const Eigen::MatrixXcd m = ghz::qubit_marginal(reg, {q});
    marg.push_back(hilbert::trace_distance(m, Eigen::MatrixXcd::Identity(2, 2) / 2.0));
  }
  rep["single_qubit_marginal_distance_from_mixed"] = marg;
  rep["errors"] = json::array();
  rep["ok"] = true;
  out.report = std::move(rep);
  out.rho = hilbert::density_from_pure(h.state->normalized());
  return out;
}

std::string trim_number(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(Scenario s) {
  for (const auto& [k, name] : kScenarioNames)
    if (k == s) return name;
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  for (const auto& [k, name] : kScenarioNames)
    if (s == name) return k;
  std::string all;
  for (const auto& [k, name] : kScenarioNames) all += (all.empty() ? "" : ", ") + std::string(name);
  throw ValidationError("unknown scenario '" + s + "' (expected one of " + all + ")");
}

double default_voltage(Scenario s) {
  switch (s) {
    case Scenario::entangled_nonlocal: return 3.9;
    case Scenario::heralded_local_A: return 6.3;
    case Scenario::heralded_local_B: return 5.4;
    default: return 4.7;
  }
}

bool is_pipeline(Scenario s) {
  return s == Scenario::entangled_nonlocal || s == Scenario::heralded_local_A ||
         s == Scenario::heralded_local_B || s == Scenario::trivial;
}

std::string version() { return QSKY_VERSION; }

std::vector<double> SweepSpec::voltages() const {
  if (!(v_step > 0.0)) throw ValidationError("sweep.v_step must be positive");
  std::vector<double> out;
  if (v_max < v_min) return out;
  const auto n = static_cast<long>(std::floor((v_max - v_min) / v_step + 1e-9)) + 1;
  for (long i = 0; i < n; ++i) out.push_back(std::round((v_min + i * v_step) * 1e9) / 1e9);
  return out;
}

void RunConfig::validate() const {
  device.validate();
  wavelengths.validate();
  if (voltage && !(*voltage >= 0.0)) throw ValidationError("voltage must be non-negative");
  if (source.sigma_l < 0.0) throw ValidationError("source.sigma_l must be non-negative");
  if (source.ell_max < 1) throw ValidationError("source.ell_max must be at least 1");
  if (source.sigma_l == 0.0 && source.ells.empty()) throw ValidationError("source.ells is empty");
  for (int k : source.ks)
    if (k != 1 && k != 2) throw ValidationError("source.ks entries must be 1 or 2");
  if (source.ks.empty()) throw ValidationError("source.ks is empty");
  if (grid.nx < 8 || grid.ny < 8) throw ValidationError("grid must be at least 8x8");
  if (grid.half_extent < 0.0) throw ValidationError("grid.half_extent must be non-negative (0 = automatic)");
  if (!(grid.waist > 0.0)) throw ValidationError("grid.waist must be positive");
  tomography.counts.validate();
  if (tomography.reconstruct.max_iterations < 0) throw ValidationError("tomography.max_iterations is negative");
  if (!(tomography.reconstruct.tolerance > 0.0)) throw ValidationError("tomography.tolerance must be positive");
  if (!(chsh.visibility >= 0.0 && chsh.visibility <= 1.0))
    throw ValidationError("chsh.visibility must lie in [0, 1]");
  if (!(chsh.integration_s > 0.0)) throw ValidationError("chsh.integration_s must be positive");
  if (chsh.n_theta_b < 4) throw ValidationError("chsh.n_theta_b must be at least 4");
  if (std::abs(ghz.ell) + 2 > source.ell_max) throw ValidationError("ghz.ell leaves the OAM truncation");
  if (!(sweep.v_step > 0.0)) throw ValidationError("sweep.v_step must be positive");
  if (sweep.v_min < 0.0) throw ValidationError("sweep.v_min must be non-negative");
  if (sweep.threads < 0) throw ValidationError("sweep.threads is negative");
  for (Scenario s : sweep.scenarios)
    if (!is_pipeline(s)) throw ValidationError("sweep.scenarios only takes pipeline scenarios, got " + to_string(s));
  if (out.empty()) throw ValidationError("out directory is empty");
}

RunConfig config_from_json(const json& j, RunConfig c) {
  check_keys(j, "", {"scenario", "seed", "voltage", "device", "retardation_table", "wavelengths", "convention",
                     "source", "grid", "tomography", "chsh", "ghz", "sweep", "out"});
  if (j.contains("scenario")) c.scenario = parse_scenario(j.at("scenario").get<std::string>());
  read_into(j, "seed", c.seed, "");
  if (j.contains("voltage")) {
    if (j.at("voltage").is_null())
      c.voltage.reset();
    else
      c.voltage = j.at("voltage").get<double>();
  }
  if (j.contains("device")) {
    const json& d = j.at("device");
    check_keys(d, "device", {"q_charge", "thickness_um", "v_threshold", "v_full_1550", "reference_nm", "table"});
    read_into(d, "q_charge", c.device.q_charge, "device");
    read_into(d, "thickness_um", c.device.thickness_um, "device");
    read_into(d, "v_threshold", c.device.v_threshold, "device");
    read_into(d, "v_full_1550", c.device.v_full_1550, "device");
    read_into(d, "reference_nm", c.device.reference_nm, "device");
    if (d.contains("table")) {
      c.device.table.clear();
      for (const auto& row : d.at("table")) {
        if (!row.is_array() || row.size() != 2)
          throw ValidationError("device.table rows must be [voltage, delta_rad]");
        c.device.table.push_back({row[0].get<double>(), row[1].get<double>()});
      }
    }
  }
  read_into(j, "retardation_table", c.retardation_table, "");
  if (j.contains("wavelengths")) {
    const json& w = j.at("wavelengths");
    check_keys(w, "wavelengths", {"pump_nm", "lambda1_nm", "lambda2_nm"});
    read_into(w, "pump_nm", c.wavelengths.pump_nm, "wavelengths");
    read_into(w, "lambda1_nm", c.wavelengths.lambda1_nm, "wavelengths");
    read_into(w, "lambda2_nm", c.wavelengths.lambda2_nm, "wavelengths");
  }
  if (j.contains("convention")) c.convention = device::parse_phase_convention(j.at("convention").get<std::string>());
  if (j.contains("source")) {
    const json& s = j.at("source");
    check_keys(s, "source", {"ells", "ks", "sigma_l", "ell_max"});
    read_into(s, "ells", c.source.ells, "source");
    read_into(s, "ks", c.source.ks, "source");
    read_into(s, "sigma_l", c.source.sigma_l, "source");
    read_into(s, "ell_max", c.source.ell_max, "source");
  }
  if (j.contains("grid")) {
    const json& g = j.at("grid");
    check_keys(g, "grid", {"nx", "ny", "half_extent", "waist"});
    read_into(g, "nx", c.grid.nx, "grid");
    read_into(g, "ny", c.grid.ny, "grid");
    read_into(g, "half_extent", c.grid.half_extent, "grid");
    read_into(g, "waist", c.grid.waist, "grid");
  }
  if (j.contains("tomography")) {
    const json& t = j.at("tomography");
    check_keys(t, "tomography", {"noisy", "rate_max", "integration_s", "accidental_rate", "window_ns",
                                 "normalization", "variance_weighting", "refine", "max_iterations", "tolerance"});
    read_into(t, "noisy", c.tomography.noisy, "tomography");
    read_into(t, "rate_max", c.tomography.counts.rate_max, "tomography");
    read_into(t, "integration_s", c.tomography.counts.integration_s, "tomography");
    read_into(t, "accidental_rate", c.tomography.counts.accidental_rate, "tomography");
    read_into(t, "window_ns", c.tomography.counts.window_ns, "tomography");
    if (t.contains("normalization"))
      c.tomography.reconstruct.normalization = parse_normalization(t.at("normalization").get<std::string>());
    read_into(t, "variance_weighting", c.tomography.reconstruct.variance_weighting, "tomography");
    read_into(t, "refine", c.tomography.reconstruct.refine, "tomography");
    read_into(t, "max_iterations", c.tomography.reconstruct.max_iterations, "tomography");
    read_into(t, "tolerance", c.tomography.reconstruct.tolerance, "tomography");
  }
  if (j.contains("chsh")) {
    const json& h = j.at("chsh");
    check_keys(h, "chsh", {"visibility", "integration_s", "n_theta_b"});
    read_into(h, "visibility", c.chsh.visibility, "chsh");
    read_into(h, "integration_s", c.chsh.integration_s, "chsh");
    read_into(h, "n_theta_b", c.chsh.n_theta_b, "chsh");
  }
  if (j.contains("ghz")) {
    const json& g = j.at("ghz");
    check_keys(g, "ghz", {"ell", "ideal_operating_point", "force"});
    read_into(g, "ell", c.ghz.ell, "ghz");
    read_into(g, "ideal_operating_point", c.ghz.ideal_operating_point, "ghz");
    read_into(g, "force", c.ghz.force, "ghz");
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    check_keys(s, "sweep", {"v_min", "v_max", "v_step", "scenarios", "threads"});
    read_into(s, "v_min", c.sweep.v_min, "sweep");
    read_into(s, "v_max", c.sweep.v_max, "sweep");
    read_into(s, "v_step", c.sweep.v_step, "sweep");
    read_into(s, "threads", c.sweep.threads, "sweep");
    if (s.contains("scenarios")) {
      c.sweep.scenarios.clear();
      for (const auto& name : s.at("scenarios")) c.sweep.scenarios.push_back(parse_scenario(name.get<std::string>()));
    }
  }
  read_into(j, "out", c.out, "");
  return c;
}

json to_json(const RunConfig& c) {
  json table = json::array();
  for (const auto& p : c.device.table) table.push_back({p.voltage, p.delta_rad});
  json scen = json::array();
  for (Scenario s : c.sweep.scenarios) scen.push_back(to_string(s));
  return {
      {"scenario", to_string(c.scenario)},
      {"seed", c.seed},
      {"voltage", c.effective_voltage()},
      {"device",
       {{"q_charge", c.device.q_charge},
        {"thickness_um", c.device.thickness_um},
        {"v_threshold", c.device.v_threshold},
        {"v_full_1550", c.device.v_full_1550},
        {"reference_nm", c.device.reference_nm},
        {"table", table}}},
      {"retardation_table", c.retardation_table},
      {"wavelengths",
       {{"pump_nm", c.wavelengths.pump_nm},
        {"lambda1_nm", c.wavelengths.lambda1_nm},
        {"lambda2_nm", c.wavelengths.lambda2_nm}}},
      {"convention", device::to_string(c.convention)},
      {"source",
       {{"ells", c.source.ells},
        {"ks", c.source.ks},
        {"sigma_l", c.source.sigma_l},
        {"ell_max", c.source.ell_max}}},
      {"grid",
       {{"nx", c.grid.nx}, {"ny", c.grid.ny}, {"half_extent", c.grid.half_extent}, {"waist", c.grid.waist}}},
      {"tomography",
       {{"noisy", c.tomography.noisy},
        {"rate_max", c.tomography.counts.rate_max},
        {"integration_s", c.tomography.counts.integration_s},
        {"accidental_rate", c.tomography.counts.accidental_rate},
        {"window_ns", c.tomography.counts.window_ns},
        {"normalization", normalization_name(c.tomography.reconstruct.normalization)},
        {"variance_weighting", c.tomography.reconstruct.variance_weighting},
        {"refine", c.tomography.reconstruct.refine},
        {"max_iterations", c.tomography.reconstruct.max_iterations},
        {"tolerance", c.tomography.reconstruct.tolerance}}},
      {"chsh",
       {{"visibility", c.chsh.visibility},
        {"integration_s", c.chsh.integration_s},
        {"n_theta_b", c.chsh.n_theta_b}}},
      {"ghz",
       {{"ell", c.ghz.ell},
        {"ideal_operating_point", c.ghz.ideal_operating_point},
        {"force", c.ghz.force}}},
      {"sweep",
       {{"v_min", c.sweep.v_min},
        {"v_max", c.sweep.v_max},
        {"v_step", c.sweep.v_step},
        {"scenarios", scen},
        {"threads", c.sweep.threads}}},
      {"out", c.out},
  };
}

std::uint64_t point_seed(std::uint64_t master, double voltage, Scenario s) {
  const auto mv = static_cast<std::uint64_t>(std::llround(voltage * 1000.0));
  return experiment::derive_seed(master, mv, experiment::hash_string(to_string(s)));
}

PipelineState prepare_pipeline(const RunConfig& c, Scenario s, double voltage) {
  if (!is_pipeline(s)) throw ValidationError("scenario " + to_string(s) + " has no optical pipeline");
  const auto spec = c.source.sigma_l > 0.0
                        ? experiment::SourceSpectrum::gaussian(c.source.sigma_l, c.source.ell_max, c.source.ks)
                        : experiment::SourceSpectrum::uniform(c.source.ells, c.source.ks, c.source.ell_max);
  const auto resolved = experiment::resolve_wavelength(experiment::spdc_state(spec, hilbert::Pol::R));
  if (resolved.null()) throw NumericalError("no source amplitude reaches the lambda1/lambda2 arms");

  const auto eta = device::efficiencies(voltage, effective_device(c), c.wavelengths);
  const auto qo = qplate_options(c);
  PureState st = device::apply_qplate(*resolved.state, Photon::A, eta, qo);
  st = device::apply_qplate(st, Photon::B, eta, qo);

  const Photon fibre = s == Scenario::heralded_local_A ? Photon::B : Photon::A;
  const Photon heralded = s == Scenario::heralded_local_B ? Photon::A : Photon::B;
  const auto f = experiment::smf_project(st, fibre);
  if (f.null()) throw NumericalError("nothing couples into the single-mode fibre on photon " + photon_name(fibre));
  const auto h = experiment::herald(*f.state, heralded, hilbert::PolSetting::L);
  if (h.null()) throw NumericalError("the L herald on photon " + photon_name(heralded) + " never fires");

  auto set = pipeline_set(s);
  auto rho = tomography::to_set_basis(hilbert::density_from_pure(*h.state), set);
  const double phi = c.convention == device::PhaseConvention::unitary_i ? std::numbers::pi / 2 : 0.0;
  Eigen::VectorXcd ideal = Eigen::VectorXcd::Zero(set.dim());
  ideal(0) = kInvSqrt2;
  ideal(3) = kInvSqrt2 * std::polar(1.0, phi);
  DensityMatrix target(set.basis, ideal * ideal.adjoint());
  return PipelineState{*h.state, resolved.probability * f.probability * h.probability, eta, std::move(set),
                       std::move(rho), std::move(target)};
}

TopologyReport analyze_topology(const DensityMatrix& rho, const GridConfig& grid, topology::StokesField* field) {
  const auto [m, modes] = topology::spin_orbit_matrix(rho, grid.waist);
  topology::GridSpec g{grid.nx, grid.ny, grid.half_extent};
  auto f = topology::reduced_stokes_field(m, modes, g);
  const auto u = topology::normalize_stokes(f);
  TopologyReport t;
  t.quadrature = topology::skyrme_number_quadrature(u);
  t.solid_angle = topology::skyrme_number_solid_angle(u);
  t.coverage = topology::poincare_coverage(u);
  t.half_extent = f.half_extent;
  t.masked_fraction = u.masked_fraction();
  if (field) *field = std::move(f);
  return t;
}

json to_json(const TopologyReport& t) {
  return {{"skyrme_solid_angle", to_json(t.solid_angle)},
          {"skyrme_quadrature", to_json(t.quadrature)},
          {"coverage", t.coverage},
          {"half_extent", t.half_extent},
          {"masked_fraction", t.masked_fraction}};
}

RunResult run_scenario(const RunConfig& c) {
  c.validate();
  if (is_pipeline(c.scenario)) return run_pipeline(c);
  if (c.scenario == Scenario::chsh) return run_chsh(c);
  if (c.scenario == Scenario::ghz) return run_ghz(c);
  throw ValidationError("scenario sweep runs through sweep(), not run_scenario()");
}

void write_outputs(const RunResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  io::write_json((d / "report.json").string(), r.report);
  if (!r.counts.empty()) {
    std::ostringstream os;
    experiment::write_counts_csv(os, r.counts);
    io::write_text((d / "counts.csv").string(), os.str());
  }
  if (r.rho) io::write_json((d / "rho.json").string(), io::to_json(*r.rho));
  if (r.rho_model) io::write_json((d / "rho_model.json").string(), io::to_json(*r.rho_model));
  if (r.stokes) io::write_text((d / "stokes.csv").string(), topology::to_csv(*r.stokes));
}

std::vector<SweepRow> sweep(const RunConfig& c) {
  c.validate();
  const auto volts = c.sweep.voltages();
  std::vector<SweepRow> rows;
  for (double v : volts)
    for (Scenario s : c.sweep.scenarios) rows.push_back({v, s});
  if (rows.empty()) return rows;

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      try {
        const PointResult p = evaluate_point(c, row.scenario, row.voltage);
        row.n = p.model_topology.solid_angle.n;
        row.coverage = p.model_topology.coverage;
        row.fidelity = p.model_fidelity;
        row.n_reconstructed = p.reconstructed_topology ? p.reconstructed_topology->solid_angle.n
                                                       : std::numeric_limits<double>::quiet_NaN();
        row.fidelity_reconstructed = p.reconstructed_fidelity.value_or(std::numeric_limits<double>::quiet_NaN());
        if (!p.errors.empty()) row.status = p.errors.front();
      } catch (const std::exception& e) {
        row.n = row.fidelity = row.coverage = row.n_reconstructed = row.fidelity_reconstructed =
            std::numeric_limits<double>::quiet_NaN();
        row.status = e.what();
      }
    }
  };
  unsigned n_threads = c.sweep.threads > 0 ? static_cast<unsigned>(c.sweep.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(rows.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto num = [](double v) { return std::isnan(v) ? std::string() : io::format_double(v); };
  auto clean = [](std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
  };
  std::string out = "voltage,scenario,N,F,coverage,N_reconstructed,F_reconstructed,status\n";
  for (const auto& r : rows)
    out += trim_number(r.voltage) + "," + to_string(r.scenario) + "," + num(r.n) + "," + num(r.fidelity) + "," +
           num(r.coverage) + "," + num(r.n_reconstructed) + "," + num(r.fidelity_reconstructed) + "," +
           clean(r.status) + "\n";
  return out;
}

RunResult run_tomo(const RunConfig& c, const std::string& counts_path, tomography::SetKind kind, Photon first,
                   Photon second) {
  c.validate();
  const auto set = tomography::projector_set(kind, first, second);
  RunResult out;
  out.counts = tomography::ingest_counts(counts_path, set);
  const auto rec = tomography::reconstruct(out.counts, set, c.tomography.reconstruct);
  json rep = header(c);
  rep["counts_file"] = counts_path;
  rep["tomography_set"] = set_json(set);
  rep["reconstructed"] = reconstruction_json(rec);
  rep["purity"] = (rec.rho.matrix() * rec.rho.matrix()).trace().real();
  json errors = json::array();
  if (set.dim() == 4) {
    rep["pauli_correlations"] = matrix_json(tomography::pauli_coefficients(rec.rho.matrix()).b());
    if (kind == tomography::SetKind::hybrid36) {
      try {
        topology::StokesField f;
        rep["topology"] = to_json(analyze_topology(rec.rho, c.grid, &f));
        out.stokes = std::move(f);
      } catch (const Error& e) {
        errors.push_back(std::string("topology: ") + e.what());
      }
    }
  }
  rep["errors"] = errors;
  out.ok = errors.empty();
  rep["ok"] = out.ok;
  out.report = std::move(rep);
  out.rho = rec.rho;
  return out;
}

RunResult run_stokes(const RunConfig& c, const std::string& rho_path, bool with_field) {
  c.validate();
  RunResult out;
  json rep = header(c);
  DensityMatrix rho = [&] {
    if (!rho_path.empty()) {
      rep["rho_file"] = rho_path;
      return io::density_from_json(io::read_json(rho_path));
    }
    if (!is_pipeline(c.scenario))
      throw ValidationError("stokes needs --rho or a pipeline scenario, got " + to_string(c.scenario));
    const double v = c.effective_voltage();
    rep["scenario"] = to_string(c.scenario);
    rep["voltage"] = v;
    return prepare_pipeline(c, c.scenario, v).rho;
  }();
  topology::StokesField f;
  const TopologyReport t = analyze_topology(rho, c.grid, &f);
  rep["topology"] = to_json(t);
  rep["skyrme_number"] = t.solid_angle.n;
  rep["coverage"] = t.coverage;
  rep["errors"] = json::array();
  rep["ok"] = true;
  out.report = std::move(rep);
  if (with_field) out.stokes = std::move(f);
  return out;
}

}  // namespace qsky::cli
