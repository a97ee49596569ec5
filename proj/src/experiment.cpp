#include "qsky/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "qsky/error.hpp"
#include "qsky/io.hpp"

namespace qsky::experiment {

using hilbert::DensityMatrix;
using hilbert::Dof;
using hilbert::LocalSupport;
using hilbert::Photon;
using hilbert::Pol;
using hilbert::ProjectorOp;
using hilbert::Projected;
using hilbert::PureState;
using hilbert::Wavelength;

SourceSpectrum SourceSpectrum::uniform(const std::vector<int>& ells, const std::vector<int>& ks,
                                       int ell_max) {
  SourceSpectrum s;
  s.ell_max = ell_max;
  const double a = 1.0 / std::sqrt(static_cast<double>(ells.size() * ks.size()));
  for (int l : ells)
    for (int k : ks) s.c[{l, k}] = a;
  s.validate();
  return s;
}

SourceSpectrum SourceSpectrum::gaussian(double sigma_l, int ell_max, const std::vector<int>& ks) {
  if (!(sigma_l > 0)) throw ValidationError("Gaussian OAM envelope needs sigma_l > 0");
  SourceSpectrum s;
  s.ell_max = ell_max;
  s.sigma_l = sigma_l;
  double total = 0.0;
  for (int l = -ell_max; l <= ell_max; ++l)
    for (int k : ks) {
      const double a = std::exp(-static_cast<double>(l * l) / (4 * sigma_l * sigma_l));
      s.c[{l, k}] = a;
      total += a * a;
    }
  for (auto& [key, a] : s.c) a /= std::sqrt(total);
  s.validate();
  return s;
}

void SourceSpectrum::validate() const {
  if (c.empty()) throw ValidationError("source spectrum is empty");
  double total = 0.0;
  for (const auto& [key, a] : c) {
    if (key.second != 1 && key.second != 2)
      throw ValidationError("source spectrum wavelength index must be 1 or 2");
    if (std::abs(key.first) > ell_max)
      throw ValidationError("source spectrum has |l| = " + std::to_string(std::abs(key.first)) +
                            " above ell_max");
    total += std::norm(a);
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw ValidationError("source spectrum is not normalized (sum |c|^2 = " + std::to_string(total) + ")");
}

PureState spdc_state(const SourceSpectrum& spec, Pol pol) {
  spec.validate();
  PureState::Terms t;
  for (const auto& [key, a] : spec.c) {
    const auto [l, k] = key;
    const Wavelength wa = k == 1 ? Wavelength::lambda1 : Wavelength::lambda2;
    hilbert::Ket ket = hilbert::make_ket({hilbert::label(Photon::A, l, pol, wa),
                                          hilbert::label(Photon::B, -l, pol, hilbert::conjugate(wa))});
    t[ket] += a;
  }
  return PureState(std::move(t));
}

Projected resolve_wavelength(const PureState& s, ArmAssignment arms) {
  const Wavelength wa = arms == ArmAssignment::a_lambda1 ? Wavelength::lambda1 : Wavelength::lambda2;
  Eigen::Vector2cd ea = Eigen::Vector2cd::Zero();
  ea(static_cast<int>(wa)) = 1.0;
  const Eigen::Vector2cd eb = Eigen::Vector2cd::Ones() - ea;
  const auto pa = hilbert::wavelength_projector(Photon::A, ea, "arm_A");
  const auto pb = hilbert::wavelength_projector(Photon::B, eb, "arm_B");
  Projected r = hilbert::project(s, pa);
  if (r.null()) return r;
  Projected r2 = hilbert::project(*r.state, pb);
  r2.probability *= r.probability;
  if (r2.probability < kTol.p_floor) r2.state.reset();
  return r2;
}

Projected smf_project(const PureState& s, Photon photon) {
  ProjectorOp p{"smf", "photon " + hilbert::to_string(photon) + " single-mode fibre (l = 0)",
                Eigen::MatrixXcd::Ones(1, 1), LocalSupport{photon, Dof::oam, {0}}};
  return hilbert::project(s, p);
}

Projected herald(const PureState& s, Photon photon, hilbert::PolSetting outcome) {
  return hilbert::contract(s, LocalSupport{photon, Dof::pol, {0, 1}}, hilbert::pol_vector(outcome));
}

double coincidence_probability(const PureState& s, const ProjectorOp& a, const ProjectorOp& b) {
  if (!a.support || !b.support) throw ValidationError("coincidence projectors need a declared support");
  if (a.support->photon == b.support->photon && a.support->dof == b.support->dof)
    throw CompositionError("coincidence projectors address the same subsystem");
  const double n2 = s.norm_squared();
  const PureState out = hilbert::apply_local(hilbert::apply_local(s, *a.support, a.matrix), *b.support,
                                             b.matrix);
  return std::clamp(out.norm_squared() / n2, 0.0, 1.0);
}

double coincidence_probability(const DensityMatrix& rho, const ProjectorOp& a, const ProjectorOp& b) {
  const std::array<ProjectorOp, 2> ops{a, b};
  return std::clamp(hilbert::expectation(rho, ops), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

void CountModel::validate() const {
  if (!(rate_max >= 0)) throw ValidationError("rate_max must be non-negative");
  if (!(accidental_rate >= 0)) throw ValidationError("accidental_rate must be non-negative");
  if (!(integration_s >= 0)) throw ValidationError("integration time must be non-negative");
  if (!(window_ns > 0)) throw ValidationError("coincidence window must be positive");
}

CountRecord simulate_counts(double p, const CountModel& model, std::uint64_t seed,
                            std::string setting_a, std::string setting_b) {
  model.validate();
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability must lie in [0, 1]");
  const double mean = p * model.rate_max * model.integration_s + model.accidental_rate * model.integration_s;
  std::int64_t n = 0;
  if (mean > 0) {
    std::mt19937_64 rng(seed);
    std::poisson_distribution<std::int64_t> dist(mean);
    n = dist(rng);
  }
  return {std::move(setting_a), std::move(setting_b), n, model.integration_s, model.window_ns, seed};
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(master) ^ a) ^ b);
}

void write_counts_csv(std::ostream& out, std::span<const CountRecord> records) {
  out << "setting_a,setting_b,counts,integration_s,window_ns,seed\n";
  for (const auto& r : records)
    out << r.setting_a << ',' << r.setting_b << ',' << r.counts << ',' << io::format_double(r.integration_s)
        << ',' << io::format_double(r.window_ns) << ',' << r.seed << '\n';
}

std::vector<CountRecord> read_counts_csv(std::istream& in, std::vector<int>* lines) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("count file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "setting_a,setting_b,counts,integration_s,window_ns,seed")
    throw ValidationError("count file header must be 'setting_a,setting_b,counts,integration_s,window_ns,seed'");
  std::vector<CountRecord> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = io::split_csv(line);
    if (f.size() != 6)
      throw ValidationError("line " + std::to_string(row) + ": count row has " + std::to_string(f.size()) +
                            " fields, expected 6");
    CountRecord r;
    r.setting_a = f[0];
    r.setting_b = f[1];
    try {
      std::size_t used = 0;
      r.counts = std::stoll(f[2], &used);
      if (used != f[2].size()) throw std::invalid_argument("counts");
      r.integration_s = std::stod(f[3]);
      r.window_ns = std::stod(f[4]);
      r.seed = std::stoull(f[5]);
    } catch (const std::exception&) {
      throw ValidationError("line " + std::to_string(row) + ": count row has a non-numeric field");
    }
    if (r.counts < 0)
      throw ValidationError("line " + std::to_string(row) + ": count row has negative counts (" +
                            std::to_string(r.counts) + ")");
    out.push_back(std::move(r));
    if (lines) lines->push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------

ProjectorOp chsh_projector(Photon photon, double theta) {
  Eigen::Vector2cd v(1.0, std::polar(1.0, 2.0 * theta));
  std::ostringstream id;
  id << "theta=" << io::format_double(theta);
  return hilbert::oam_projector(photon, {2, -2}, v, id.str());
}

double correlation(const OutcomeQuad& q) {
  const double total = q.pp + q.pm + q.mp + q.mm;
  if (!(total > 0)) throw NumericalError("correlation from an all-zero outcome set");
  return (q.pp + q.mm - q.pm - q.mp) / total;
}

double chsh(const ChshInputs& q) {
  return correlation(q[0]) - correlation(q[1]) + correlation(q[2]) + correlation(q[3]);
}

double chsh(std::span<const double> v) {
  if (v.size() != 16)
    throw ValidationError("CHSH needs 16 outcome values, got " + std::to_string(v.size()));
  ChshInputs q;
  for (std::size_t i = 0; i < 4; ++i) q[i] = {v[4 * i], v[4 * i + 1], v[4 * i + 2], v[4 * i + 3]};
  return chsh(q);
}

namespace {

OutcomeQuad quad(const DensityMatrix& rho, double ta, double tb) {
  const double h = std::numbers::pi / 2;
  auto c = [&](double x, double y) {
    return coincidence_probability(rho, chsh_projector(Photon::A, x), chsh_projector(Photon::B, y));
  };
  return {c(ta, tb), c(ta, tb + h), c(ta + h, tb), c(ta + h, tb + h)};
}

std::array<std::pair<double, double>, 4> setting_pairs(const ChshAngles& g) {
  return {{{g.a, g.b}, {g.a, g.b2}, {g.a2, g.b}, {g.a2, g.b2}}};
}

}  // namespace

ChshInputs chsh_probabilities(const DensityMatrix& rho, const ChshAngles& angles) {
  ChshInputs q;
  const auto pairs = setting_pairs(angles);
  for (std::size_t i = 0; i < 4; ++i) q[i] = quad(rho, pairs[i].first, pairs[i].second);
  return q;
}

ChshInputs chsh_counts(const DensityMatrix& rho, const CountModel& model, std::uint64_t seed,
                       const ChshAngles& angles, std::vector<CountRecord>* records) {
  const ChshInputs p = chsh_probabilities(rho, angles);
  const char* names_a[] = {"a", "a", "a2", "a2"};
  const char* names_b[] = {"b", "b2", "b", "b2"};
  ChshInputs out;
  for (std::size_t i = 0; i < 4; ++i) {
    const double vals[4] = {p[i].pp, p[i].pm, p[i].mp, p[i].mm};
    double counts[4];
    for (std::size_t j = 0; j < 4; ++j) {
      const std::string sa = std::string(names_a[i]) + (j >= 2 ? "_perp" : "");
      const std::string sb = std::string(names_b[i]) + (j % 2 ? "_perp" : "");
      auto r = simulate_counts(std::clamp(vals[j], 0.0, 1.0), model, derive_seed(seed, 4 * i + j), sa, sb);
      counts[j] = static_cast<double>(r.counts);
      if (records) records->push_back(std::move(r));
    }
    out[i] = {counts[0], counts[1], counts[2], counts[3]};
  }
  return out;
}

double chsh_coincidence(const DensityMatrix& rho, double theta_a, double theta_b) {
  return coincidence_probability(rho, chsh_projector(Photon::A, theta_a), chsh_projector(Photon::B, theta_b));
}

double chsh_max_scan(const DensityMatrix& rho, int n_theta_b) {
  if (n_theta_b < 2) throw ValidationError("CHSH scan needs at least two theta_b samples");
  const double pi = std::numbers::pi;
  const std::array<double, 4> ta{0.0, pi / 8, pi / 4, 3 * pi / 8};
  std::vector<double> tb(static_cast<std::size_t>(n_theta_b));
  for (int i = 0; i < n_theta_b; ++i) tb[static_cast<std::size_t>(i)] = pi * i / n_theta_b;
  std::vector<std::vector<double>> e(ta.size(), std::vector<double>(tb.size()));
  for (std::size_t i = 0; i < ta.size(); ++i)
    for (std::size_t j = 0; j < tb.size(); ++j) e[i][j] = correlation(quad(rho, ta[i], tb[j]));
  double best = 0.0;
  for (std::size_t a = 0; a < ta.size(); ++a)
    for (std::size_t a2 = 0; a2 < ta.size(); ++a2) {
      if (a == a2) continue;
      for (std::size_t b = 0; b < tb.size(); ++b)
        for (std::size_t b2 = 0; b2 < tb.size(); ++b2) {
          if (b == b2) continue;
          const double s = e[a][b] - e[a][b2] + e[a2][b] + e[a2][b2];
          best = std::max(best, std::abs(s));
        }
    }
  return best;
}

PureState oam_bell_state() {
  const double r = 1.0 / std::sqrt(2.0);
  PureState::Terms t;
  t[hilbert::make_ket({hilbert::label(Photon::A, 2, {}, {}), hilbert::label(Photon::B, -2, {}, {})})] = r;
  t[hilbert::make_ket({hilbert::label(Photon::A, -2, {}, {}), hilbert::label(Photon::B, 2, {}, {})})] = r;
  return PureState(std::move(t));
}

DensityMatrix werner_state(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) throw ValidationError("visibility must lie in [0, 1]");
  const DensityMatrix bell = hilbert::density_from_pure(oam_bell_state());
  Eigen::MatrixXcd m = visibility * bell.matrix() +
                       (1.0 - visibility) * Eigen::MatrixXcd::Identity(bell.dim(), bell.dim()) / 4.0;
  return DensityMatrix(bell.basis(), std::move(m));
}

}  // namespace qsky::experiment
