#include "qsky/topology.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "qsky/error.hpp"

namespace qsky::topology {

using hilbert::DensityMatrix;
using hilbert::Dof;
using hilbert::DofRef;

namespace {

constexpr double kPi = std::numbers::pi;

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// C_l ((x +- i y)/w)^{|l|}: the mode without its Gaussian factor.
Complex mode_amplitude(int ell, double norm, double waist, double x, double y) {
  const Complex z(x / waist, (ell >= 0 ? y : -y) / waist);
  Complex p = 1.0;
  for (int k = 0; k < std::abs(ell); ++k) p *= z;
  return norm * p;
}

/// (S0, S1, S2, S3) without the Gaussian factor at one point.
std::array<double, 4> stokes_at(const Eigen::MatrixXcd& rho, const ModeMap& modes, const std::vector<double>& norms,
                                double x, double y) {
  const auto nm = static_cast<Eigen::Index>(modes.ells.size());
  Eigen::VectorXcd g(nm);
  for (Eigen::Index n = 0; n < nm; ++n)
    g(n) = mode_amplitude(modes.ells[static_cast<std::size_t>(n)], norms[static_cast<std::size_t>(n)], modes.waist, x, y);
  const Eigen::VectorXcd gc = g.conjugate();
  const double rr = (g.transpose() * rho.block(0, 0, nm, nm) * gc)(0).real();
  const double ll = (g.transpose() * rho.block(nm, nm, nm, nm) * gc)(0).real();
  const Complex rl = (g.transpose() * rho.block(0, nm, nm, nm) * gc)(0);
  return {rr + ll, 2.0 * rl.real(), -2.0 * rl.imag(), rr - ll};
}

std::vector<double> mode_norms(const ModeMap& modes) {
  std::vector<double> out;
  for (int l : modes.ells) out.push_back(lg_norm(l, modes.waist));
  return out;
}

void check_layout(const Eigen::MatrixXcd& rho, const ModeMap& modes) {
  modes.validate();
  const auto d = static_cast<Eigen::Index>(2 * modes.ells.size());
  if (rho.rows() != d || rho.cols() != d)
    throw CompositionError("spin-orbit matrix is " + std::to_string(rho.rows()) + "x" + std::to_string(rho.cols()) +
                           " but the mode map needs " + std::to_string(d) + "x" + std::to_string(d));
}

DofRef pick_field(const DensityMatrix& rho, Dof dof, std::optional<DofRef> given) {
  if (given) return *given;
  std::set<DofRef> found;
  for (const auto& k : rho.basis())
    for (const auto& l : k)
      if (hilbert::dof_value(l, dof)) found.insert({l.photon, dof});
  if (found.size() != 1)
    throw CompositionError("cannot pick a unique " + hilbert::to_string(dof) + " field (" +
                           std::to_string(found.size()) + " candidates)");
  return *found.begin();
}

}  // namespace

void ModeMap::validate() const {
  if (ells.empty()) throw ValidationError("mode map is empty");
  if (!(waist > 0)) throw ValidationError("waist must be positive");
  std::set<int> unique(ells.begin(), ells.end());
  if (unique.size() != ells.size()) throw ValidationError("mode map repeats an OAM index");
}

void GridSpec::validate() const {
  if (nx < 2 || ny < 2) throw ValidationError("grid needs at least 2x2 cells");
  if (half_extent < 0 || !std::isfinite(half_extent)) throw ValidationError("grid half extent must be >= 0");
}

double lg_norm(int ell, double waist) {
  const int a = std::abs(ell);
  return std::sqrt(std::pow(2.0, a + 1) / (kPi * waist * waist * std::tgamma(a + 1.0)));
}

Complex lg_field(int ell, double waist, double x, double y) {
  const double r2 = (x * x + y * y) / (waist * waist);
  return mode_amplitude(ell, lg_norm(ell, waist), waist, x, y) * std::exp(-r2);
}

double StokesField::envelope(int i, int j) const {
  const double xx = x(i) / waist, yy = y(j) / waist;
  return std::exp(-2.0 * (xx * xx + yy * yy));
}

std::array<double, 4> StokesField::physical(int i, int j) const {
  const double e = envelope(i, j);
  const auto k = index(i, j);
  return {s0[k] * e, s1[k] * e, s2[k] * e, s3[k] * e};
}

double auto_half_extent(const Eigen::MatrixXcd& rho, const ModeMap& modes, double tol) {
  check_layout(rho, modes);
  const auto nm = static_cast<Eigen::Index>(modes.ells.size());
  int top = -1;
  std::vector<Eigen::Index> top_modes;
  for (Eigen::Index n = 0; n < nm; ++n) {
    const double w = rho(n, n).real() + rho(nm + n, nm + n).real();
    if (w <= 1e-12) continue;
    const int a = std::abs(modes.ells[static_cast<std::size_t>(n)]);
    if (a > top) {
      top = a;
      top_modes = {n};
    } else if (a == top) {
      top_modes.push_back(n);
    }
  }
  constexpr double kDefault = 3.0, kMax = 200.0;
  if (top_modes.size() != 1) return kDefault;
  const auto t = top_modes.front();
  const Complex rl = rho(t, nm + t);
  Eigen::Vector3d s_inf(2.0 * rl.real(), -2.0 * rl.imag(), rho(t, t).real() - rho(nm + t, nm + t).real());
  const double s0 = rho(t, t).real() + rho(nm + t, nm + t).real();
  if (s_inf.norm() <= 1e-6 * s0) return kDefault;
  s_inf.normalize();

  const auto norms = mode_norms(modes);
  auto converged = [&](double h) {
    const double r = h * modes.waist;
    for (int k = 0; k < 64; ++k) {
      const double phi = 2.0 * kPi * (k + 0.5) / 64.0;
      const auto s = stokes_at(rho, modes, norms, r * std::cos(phi), r * std::sin(phi));
      const Eigen::Vector3d v(s[1], s[2], s[3]);
      const double n = v.norm();
      if (!(n > 0) || 1.0 - v.dot(s_inf) / n > tol) return false;
    }
    return true;
  };
  if (converged(kDefault)) return kDefault;
  double lo = kDefault, hi = 2 * kDefault;
  while (!converged(hi)) {
    lo = hi;
    hi *= 2;
    if (hi >= kMax) return kMax;
  }
  for (int it = 0; it < 20; ++it) {
    const double mid = 0.5 * (lo + hi);
    (converged(mid) ? hi : lo) = mid;
  }
  return hi;
}

StokesField reduced_stokes_field(const Eigen::MatrixXcd& rho, const ModeMap& modes, const GridSpec& grid) {
  check_layout(rho, modes);
  grid.validate();
  StokesField f;
  f.nx = grid.nx;
  f.ny = grid.ny;
  f.waist = modes.waist;
  f.half_extent = grid.half_extent > 0 ? grid.half_extent : auto_half_extent(rho, modes);
  const auto n = static_cast<std::size_t>(f.nx) * static_cast<std::size_t>(f.ny);
  f.s0.resize(n);
  f.s1.resize(n);
  f.s2.resize(n);
  f.s3.resize(n);
  const auto norms = mode_norms(modes);
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      const auto s = stokes_at(rho, modes, norms, f.x(i), f.y(j));
      const auto k = f.index(i, j);
      f.s0[k] = s[0];
      f.s1[k] = s[1];
      f.s2[k] = s[2];
      f.s3[k] = s[3];
    }
  return f;
}

std::pair<Eigen::MatrixXcd, ModeMap> spin_orbit_matrix(const DensityMatrix& rho, double waist,
                                                       std::optional<DofRef> pol, std::optional<DofRef> oam) {
  const DofRef p = pick_field(rho, Dof::pol, pol);
  const DofRef o = pick_field(rho, Dof::oam, oam);
  const DofRef keep[] = {p, o};
  const DensityMatrix reduced = hilbert::partial_trace(rho, keep);

  std::set<int> ells;
  for (const auto& k : reduced.basis()) ells.insert(*hilbert::dof_value(*hilbert::find_photon(k, o.photon), Dof::oam));
  ModeMap modes{{ells.begin(), ells.end()}, waist};
  std::map<int, Eigen::Index> mode_index;
  for (std::size_t i = 0; i < modes.ells.size(); ++i) mode_index[modes.ells[i]] = static_cast<Eigen::Index>(i);
  const auto nm = static_cast<Eigen::Index>(modes.ells.size());

  std::vector<Eigen::Index> idx;
  for (const auto& k : reduced.basis()) {
    const int pv = *hilbert::dof_value(*hilbert::find_photon(k, p.photon), Dof::pol);
    const int ov = *hilbert::dof_value(*hilbert::find_photon(k, o.photon), Dof::oam);
    idx.push_back(pv * nm + mode_index.at(ov));
  }
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2 * nm, 2 * nm);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = 0; b < idx.size(); ++b)
      m(idx[a], idx[b]) = reduced.matrix()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
  return {m, modes};
}

StokesField reduced_stokes_field(const DensityMatrix& rho, const GridSpec& grid, double waist,
                                 std::optional<DofRef> pol, std::optional<DofRef> oam) {
  const auto [m, modes] = spin_orbit_matrix(rho, waist, pol, oam);
  return reduced_stokes_field(m, modes, grid);
}

UnitField normalize_stokes(const StokesField& f, double eps_rel) {
  UnitField u;
  u.nx = f.nx;
  u.ny = f.ny;
  u.dx = f.dx();
  u.dy = f.dy();
  const auto n = f.s0.size();
  u.s.assign(n, Eigen::Vector3d::Zero());
  u.masked.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector3d v(f.s1[k], f.s2[k], f.s3[k]);
    const double len = v.norm();
    if (!(f.s0[k] > 0) || !(len > eps_rel * f.s0[k])) {
      u.masked[k] = 1;
      ++u.n_masked;
      continue;
    }
    u.s[k] = v / len;
  }
  if (u.n_masked == n) throw NumericalError("every cell of the Stokes field is masked");
  return u;
}

std::string to_string(Estimator e) { return e == Estimator::quadrature ? "quadrature" : "solid_angle"; }

namespace {

void check_masking(const UnitField& u) {
  if (u.masked_fraction() > 0.5)
    throw NumericalError("Stokes field is " + std::to_string(100.0 * u.masked_fraction()) +
                         "% masked; the texture is not covered");
}

SkyrmeResult finish(double n, Estimator e, const UnitField& u) {
  return {n, e, std::abs(n - std::round(n)), u.n_masked};
}

}  // namespace

SkyrmeResult skyrme_number_quadrature(const UnitField& u) {
  check_masking(u);
  CompensatedSum sum;
  for (int j = 1; j + 1 < u.ny; ++j)
    for (int i = 1; i + 1 < u.nx; ++i) {
      const auto c = u.index(i, j), xp = u.index(i + 1, j), xm = u.index(i - 1, j), yp = u.index(i, j + 1),
                 ym = u.index(i, j - 1);
      if (u.masked[c] || u.masked[xp] || u.masked[xm] || u.masked[yp] || u.masked[ym]) continue;
      const Eigen::Vector3d dsx = (u.s[xp] - u.s[xm]) / (2.0 * u.dx);
      const Eigen::Vector3d dsy = (u.s[yp] - u.s[ym]) / (2.0 * u.dy);
      sum.add(u.s[c].dot(dsx.cross(dsy)) * u.dx * u.dy);
    }
  return finish(sum.value() / (4.0 * kPi), Estimator::quadrature, u);
}

SkyrmeResult skyrme_number_solid_angle(const UnitField& u) {
  check_masking(u);
  CompensatedSum sum;
  auto triangle = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c, int i, int j) {
    const double ab = a.dot(b), bc = b.dot(c), ca = c.dot(a);
    if (std::min({ab, bc, ca}) < -1.0 + 1e-12)
      throw NumericalError("degenerate spherical triangle (antipodal vertices) in cell (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
    return 2.0 * std::atan2(a.dot(b.cross(c)), 1.0 + ab + bc + ca);
  };
  for (int j = 0; j + 1 < u.ny; ++j)
    for (int i = 0; i + 1 < u.nx; ++i) {
      const auto k00 = u.index(i, j), k10 = u.index(i + 1, j), k11 = u.index(i + 1, j + 1), k01 = u.index(i, j + 1);
      if (u.masked[k00] || u.masked[k10] || u.masked[k11] || u.masked[k01]) continue;
      sum.add(triangle(u.s[k00], u.s[k10], u.s[k11], i, j));
      sum.add(triangle(u.s[k00], u.s[k11], u.s[k01], i, j));
    }
  return finish(sum.value() / (4.0 * kPi), Estimator::solid_angle, u);
}

double poincare_coverage(const UnitField& u, int n_bins) {
  if (n_bins < 1) throw ValidationError("coverage needs at least one bin");
  int bands = std::max(1, static_cast<int>(std::floor(std::sqrt(n_bins / 2.0))));
  while (n_bins % bands) --bands;
  const int sectors = n_bins / bands;
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(n_bins), 0);
  bool any = false;
  for (std::size_t k = 0; k < u.s.size(); ++k) {
    if (u.masked[k]) continue;
    any = true;
    const auto& v = u.s[k];
    const int b = std::clamp(static_cast<int>(std::floor((v.z() + 1.0) / 2.0 * bands)), 0, bands - 1);
    const double phi = std::atan2(v.y(), v.x());
    const int s = std::clamp(static_cast<int>(std::floor((phi + kPi) / (2.0 * kPi) * sectors)), 0, sectors - 1);
    hit[static_cast<std::size_t>(b * sectors + s)] = 1;
  }
  if (!any) throw ValidationError("coverage of a field with no unmasked samples");
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / n_bins;
}

io::json to_json(const StokesField& f) {
  io::json j;
  j["nx"] = f.nx;
  j["ny"] = f.ny;
  j["half_extent_w"] = f.half_extent;
  j["waist"] = f.waist;
  io::json xs = io::json::array(), ys = io::json::array();
  for (int i = 0; i < f.nx; ++i) xs.push_back(f.x(i));
  for (int k = 0; k < f.ny; ++k) ys.push_back(f.y(k));
  j["x"] = std::move(xs);
  j["y"] = std::move(ys);
  const char* names[] = {"S0", "S1", "S2", "S3"};
  std::array<io::json, 4> arrays;
  for (auto& a : arrays) a = io::json::array();
  for (int k = 0; k < f.ny; ++k)
    for (int i = 0; i < f.nx; ++i) {
      const auto s = f.physical(i, k);
      for (int c = 0; c < 4; ++c) arrays[static_cast<std::size_t>(c)].push_back(s[static_cast<std::size_t>(c)]);
    }
  for (int c = 0; c < 4; ++c) j[names[c]] = std::move(arrays[static_cast<std::size_t>(c)]);
  return j;
}

io::json to_json(const SkyrmeResult& r) {
  return {{"N", r.n}, {"estimator", to_string(r.estimator)}, {"residual", r.residual}, {"masked_cells", r.masked_cells}};
}

std::string to_csv(const StokesField& f) {
  std::ostringstream out;
  out << "x,y,S0,S1,S2,S3\n";
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      const auto s = f.physical(i, j);
      out << io::format_double(f.x(i)) << ',' << io::format_double(f.y(j));
      for (double v : s) out << ',' << io::format_double(v);
      out << '\n';
    }
  return out.str();
}

}  // namespace qsky::topology
