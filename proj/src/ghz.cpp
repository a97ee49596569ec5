#include "qsky/ghz.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "qsky/error.hpp"

namespace qsky::ghz {

using hilbert::BasisLabel;
using hilbert::Dof;
using hilbert::Ket;
using hilbert::Photon;
using hilbert::Pol;
using hilbert::PureState;
using hilbert::Wavelength;

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

PureState pair_branches(int ell) {
  auto ket = [ell](Wavelength wa) {
    return hilbert::make_ket({hilbert::label(Photon::A, ell, Pol::R, wa),
                              hilbert::label(Photon::B, -ell, Pol::R, hilbert::conjugate(wa))});
  };
  PureState::Terms t;
  t[ket(Wavelength::lambda1)] = kInvSqrt2;
  t[ket(Wavelength::lambda2)] = kInvSqrt2;
  return PureState(std::move(t));
}

std::set<int> oam_support(const PureState& s, Photon p) {
  std::set<int> out;
  for (const auto& [k, a] : s.terms())
    if (const auto* l = hilbert::find_photon(k, p); l && l->oam) out.insert(l->oam->ell);
  return out;
}

std::string list(const std::set<int>& v) {
  std::string out = "{";
  for (int x : v) out += (out.size() > 1 ? "," : "") + std::to_string(x);
  return out + "}";
}

}  // namespace

PureState ghz_source(int ell) { return pair_branches(ell); }

PureState ghz_source(const std::vector<std::pair<int, Complex>>& gamma) {
  double total = 0.0;
  PureState out;
  for (const auto& [ell, g] : gamma) {
    total += std::norm(g);
    out = out + pair_branches(ell).scaled(g);
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw ValidationError("GHZ amplitudes must satisfy sum |gamma_l|^2 = 1 (got " + std::to_string(total) + ")");
  return out;
}

bool operating_point_met(device::EtaByWavelength eta) {
  return eta.lambda1 >= 1.0 - 1e-6 && eta.lambda2 <= 1e-6;
}

PureState ghz_prepare(const PureState& source, device::EtaByWavelength eta, const PrepareOptions& opt) {
  if (!opt.force && !operating_point_met(eta))
    throw ValidationError("GHZ operating point not met: eta(lambda1) = " + std::to_string(eta.lambda1) +
                          ", eta(lambda2) = " + std::to_string(eta.lambda2) + " (need 1 and 0)");
  std::set<Wavelength> seen;
  for (const auto& [k, a] : source.terms())
    if (const auto* l = hilbert::find_photon(k, Photon::A); l && l->wavelength) seen.insert(*l->wavelength);
  if (seen.size() != 2)
    throw ValidationError("GHZ preparation needs both wavelength branches; the source looks dichroic-resolved");
  PureState s = device::apply_qplate(source, Photon::A, eta, opt.qplate);
  return device::apply_qplate(s, Photon::B, eta, opt.qplate);
}

PureState ghz_prepare(const PureState& source, const device::DeviceParams& params, double voltage,
                      const PrepareOptions& opt, const hilbert::WavelengthConfig& wl) {
  return ghz_prepare(source, device::efficiencies(voltage, params, wl), opt);
}

Heralded ghz_project(const PureState& state, std::optional<int> ell) {
  Heralded out;
  const auto support = oam_support(state, Photon::A);
  if (support.empty()) throw CompositionError("GHZ projection needs photon A's OAM");
  int l = 0;
  if (ell) {
    l = *ell;
  } else if (support.size() == 2 && *support.rbegin() - *support.begin() == 2) {
    l = *support.rbegin();
  } else {
    // Pick the pair {l, l-2} carrying the most weight.
    std::map<int, double> weight;
    for (const auto& [k, a] : state.terms()) weight[hilbert::find_photon(k, Photon::A)->oam->ell] += std::norm(a);
    double best = -1.0;
    for (int cand : support) {
      const double w = weight[cand] + (weight.count(cand - 2) ? weight[cand - 2] : 0.0);
      if (w >= best) {
        best = w;
        l = cand;
      }
    }
  }
  for (int v : support)
    if (v != l && v != l - 2) {
      out.warnings.push_back("photon A's OAM support " + list(support) + " extends beyond {" + std::to_string(l) +
                             "," + std::to_string(l - 2) + "}; only that pair is projected");
      break;
    }

  const Eigen::Vector2cd plus(kInvSqrt2, kInvSqrt2);
  auto r1 = hilbert::contract(state, {Photon::A, Dof::oam, {l, l - 2}}, plus);
  if (r1.null()) return out;
  auto r2 = hilbert::contract(*r1.state, {Photon::A, Dof::wavelength, {0, 1}}, plus);
  if (r2.null()) return out;
  auto r3 = hilbert::contract(*r2.state, {Photon::B, Dof::pol, {0, 1}}, plus);
  if (r3.null()) return out;
  out.state = std::move(r3.state);
  out.probability = r1.probability * r2.probability * r3.probability;
  return out;
}

QubitRegister logical_map(const PureState& state, const std::vector<QubitMap>& map) {
  std::set<std::pair<Photon, Dof>> fields;
  for (const auto& m : map)
    if (!fields.insert({m.photon, m.dof}).second)
      throw ValidationError("logical map addresses " + hilbert::to_string(m.dof) + " of photon " +
                            hilbert::to_string(m.photon) + " twice");
  QubitRegister reg{map, Eigen::VectorXcd::Zero(Eigen::Index{1} << map.size())};
  for (const auto& [k, a] : state.terms()) {
    for (const auto& l : k)
      for (Dof d : {Dof::wavelength, Dof::pol, Dof::oam})
        if (hilbert::dof_value(l, d) && !fields.count({l.photon, d}))
          throw ValidationError("unmapped " + hilbert::to_string(d) + " label on photon " +
                                hilbert::to_string(l.photon) + " in ket " + hilbert::to_string(k));
    Eigen::Index idx = 0;
    for (const auto& m : map) {
      const auto* l = hilbert::find_photon(k, m.photon);
      const auto v = l ? hilbert::dof_value(*l, m.dof) : std::nullopt;
      if (!v)
        throw ValidationError("ket " + hilbert::to_string(k) + " lacks the mapped " + hilbert::to_string(m.dof) +
                              " of photon " + hilbert::to_string(m.photon));
      if (*v != m.zero && *v != m.one)
        throw ValidationError("value " + std::to_string(*v) + " of " + hilbert::to_string(m.dof) + " on photon " +
                              hilbert::to_string(m.photon) + " is outside the logical map");
      idx = 2 * idx + (*v == m.one ? 1 : 0);
    }
    reg.amplitudes(idx) += a;
  }
  return reg;
}

std::vector<QubitMap> heralded_mapping(int ell) {
  return {{Photon::A, Dof::pol, 0, 1}, {Photon::B, Dof::wavelength, 0, 1}, {Photon::B, Dof::oam, -ell - 2, -ell}};
}

double ghz_fidelity(const QubitRegister& reg) {
  if (reg.n_qubits() != 3)
    throw ValidationError("GHZ fidelity needs 3 qubits, got " + std::to_string(reg.n_qubits()));
  const double n2 = reg.amplitudes.squaredNorm();
  if (n2 == 0.0) throw NumericalError("GHZ fidelity of the zero vector");
  return std::norm(kInvSqrt2 * (reg.amplitudes(0) + reg.amplitudes(7))) / n2;
}

double ghz_fidelity(const Eigen::MatrixXcd& rho) {
  if (rho.rows() != 8 || rho.cols() != 8)
    throw ValidationError("GHZ fidelity needs an 8x8 matrix, got " + std::to_string(rho.rows()) + "x" +
                          std::to_string(rho.cols()));
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(8);
  g(0) = g(7) = kInvSqrt2;
  return (g.adjoint() * rho * g)(0).real();
}

Eigen::MatrixXcd qubit_marginal(const QubitRegister& reg, const std::vector<int>& keep) {
  const int n = reg.n_qubits();
  for (int q : keep)
    if (q < 0 || q >= n) throw ValidationError("qubit index " + std::to_string(q) + " out of range");
  const Eigen::Index dk = Eigen::Index{1} << keep.size();
  const Eigen::VectorXcd psi = reg.amplitudes / reg.amplitudes.norm();
  auto bit = [n](Eigen::Index idx, int q) { return (idx >> (n - 1 - q)) & 1; };
  auto kept = [&](Eigen::Index idx) {
    Eigen::Index r = 0;
    for (int q : keep) r = 2 * r + bit(idx, q);
    return r;
  };
  auto rest = [&](Eigen::Index idx) {
    Eigen::Index r = 0;
    for (int q = 0; q < n; ++q)
      if (std::find(keep.begin(), keep.end(), q) == keep.end()) r = 2 * r + bit(idx, q);
    return r;
  };
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dk, dk);
  for (Eigen::Index i = 0; i < psi.size(); ++i)
    for (Eigen::Index j = 0; j < psi.size(); ++j)
      if (rest(i) == rest(j)) out(kept(i), kept(j)) += psi(i) * std::conj(psi(j));
  return out;
}

hilbert::DensityMatrix wavelength_marginal(const PureState& state, Photon photon) {
  const hilbert::DofRef keep[] = {{photon, Dof::wavelength}};
  return hilbert::partial_trace(hilbert::density_from_pure(state.normalized()), keep);
}

}  // namespace qsky::ghz
