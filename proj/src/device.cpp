#include "qsky/device.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qsky/error.hpp"

namespace qsky::device {

using hilbert::Complex;
using hilbert::Photon;
using hilbert::Pol;
using hilbert::PureState;

std::string to_string(PhaseConvention c) { return c == PhaseConvention::paper ? "paper" : "unitary_i"; }

PhaseConvention parse_phase_convention(const std::string& s) {
  if (s == "paper") return PhaseConvention::paper;
  if (s == "unitary_i" || s == "unitary-i") return PhaseConvention::unitary_i;
  throw ValidationError("unknown phase convention '" + s + "'");
}

void DeviceParams::validate() const {
  if (q_charge == 0) throw ValidationError("q-plate charge must be non-zero");
  if (thickness_um <= 0) throw ValidationError("device thickness must be positive");
  if (v_threshold < 0) throw ValidationError("threshold voltage must be non-negative");
  if (v_full_1550 <= v_threshold) throw ValidationError("full-conversion voltage must exceed threshold");
  if (reference_nm <= 0) throw ValidationError("reference wavelength must be positive");
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].delta_rad < 0) throw ValidationError("retardation table has a negative entry");
    if (i > 0 && !(table[i].voltage > table[i - 1].voltage))
      throw ValidationError("retardation table voltages must be strictly increasing");
    if (i > 0 && table[i].delta_rad < table[i - 1].delta_rad)
      throw ValidationError("retardation table must be non-decreasing in voltage");
  }
}

double retardation(double voltage, double lambda_nm, const DeviceParams& p) {
  if (!(voltage >= 0)) throw ValidationError("voltage must be non-negative");
  if (!(lambda_nm > 0)) throw ValidationError("wavelength must be positive");
  double delta_ref = 0.0;
  if (p.table.empty()) {
    if (voltage > p.v_threshold)
      delta_ref = std::numbers::pi * (voltage - p.v_threshold) / (p.v_full_1550 - p.v_threshold);
  } else if (voltage <= p.table.front().voltage) {
    delta_ref = p.table.front().delta_rad;
  } else if (voltage >= p.table.back().voltage) {
    delta_ref = p.table.back().delta_rad;
  } else {
    for (std::size_t i = 1; i < p.table.size(); ++i) {
      if (voltage <= p.table[i].voltage) {
        const auto& a = p.table[i - 1];
        const auto& b = p.table[i];
        const double t = (voltage - a.voltage) / (b.voltage - a.voltage);
        delta_ref = a.delta_rad + t * (b.delta_rad - a.delta_rad);
        break;
      }
    }
  }
  return delta_ref * (p.reference_nm / lambda_nm);
}

double conversion_efficiency(double voltage, double lambda_nm, const DeviceParams& p) {
  const double s = std::sin(0.5 * retardation(voltage, lambda_nm, p));
  return s * s;
}

EtaPoint eta_point(double voltage, double lambda_nm, const DeviceParams& p) {
  return {voltage, lambda_nm, conversion_efficiency(voltage, lambda_nm, p)};
}

std::vector<RetardationPoint> parse_retardation_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("retardation table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "voltage_V,delta_rad_at_1550nm")
    throw ValidationError("retardation table header must be 'voltage_V,delta_rad_at_1550nm'");
  std::vector<RetardationPoint> out;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    RetardationPoint p;
    char comma = 0;
    if (!(ls >> p.voltage >> comma >> p.delta_rad) || comma != ',')
      throw ValidationError("retardation table row " + std::to_string(row) + " is malformed");
    out.push_back(p);
  }
  DeviceParams check;
  check.table = out;
  check.validate();
  return out;
}

std::vector<RetardationPoint> load_retardation_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open retardation table '" + path + "'");
  return parse_retardation_table(in);
}

namespace {

// 2x2 coupling on the pair (|l,R>, |l-2q,L>), columns = inputs.
Eigen::Matrix2cd coupling(double eta, const QPlateOptions& opt) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("conversion efficiency must lie in [0, 1]");
  const double c = std::sqrt(1.0 - eta);
  const double s = std::sqrt(eta);
  Eigen::Matrix2cd u;
  if (opt.convention == PhaseConvention::unitary_i)
    u << c, Complex(0, s), Complex(0, s), c;
  else
    u << c, -s, s, c;
  if (opt.inverse) return u.adjoint();
  return u;
}

template <typename EtaFor>
PureState apply(const PureState& s, Photon photon, const QPlateOptions& opt, EtaFor&& eta_for) {
  PureState::Terms out;
  const int shift = 2 * opt.q;
  for (const auto& [k, a] : s.terms()) {
    const hilbert::BasisLabel* l = hilbert::find_photon(k, photon);
    if (!l || !l->pol || !l->oam)
      throw CompositionError("q-plate addresses photon " + hilbert::to_string(photon) +
                             " without polarization and OAM in ket " + hilbert::to_string(k));
    const Eigen::Matrix2cd u = coupling(eta_for(*l), opt);
    const int ell = l->oam->ell;
    // Index 0 = |l_R, R>, index 1 = |l_R - 2q, L>.
    const int col = *l->pol == Pol::R ? 0 : 1;
    const int ell_r = *l->pol == Pol::R ? ell : ell + shift;
    for (int row = 0; row < 2; ++row) {
      const Complex c = u(row, col);
      if (c == Complex{}) continue;
      const int new_ell = row == 0 ? ell_r : ell_r - shift;
      if (std::abs(new_ell) > opt.ell_max)
        throw TruncationError("q-plate output |l| = " + std::to_string(std::abs(new_ell)) +
                              " exceeds ell_max = " + std::to_string(opt.ell_max));
      hilbert::Ket nk = k;
      for (auto& nl : nk)
        if (nl.photon == photon) {
          nl.pol = row == 0 ? Pol::R : Pol::L;
          nl.oam = hilbert::OamIndex{new_ell};
        }
      out[nk] += c * a;
    }
  }
  return PureState(std::move(out));
}

}  // namespace

PureState apply_qplate(const PureState& s, Photon photon, double eta, const QPlateOptions& opt) {
  coupling(eta, opt);
  return apply(s, photon, opt, [eta](const hilbert::BasisLabel&) { return eta; });
}

PureState apply_qplate(const PureState& s, Photon photon, EtaByWavelength eta,
                       const QPlateOptions& opt) {
  coupling(eta.lambda1, opt);
  coupling(eta.lambda2, opt);
  return apply(s, photon, opt, [&](const hilbert::BasisLabel& l) {
    if (!l.wavelength)
      throw CompositionError("wavelength-selective q-plate needs a wavelength label on " +
                             hilbert::to_string(l));
    return *l.wavelength == hilbert::Wavelength::lambda1 ? eta.lambda1 : eta.lambda2;
  });
}

EtaByWavelength efficiencies(double voltage, const DeviceParams& p, const hilbert::WavelengthConfig& wl) {
  return {conversion_efficiency(voltage, wl.lambda1_nm, p), conversion_efficiency(voltage, wl.lambda2_nm, p)};
}

}  // namespace qsky::device
