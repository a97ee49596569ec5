#pragma once

// Parametric model of the electrically tuned q-plate: retardation versus
// voltage and wavelength, conversion efficiency, and the spin-orbit
// unitary acting on one photon's (polarization, OAM) labels.

#include <istream>
#include <string>
#include <vector>

#include "qsky/hilbert.hpp"

namespace qsky::device {

/// Phase of the converted component. `unitary_i` uses the symmetric
/// i*sqrt(eta) coupling; `paper` drops the i (real rotation, the L input
/// picks up the minus sign so the map stays unitary).
enum class PhaseConvention { unitary_i, paper };

std::string to_string(PhaseConvention c);
PhaseConvention parse_phase_convention(const std::string& s);

struct RetardationPoint {
  double voltage = 0.0;
  double delta_rad = 0.0;  // at the reference wavelength
};

struct DeviceParams {
  int q_charge = 1;
  double thickness_um = 10.0;
  double v_threshold = 2.0;
  double v_full_1550 = 4.7;
  double reference_nm = 1550.0;
  /// Optional override; empty means the linear ramp
  /// delta = pi (V - v_threshold) / (v_full_1550 - v_threshold).
  std::vector<RetardationPoint> table;

  void validate() const;
};

/// Retardation in radians. Throws ValidationError for V < 0.
double retardation(double voltage, double lambda_nm, const DeviceParams& p);

/// eta = sin^2(delta / 2).
double conversion_efficiency(double voltage, double lambda_nm, const DeviceParams& p);

struct EtaPoint {
  double voltage = 0.0;
  double wavelength_nm = 0.0;
  double eta = 0.0;
};

EtaPoint eta_point(double voltage, double lambda_nm, const DeviceParams& p);

/// CSV with header `voltage_V,delta_rad_at_1550nm`, strictly increasing
/// voltages and non-decreasing retardation.
std::vector<RetardationPoint> parse_retardation_table(std::istream& in);
std::vector<RetardationPoint> load_retardation_table(const std::string& path);

struct QPlateOptions {
  PhaseConvention convention = PhaseConvention::unitary_i;
  int q = 1;
  int ell_max = kDefaultEllMax;
  bool inverse = false;
};

/// Efficiency per wavelength channel, for states that still carry both.
struct EtaByWavelength {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

/// |l,R> -> sqrt(1-eta)|l,R> + i sqrt(eta)|l-2q,L>
/// |l,L> -> sqrt(1-eta)|l,L> + i sqrt(eta)|l+2q,R>
/// on the addressed photon. TruncationError when a populated output would
/// leave |l| <= ell_max.
hilbert::PureState apply_qplate(const hilbert::PureState& s, hilbert::Photon photon, double eta,
                                const QPlateOptions& opt = {});

/// Wavelength-selective version: each ket uses the efficiency of the
/// addressed photon's wavelength label.
hilbert::PureState apply_qplate(const hilbert::PureState& s, hilbert::Photon photon,
                                EtaByWavelength eta, const QPlateOptions& opt = {});

EtaByWavelength efficiencies(double voltage, const DeviceParams& p,
                             const hilbert::WavelengthConfig& wl = {});

}  // namespace qsky::device
