#pragma once

// GHZ-like states spread over wavelength, polarization and OAM of two
// photons: wavelength-selective conversion of the unresolved pair, the
// three heralding projections, and the map to logical qubits.

#include <optional>
#include <string>
#include <vector>

#include "qsky/device.hpp"
#include "qsky/hilbert.hpp"

namespace qsky::ghz {

using hilbert::Complex;

/// (|l,lambda1>_A|-l,lambda2>_B + |l,lambda2>_A|-l,lambda1>_B)/sqrt2, both R.
hilbert::PureState ghz_source(int ell);
/// sum_l gamma_l times the two-branch pair above. ValidationError unless
/// sum |gamma_l|^2 = 1.
hilbert::PureState ghz_source(const std::vector<std::pair<int, Complex>>& gamma);

struct PrepareOptions {
  device::QPlateOptions qplate{};
  bool force = false;  // skip the operating-point guard
};

/// Wavelength-selective conversion on both photons. Unless forced, throws
/// ValidationError ("GHZ operating point not met") when
/// eta(lambda1) < 1 - 1e-6 or eta(lambda2) > 1e-6.
hilbert::PureState ghz_prepare(const hilbert::PureState& source, device::EtaByWavelength eta,
                               const PrepareOptions& opt = {});
hilbert::PureState ghz_prepare(const hilbert::PureState& source, const device::DeviceParams& params, double voltage,
                               const PrepareOptions& opt = {},
                               const hilbert::WavelengthConfig& wl = {});

bool operating_point_met(device::EtaByWavelength eta);

struct Heralded {
  std::optional<hilbert::PureState> state;
  double probability = 0.0;
  std::vector<std::string> warnings;
};

/// Photon A's OAM onto (|l> + |l-2>)/sqrt2, then its wavelength onto
/// (|lambda1> + |lambda2>)/sqrt2, then photon B's polarization onto
/// (|R> + |L>)/sqrt2. Each projected field is removed from the labels.
/// Without `ell`, l is read off photon A's OAM support: the pair {l, l-2}
/// itself, or else the pair carrying the most weight. A warning is recorded
/// when the support extends beyond the chosen pair.
Heralded ghz_project(const hilbert::PureState& state, std::optional<int> ell = std::nullopt);

/// Logical qubit: one field of one photon with the values read as 0 and 1.
struct QubitMap {
  hilbert::Photon photon = hilbert::Photon::A;
  hilbert::Dof dof = hilbert::Dof::pol;
  int zero = 0;
  int one = 1;
};

/// Amplitudes over 2^n computational states; map[0] is the most
/// significant bit.
struct QubitRegister {
  std::vector<QubitMap> map;
  Eigen::VectorXcd amplitudes;

  int n_qubits() const { return static_cast<int>(map.size()); }
};

/// Throws ValidationError when a ket carries a field no map covers or a
/// value outside {zero, one}, or when two maps address the same field.
QubitRegister logical_map(const hilbert::PureState& state, const std::vector<QubitMap>& map);

/// Mapping for the heralded state: A polarization (R, L), B wavelength
/// (lambda1, lambda2), B OAM (-l-2, -l).
std::vector<QubitMap> heralded_mapping(int ell);

/// |<GHZ|psi>|^2 / <psi|psi> against (|000> + |111>)/sqrt2.
double ghz_fidelity(const QubitRegister& reg);
/// <GHZ|rho|GHZ> for an 8x8 density matrix.
double ghz_fidelity(const Eigen::MatrixXcd& rho);

/// Reduced density matrix of the listed qubits (in the given order).
Eigen::MatrixXcd qubit_marginal(const QubitRegister& reg, const std::vector<int>& keep);

/// Reduced state of one photon's wavelength.
hilbert::DensityMatrix wavelength_marginal(const hilbert::PureState& state,
                                           hilbert::Photon photon = hilbert::Photon::A);

}  // namespace qsky::ghz
