#pragma once

// Optical pipeline: SPDC source, dichroic wavelength resolution, single-mode
// fibre projection, polarization heralding, coincidence statistics, CHSH.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qsky/hilbert.hpp"

namespace qsky::experiment {

using hilbert::Complex;

/// Joint amplitudes c_{l,k}: photon A at OAM l and wavelength lambda_k,
/// photon B at -l and the conjugate wavelength. k is 1 or 2.
struct SourceSpectrum {
  std::map<std::pair<int, int>, Complex> c;
  int ell_max = kDefaultEllMax;
  double sigma_l = 0.0;

  /// Equal weights over ells x ks.
  static SourceSpectrum uniform(const std::vector<int>& ells, const std::vector<int>& ks = {1, 2},
                                int ell_max = kDefaultEllMax);
  /// exp(-l^2 / (4 sigma^2)) amplitude envelope over |l| <= ell_max, equal
  /// over ks.
  static SourceSpectrum gaussian(double sigma_l, int ell_max = kDefaultEllMax,
                                 const std::vector<int>& ks = {1, 2});

  /// Throws ValidationError unless sum |c|^2 = 1 (1e-10) with |l| <= ell_max.
  void validate() const;
};

/// sum c_{l,k} |l,pol,lambda_k>_A |-l,pol,conj(lambda_k)>_B.
hilbert::PureState spdc_state(const SourceSpectrum& spec, hilbert::Pol pol = hilbert::Pol::R);

/// Which wavelength arm each photon ends up in after the dichroic.
enum class ArmAssignment { a_lambda1, a_lambda2 };

/// Branch {A: lambda1, B: lambda2} (or the swap), renormalized.
hilbert::Projected resolve_wavelength(const hilbert::PureState& s,
                                      ArmAssignment arms = ArmAssignment::a_lambda1);

/// Collapses the addressed photon onto the l = 0 fibre mode.
hilbert::Projected smf_project(const hilbert::PureState& s, hilbert::Photon photon);

/// Polarization measurement on `photon`; returns the conditional state of
/// the remaining degrees of freedom (the measured field is dropped).
hilbert::Projected herald(const hilbert::PureState& s, hilbert::Photon photon,
                          hilbert::PolSetting outcome);

/// Tr[(P_a (x) P_b) rho]. CompositionError if both address the same
/// (photon, dof).
double coincidence_probability(const hilbert::PureState& s, const hilbert::ProjectorOp& a,
                               const hilbert::ProjectorOp& b);
double coincidence_probability(const hilbert::DensityMatrix& rho, const hilbert::ProjectorOp& a,
                               const hilbert::ProjectorOp& b);

// ---------------------------------------------------------------------------
// Counting

struct CountRecord {
  std::string setting_a;
  std::string setting_b;
  std::int64_t counts = 0;
  double integration_s = 0.0;
  double window_ns = 3.0;
  std::uint64_t seed = 0;
};

struct CountModel {
  double rate_max = 2000.0;  // coincidences/s at p = 1
  double integration_s = 1.0;
  double accidental_rate = 0.0;  // flat, per setting
  double window_ns = 3.0;

  void validate() const;
};

/// Poisson(p * rate_max * t + accidental_rate * t), reproducible from seed.
CountRecord simulate_counts(double p, const CountModel& model, std::uint64_t seed,
                            std::string setting_a = {}, std::string setting_b = {});

/// Stable 64-bit string hash (FNV-1a).
std::uint64_t hash_string(std::string_view s);
/// Mixes a master seed with stream identifiers (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// `setting_a,setting_b,counts,integration_s,window_ns,seed`
void write_counts_csv(std::ostream& out, std::span<const CountRecord> records);
/// Parses the schema; semantic checks against a projector set live in
/// tomography::ingest_counts. `lines` receives the file line of each record.
std::vector<CountRecord> read_counts_csv(std::istream& in, std::vector<int>* lines = nullptr);

// ---------------------------------------------------------------------------
// CHSH in the l = +-2 subspace

/// (|+2> + e^{2 i theta}|-2>)/sqrt2 on the addressed photon's OAM. The
/// orthogonal outcome is theta + pi/2.
hilbert::ProjectorOp chsh_projector(hilbert::Photon photon, double theta);

/// Probabilities or counts for (theta_a, theta_b), (theta_a, theta_b + pi/2),
/// (theta_a + pi/2, theta_b), (theta_a + pi/2, theta_b + pi/2).
struct OutcomeQuad {
  double pp = 0, pm = 0, mp = 0, mm = 0;
};

/// E = (pp + mm - pm - mp) / (pp + mm + pm + mp). NumericalError on an
/// all-zero quad.
double correlation(const OutcomeQuad& q);

struct ChshAngles {
  double a = 0.0;
  double a2 = std::numbers::pi / 4;
  double b = std::numbers::pi / 8;
  double b2 = 3 * std::numbers::pi / 8;
};

/// Order: (a,b), (a,b2), (a2,b), (a2,b2).
using ChshInputs = std::array<OutcomeQuad, 4>;

/// S = E(a,b) - E(a,b2) + E(a2,b) + E(a2,b2).
double chsh(const ChshInputs& q);
/// Same, from a flat list of 16 values in the order above. ValidationError
/// unless exactly 16 are given.
double chsh(std::span<const double> sixteen);

ChshInputs chsh_probabilities(const hilbert::DensityMatrix& rho, const ChshAngles& angles = {});
/// Per-setting Poisson simulation, each quad entry with its own derived seed.
ChshInputs chsh_counts(const hilbert::DensityMatrix& rho, const CountModel& model,
                       std::uint64_t seed, const ChshAngles& angles = {},
                       std::vector<CountRecord>* records = nullptr);

/// C(theta_a, theta_b) for the +/+ outcome.
double chsh_coincidence(const hilbert::DensityMatrix& rho, double theta_a, double theta_b);

/// Max |S| over theta_a pairs from {0, pi/8, pi/4, 3pi/8} and theta_b pairs
/// from an n-point scan of [0, pi).
double chsh_max_scan(const hilbert::DensityMatrix& rho, int n_theta_b = 64);

/// (|2,-2> + |-2,2>)/sqrt2 on the OAM labels of photons A and B.
hilbert::PureState oam_bell_state();
/// v |Bell><Bell| + (1 - v) I/4 over the same 4-dim basis.
hilbert::DensityMatrix werner_state(double visibility);

}  // namespace qsky::experiment
