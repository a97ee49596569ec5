#pragma once

// Projective tomography of one or two qubits encoded in photon degrees of
// freedom: projector sets, count normalization, linear inversion, PSD
// projection and projected-gradient refinement of the least-squares cost.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsky/experiment.hpp"
#include "qsky/hilbert.hpp"

namespace qsky::tomography {

enum class SetKind { polarization6, oam6_pm2, oam6_m2m4, hybrid36, oam36_pm2 };

std::string to_string(SetKind k);
SetKind parse_set_kind(const std::string& s);

/// One encoded qubit: a degree of freedom of one photon and the two values
/// taken as |0> and |1>.
struct QubitSlot {
  hilbert::Photon photon = hilbert::Photon::A;
  hilbert::Dof dof = hilbert::Dof::pol;
  int zero = 0;
  int one = 1;
};

struct ProjectorEntry {
  std::string setting_a;
  std::string setting_b;  // empty for single-qubit sets
  Eigen::MatrixXcd matrix;  // in the set basis
  int group = 0;            // which product of local bases it belongs to

  std::string id() const { return setting_b.empty() ? setting_a : setting_a + "|" + setting_b; }
};

/// Qubit index i maps to basis[i]; for two qubits index = 2 i1 + i2.
struct ProjectorSet {
  SetKind kind = SetKind::polarization6;
  std::vector<QubitSlot> slots;
  std::vector<hilbert::Ket> basis;
  std::vector<ProjectorEntry> entries;

  Eigen::Index dim() const { return static_cast<Eigen::Index>(basis.size()); }
  int n_groups() const;
  /// Index of the entry with the given ids, or nullopt.
  std::optional<std::size_t> find(const std::string& a, const std::string& b) const;
};

/// polarization6 and the oam6 variants act on one slot (photon `first`);
/// hybrid36 puts polarization on `first` and OAM {-2,-4} on `second`;
/// oam36_pm2 is OAM {-2,+2} on both. `first == second` is allowed.
///
/// Setting ids: R L H V D A for polarization; m2 m4 p2 for the OAM basis
/// kets; s0 s90 s180 s270 for (|first> + e^{i phi}|second>)/sqrt2.
ProjectorSet projector_set(SetKind kind, hilbert::Photon first = hilbert::Photon::A,
                           hilbert::Photon second = hilbert::Photon::B);

/// Rank of the Gram matrix Tr(M_i M_j); d^2 for an informationally
/// complete set.
int gram_rank(const ProjectorSet& set);

/// Re-expresses rho (any basis carrying the set's slots) in the set basis,
/// tracing out every other degree of freedom.
hilbert::DensityMatrix to_set_basis(const hilbert::DensityMatrix& rho, const ProjectorSet& set);

struct TomoProblem {
  ProjectorSet set;
  Eigen::VectorXd p;        // estimates of Tr(M_i rho), entry order
  Eigen::VectorXd weights;  // least-squares weights, mean 1
};

/// p_i = Tr(M_i rho), clipped at 0. ValidationError on a dimension mismatch.
TomoProblem probabilities_from_state(const Eigen::MatrixXcd& rho, const ProjectorSet& set);

enum class Normalization { grand_total, per_group };

struct ReconstructOptions {
  Normalization normalization = Normalization::grand_total;
  bool variance_weighting = false;
  bool refine = true;
  int max_iterations = 500;
  double tolerance = 1e-10;
};

/// Counts matched to entries by setting id, normalized to estimates of
/// Tr(M_i rho). grand_total scales C_i / sum C by Tr(sum M)/d; per_group
/// normalizes each measurement group to 1. ValidationError listing any
/// entry without a record.
TomoProblem problem_from_counts(std::span<const experiment::CountRecord> counts,
                                const ProjectorSet& set, const ReconstructOptions& opt = {});

struct LinearInversion {
  Eigen::MatrixXcd h;  // Hermitian, unit trace, possibly indefinite
  double residual = 0.0;
};

/// Weighted least squares over Hermitian unit-trace H. NumericalError
/// naming the unconstrained Pauli directions if the design is rank
/// deficient.
LinearInversion linear_inversion(const TomoProblem& problem);

/// Nearest unit-trace PSD matrix in Frobenius norm: eigenvalues are clipped
/// at zero and the excess taken uniformly from the remaining positive ones
/// until none is negative.
Eigen::MatrixXcd project_psd(const Eigen::MatrixXcd& h);
hilbert::DensityMatrix project_psd(const Eigen::MatrixXcd& h, std::vector<hilbert::Ket> basis);

/// sum_i w_i (p_i - Tr(M_i rho))^2
double chi2(const TomoProblem& problem, const Eigen::MatrixXcd& rho);

struct Reconstruction {
  hilbert::DensityMatrix rho;
  double chi2_linear = 0.0;  // after PSD projection, before refinement
  double chi2 = 0.0;
  int iterations = 0;
  double residual = 0.0;  // of the linear inversion
  Eigen::VectorXd eigenvalues;
};

Reconstruction reconstruct(const TomoProblem& problem, const ReconstructOptions& opt = {});
Reconstruction reconstruct(std::span<const experiment::CountRecord> counts, const ProjectorSet& set,
                           const ReconstructOptions& opt = {});

/// t(mu, nu) = Tr[rho (sigma_mu x sigma_nu)] / 4 with sigma_0 = I, so that
/// rho = sum t(mu, nu) sigma_mu x sigma_nu. b() is the correlation block
/// mu, nu >= 1.
struct PauliCoefficients {
  Eigen::Matrix4d t;
  Eigen::Matrix3d b() const { return t.bottomRightCorner<3, 3>(); }
};

PauliCoefficients pauli_coefficients(const Eigen::MatrixXcd& rho);
Eigen::MatrixXcd from_pauli(const PauliCoefficients& c);

/// Reads the count CSV and checks every row against the set: unknown
/// setting ids, negative counts and duplicate settings are rejected with
/// the offending line number.
std::vector<experiment::CountRecord> ingest_counts(std::istream& in, const ProjectorSet& set);
std::vector<experiment::CountRecord> ingest_counts(const std::string& path, const ProjectorSet& set);

/// One Poisson record per entry, each with a seed derived from `seed` and
/// the entry id.
std::vector<experiment::CountRecord> simulate_tomography(const Eigen::MatrixXcd& rho,
                                                         const ProjectorSet& set,
                                                         const experiment::CountModel& model,
                                                         std::uint64_t seed);

}  // namespace qsky::tomography
