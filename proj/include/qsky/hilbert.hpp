#pragma once

// Finite-dimensional state algebra over the photon degrees of freedom used
// throughout the simulator: which photon (A/B), wavelength channel,
// circular polarization and OAM index.
//
// Kets are products of one BasisLabel per photon. A label field that is
// absent (nullopt) means that degree of freedom has been contracted away,
// e.g. after heralding on a polarization outcome.

#include <Eigen/Dense>

#include <complex>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qsky/tolerances.hpp"

namespace qsky::hilbert {

using Complex = std::complex<double>;

enum class Photon : std::uint8_t { A, B };
enum class Pol : std::uint8_t { R, L };
enum class Wavelength : std::uint8_t { lambda1, lambda2 };
enum class Dof : std::uint8_t { wavelength, pol, oam };

struct OamIndex {
  int ell = 0;
  auto operator<=>(const OamIndex&) const = default;
};

/// Wavelength bookkeeping for the non-degenerate source (nm).
struct WavelengthConfig {
  double pump_nm = 532.0;
  double lambda1_nm = 1550.0;
  double lambda2_nm = 810.0;

  double nm(Wavelength w) const { return w == Wavelength::lambda1 ? lambda1_nm : lambda2_nm; }
  /// Throws ValidationError unless 1/l1 + 1/l2 = 1/l0 within 1e-6 nm^-1.
  void validate() const;
};

inline Wavelength conjugate(Wavelength w) {
  return w == Wavelength::lambda1 ? Wavelength::lambda2 : Wavelength::lambda1;
}
inline Photon partner(Photon p) { return p == Photon::A ? Photon::B : Photon::A; }

/// Single-photon label. Member order fixes the canonical ordering
/// (photon, wavelength, pol, oam).
struct BasisLabel {
  Photon photon = Photon::A;
  std::optional<Wavelength> wavelength;
  std::optional<Pol> pol;
  std::optional<OamIndex> oam;

  auto operator<=>(const BasisLabel&) const = default;
};

BasisLabel label(Photon photon, std::optional<int> ell, std::optional<Pol> pol,
                 std::optional<Wavelength> wavelength);

/// Integer encoding of a field: oam -> ell, pol -> R=0/L=1,
/// wavelength -> lambda1=0/lambda2=1.
std::optional<int> dof_value(const BasisLabel& l, Dof dof);
void set_dof(BasisLabel& l, Dof dof, std::optional<int> value);

/// One label per photon, sorted by photon.
using Ket = std::vector<BasisLabel>;

/// Sorts by photon; throws CompositionError on a repeated photon.
Ket make_ket(std::vector<BasisLabel> labels);
const BasisLabel* find_photon(const Ket& k, Photon p);

std::string to_string(Photon p);
std::string to_string(Pol p);
std::string to_string(Wavelength w);
std::string to_string(Dof d);
std::string to_string(const BasisLabel& l);
std::string to_string(const Ket& k);

/// Sparse superposition of product kets.
class PureState {
 public:
  using Terms = std::map<Ket, Complex>;

  PureState() = default;
  /// Drops amplitudes with modulus below kTol.prune_eps.
  explicit PureState(Terms terms);
  static PureState from_ket(Ket k, Complex amplitude = 1.0);

  const Terms& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }
  double norm_squared() const;
  double norm() const;
  /// Throws NumericalError for the zero vector.
  PureState normalized() const;
  PureState scaled(Complex factor) const;
  Complex amplitude(const Ket& k) const;
  std::vector<Photon> photons() const;

 private:
  Terms terms_;
};

PureState operator+(const PureState& a, const PureState& b);

/// |<a|b>|^2 style overlap <a|b>.
Complex inner(const PureState& a, const PureState& b);

/// Product of states on disjoint photons; CompositionError otherwise.
PureState tensor(const PureState& a, const PureState& b);

// ---------------------------------------------------------------------------
// Polarization settings
//
// Phase convention (fixed for the whole project):
//   H = (R + L)/sqrt2,  V = (R - L)/(i sqrt2),
//   D = (H + V)/sqrt2,  A = (H - V)/sqrt2.
// With it the Stokes operators in the (R, L) basis are exactly the Pauli
// matrices: S1 = sigma_x, S2 = sigma_y, S3 = sigma_z.

enum class PolSetting : std::uint8_t { R, L, H, V, D, A };
enum class PolBasis : std::uint8_t { circular, linear, diagonal };

Eigen::Vector2cd pol_vector(PolSetting s);
std::string to_string(PolSetting s);
/// Throws ValidationError on unknown names.
PolSetting parse_pol_setting(const std::string& s);

/// Columns are the two basis states in (R, L) coordinates.
Eigen::Matrix2cd basis_matrix(PolBasis b);
Eigen::Vector2cd convert_amplitudes(const Eigen::Vector2cd& amps, PolBasis from, PolBasis to);

// ---------------------------------------------------------------------------
// Projectors

/// Where a projector acts when applied to a labelled state: one degree of
/// freedom of one photon, restricted to the listed values (the declared
/// subspace, in matrix order).
struct LocalSupport {
  Photon photon = Photon::A;
  Dof dof = Dof::pol;
  std::vector<int> values;
};

struct ProjectorOp {
  std::string id;
  std::string descriptor;
  Eigen::MatrixXcd matrix;
  std::optional<LocalSupport> support;

  /// Throws ValidationError unless Hermitian and idempotent within 1e-10.
  void validate() const;
};

/// |v><v| for a unit (after normalization) vector v.
ProjectorOp rank_one(std::string id, std::string descriptor, const Eigen::VectorXcd& v,
                     std::optional<LocalSupport> support = std::nullopt);

ProjectorOp pol_projector(Photon photon, PolSetting s);
/// Rank-one projector onto sum_i v_i |ells_i> of one photon's OAM.
ProjectorOp oam_projector(Photon photon, std::vector<int> ells, const Eigen::VectorXcd& v,
                          std::string id);
ProjectorOp wavelength_projector(Photon photon, const Eigen::Vector2cd& v, std::string id);

struct Projected {
  std::optional<PureState> state;
  double probability = 0.0;

  bool null() const { return !state.has_value(); }
};

/// Applies an arbitrary matrix on the support of one photon's degree of
/// freedom. Kets whose value lies outside the support are annihilated.
PureState apply_local(const PureState& s, const LocalSupport& support, const Eigen::MatrixXcd& m);

/// P|psi>, renormalized. probability = ||P psi||^2 / ||psi||^2. Below
/// p_floor the outcome is null and no state is returned.
Projected project(const PureState& s, const ProjectorOp& p, double p_floor = kTol.p_floor);

/// Contracts <v| on one photon's degree of freedom and removes that field
/// from the labels (conditional state of the remaining degrees of freedom).
Projected contract(const PureState& s, const LocalSupport& support, const Eigen::VectorXcd& v,
                   double p_floor = kTol.p_floor);

// ---------------------------------------------------------------------------
// Density matrices

struct DofRef {
  Photon photon = Photon::A;
  Dof dof = Dof::pol;
  auto operator<=>(const DofRef&) const = default;
};

std::string to_string(const DofRef& r);

/// Hermitian, positive semidefinite, unit-trace operator over an ordered
/// list of kets. The constructor enforces the invariants.
class DensityMatrix {
 public:
  DensityMatrix(std::vector<Ket> basis, Eigen::MatrixXcd matrix);

  const std::vector<Ket>& basis() const { return basis_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  Eigen::Index dim() const { return matrix_.rows(); }
  /// Ascending.
  Eigen::VectorXd eigenvalues() const;
  double purity() const;

 private:
  std::vector<Ket> basis_;
  Eigen::MatrixXcd matrix_;
};

/// Throws ValidationError naming the first violated invariant.
void check_density(const Eigen::MatrixXcd& m, const Tolerances& tol = kTol);
bool is_density(const Eigen::MatrixXcd& m, const Tolerances& tol = kTol);

/// Outer product over the product basis spanned by the values each
/// (photon, dof) takes in the support. Throws ValidationError if the state
/// is not normalized.
DensityMatrix density_from_pure(const PureState& s);

/// Keeps the listed degrees of freedom. Throws CompositionError if the
/// basis is not a full product over the kept/traced split.
DensityMatrix partial_trace(const DensityMatrix& rho, std::span<const DofRef> keep);

/// Matrix of the product of local projectors in the given basis.
Eigen::MatrixXcd embed(const std::vector<Ket>& basis, std::span<const ProjectorOp> ops);
/// Tr[(P_1 ... P_n) rho]; projectors must address distinct (photon, dof).
double expectation(const DensityMatrix& rho, std::span<const ProjectorOp> ops);

Eigen::MatrixXcd sqrtm_psd(const Eigen::MatrixXcd& m);
/// Uhlmann fidelity [Tr sqrt(sqrt(t) r sqrt(t))]^2.
double fidelity(const Eigen::MatrixXcd& rho, const Eigen::MatrixXcd& target);
/// Same basis required; CompositionError otherwise.
double fidelity(const DensityMatrix& rho, const DensityMatrix& target);
double trace_distance(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace qsky::hilbert
