#pragma once

// Transverse Stokes fields of spin-orbit states built from radial-order-0
// Laguerre-Gauss modes, and the topological invariants of the normalized
// field: Skyrme number (two discretizations) and Poincare-sphere coverage.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qsky/hilbert.hpp"
#include "qsky/io.hpp"

namespace qsky::topology {

using hilbert::Complex;

/// Basis index n -> OAM l_n. Waist in grid units.
struct ModeMap {
  std::vector<int> ells;
  double waist = 1.0;

  void validate() const;
};

/// Cell-centered grid over [-h, h]^2 with h = half_extent * waist.
/// half_extent = 0 selects the extent automatically from the state.
struct GridSpec {
  int nx = 256;
  int ny = 256;
  double half_extent = 0.0;

  void validate() const;
};

/// sqrt(2^{|l|+1} / (pi w^2 |l|!)), so that the mode has unit power.
double lg_norm(int ell, double waist);
Complex lg_field(int ell, double waist, double x, double y);

/// S_k on the grid, row-major (index j * nx + i, x along i). Values are
/// stored without the common Gaussian factor exp(-2 r^2 / w^2); physical()
/// puts it back.
struct StokesField {
  int nx = 0;
  int ny = 0;
  double half_extent = 0.0;  // in units of the waist, as used
  double waist = 1.0;
  std::vector<double> s0, s1, s2, s3;

  double dx() const { return 2.0 * half_extent * waist / nx; }
  double dy() const { return 2.0 * half_extent * waist / ny; }
  double x(int i) const { return -half_extent * waist + (i + 0.5) * dx(); }
  double y(int j) const { return -half_extent * waist + (j + 0.5) * dy(); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  double envelope(int i, int j) const;
  /// {S0, S1, S2, S3} at a cell with the Gaussian factor restored.
  std::array<double, 4> physical(int i, int j) const;
};

/// Spin-orbit matrix in the layout index = pol * n_modes + mode, pol R = 0,
/// L = 1, modes in ModeMap order.
StokesField reduced_stokes_field(const Eigen::MatrixXcd& rho, const ModeMap& modes, const GridSpec& grid);

/// Picks the polarization and OAM fields out of the basis (or uses the ones
/// given), traces out everything else and orders the modes by l. Throws
/// CompositionError when the choice is ambiguous or the basis is not a
/// product over the two fields.
StokesField reduced_stokes_field(const hilbert::DensityMatrix& rho, const GridSpec& grid, double waist = 1.0,
                                 std::optional<hilbert::DofRef> pol = std::nullopt,
                                 std::optional<hilbert::DofRef> oam = std::nullopt);

/// Spin-orbit matrix and mode map extracted as in the overload above.
std::pair<Eigen::MatrixXcd, ModeMap> spin_orbit_matrix(const hilbert::DensityMatrix& rho, double waist = 1.0,
                                                       std::optional<hilbert::DofRef> pol = std::nullopt,
                                                       std::optional<hilbert::DofRef> oam = std::nullopt);

/// Smallest half extent (in waists, between 3 and 200) at which the
/// normalized Stokes vector on the boundary circle is within
/// 1 - s.s_inf <= tol of its far-field direction s_inf, set by the mode
/// block of largest |l|. Returns 3 when the far field has no single
/// direction (equal |l| at the top, or a depolarized top block).
double auto_half_extent(const Eigen::MatrixXcd& rho, const ModeMap& modes, double tol = 2e-3);

struct UnitField {
  int nx = 0;
  int ny = 0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<Eigen::Vector3d> s;
  std::vector<std::uint8_t> masked;
  std::size_t n_masked = 0;

  double masked_fraction() const { return static_cast<double>(n_masked) / static_cast<double>(s.size()); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
};

/// s = S / |S|. A cell is masked where S0 is not positive or the field is
/// depolarized (|S| <= eps_rel S0). NumericalError if every cell is masked.
UnitField normalize_stokes(const StokesField& field, double eps_rel = 1e-6);

enum class Estimator { quadrature, solid_angle };
std::string to_string(Estimator e);

struct SkyrmeResult {
  double n = 0.0;
  Estimator estimator = Estimator::solid_angle;
  double residual = 0.0;  // |N - round(N)|
  std::size_t masked_cells = 0;
};

/// (1/4 pi) sum s . (d_x s x d_y s) dx dy with central differences over
/// interior cells whose four neighbours are unmasked. NumericalError when
/// more than half the grid is masked.
SkyrmeResult skyrme_number_quadrature(const UnitField& s);

/// Signed spherical-triangle areas of each unmasked plaquette split along
/// its diagonal, divided by 4 pi. NumericalError naming the cell for a
/// triangle with antipodal vertices.
SkyrmeResult skyrme_number_solid_angle(const UnitField& s);

/// Fraction of equal-area sphere bins (equal-z bands split into equal
/// sectors) hit by at least one unmasked sample.
double poincare_coverage(const UnitField& s, int n_bins = 512);

io::json to_json(const StokesField& f);
io::json to_json(const SkyrmeResult& r);
/// `x,y,S0,S1,S2,S3` with the Gaussian factor restored.
std::string to_csv(const StokesField& f);

}  // namespace qsky::topology
