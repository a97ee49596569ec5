#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "qsky/error.hpp"
#include "qsky/topology.hpp"
#include "support.hpp"

using namespace qsky;
using namespace qsky::topology;
using hilbert::Complex;
using hilbert::label;
using hilbert::Photon;
using hilbert::Pol;

namespace {

constexpr double kPi = std::numbers::pi;

/// a |lr, R> + b |ll, L> in the spin-orbit layout.
std::pair<Eigen::MatrixXcd, ModeMap> two_mode(int lr, Complex a, int ll, Complex b) {
  ModeMap m;
  m.ells = {lr, ll};
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(4);
  v(0) = a;      // R, mode 0
  v(2 + 1) = b;  // L, mode 1
  v.normalize();
  return {v * v.adjoint(), m};
}

/// Winding of the transverse Stokes phase, signed by which pole sits at
/// the beam centre.
int expected_n(int lr, int ll) {
  const int m = ll - lr;
  return std::abs(lr) < std::abs(ll) ? m : -m;
}

UnitField unit(const Eigen::MatrixXcd& rho, const ModeMap& m, const GridSpec& g) {
  return normalize_stokes(reduced_stokes_field(rho, m, g));
}

hilbert::DensityMatrix heralded_state() {
  const double c = 1 / std::sqrt(2.0);
  hilbert::PureState::Terms t;
  t[hilbert::make_ket({label(Photon::A, 0, Pol::R, std::nullopt)})] = c;
  t[hilbert::make_ket({label(Photon::A, -2, Pol::L, std::nullopt)})] = c;
  return hilbert::density_from_pure(hilbert::PureState(t));
}

}  // namespace

TEST_CASE("Laguerre-Gauss modes") {
  CHECK(std::abs(lg_field(0, 1.0, 0, 0)) == doctest::Approx(std::sqrt(2.0 / kPi)).epsilon(1e-14));
  CHECK(std::abs(lg_field(0, 2.0, 0, 0)) == doctest::Approx(std::sqrt(2.0 / kPi) / 2.0).epsilon(1e-14));
  for (int l : {-4, -2, 1, 3}) CHECK(std::abs(lg_field(l, 1.0, 0, 0)) == 0.0);

  const int n = 512;
  const double h = 5.0, d = 2 * h / n;
  for (int l : {0, 2, -4}) {
    double sum = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) sum += std::norm(lg_field(l, 1.0, -h + (i + 0.5) * d, -h + (j + 0.5) * d));
    CHECK(sum * d * d == doctest::Approx(1.0).epsilon(1e-6));
  }
  // Phase winds as exp(i l phi).
  const Complex a = lg_field(3, 1.0, 1.0, 0.0), b = lg_field(3, 1.0, 0.0, 1.0);
  CHECK(std::abs(b / a - std::polar(1.0, 3 * kPi / 2)) < 1e-12);
}

TEST_CASE("uniform polarization fields") {
  hilbert::PureState::Terms t;
  t[hilbert::make_ket({label(Photon::A, 0, Pol::R, std::nullopt)})] = 1.0;
  const auto rho = hilbert::density_from_pure(hilbert::PureState(t));
  const auto f = reduced_stokes_field(rho, GridSpec{64, 64, 3.0});
  for (int j = 0; j < 64; ++j)
    for (int i = 0; i < 64; ++i) {
      const auto s = f.physical(i, j);
      CHECK(s[3] == doctest::Approx(s[0]).epsilon(1e-12));
      CHECK(s[0] > 0.0);
    }
  const auto u = normalize_stokes(f);
  CHECK(u.masked_fraction() < 0.01);
  for (const auto& v : u.s) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
  CHECK(skyrme_number_solid_angle(u).n == 0.0);
  CHECK(skyrme_number_quadrature(u).n == 0.0);
  CHECK(poincare_coverage(u) == doctest::Approx(1.0 / 512));
}

TEST_CASE("heralded spin-orbit state texture") {
  const auto f = reduced_stokes_field(heralded_state(), GridSpec{256, 256, 3.0});
  const auto u = normalize_stokes(f);
  // Centre: the l = 0 mode alone, the R pole.
  const auto c = u.s[u.index(128, 128)];
  CHECK(c.z() > 0.999);
  // Edge at r ~ 3 w: the l = -2 mode dominates, the L pole.
  // |f_-2 / f_0|^2 = 2 (r / w)^4 there, so s3 = (1 - q) / (1 + q) and the
  // transverse part is 2 sqrt(q) / (1 + q).
  const double r = std::hypot(f.x(255), f.y(128));
  const double q = 2 * std::pow(r, 4);
  const auto e = u.s[u.index(255, 128)];
  CHECK(e.z() == doctest::Approx((1 - q) / (1 + q)).epsilon(1e-9));
  CHECK(std::hypot(e.x(), e.y()) == doctest::Approx(2 * std::sqrt(q) / (1 + q)).epsilon(1e-9));
  CHECK(e.z() + 1.0 < 0.05);
  for (const auto& v : u.s) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
}

TEST_CASE("Skyrme number of the heralded state") {
  const auto f = reduced_stokes_field(heralded_state(), GridSpec{256, 256, 0.0});
  const auto u = normalize_stokes(f);
  CHECK(u.masked_fraction() < 0.01);
  CHECK(skyrme_number_solid_angle(u).n == doctest::Approx(-2.0).epsilon(0.01));
  CHECK(skyrme_number_quadrature(u).n == doctest::Approx(-2.0).epsilon(0.01));
  CHECK(poincare_coverage(u) >= 0.8);

  const auto small = normalize_stokes(reduced_stokes_field(heralded_state(), GridSpec{128, 128, 0.0}));
  CHECK(std::abs(skyrme_number_solid_angle(small).n + 2.0) < 0.005);
}

TEST_CASE("product and mirrored states") {
  const double c = 1 / std::sqrt(2.0);
  const auto [prod, pm] = two_mode(0, c, -2, 0.0);
  CHECK(skyrme_number_solid_angle(unit(prod, pm, GridSpec{64, 64, 3.0})).n == 0.0);

  // |0, L> + |+2, R>
  const auto [mir, mm] = two_mode(2, c, 0, c);
  const auto u = unit(mir, mm, GridSpec{256, 256, 0.0});
  CHECK(skyrme_number_solid_angle(u).n == doctest::Approx(2.0).epsilon(0.01));
  CHECK(skyrme_number_quadrature(u).n == doctest::Approx(2.0).epsilon(0.01));
}

namespace {

struct TwoMode {
  int lr, ll;
  Complex a, b;
};

/// Two OAM components of different |l| on orthogonal polarizations, both
/// amplitudes of modulus at least 0.05 after normalization. Equal |l| leaves
/// the polarization undefined on the axis, so there is no texture to count.
std::vector<TwoMode> random_two_mode(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ell(-4, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TwoMode> out;
  while (static_cast<int>(out.size()) < count) {
    const int lr = ell(rng), ll = ell(rng);
    const double alpha = u(rng) * kPi / 2;
    if (std::abs(lr) == std::abs(ll) || std::cos(alpha) < 0.05 || std::sin(alpha) < 0.05) continue;
    out.push_back({lr, ll, std::polar(std::cos(alpha), 2 * kPi * u(rng)), std::polar(std::sin(alpha), 2 * kPi * u(rng))});
  }
  return out;
}

}  // namespace

TEST_CASE("two-mode states have integer Skyrme numbers") {
  for (const auto& t : random_two_mode(21, 50)) {
    const auto [rho, m] = two_mode(t.lr, t.a, t.ll, t.b);
    const auto u = unit(rho, m, GridSpec{256, 256, 0.0});
    const double ns = skyrme_number_solid_angle(u).n;
    const double nq = skyrme_number_quadrature(u).n;
    CAPTURE(t.lr);
    CAPTURE(t.ll);
    CAPTURE(std::abs(t.a));
    CHECK(std::abs(ns - std::round(ns)) <= 0.05);
    CHECK(std::abs(nq - std::round(nq)) <= 0.05);
    CHECK(std::lround(ns) == expected_n(t.lr, t.ll));
  }
}

TEST_CASE("estimators agree on two-mode states") {
  for (const auto& t : random_two_mode(22, 50)) {
    const auto [rho, m] = two_mode(t.lr, t.a, t.ll, t.b);
    const auto u = unit(rho, m, GridSpec{256, 256, 0.0});
    CAPTURE(t.lr);
    CAPTURE(t.ll);
    CAPTURE(std::abs(t.a));
    CHECK(std::abs(skyrme_number_quadrature(u).n - skyrme_number_solid_angle(u).n) <= 0.02);
  }
}

TEST_CASE("Skyrme number is invariant under imbalance and relative phase") {
  double ref = 0.0;
  for (double eta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const auto [rho, m] = two_mode(0, std::sqrt(1 - eta), -2, std::sqrt(eta));
    const double n = skyrme_number_solid_angle(unit(rho, m, GridSpec{256, 256, 0.0})).n;
    CHECK(n == doctest::Approx(-2.0).epsilon(0.025));
  }
  for (double phi : {0.0, 0.7, 2.0, 4.5}) {
    const auto [rho, m] = two_mode(0, 1.0, -2, std::polar(1.0, phi));
    const double n = skyrme_number_solid_angle(unit(rho, m, GridSpec{128, 128, 3.0})).n;
    if (phi == 0.0) ref = n;
    CHECK(std::abs(n - ref) < 1e-6);
  }
}

TEST_CASE("full mirror flips the sign") {
  for (auto [lr, ll] : {std::pair{0, -2}, std::pair{1, 3}, std::pair{-3, 0}, std::pair{2, -1}}) {
    const auto [rho, m] = two_mode(lr, 0.6, ll, 0.8);
    const auto [mrho, mm] = two_mode(-ll, 0.8, -lr, 0.6);
    const double n = skyrme_number_solid_angle(unit(rho, m, GridSpec{256, 256, 0.0})).n;
    const double nm = skyrme_number_solid_angle(unit(mrho, mm, GridSpec{256, 256, 0.0})).n;
    CAPTURE(lr);
    CAPTURE(ll);
    CHECK(nm == doctest::Approx(-n).epsilon(1e-9));
  }
}

TEST_CASE("grid convergence") {
  auto n_at = [](int n, bool quadrature) {
    const auto u = normalize_stokes(reduced_stokes_field(heralded_state(), GridSpec{n, n, 0.0}));
    return quadrature ? skyrme_number_quadrature(u).n : skyrme_number_solid_angle(u).n;
  };
  for (bool quadrature : {true, false}) {
    double prev = 1e9;
    for (int n : {64, 128, 256, 512}) {
      const double step = std::abs(n_at(2 * n, quadrature) - n_at(n, quadrature));
      CAPTURE(n);
      CAPTURE(quadrature);
      CHECK(step <= prev);
      prev = step;
    }
  }
}

TEST_CASE("coverage grows on nested grids") {
  // Cell centres of a 3N grid contain those of the N grid.
  double prev = 0.0;
  for (int n : {27, 81, 243}) {
    const double c = poincare_coverage(normalize_stokes(reduced_stokes_field(heralded_state(), GridSpec{n, n, 4.0})));
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("degenerate and masked fields") {
  UnitField u;
  u.nx = u.ny = 2;
  u.dx = u.dy = 1.0;
  u.s = {Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, -1)};
  u.masked.assign(4, 0);
  CHECK_THROWS_AS(skyrme_number_solid_angle(u), NumericalError);

  StokesField dark;
  dark.nx = dark.ny = 4;
  dark.half_extent = 1.0;
  dark.s0.assign(16, 0.0);
  dark.s1 = dark.s2 = dark.s3 = dark.s0;
  CHECK_THROWS_AS(normalize_stokes(dark), NumericalError);

  // Depolarized in the lower half.
  StokesField half = dark;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) {
      half.s0[half.index(i, j)] = 1.0;
      half.s3[half.index(i, j)] = j < 2 ? 0.0 : 1.0;
    }
  const auto hu = normalize_stokes(half);
  CHECK(hu.n_masked == 8);
  CHECK(hu.masked_fraction() == 0.5);
}

TEST_CASE("grid and mode validation") {
  CHECK_THROWS_AS(GridSpec({1, 8, 3.0}).validate(), ValidationError);
  CHECK_THROWS_AS(GridSpec({8, 8, -1.0}).validate(), ValidationError);
  CHECK_THROWS_AS((ModeMap{{2, 2}, 1.0}).validate(), ValidationError);
  CHECK_THROWS_AS((ModeMap{{0}, 0.0}).validate(), ValidationError);
  const auto [rho, m] = two_mode(0, 1.0, -2, 1.0);
  CHECK_THROWS_AS(reduced_stokes_field(Eigen::MatrixXcd::Identity(3, 3), m, GridSpec{}), CompositionError);
}

TEST_CASE("field serialization") {
  const auto f = reduced_stokes_field(heralded_state(), GridSpec{8, 4, 3.0});
  const std::string csv = to_csv(f);
  CHECK(csv.rfind("x,y,S0,S1,S2,S3\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 33);
  const auto j = to_json(f);
  CHECK(j["nx"] == 8);
  CHECK(j["S0"].size() == 32);
  const auto r = to_json(skyrme_number_solid_angle(normalize_stokes(f)));
  CHECK(r["estimator"] == "solid_angle");
  CHECK(r.contains("N"));
}
