#include "doctest.h"

#include <numbers>
#include <random>
#include <sstream>

#include "qsky/device.hpp"
#include "qsky/error.hpp"
#include "qsky/topology.hpp"
#include "support.hpp"

using namespace qsky;
using namespace qsky::device;
using hilbert::Complex;
using hilbert::label;
using hilbert::Photon;
using hilbert::Pol;
using hilbert::PureState;
using hilbert::Wavelength;

namespace {

constexpr double kPi = std::numbers::pi;

PureState random_state(std::mt19937_64& rng) {
  const Eigen::VectorXcd v = qsky::testing::random_vector(rng, 12);
  PureState::Terms t;
  int i = 0;
  for (int la : {-2, 0, 2})
    for (Pol pa : {Pol::R, Pol::L})
      for (int lb : {-1, 1})
        t[hilbert::make_ket({label(Photon::A, la, pa, Wavelength::lambda1), label(Photon::B, lb, Pol::R, Wavelength::lambda2)})] = v(i++);
  return PureState(t);
}

double distance(const PureState& a, const PureState& b) {
  double d = 0.0;
  for (const auto& [k, x] : (a + b.scaled(-1.0)).terms()) d = std::max(d, std::abs(x));
  return d;
}

}  // namespace

TEST_CASE("retardation anchors") {
  const DeviceParams p;
  CHECK(retardation(2.0, 1550.0, p) == 0.0);
  CHECK(retardation(2.0, 810.0, p) == 0.0);
  CHECK(retardation(4.7, 1550.0, p) == doctest::Approx(kPi).epsilon(1e-14));
  CHECK(retardation(4.7, 810.0, p) == doctest::Approx(kPi * 1550.0 / 810.0).epsilon(1e-14));
  CHECK(retardation(1.0, 1550.0, p) == 0.0);
  CHECK_THROWS_AS(retardation(-0.1, 1550.0, p), ValidationError);
}

TEST_CASE("conversion efficiency anchors") {
  const DeviceParams p;
  CHECK(conversion_efficiency(4.7, 1550.0, p) == doctest::Approx(1.0).epsilon(1e-14));
  const double d810 = kPi * 1550.0 / 810.0;
  CHECK(conversion_efficiency(4.7, 810.0, p) == doctest::Approx(std::pow(std::sin(d810 / 2), 2)).epsilon(1e-12));
  CHECK(conversion_efficiency(4.7, 810.0, p) == doctest::Approx(0.018).epsilon(0.03));
  CHECK(conversion_efficiency(2.0, 1550.0, p) == 0.0);
}

TEST_CASE("efficiencies at the scenario voltages") {
  const DeviceParams p;
  auto eta = [&](double v) { return efficiencies(v, p); };
  CHECK(eta(3.9).lambda1 == doctest::Approx(0.798).epsilon(1e-3));
  CHECK(eta(3.9).lambda2 == doctest::Approx(0.732).epsilon(1e-3));
  CHECK(eta(5.4).lambda1 == doctest::Approx(0.844).epsilon(1e-3));
  CHECK(eta(5.4).lambda2 == doctest::Approx(0.360).epsilon(2e-3));
  CHECK(eta(6.3).lambda1 == doctest::Approx(0.357).epsilon(2e-3));
  CHECK(eta(6.3).lambda2 == doctest::Approx(0.994).epsilon(1e-3));
}

TEST_CASE("retardation is monotone and scales with 1/lambda") {
  const DeviceParams p;
  double prev = 0.0;
  for (double v = 0.0; v <= 8.0; v += 0.05) {
    const double d = retardation(v, 1550.0, p);
    CHECK(d >= prev);
    prev = d;
    if (d > 0) CHECK(retardation(v, 810.0, p) / d == doctest::Approx(1550.0 / 810.0).epsilon(1e-12));
  }
}

TEST_CASE("eta point is sin^2 of half the retardation") {
  const DeviceParams p;
  for (double v : {2.5, 3.3, 4.1, 5.9}) {
    const auto e = eta_point(v, 810.0, p);
    CHECK(e.eta == doctest::Approx(std::pow(std::sin(retardation(v, 810.0, p) / 2), 2)).epsilon(1e-15));
    CHECK(e.eta >= 0.0);
    CHECK(e.eta <= 1.0);
  }
}

TEST_CASE("retardation table override") {
  std::istringstream in("voltage_V,delta_rad_at_1550nm\n2.0,0\n3.0,1.0\n5.0,3.0\n");
  DeviceParams p;
  p.table = parse_retardation_table(in);
  REQUIRE(p.table.size() == 3);
  CHECK(retardation(4.0, 1550.0, p) == doctest::Approx(2.0));
  CHECK(retardation(4.0, 775.0, p) == doctest::Approx(4.0));

  std::istringstream bad("voltage_V,delta_rad_at_1550nm\n3.0,1\n2.0,2\n");
  CHECK_THROWS_AS(parse_retardation_table(bad), ValidationError);
  std::istringstream header("volts,delta\n2,0\n");
  CHECK_THROWS_AS(parse_retardation_table(header), ValidationError);
}

TEST_CASE("qplate with eta = 0 is the identity") {
  std::mt19937_64 rng(1);
  const auto s = random_state(rng);
  CHECK(distance(apply_qplate(s, Photon::A, 0.0), s) < 1e-15);
}

TEST_CASE("qplate with eta = 1 fully converts") {
  const auto s = PureState::from_ket({label(Photon::A, 0, Pol::R, std::nullopt)});
  const auto out = apply_qplate(s, Photon::A, 1.0);
  REQUIRE(out.size() == 1);
  const auto& [k, a] = *out.terms().begin();
  CHECK(k[0].oam->ell == -2);
  CHECK(*k[0].pol == Pol::L);
  CHECK(std::abs(a) == doctest::Approx(1.0));

  const auto l_in = PureState::from_ket({label(Photon::A, 0, Pol::L, std::nullopt)});
  const auto l_out = apply_qplate(l_in, Photon::A, 1.0);
  CHECK(l_out.terms().begin()->first[0].oam->ell == 2);
  CHECK(*l_out.terms().begin()->first[0].pol == Pol::R);
}

TEST_CASE("qplate amplitudes") {
  const double eta = 0.3;
  const auto s = PureState::from_ket({label(Photon::A, 2, Pol::R, std::nullopt)});
  const auto ui = apply_qplate(s, Photon::A, eta);
  CHECK(std::abs(ui.amplitude({label(Photon::A, 2, Pol::R, std::nullopt)}) - std::sqrt(1 - eta)) < 1e-15);
  CHECK(std::abs(ui.amplitude({label(Photon::A, 0, Pol::L, std::nullopt)}) - Complex(0, std::sqrt(eta))) < 1e-15);
  QPlateOptions paper;
  paper.convention = PhaseConvention::paper;
  const auto up = apply_qplate(s, Photon::A, eta, paper);
  CHECK(std::abs(up.amplitude({label(Photon::A, 0, Pol::L, std::nullopt)}) - std::sqrt(eta)) < 1e-15);
}

TEST_CASE("qplate rejects bad input") {
  const auto s = PureState::from_ket({label(Photon::A, 6, Pol::L, std::nullopt)});
  CHECK_THROWS_AS(apply_qplate(s, Photon::A, 1.5), ValidationError);
  CHECK_THROWS_AS(apply_qplate(s, Photon::A, -0.1), ValidationError);
  CHECK_THROWS_AS(apply_qplate(s, Photon::A, 0.5), TruncationError);
  CHECK_NOTHROW(apply_qplate(s, Photon::A, 0.0));
  QPlateOptions wide;
  wide.ell_max = 8;
  CHECK_NOTHROW(apply_qplate(s, Photon::A, 0.5, wide));
}

TEST_CASE("qplate is unitary and inverts") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = random_state(rng);
    const double eta = u(rng);
    const Photon ph = trial % 2 ? Photon::A : Photon::B;
    for (auto conv : {PhaseConvention::unitary_i, PhaseConvention::paper}) {
      QPlateOptions fwd;
      fwd.convention = conv;
      const auto out = apply_qplate(s, ph, eta, fwd);
      CHECK(std::abs(out.norm() - s.norm()) < 1e-12);
      QPlateOptions inv = fwd;
      inv.inverse = true;
      CHECK(distance(apply_qplate(out, ph, eta, inv), s) < 1e-12);
    }
  }
}

TEST_CASE("wavelength-selective qplate uses each channel's efficiency") {
  PureState::Terms t;
  t[hilbert::make_ket({label(Photon::A, 0, Pol::R, Wavelength::lambda1)})] = 1.0 / std::sqrt(2.0);
  t[hilbert::make_ket({label(Photon::A, 0, Pol::R, Wavelength::lambda2)})] = 1.0 / std::sqrt(2.0);
  const auto out = apply_qplate(PureState(t), Photon::A, EtaByWavelength{1.0, 0.0});
  CHECK(std::abs(out.amplitude({label(Photon::A, -2, Pol::L, Wavelength::lambda1)})) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(std::abs(out.amplitude({label(Photon::A, 0, Pol::R, Wavelength::lambda2)})) == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(out.size() == 2);
  const auto bare = PureState::from_ket({label(Photon::A, 0, Pol::R, std::nullopt)});
  CHECK_THROWS_AS(apply_qplate(bare, Photon::A, EtaByWavelength{1.0, 0.0}), CompositionError);
}

TEST_CASE("phase convention does not change the Skyrme number") {
  for (double eta : {0.2, 0.5, 0.8}) {
    double n[2];
    int i = 0;
    for (auto conv : {PhaseConvention::unitary_i, PhaseConvention::paper}) {
      QPlateOptions o;
      o.convention = conv;
      const auto out = apply_qplate(PureState::from_ket({label(Photon::A, 0, Pol::R, std::nullopt)}), Photon::A, eta, o);
      const auto rho = hilbert::density_from_pure(out);
      const auto f = topology::reduced_stokes_field(rho, topology::GridSpec{128, 128, 0.0});
      n[i++] = topology::skyrme_number_solid_angle(topology::normalize_stokes(f)).n;
    }
    CHECK(std::abs(n[0] - n[1]) < 1e-6);
    CHECK(n[0] == doctest::Approx(-2.0).epsilon(0.01));
  }
}

TEST_CASE("phase convention names") {
  CHECK(parse_phase_convention("paper") == PhaseConvention::paper);
  CHECK(parse_phase_convention(to_string(PhaseConvention::unitary_i)) == PhaseConvention::unitary_i);
  CHECK_THROWS_AS(parse_phase_convention("other"), ValidationError);
}
