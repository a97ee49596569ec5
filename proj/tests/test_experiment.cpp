#include "doctest.h"

#include <numbers>
#include <sstream>

#include "qsky/device.hpp"
#include "qsky/error.hpp"
#include "qsky/experiment.hpp"
#include "support.hpp"

using namespace qsky;
using namespace qsky::experiment;
using hilbert::Complex;
using hilbert::DofRef;
using hilbert::label;
using hilbert::make_ket;
using hilbert::Photon;
using hilbert::Pol;
using hilbert::PolSetting;
using hilbert::PureState;
using hilbert::Wavelength;

namespace {

constexpr double kPi = std::numbers::pi;

/// Source restricted to l in {0, +-2}, resolved, converted with eta = 1/2 on
/// both photons and photon A coupled into the fibre.
PureState partial_conversion_state(device::PhaseConvention conv) {
  const auto r = resolve_wavelength(spdc_state(SourceSpectrum::uniform({0, 2, -2}, {1})));
  REQUIRE_FALSE(r.null());
  device::QPlateOptions o;
  o.convention = conv;
  auto s = device::apply_qplate(*r.state, Photon::A, 0.5, o);
  s = device::apply_qplate(s, Photon::B, 0.5, o);
  const auto f = smf_project(s, Photon::A);
  REQUIRE_FALSE(f.null());
  return *f.state;
}

hilbert::Ket ab(Pol pa, int lb, Pol pb) {
  return make_ket({label(Photon::A, 0, pa, Wavelength::lambda1), label(Photon::B, lb, pb, Wavelength::lambda2)});
}

}  // namespace

TEST_CASE("source restricted to +-2 over both branches") {
  const auto s = spdc_state(SourceSpectrum::uniform({2, -2}, {1, 2}));
  REQUIRE(s.size() == 4);
  for (const auto& [k, a] : s.terms()) {
    CHECK(std::abs(a - 0.5) < 1e-15);
    CHECK(k[0].oam->ell == -k[1].oam->ell);
    CHECK(*k[0].pol == Pol::R);
    CHECK(*k[1].pol == Pol::R);
    CHECK(*k[1].wavelength == hilbert::conjugate(*k[0].wavelength));
  }
}

TEST_CASE("single source term is a product ket") {
  const auto s = spdc_state(SourceSpectrum::uniform({0}, {1}));
  REQUIRE(s.size() == 1);
  const auto& k = s.terms().begin()->first;
  CHECK(k[0] == label(Photon::A, 0, Pol::R, Wavelength::lambda1));
  CHECK(k[1] == label(Photon::B, 0, Pol::R, Wavelength::lambda2));
}

TEST_CASE("photon B's OAM marginal mirrors photon A's") {
  const auto s = spdc_state(SourceSpectrum::gaussian(1.5));
  std::map<int, double> pa, pb;
  for (const auto& [k, a] : s.terms()) {
    pa[k[0].oam->ell] += std::norm(a);
    pb[k[1].oam->ell] += std::norm(a);
  }
  for (const auto& [l, p] : pa) CHECK(p == doctest::Approx(pb[-l]).epsilon(1e-14));
}

TEST_CASE("unnormalized spectrum is rejected") {
  SourceSpectrum spec;
  spec.c[{0, 1}] = 0.5;
  CHECK_THROWS_AS(spdc_state(spec), ValidationError);
  spec.c[{0, 1}] = 1.0;
  CHECK_NOTHROW(spdc_state(spec));
  spec.c = {{{8, 1}, 1.0}};
  CHECK_THROWS_AS(spdc_state(spec), ValidationError);
}

TEST_CASE("dichroic branch with equal weights") {
  const auto s = spdc_state(SourceSpectrum::uniform({0, 2, -2}));
  const auto r = resolve_wavelength(s);
  REQUIRE_FALSE(r.null());
  CHECK(r.probability == doctest::Approx(0.5).epsilon(1e-14));
  for (const auto& [k, a] : r.state->terms()) CHECK(*k[0].wavelength == Wavelength::lambda1);
  const auto swapped = resolve_wavelength(s, ArmAssignment::a_lambda2);
  for (const auto& [k, a] : swapped.state->terms()) CHECK(*k[0].wavelength == Wavelength::lambda2);
}

TEST_CASE("dichroic on a single branch is the identity") {
  const auto s = spdc_state(SourceSpectrum::uniform({0, 2}, {1}));
  const auto r = resolve_wavelength(s);
  CHECK(r.probability == doctest::Approx(1.0));
  CHECK(std::abs(hilbert::inner(*r.state, s)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(resolve_wavelength(s, ArmAssignment::a_lambda2).null());
}

TEST_CASE("dichroic leaves the OAM joint distribution unchanged") {
  const auto s = spdc_state(SourceSpectrum::gaussian(2.0));
  const auto r = resolve_wavelength(s);
  std::map<std::pair<int, int>, double> before, after;
  for (const auto& [k, a] : s.terms()) before[{k[0].oam->ell, k[1].oam->ell}] += std::norm(a);
  for (const auto& [k, a] : r.state->terms()) after[{k[0].oam->ell, k[1].oam->ell}] += std::norm(a);
  REQUIRE(before.size() == after.size());
  for (const auto& [key, p] : before) CHECK(std::abs(after[key] - p) < 1e-12);
}

TEST_CASE("single-mode fibre") {
  const auto two = PureState::from_ket({label(Photon::A, 2, Pol::R, std::nullopt), label(Photon::B, -2, Pol::R, std::nullopt)});
  CHECK(smf_project(two, Photon::A).null());
  const auto zero = PureState::from_ket({label(Photon::A, 0, Pol::R, std::nullopt), label(Photon::B, 0, Pol::R, std::nullopt)});
  CHECK(smf_project(zero, Photon::A).probability == doctest::Approx(1.0));
}

TEST_CASE("partial conversion state") {
  // Four terms of equal weight: (|0R> + |-2L>)_B |R>_A + (|-2R> + |-4L>)_B |L>_A.
  const auto s = partial_conversion_state(device::PhaseConvention::paper);
  Eigen::VectorXcd got(4), want(4);
  got << s.amplitude(ab(Pol::R, 0, Pol::R)), s.amplitude(ab(Pol::R, -2, Pol::L)), s.amplitude(ab(Pol::L, -2, Pol::R)),
      s.amplitude(ab(Pol::L, -4, Pol::L));
  want << 0.5, 0.5, 0.5, 0.5;
  CHECK(s.size() == 4);
  CHECK(qsky::testing::phase_distance(got, want) < 1e-12);

  // With the symmetric i coupling only the relative phases change.
  const auto si = partial_conversion_state(device::PhaseConvention::unitary_i);
  CHECK(si.size() == 4);
  for (const auto& [k, a] : si.terms()) CHECK(std::abs(a) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("heralding the partial conversion state") {
  const auto s = partial_conversion_state(device::PhaseConvention::paper);
  SUBCASE("photon B on R: entangled") {
    const auto h = herald(s, Photon::B, PolSetting::R);
    REQUIRE_FALSE(h.null());
    CHECK(h.probability == doctest::Approx(0.5));
    const auto k1 = make_ket({label(Photon::A, 0, Pol::R, Wavelength::lambda1), label(Photon::B, 0, std::nullopt, Wavelength::lambda2)});
    const auto k2 = make_ket({label(Photon::A, 0, Pol::L, Wavelength::lambda1), label(Photon::B, -2, std::nullopt, Wavelength::lambda2)});
    CHECK(std::abs(h.state->amplitude(k1)) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(std::abs(h.state->amplitude(k2)) == doctest::Approx(1 / std::sqrt(2.0)));
  }
  SUBCASE("photon A on L: local") {
    const auto h = herald(s, Photon::A, PolSetting::L);
    REQUIRE_FALSE(h.null());
    const auto k1 = make_ket({label(Photon::A, 0, std::nullopt, Wavelength::lambda1), label(Photon::B, -2, Pol::R, Wavelength::lambda2)});
    const auto k2 = make_ket({label(Photon::A, 0, std::nullopt, Wavelength::lambda1), label(Photon::B, -4, Pol::L, Wavelength::lambda2)});
    CHECK(std::abs(h.state->amplitude(k1)) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(std::abs(h.state->amplitude(k2)) == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(h.state->size() == 2);
  }
  SUBCASE("absent polarization") {
    const auto r_only = PureState::from_ket({label(Photon::A, 0, Pol::R, std::nullopt)});
    CHECK(herald(r_only, Photon::A, PolSetting::L).null());
  }
}

TEST_CASE("herald outcomes recombine into the traced state") {
  const auto s = partial_conversion_state(device::PhaseConvention::unitary_i);
  const auto rho = hilbert::density_from_pure(s);
  const DofRef keep[] = {{Photon::A, hilbert::Dof::pol}, {Photon::B, hilbert::Dof::oam}};
  const auto traced = hilbert::partial_trace(rho, keep);

  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(traced.dim(), traced.dim());
  for (PolSetting o : {PolSetting::R, PolSetting::L}) {
    const auto h = herald(s, Photon::B, o);
    REQUIRE_FALSE(h.null());
    const auto part = hilbert::partial_trace(hilbert::density_from_pure(*h.state), keep);
    for (Eigen::Index i = 0; i < part.dim(); ++i)
      for (Eigen::Index j = 0; j < part.dim(); ++j) {
        const auto bi = std::find(traced.basis().begin(), traced.basis().end(), part.basis()[i]) - traced.basis().begin();
        const auto bj = std::find(traced.basis().begin(), traced.basis().end(), part.basis()[j]) - traced.basis().begin();
        sum(bi, bj) += h.probability * part.matrix()(i, j);
      }
  }
  CHECK(qsky::testing::max_abs(sum - traced.matrix()) < 1e-10);
}

TEST_CASE("coincidence probabilities on the OAM Bell state") {
  const auto bell = oam_bell_state();
  for (double ta : {0.0, 0.3, 1.1})
    for (double tb : {0.0, 0.2, 0.9, 2.0}) {
      // (1/2) cos^2(theta_a - theta_b) from the amplitude sum over the two branches.
      const double oracle = 0.5 * std::pow(std::cos(ta - tb), 2);
      CHECK(coincidence_probability(bell, chsh_projector(Photon::A, ta), chsh_projector(Photon::B, tb)) ==
            doctest::Approx(oracle).epsilon(1e-12));
    }
  const double peak = coincidence_probability(bell, chsh_projector(Photon::A, 0.4), chsh_projector(Photon::B, 0.4));
  CHECK(peak == doctest::Approx(0.5));
}

TEST_CASE("coincidence completeness and orthogonality") {
  const auto rho = hilbert::density_from_pure(oam_bell_state());
  double total = 0.0;
  for (double da : {0.0, kPi / 2})
    for (double db : {0.0, kPi / 2})
      total += coincidence_probability(rho, chsh_projector(Photon::A, 0.3 + da), chsh_projector(Photon::B, 1.2 + db));
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));

  const auto prod = PureState::from_ket({label(Photon::A, 0, Pol::R, std::nullopt), label(Photon::B, 0, Pol::R, std::nullopt)});
  CHECK(coincidence_probability(prod, hilbert::pol_projector(Photon::A, PolSetting::L),
                                hilbert::pol_projector(Photon::B, PolSetting::R)) == 0.0);
  CHECK_THROWS_AS(coincidence_probability(prod, hilbert::pol_projector(Photon::A, PolSetting::L),
                                          hilbert::pol_projector(Photon::A, PolSetting::R)),
                  CompositionError);
}

TEST_CASE("Bell curve has unit visibility and period pi") {
  const auto rho = hilbert::density_from_pure(oam_bell_state());
  double cmax = 0.0, cmin = 1.0;
  for (int i = 0; i < 64; ++i) {
    const double tb = kPi * i / 64;
    const double c = chsh_coincidence(rho, 0.0, tb);
    cmax = std::max(cmax, c);
    cmin = std::min(cmin, c);
    CHECK(chsh_coincidence(rho, 0.0, tb + kPi) == doctest::Approx(c).epsilon(1e-12));
  }
  CHECK((cmax - cmin) / (cmax + cmin) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(chsh_coincidence(rho, 0.0, kPi / 2) < 1e-15);
}

TEST_CASE("count simulation") {
  CountModel m{2000.0, 1.0, 0.0, 3.0};
  SUBCASE("zero probability gives zero counts") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) CHECK(simulate_counts(0.0, m, seed).counts == 0);
  }
  SUBCASE("Poisson moments") {
    const int n = 10000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = static_cast<double>(simulate_counts(1.0, m, derive_seed(77, i)).counts);
      sum += c;
      sum2 += c * c;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    CHECK(std::abs(mean - 2000.0) <= 3.0 * std::sqrt(2000.0) / std::sqrt(double(n)));
    CHECK(var / mean == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("fixed seed") {
    const auto a = simulate_counts(0.37, m, 99, "R", "m2");
    const auto b = simulate_counts(0.37, m, 99, "R", "m2");
    CHECK(a.counts == b.counts);
    CHECK(a.seed == b.seed);
  }
  SUBCASE("accidentals are added to every setting") {
    CountModel acc = m;
    acc.accidental_rate = 50.0;
    acc.integration_s = 100.0;
    CHECK(simulate_counts(0.0, acc, 1).counts > 0);
  }
  SUBCASE("invalid input") {
    CountModel bad = m;
    bad.rate_max = -1.0;
    CHECK_THROWS_AS(simulate_counts(0.5, bad, 1), ValidationError);
    CHECK_THROWS_AS(simulate_counts(1.5, m, 1), ValidationError);
  }
}

TEST_CASE("count CSV round trip") {
  std::vector<CountRecord> rec{{"R", "m2", 12, 10.0, 3.0, 5}, {"H", "s90", 0, 10.0, 3.0, 6}};
  std::stringstream io;
  write_counts_csv(io, rec);
  CHECK(io.str().rfind("setting_a,setting_b,counts,integration_s,window_ns,seed\n", 0) == 0);
  std::vector<int> lines;
  const auto back = read_counts_csv(io, &lines);
  REQUIRE(back.size() == 2);
  CHECK(back[1].setting_b == "s90");
  CHECK(back[0].counts == 12);
  CHECK(back[1].seed == 6);
  CHECK(lines == std::vector<int>{2, 3});
  std::istringstream bad("setting_a,setting_b,counts,integration_s,window_ns,seed\nR,m2,abc,1,3,0\n");
  CHECK_THROWS_AS(read_counts_csv(bad), ValidationError);
}

TEST_CASE("CHSH values") {
  SUBCASE("ideal Bell state reaches the Tsirelson bound") {
    const auto rho = hilbert::density_from_pure(oam_bell_state());
    CHECK(std::abs(chsh(chsh_probabilities(rho)) - 2 * std::sqrt(2.0)) < 1e-6);
  }
  SUBCASE("Werner state scales with visibility") {
    for (double v : {0.5, 0.86, 1.0})
      CHECK(chsh(chsh_probabilities(werner_state(v))) == doctest::Approx(2 * std::sqrt(2.0) * v).epsilon(1e-12));
    CHECK(chsh(chsh_probabilities(werner_state(0.86))) == doctest::Approx(2.432).epsilon(0.001 / 2.432));
  }
  SUBCASE("separable state respects the classical bound") {
    const auto prod = PureState::from_ket({label(Photon::A, 2, std::nullopt, std::nullopt), label(Photon::B, -2, std::nullopt, std::nullopt)});
    const auto rho = hilbert::density_from_pure(prod);
    CHECK(std::abs(chsh(chsh_probabilities(rho))) <= 2.0 + 1e-12);
    CHECK(chsh_max_scan(rho) <= 2.0 + 1e-12);
  }
  SUBCASE("sixteen values are required") {
    std::vector<double> v(15, 0.25);
    CHECK_THROWS_AS(chsh(v), ValidationError);
    v.push_back(0.25);
    CHECK_NOTHROW(chsh(v));
  }
  SUBCASE("all-zero quad") { CHECK_THROWS_AS(correlation(OutcomeQuad{}), NumericalError); }
}

TEST_CASE("CHSH from counts") {
  const auto rho = werner_state(0.86);
  std::vector<CountRecord> rec;
  const double s = chsh(chsh_counts(rho, CountModel{2000.0, 125.0, 0.0, 3.0}, 4, {}, &rec));
  CHECK(rec.size() == 16);
  std::int64_t total = 0;
  for (const auto& r : rec) total += r.counts;
  CHECK(total == doctest::Approx(1e6).epsilon(0.01));
  CHECK(std::abs(s - 2.432) < 0.05);
  CHECK(chsh_max_scan(rho) >= chsh(chsh_probabilities(rho)) - 1e-12);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(hash_string("R|m2") == hash_string("R|m2"));
  CHECK(hash_string("R|m2") != hash_string("R|m4"));
}
