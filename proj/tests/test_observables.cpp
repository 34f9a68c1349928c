#include <catch2/catch_amalgamated.hpp>

#include "leakybox/observables.hpp"
#include "oracles.hpp"

using namespace leakybox;

TEST_CASE("number moments of reference states") {
  auto [m7, v7] =
      mean_and_variance(DensityMatrix::from_pure(number_state(7, BasisSpec(12))));
  REQUIRE(m7 == 7.0);
  REQUIRE(v7 == 0.0);

  const BasisSpec b(130);
  auto [mc, vc] = mean_and_variance(
      DensityMatrix::from_pure(csib(cd(std::sqrt(50.0), 0.0), b)));
  REQUIRE(std::abs(mc - 50.0) < 1e-8);
  REQUIRE(std::abs(vc - 50.0) < 1e-8);

  const DensityMatrix pm = poisson_mixture(12.0, BasisSpec(60));
  auto [mp, vp] = mean_and_variance(pm);
  // direct summation over the truncated weights
  const auto w = oracle::poisson_weights(12.0, 60);
  double om = 0.0, o2 = 0.0;
  for (int n = 0; n <= 60; ++n) {
    om += n * w[n];
    o2 += double(n) * n * w[n];
  }
  REQUIRE(std::abs(mp - om) < 1e-12);
  REQUIRE(std::abs(vp - (o2 - om * om)) < 1e-12);
  REQUIRE(std::abs(mp - 12.0) < 1e-8);
  REQUIRE(std::abs(vp - 12.0) < 1e-8);
}

TEST_CASE("coherent fit recovers its own family") {
  const BasisSpec b(40);
  const DensityMatrix rho =
      DensityMatrix::from_pure(csib(std::polar(3.0, 0.7), b));
  const CsibFit fit = fidelity_to_csib(rho);
  REQUIRE(fit.phase_defined);
  REQUIRE(std::abs(fit.fidelity - 1.0) < 1e-10);
  REQUIRE(std::abs(fit.track.phase - 0.7) < 1e-10);
  REQUIRE(std::abs(fit.track.magnitude * fit.track.magnitude - 9.0) < 1e-9);
}

TEST_CASE("coherent fit on phaseless states is flagged") {
  const BasisSpec b(60);
  const DensityMatrix pm = poisson_mixture(9.0, b);
  const CsibFit fit = fidelity_to_csib(pm);
  REQUIRE_FALSE(fit.phase_defined);
  REQUIRE(fit.track.phase == 0.0);
  // overlap with |alpha=3> is sum_N P(N)^2 for equal Poisson weights
  const double want = oracle::poisson_purity(9.0, 60);
  REQUIRE(std::abs(fit.fidelity - want) < 1e-10);
  REQUIRE(fit.fidelity < 1.0 - 1e-6);

  const DensityMatrix fock =
      DensityMatrix::from_pure(number_state(9, BasisSpec(40)));
  const CsibFit ffit = fidelity_to_csib(fock);
  REQUIRE_FALSE(ffit.phase_defined);
  // |<9|alpha=3>|^2 = e^{-9} 9^9/9!
  const double closed =
      std::exp(-9.0 + 9.0 * std::log(9.0) - std::lgamma(10.0));
  REQUIRE(std::abs(closed - 0.131755640009523) < 1e-12);
  REQUIRE(std::abs(ffit.fidelity - closed) < 1e-9);
}

TEST_CASE("fidelity separates the family from nearby imposters") {
  for (double mag : {1.0, 2.5}) {
    const BasisSpec b(40);
    const DensityMatrix rho =
        DensityMatrix::from_pure(csib(std::polar(mag, 1.2), b));
    REQUIRE(fidelity_to_csib(rho).fidelity >= 1.0 - 1e-10);
  }
  const BasisSpec b80(80);
  for (double fano : {0.2, 0.8, 1.2, 3.0}) {
    const DensityMatrix rho = DensityMatrix::from_pure(
        gaussian_profile_state({25.0, fano, 0.0}, b80));
    REQUIRE(fidelity_to_csib(rho).fidelity < 1.0 - 1e-6);
  }
  REQUIRE(fidelity_to_csib(DensityMatrix::from_pure(
                               number_state(1, BasisSpec(12))))
              .fidelity < 1.0 - 1e-6);
  REQUIRE(fidelity_to_csib(poisson_mixture(1.0, BasisSpec(20))).fidelity <
          1.0 - 1e-6);
}

TEST_CASE("energy density is linear and gauge invariant") {
  const BasisSpec b(200);
  const double V = 100.0;
  const PureState s = csib(cd(10.0, 0.0), b);
  const double mu_bar = 0.7;
  const double got =
      energy_density(s, [&](int n) { return mu_bar * n; }, V);
  auto [mean, var] = mean_and_variance(DensityMatrix::from_pure(s));
  (void)var;
  REQUIRE(std::abs(got - mu_bar * mean / V) < 1e-12);

  REQUIRE(energy_density(s, [](int) { return 0.0; }, V) == 0.0);

  const PureState rotated = csib(std::polar(10.0, 1.1), b);
  const double e1 = energy_density(s, [](int n) { return 0.5 * n * n; }, V);
  const double e2 =
      energy_density(rotated, [](int n) { return 0.5 * n * n; }, V);
  REQUIRE(std::abs(e1 - e2) < 1e-12);
}

TEST_CASE("interaction energy density differences are 1/V-small") {
  const double g = 1.0, V = 100.0;
  const BasisSpec b(200);
  auto E = [&](int n) { return g * double(n) * n / (2.0 * V); };
  const double dens_c = energy_density(csib(cd(10.0, 0.0), b), E, V);
  const double dens_n = energy_density(number_state(100, b), E, V);
  // Poisson <N^2> exceeds the sharp value by <N>
  const double want = g * 100.0 / (2.0 * V * V);
  REQUIRE(std::abs((dens_c - dens_n) - want) / want < 1e-9);
}
