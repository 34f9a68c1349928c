#include <catch2/catch_amalgamated.hpp>

#include "leakybox/dynamics.hpp"
#include "oracles.hpp"

using namespace leakybox;

namespace {

// physics with j(n) = jconst and mu(n) = g*n
PhysicsParams const_rate_params(double jconst, double V = 100.0) {
  PhysicsParams p;
  p.box_volume_V = V;
  p.coupling_lambda_sq = jconst * V;
  p.dos_model = [](double) { return 1.0 / (2.0 * M_PI); };
  p.mu_model = [](double n) { return n; };
  return p;
}

}  // namespace

TEST_CASE("one map step on a number state gives the two-point mixture") {
  const BasisSpec b(30);
  const DensityMatrix rho = DensityMatrix::from_pure(number_state(20, b));
  const double j = 1e-3, dt = 2.0, mu = 0.7;
  const DensityMatrix out = step_master(rho, mu, j, dt);
  REQUIRE(std::abs(out.rho(20, 20).real() - (1.0 - 20.0 * j * dt)) < 1e-15);
  REQUIRE(std::abs(out.rho(19, 19).real() - 20.0 * j * dt) < 1e-15);
  double rest = 0.0;
  for (int n = 0; n <= 30; ++n)
    for (int m = 0; m <= 30; ++m)
      if (!(n == m && (n == 20 || n == 19))) rest += std::abs(out.rho(n, m));
  REQUIRE(rest == 0.0);
  REQUIRE(std::abs(out.trace() - 1.0) < 1e-15);
}

TEST_CASE("closed-system limit is a pure phase rotation") {
  std::mt19937 rng(3);
  const BasisSpec b(12);
  const DensityMatrix rho(b, oracle::random_density(rng, b.dim(), 3));
  const double mu = 1.3, dt = 0.7;
  const DensityMatrix out = step_master(rho, mu, 0.0, dt);
  for (int n = 0; n <= 12; ++n) {
    REQUIRE(out.rho(n, n) == rho.rho(n, n));  // diagonal untouched
    for (int m = 0; m <= 12; ++m) {
      const cd want =
          rho.rho(n, m) * std::polar(1.0, -(n - m) * mu * dt);
      REQUIRE(std::abs(out.rho(n, m) - want) < 1e-15);
    }
  }
}

TEST_CASE("one Euler substep of the generator is the map itself") {
  std::mt19937 rng(8);
  const BasisSpec b(20);
  const DensityMatrix rho(b, oracle::random_density(rng, b.dim(), 2));
  const double mu = 0.9, j = 2e-3, dt = 1.5;
  Eigen::MatrixXcd euler = rho.rho + dt * detail::leakage_rhs(rho.rho, j);
  detail::phase_rotate(euler, mu, dt, 1.0);
  const DensityMatrix master = step_master(rho, mu, j, dt);
  REQUIRE((euler - master.rho).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("channel sends a number state to the binomial cascade") {
  const BasisSpec b(25);
  const DensityMatrix rho = DensityMatrix::from_pure(number_state(20, b));
  const double j = 1e-2, dt = 30.0;  // eta = e^{-0.3}
  const double eta = std::exp(-j * dt);
  const DensityMatrix out = step_channel_oracle(rho, 0.4, j, dt);
  for (int k = 0; k <= 20; ++k)
    REQUIRE(std::abs(out.rho(k, k).real() - oracle::binomial_pmf(20, eta, k)) <
            1e-13);
  double off = 0.0;
  for (int n = 0; n <= 25; ++n)
    for (int m = 0; m <= 25; ++m)
      if (n != m) off += std::abs(out.rho(n, m));
  REQUIRE(off == 0.0);
  REQUIRE(std::abs(out.trace() - 1.0) < 1e-12);
}

TEST_CASE("channel keeps the coherent family closed") {
  const BasisSpec b(60);
  const double mu = 0.7, j = 1e-2, dt = 10.0;  // eta = e^{-0.1}
  const double eta = std::exp(-j * dt);
  const DensityMatrix rho = DensityMatrix::from_pure(csib(cd(3.0, 0.0), b));
  const DensityMatrix out = step_channel_oracle(rho, mu, j, dt);
  const PureState target =
      csib(3.0 * std::sqrt(eta) * std::polar(1.0, -mu * dt), b);
  const Eigen::MatrixXcd want = target.amp * target.amp.adjoint();
  REQUIRE((out.rho - want).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("channel with eta = 1 is the identity plus phase") {
  std::mt19937 rng(17);
  const BasisSpec b(15);
  const DensityMatrix rho(b, oracle::random_density(rng, b.dim(), 2));
  const double mu = 1.1, dt = 2.0;
  const DensityMatrix out = step_channel_oracle(rho, mu, 0.0, dt);
  const DensityMatrix want = step_master(rho, mu, 0.0, dt);
  REQUIRE((out.rho - want.rho).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("generator oracle with j = 0 matches the map exactly") {
  std::mt19937 rng(21);
  const BasisSpec b(10);
  const DensityMatrix rho(b, oracle::random_density(rng, b.dim(), 2));
  const DensityMatrix a = step_generator_oracle(rho, 0.8, 0.0, 3.0, 16);
  const DensityMatrix m = step_master(rho, 0.8, 0.0, 3.0);
  REQUIRE((a.rho - m.rho).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("the two oracles agree at constant parameters") {
  const BasisSpec b(60);
  const DensityMatrix rho =
      DensityMatrix::from_pure(csib(std::polar(5.0, 0.4), b, 1e-8));
  const double j = 1e-3, dt = 50.0, mu = 0.01;  // j dt = 0.05, mu dt = 0.5
  const DensityMatrix ch = step_channel_oracle(rho, mu, j, dt);
  const DensityMatrix gen = step_generator_oracle(rho, mu, j, dt, 1000);
  REQUIRE((ch.rho - gen.rho).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("generator substep halving gains a factor near sixteen") {
  const BasisSpec b(60);
  const DensityMatrix rho =
      DensityMatrix::from_pure(csib(std::polar(5.0, 0.4), b, 1e-8));
  const double j = 1e-3, dt = 50.0, mu = 0.0;
  const Eigen::MatrixXcd exact = step_channel_oracle(rho, mu, j, dt).rho;
  const double e8 =
      (step_generator_oracle(rho, mu, j, dt, 8).rho - exact).cwiseAbs().maxCoeff();
  const double e16 =
      (step_generator_oracle(rho, mu, j, dt, 16).rho - exact).cwiseAbs().maxCoeff();
  REQUIRE(e8 / e16 > 11.0);
  REQUIRE(e8 / e16 < 21.0);
}

TEST_CASE("map error against the channel shrinks fourfold with dt") {
  const BasisSpec b(60);
  const DensityMatrix rho =
      DensityMatrix::from_pure(csib(std::polar(5.0, 0.4), b, 1e-8));
  const double j = 1e-3, mu = 0.7;
  std::vector<double> gaps;
  for (double jdt : {1e-2, 5e-3, 2.5e-3}) {
    const double dt = jdt / j;
    gaps.push_back((step_master(rho, mu, j, dt).rho -
                    step_channel_oracle(rho, mu, j, dt).rho)
                       .cwiseAbs()
                       .maxCoeff());
  }
  REQUIRE(gaps[0] / gaps[1] > 3.5);
  REQUIRE(gaps[0] / gaps[1] < 4.5);
  REQUIRE(gaps[1] / gaps[2] > 3.5);
  REQUIRE(gaps[1] / gaps[2] < 4.5);
}

TEST_CASE("map preserves trace and Hermiticity along a trajectory") {
  std::mt19937 rng(33);
  const BasisSpec b(40);
  DensityMatrix rho(b, oracle::random_density(rng, b.dim(), 3));
  for (int k = 0; k < 200; ++k) rho = step_master(rho, 0.9, 1e-3, 1.0);
  REQUIRE(std::abs(rho.trace() - 1.0) < 1e-12);
  REQUIRE(rho.hermiticity_defect() < 1e-12);

  // mass parked at the truncation edge still telescopes
  DensityMatrix edge = DensityMatrix::from_pure(number_state(40, b));
  edge = step_master(edge, 0.9, 1e-3, 1.0);
  REQUIRE(std::abs(edge.trace() - 1.0) < 1e-14);
}

TEST_CASE("a single admissible step stays positive") {
  const BasisSpec b(200);
  const DensityMatrix rho = DensityMatrix::from_pure(csib(cd(10.0, 0.0), b));
  // safety_c = 1e-4: the step defect pushes the spectrum down by only
  // ~<N>(j dt)^2/4 = 2.5e-11
  const DensityMatrix out = step_master(rho, 1.0, 1e-3, 1e-3);
  REQUIRE(out.min_eigenvalue() > -1e-10);
}

TEST_CASE("map validity precondition") {
  const BasisSpec b(30);
  const DensityMatrix rho = DensityMatrix::from_pure(number_state(20, b));
  REQUIRE_THROWS_AS(step_master(rho, 0.0, 1.0, 1.0), precondition_error);
  REQUIRE_THROWS_AS(step_master(rho, 0.0, 1e-3, -1.0), std::invalid_argument);
}

TEST_CASE("evolved mean follows the exponential decay") {
  const BasisSpec b(200);
  const DensityMatrix rho0 = DensityMatrix::from_pure(csib(cd(10.0, 0.0), b));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);
  cfg.policy.safety_c = 0.01;
  cfg.t_end = 100.0;
  cfg.density_update = false;
  cfg.record_every = 10;
  const EvolveResult res = evolve(rho0, cfg);
  const double want = 100.0 * std::exp(-0.1);
  REQUIRE(std::abs(res.record.mean_N.back() - want) / want < 1e-3);

  // independent RK4 integration of the same interval
  DensityMatrix rk = rho0;
  for (int s = 0; s < 20; ++s) rk = step_generator_oracle(rk, 1.0, 1e-3, 5.0, 50);
  auto [mean_rk, var_rk] = mean_and_variance(rk);
  (void)var_rk;
  REQUIRE(std::abs(mean_rk - want) / want < 1e-6);
  REQUIRE(std::abs(res.record.mean_N.back() - mean_rk) / want < 1e-3);
}

TEST_CASE("Fano factor relaxes from below and from above") {
  // F(0) = 0: number state
  {
    const BasisSpec b(60);
    const DensityMatrix rho0 = DensityMatrix::from_pure(number_state(50, b));
    EvolutionConfig cfg;
    cfg.params = const_rate_params(1e-3);
    cfg.policy.safety_c = 1e-3;
    cfg.t_end = 500.0;  // j t = 0.5
    cfg.density_update = false;
    cfg.record_every = 100;
    const EvolveResult res = evolve(rho0, cfg);
    for (std::size_t i = 0; i < res.record.size(); ++i) {
      const double want = 1.0 - std::exp(-1e-3 * res.record.times[i]);
      REQUIRE(std::abs(res.record.fano[i] - want) < 1e-3);
    }
  }
  // F(0) = 3: broad gaussian
  {
    const BasisSpec b(240);
    const DensityMatrix rho0 = DensityMatrix::from_pure(
        gaussian_profile_state({100.0, 3.0, 0.0}, b));
    EvolutionConfig cfg;
    cfg.params = const_rate_params(1e-3);
    cfg.policy.safety_c = 5e-3;
    cfg.t_end = 500.0;
    cfg.density_update = false;
    cfg.record_every = 200;
    const EvolveResult res = evolve(rho0, cfg);
    const double f0 = res.record.fano[0];
    for (std::size_t i = 0; i < res.record.size(); ++i) {
      const double want = 1.0 + (f0 - 1.0) * std::exp(-1e-3 * res.record.times[i]);
      REQUIRE(std::abs(res.record.fano[i] - want) / want < 0.02);
    }
  }
}

TEST_CASE("finite differences of the record match the two flow equations") {
  const BasisSpec b(140);
  const DensityMatrix rho0 =
      DensityMatrix::from_pure(gaussian_profile_state({50.0, 3.0, 0.0}, b));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);
  cfg.policy.safety_c = 2e-4;
  cfg.t_end = 300.0;
  cfg.density_update = false;
  cfg.record_every = 1;
  const EvolveResult res = evolve(rho0, cfg);
  const RunRecord& r = res.record;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const double dt = r.times[i + 1] - r.times[i];
    // d<N>/dt = -j<N>, exact per step
    const double dn = (r.mean_N[i + 1] - r.mean_N[i]) / dt;
    REQUIRE(std::abs(dn + r.j_t[i] * r.mean_N[i]) <
            1e-3 * r.j_t[i] * r.mean_N[i]);
    // dF/dt = j(1-F) where F is away from 1
    if (std::abs(1.0 - r.fano[i]) > 0.05) {
      const double df = (r.fano[i + 1] - r.fano[i]) / dt;
      const double want = r.j_t[i] * (1.0 - r.fano[i]);
      REQUIRE(std::abs(df - want) < 0.01 * std::abs(want));
    }
  }
}

TEST_CASE("coherent family closure bounds the purity loss") {
  const BasisSpec b(200);
  const DensityMatrix rho0 = DensityMatrix::from_pure(csib(cd(10.0, 0.0), b));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);
  cfg.policy.safety_c = 0.01;
  cfg.t_end = 100.0;  // j t = 0.1
  cfg.density_update = true;
  cfg.record_every = 10;
  const EvolveResult res = evolve(rho0, cfg);
  for (std::size_t i = 0; i < res.record.size(); ++i) {
    const double jt = 1e-3 * res.record.times[i];
    REQUIRE(res.record.purity[i] >=
            1.0 - 10.0 * cfg.policy.safety_c * cfg.policy.safety_c * jt -
                1e-12);
    // the fitted track sits exactly on <N(t)>
    const CsibFit fit = (i + 1 == res.record.size())
                            ? fidelity_to_csib(res.final_state)
                            : CsibFit{};
    if (i + 1 == res.record.size())
      REQUIRE(std::abs(fit.track.magnitude * fit.track.magnitude -
                       res.record.mean_N[i]) < 1e-9);
  }
}

TEST_CASE("recorded phase rotates at minus the chemical potential") {
  const BasisSpec b(60);
  const DensityMatrix rho0 =
      DensityMatrix::from_pure(csib(std::polar(5.0, 0.3), b, 1e-8));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);  // mu = g n = 25/100
  cfg.policy.safety_c = 0.01;
  cfg.t_end = 40.0;
  cfg.density_update = false;
  cfg.record_every = 1;
  const EvolveResult res = evolve(rho0, cfg);
  const RunRecord& r = res.record;
  REQUIRE(r.size() > 50);
  REQUIRE(std::abs(r.phase[0] - 0.3) < 1e-10);
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const double expect = -r.mu_t[i] * (r.times[i + 1] - r.times[i]);
    double got = r.phase[i + 1] - r.phase[i];
    while (got > M_PI) got -= 2.0 * M_PI;
    while (got < -M_PI) got += 2.0 * M_PI;
    REQUIRE(std::abs(got - expect) < 1e-3 * std::abs(expect));
  }
}

TEST_CASE("density update moves mu and j slowly") {
  const BasisSpec b(200);
  const DensityMatrix rho0 = DensityMatrix::from_pure(csib(cd(10.0, 0.0), b));
  PhysicsParams p;  // sqrt DOS: j ~ sqrt(n)
  p.box_volume_V = 100.0;
  p.coupling_lambda_sq = 0.1;
  EvolutionConfig cfg;
  cfg.params = p;
  cfg.policy.safety_c = 0.01;
  cfg.t_end = 150.0;
  cfg.density_update = true;
  cfg.record_every = 1;
  const EvolveResult res = evolve(rho0, cfg);
  const RunRecord& r = res.record;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const double jdt = r.j_t[i] * (r.times[i + 1] - r.times[i]);
    REQUIRE(std::abs(r.mu_t[i + 1] - r.mu_t[i]) / r.mu_t[i] <= jdt * 1.001);
    REQUIRE(std::abs(r.j_t[i + 1] - r.j_t[i]) / r.j_t[i] <= jdt * 1.001);
  }
}

TEST_CASE("step size tracks the decaying mean") {
  const BasisSpec b(60);
  const DensityMatrix rho0 = DensityMatrix::from_pure(csib(cd(5.0, 0.0), b, 1e-8));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);
  cfg.policy.safety_c = 0.01;
  cfg.t_end = 1000.0;  // j t = 1: mean decays by e
  cfg.density_update = false;
  cfg.record_every = 1;
  const EvolveResult res = evolve(rho0, cfg);
  const RunRecord& r = res.record;
  for (std::size_t i = 0; i + 2 < r.size(); ++i) {
    const double njdt = r.mean_N[i] * r.j_t[i] * (r.times[i + 1] - r.times[i]);
    REQUIRE(njdt < 0.012);   // never far above safety_c
    REQUIRE(njdt > 0.0085);  // re-chosen before drifting out
  }
}

TEST_CASE("binomial endpoint at small scale") {
  const BasisSpec b(35);
  const DensityMatrix rho0 = DensityMatrix::from_pure(number_state(30, b));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);
  cfg.policy.safety_c = 2e-4;
  cfg.t_end = 100.0;  // j t = 0.1
  cfg.density_update = false;
  cfg.record_every = 1000;
  const EvolveResult res = evolve(rho0, cfg);
  const double eta = std::exp(-0.1);
  std::vector<double> got(36), want(36);
  for (int n = 0; n <= 35; ++n) {
    got[n] = res.final_state.rho(n, n).real();
    want[n] = oracle::binomial_pmf(30, eta, n);
  }
  REQUIRE(oracle::tv_distance(got, want) < 1e-4);

  const DensityMatrix ch = step_channel_oracle(rho0, 0.3, 1e-3, 100.0);
  for (int n = 0; n <= 35; ++n) got[n] = ch.rho(n, n).real();
  REQUIRE(oracle::tv_distance(got, want) < 1e-8);
}

TEST_CASE("record cadence thins rows but keeps the endpoint") {
  const BasisSpec b(40);
  const DensityMatrix rho0 = DensityMatrix::from_pure(csib(cd(3.0, 0.0), b));
  EvolutionConfig cfg;
  cfg.params = const_rate_params(1e-3);
  cfg.policy.safety_c = 0.01;
  cfg.t_end = 40.0;
  cfg.record_every = 7;
  const EvolveResult res = evolve(rho0, cfg);
  REQUIRE(res.record.times.front() == 0.0);
  REQUIRE(std::abs(res.record.times.back() - 40.0) < 1e-9);
  EvolutionConfig dense = cfg;
  dense.record_every = 1;
  REQUIRE(evolve(rho0, dense).record.size() >= res.record.size() * 4);
}
