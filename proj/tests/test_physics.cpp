#include <catch2/catch_amalgamated.hpp>

#include "leakybox/physics.hpp"

using namespace leakybox;

namespace {

PhysicsParams unit_params() {
  PhysicsParams p;  // all scalars 1
  p.mu_model = [](double n) { return n; };
  p.dos_model = [](double) { return 1.0 / (2.0 * M_PI); };
  return p;
}

}  // namespace

TEST_CASE("leak rate unit plug-in") {
  const PhysicsParams p = unit_params();
  REQUIRE(std::abs(leak_rate(p, 1.0) - 1.0) < 1e-15);
  REQUIRE_THROWS_AS(leak_rate(p, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(leak_rate(p, -2.0), std::invalid_argument);
}

TEST_CASE("leak rate carries the explicit 1/V dependence") {
  PhysicsParams p = unit_params();
  const double j1 = leak_rate(p, 1.0);
  p.box_volume_V = 2.0;
  REQUIRE(std::abs(leak_rate(p, 1.0) - 0.5 * j1) < 1e-15);
}

TEST_CASE("free-particle DOS gives j proportional to sqrt(n)") {
  PhysicsParams p = unit_params();
  p.dos_model = [](double mu) { return 0.3 * std::sqrt(mu); };  // mu = g n
  const double n0 = 0.7;
  REQUIRE(std::abs(leak_rate(p, 4.0 * n0) / leak_rate(p, n0) - 2.0) < 1e-12);
}

TEST_CASE("leak rate scaling degrees") {
  PhysicsParams p = unit_params();
  const double base = leak_rate(p, 1.3);
  PhysicsParams q = p;
  q.coupling_lambda_sq *= 3.7;
  REQUIRE(std::abs(leak_rate(q, 1.3) / base - 3.7) < 1e-12);
  q = p;
  q.wall_volume_v *= 2.5;
  REQUIRE(std::abs(leak_rate(q, 1.3) / base - 2.5 * 2.5) < 1e-12);
  q = p;
  q.box_volume_V *= 4.0;
  REQUIRE(std::abs(leak_rate(q, 1.3) / base - 0.25) < 1e-12);
  q = p;
  q.condensate_fraction = 0.5;
  REQUIRE(std::abs(leak_rate(q, 1.3) / base - 0.5) < 1e-12);
}

TEST_CASE("chemical potential models") {
  PhysicsParams p = unit_params();
  REQUIRE(std::abs(chemical_potential(p, 0.5) - 0.5) < 1e-15);

  // a change of <N> by 1 changes n by 1/V and mu by g/V
  const double g = 1.0, V = 1e4, n = 1.0;
  REQUIRE(std::abs((chemical_potential(p, n + 1.0 / V) -
                    chemical_potential(p, n)) -
                   g / V) < 1e-12);

  p.mu_model = [](double nn) { return std::sqrt(nn); };
  REQUIRE(std::abs(chemical_potential(p, 4.0) - 2.0) < 1e-15);

  p.mu_model = [](double) { return -1.0; };
  REQUIRE_THROWS_AS(chemical_potential(p, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(chemical_potential(unit_params(), 0.0),
                    std::invalid_argument);
}

TEST_CASE("step choice sits inside the validity window") {
  // params tuned so j = 1e-3 independent of n
  PhysicsParams p = unit_params();
  p.coupling_lambda_sq = 1e-3;
  StepPolicy policy;
  policy.safety_c = 0.01;
  const double dt = choose_dt(policy, p, 100.0, 1.0);
  REQUIRE(std::abs(dt - 0.1) < 1e-15);
  // <N> j dt = safety_c < 1
  REQUIRE(std::abs(100.0 * 1e-3 * dt - policy.safety_c) < 1e-15);

  // halving <N> doubles dt at fixed j
  REQUIRE(std::abs(choose_dt(policy, p, 50.0, 1.0) - 0.2) < 1e-15);

  // hbar/E_c = 0.2 > 0.1: empty window
  policy.energy_cutoff_Ec = 5.0;
  REQUIRE_THROWS_AS(choose_dt(policy, p, 100.0, 1.0), precondition_error);
  policy.energy_cutoff_Ec = 100.0;  // lower bound 0.01 < 0.1: fine
  REQUIRE_NOTHROW(choose_dt(policy, p, 100.0, 1.0));
}

TEST_CASE("policy and parameter validation") {
  StepPolicy policy;
  policy.safety_c = 0.5;
  REQUIRE_THROWS_AS(policy.validate(), std::invalid_argument);
  policy.safety_c = 0.0;
  REQUIRE_THROWS_AS(policy.validate(), std::invalid_argument);

  PhysicsParams p = unit_params();
  p.condensate_fraction = 1.5;
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
  p = unit_params();
  p.box_volume_V = 0.0;
  REQUIRE_THROWS_AS(p.validate(), std::invalid_argument);
}
