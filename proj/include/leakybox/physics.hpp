#pragma once

// Density-dependent parameter model: chemical potential mu(n), leak rate
// j(n), and the admissible step size. hbar = 1 throughout; energies are in
// units where hbar = 1 and times in inverse energies.

#include <cmath>
#include <functional>
#include <optional>
#include <string>

#include "leakybox/common.hpp"

namespace leakybox {

/// All the pieces of j(n) = K * (2*pi/hbar) * (n0/n) * |lambda|^2 * (v^2/V)
/// * D(mu(n)), plus the pluggable mu(n) and D(mu) models.
struct PhysicsParams {
  double coupling_lambda_sq = 1.0;   // |lambda|^2, one fitted scalar
  double wall_volume_v = 1.0;        // total wall volume v
  double box_volume_V = 1.0;         // box volume V
  double condensate_fraction = 1.0;  // n0/n in (0,1]
  double order_unity_K = 1.0;        // K ~ 1
  double hbar = 1.0;
  std::function<double(double)> mu_model =  // mu(n); default mean-field g*n
      [](double n) { return n; };
  std::function<double(double)> dos_model =  // D(mu); default D0*sqrt(mu)
      [](double mu) { return std::sqrt(mu) / (2.0 * M_PI); };

  void validate() const {
    if (!(coupling_lambda_sq > 0.0) || !(wall_volume_v > 0.0) ||
        !(box_volume_V > 0.0) || !(order_unity_K > 0.0) || !(hbar > 0.0))
      throw std::invalid_argument("PhysicsParams: all scalars must be > 0");
    if (!(condensate_fraction > 0.0) || condensate_fraction > 1.0)
      throw std::invalid_argument(
          "PhysicsParams: condensate_fraction must be in (0,1]");
  }
};

/// Step-size policy: Delta_t = safety_c / (<N> j), which keeps the map's
/// perturbative parameter <N> j Delta_t = safety_c well below 1. If the
/// matrix-element energy scale E_c is known, steps below hbar/E_c are
/// rejected as outside the validity window.
struct StepPolicy {
  double safety_c = 0.01;
  std::optional<double> energy_cutoff_Ec;

  void validate() const {
    if (!(safety_c > 0.0) || safety_c > 0.1)
      throw std::invalid_argument("StepPolicy: safety_c must be in (0, 0.1]");
    if (energy_cutoff_Ec && !(*energy_cutoff_Ec > 0.0))
      throw std::invalid_argument("StepPolicy: energy_cutoff_Ec must be > 0");
  }
};

inline double chemical_potential(const PhysicsParams& p, double n) {
  if (!(n > 0.0))
    throw std::invalid_argument("chemical_potential: density must be > 0");
  const double mu = p.mu_model(n);
  if (!(mu > 0.0))
    throw std::invalid_argument(
        "chemical_potential: model returned non-positive mu");
  return mu;
}

/// Per-boson escape rate.
inline double leak_rate(const PhysicsParams& p, double n) {
  if (!(n > 0.0))
    throw std::invalid_argument("leak_rate: density must be > 0");
  const double mu = chemical_potential(p, n);
  const double dos = p.dos_model(mu);
  if (dos < 0.0)
    throw std::invalid_argument("leak_rate: model returned negative D(mu)");
  return p.order_unity_K * (2.0 * M_PI / p.hbar) * p.condensate_fraction *
         p.coupling_lambda_sq * (p.wall_volume_v * p.wall_volume_v /
                                 p.box_volume_V) *
         dos;
}

/// Delta_t = safety_c / (<N> j(<N>/V)). Errors when the chosen step falls
/// below hbar/E_c (window empty or safety_c too aggressive for E_c).
inline double choose_dt(const StepPolicy& policy, const PhysicsParams& params,
                        double mean_N, double V) {
  policy.validate();
  if (!(mean_N > 0.0))
    throw std::invalid_argument("choose_dt: mean_N must be > 0");
  const double j = leak_rate(params, mean_N / V);
  const double dt = policy.safety_c / (mean_N * j);
  if (policy.energy_cutoff_Ec) {
    const double lower = params.hbar / *policy.energy_cutoff_Ec;
    if (dt < lower)
      throw precondition_error(
          "choose_dt: step window is empty: hbar/E_c = " + format_full(lower) +
          " exceeds safety_c/(<N> j) = " + format_full(dt) +
          "; parameters are outside the weak-coupling regime");
  }
  return dt;
}

}  // namespace leakybox
