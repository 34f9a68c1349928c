#pragma once

// Time evolution. The primary propagator is the finite-step map
//
//   rho_NM(t+dt) = e^{-i(N-M) mu dt / hbar}
//                  [ rho_NM (1 - (N+M) j dt / 2)
//                    + rho_{N+1,M+1} sqrt((N+1)(M+1)) j dt ],
//
// exact to first order in j*dt. Two independent oracles bound its error:
// the exact amplitude-damping channel (Kraus form, survival eta = e^{-j dt})
// and RK4 integration of the continuous generator whose Euler step is
// literally the map above. The phase rotation commutes with the damping
// generator entrywise (the inflow term shifts N and M together, leaving
// N-M unchanged), so all three propagators apply it exactly.

#include <cmath>

#include "leakybox/observables.hpp"
#include "leakybox/physics.hpp"

namespace leakybox {

namespace detail {

// Damping part only, coefficients all real: preserves Hermiticity bitwise
// and the diagonal exactly real.
inline Eigen::MatrixXcd master_damping(const Eigen::MatrixXcd& rho, double j,
                                       double dt) {
  const int d = static_cast<int>(rho.rows());
  Eigen::VectorXd root(d + 1);
  for (int n = 0; n <= d; ++n) root[n] = std::sqrt(double(n));
  Eigen::MatrixXcd out(d, d);
  const double x = j * dt;
  for (int n = 0; n < d; ++n) {
    for (int m = 0; m < d; ++m) {
      cd v = rho(n, m) * (1.0 - 0.5 * (n + m) * x);
      if (n + 1 < d && m + 1 < d)
        v += x * root[n + 1] * root[m + 1] * rho(n + 1, m + 1);
      out(n, m) = v;
    }
  }
  return out;
}

// In-place off-diagonal rotation rho_NM *= e^{-i(N-M) mu dt}; the diagonal
// is left untouched (its phase factor is exactly 1).
inline void phase_rotate(Eigen::MatrixXcd& rho, double mu, double dt,
                         double hbar) {
  const int d = static_cast<int>(rho.rows());
  Eigen::VectorXcd u(d);
  for (int n = 0; n < d; ++n) u[n] = std::polar(1.0, -n * mu * dt / hbar);
  for (int n = 0; n < d; ++n)
    for (int m = 0; m < d; ++m)
      if (n != m) rho(n, m) *= u[n] * std::conj(u[m]);
}

// d(rho)/dt restricted to the leakage part:
//   -j (N+M)/2 rho_NM + j sqrt((N+1)(M+1)) rho_{N+1,M+1}.
inline Eigen::MatrixXcd leakage_rhs(const Eigen::MatrixXcd& rho, double j) {
  const int d = static_cast<int>(rho.rows());
  Eigen::MatrixXcd out(d, d);
  for (int n = 0; n < d; ++n) {
    for (int m = 0; m < d; ++m) {
      cd v = -0.5 * j * (n + m) * rho(n, m);
      if (n + 1 < d && m + 1 < d)
        v += j * std::sqrt(double(n + 1) * double(m + 1)) * rho(n + 1, m + 1);
      out(n, m) = v;
    }
  }
  return out;
}

}  // namespace detail

/// One application of the finite-step map. Requires <N> j dt < 1 (enforced
/// upstream by choose_dt); hbar = 1 units.
inline DensityMatrix step_master(const DensityMatrix& dm, double mu, double j,
                                 double dt, double hbar = 1.0) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_master: dt must be > 0");
  if (j < 0.0) throw std::invalid_argument("step_master: j must be >= 0");
  auto [mean, var] = mean_and_variance(dm);
  (void)var;
  if (mean * j * dt >= 1.0)
    throw precondition_error("step_master: <N> j dt = " +
                             format_full(mean * j * dt) +
                             " violates the validity window (< 1)");
  Eigen::MatrixXcd out = detail::master_damping(dm.rho, j, dt);
  detail::phase_rotate(out, mu, dt, hbar);
  return DensityMatrix(dm.basis, std::move(out), dm.discarded_tail);
}

/// Exact amplitude-damping channel composed with the phase rotation.
/// Kraus elements: <N-k|K_k|N> = sqrt(C(N,k) eta^{N-k} (1-eta)^k) with
/// eta = e^{-j dt}. Completely positive and trace preserving up to the
/// truncation boundary.
inline DensityMatrix step_channel_oracle(const DensityMatrix& dm, double mu,
                                         double j, double dt,
                                         double hbar = 1.0) {
  if (!(dt > 0.0))
    throw std::invalid_argument("step_channel_oracle: dt must be > 0");
  if (j < 0.0) throw std::invalid_argument("step_channel_oracle: j >= 0");
  const int d = dm.basis.dim();
  const double eta = std::exp(-j * dt);
  const double loss = -std::expm1(-j * dt);  // 1 - eta, accurate for small jdt
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  // k = number of bosons lost in this step
  double loss_pow = 1.0;
  for (int k = 0; k < d; ++k) {
    if (k > 0) {
      loss_pow *= loss;
      if (loss_pow < 1e-60) break;
    }
    Eigen::VectorXd w(d - k);
    for (int n = 0; n + k < d; ++n)
      w[n] = std::exp(0.5 * (std::lgamma(n + k + 1.0) - std::lgamma(n + 1.0) -
                             std::lgamma(k + 1.0)));
    for (int n = 0; n + k < d; ++n)
      for (int m = 0; m + k < d; ++m)
        out(n, m) += loss_pow * w[n] * w[m] * dm.rho(n + k, m + k);
  }
  for (int n = 0; n < d; ++n)
    for (int m = 0; m < d; ++m)
      out(n, m) *= std::pow(eta, 0.5 * (n + m));
  detail::phase_rotate(out, mu, dt, hbar);
  return DensityMatrix(dm.basis, std::move(out), dm.discarded_tail);
}

/// RK4 integration of the continuous leakage generator over `substeps`
/// equal substeps, then the exact phase rotation. One *Euler* substep of
/// the same generator reproduces step_master identically.
inline DensityMatrix step_generator_oracle(const DensityMatrix& dm, double mu,
                                           double j, double dt, int substeps,
                                           double hbar = 1.0) {
  if (substeps < 1)
    throw std::invalid_argument("step_generator_oracle: substeps >= 1");
  const double h = dt / substeps;
  Eigen::MatrixXcd r = dm.rho;
  for (int s = 0; s < substeps; ++s) {
    Eigen::MatrixXcd k1 = detail::leakage_rhs(r, j);
    Eigen::MatrixXcd k2 = detail::leakage_rhs(r + 0.5 * h * k1, j);
    Eigen::MatrixXcd k3 = detail::leakage_rhs(r + 0.5 * h * k2, j);
    Eigen::MatrixXcd k4 = detail::leakage_rhs(r + h * k3, j);
    r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  detail::phase_rotate(r, mu, dt, hbar);
  return DensityMatrix(dm.basis, std::move(r), dm.discarded_tail);
}

/// Loop controls for evolve().
struct EvolutionConfig {
  PhysicsParams params;
  StepPolicy policy;
  double t_end = 1.0;
  bool density_update = true;  // recompute n(t) = <N(t)>/V every step
  int record_every = 1;

  void validate() const {
    params.validate();
    policy.validate();
    if (!(t_end > 0.0))
      throw std::invalid_argument("EvolutionConfig: t_end must be > 0");
    if (record_every < 1)
      throw std::invalid_argument("EvolutionConfig: record_every >= 1");
  }
};

struct EvolveResult {
  RunRecord record;
  DensityMatrix final_state;
};

/// Repeated step_master with the explicit scheme: mu and j are evaluated at
/// each step's start (every step when density_update is on, frozen at t=0
/// otherwise); dt is re-chosen whenever <N> has drifted more than 10% since
/// it was last chosen. The final step is clipped to land on t_end.
inline EvolveResult evolve(const DensityMatrix& rho0,
                           const EvolutionConfig& cfg) {
  cfg.validate();
  const double V = cfg.params.box_volume_V;
  DensityMatrix state = rho0;

  auto [mean0, var0] = mean_and_variance(state);
  (void)var0;
  if (!(mean0 > 0.0))
    throw precondition_error("evolve: initial <N> must be > 0");

  double j = leak_rate(cfg.params, mean0 / V);
  double mu = chemical_potential(cfg.params, mean0 / V);
  double dt = choose_dt(cfg.policy, cfg.params, mean0, V);
  double mean_ref = mean0;

  RunRecord rec;
  if (!cfg.policy.energy_cutoff_Ec)
    rec.warnings.push_back(
        "energy_cutoff_Ec unset; lower bound of the step window unchecked");

  auto record = [&](double t, const DensityMatrix& dm, double jc, double mc) {
    auto [m, v] = mean_and_variance(dm);
    rec.times.push_back(t);
    rec.mean_N.push_back(m);
    rec.var_N.push_back(v);
    rec.fano.push_back(m > 0.0 ? v / m : 0.0);
    rec.purity.push_back(purity(dm));
    const CsibFit fit = fidelity_to_csib(dm);
    rec.fidelity_csib.push_back(fit.fidelity);
    rec.phase.push_back(fit.track.phase);
    rec.phase_flagged.push_back(!fit.phase_defined);
    rec.j_t.push_back(jc);
    rec.mu_t.push_back(mc);
  };

  // Rows carry the j and mu in force at that time, i.e. the values that
  // drive the step leaving the row (explicit scheme).
  double t = 0.0;
  long step_index = 0;
  while (true) {
    auto [mean, var] = mean_and_variance(state);
    (void)var;
    if (cfg.density_update && step_index > 0) {
      j = leak_rate(cfg.params, mean / V);
      mu = chemical_potential(cfg.params, mean / V);
    }
    if (std::abs(mean - mean_ref) > 0.10 * mean_ref) {
      dt = choose_dt(cfg.policy, cfg.params, mean, V);
      mean_ref = mean;
    }
    const bool done = t >= cfg.t_end * (1.0 - 1e-12);
    if (step_index % cfg.record_every == 0 || done) record(t, state, j, mu);
    if (done) break;
    const double step = std::min(dt, cfg.t_end - t);
    state = step_master(state, mu, j, step, cfg.params.hbar);
    t += step;
    ++step_index;
  }
  return EvolveResult{std::move(rec), std::move(state)};
}

}  // namespace leakybox
