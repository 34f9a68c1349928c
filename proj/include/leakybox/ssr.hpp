#pragma once

// Two-box demonstration that coherent-state assignments coexist with the
// number superselection rule: a total state with exactly n_total bosons
// shared between two boxes and an environment reduces, for box one, to the
// same Poissonian mixture as the phase average of coherent states.
// Environment states are abstract orthonormal labels (M, l); only
// orthogonality and number bookkeeping enter the argument.

#include <cmath>
#include <complex>
#include <vector>

#include "leakybox/states.hpp"

namespace leakybox {

struct TwoBoxConfig {
  int n_total = 24;
  double alpha_mag = 2.0;         // |alpha|, box one
  double alpha_phase = 0.0;       // phi
  double alpha_prime_mag = std::sqrt(3.0);  // |alpha'|, box two
  double alpha_prime_phase = 0.0;  // phi'; kept 0 by convention, only the
                                   // relative phase phi - phi' is physical
  std::vector<cd> env_coeffs = {cd(1.0, 0.0)};  // C_l, sum |C_l|^2 = 1

  void validate() const {
    if (n_total < 1)
      throw std::invalid_argument("TwoBoxConfig: n_total must be >= 1");
    if (alpha_mag < 0.0 || alpha_prime_mag < 0.0)
      throw std::invalid_argument("TwoBoxConfig: magnitudes must be >= 0");
    if (env_coeffs.empty())
      throw std::invalid_argument("TwoBoxConfig: env_coeffs is empty");
    double s = 0.0;
    for (const cd& c : env_coeffs) s += std::norm(c);
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument(
          "TwoBoxConfig: sum |C_l|^2 = " + format_full(s) + ", must be 1");
  }
};

namespace detail {

inline int box_cut(double mag, int n_total) {
  const int cut = static_cast<int>(std::ceil(mag * mag + 10.0 * mag));
  return std::min(std::max(cut, 1), n_total);
}

}  // namespace detail

struct TotalStateBuild {
  CompositeState state;
  double norm_deficit;  // 1 - norm of the truncated, un-renormalized state
};

/// The number-conserving total state: amplitude at (N, N', M, l) with
/// M = n_total - N - N' equal to
/// e^{-(|a|^2+|a'|^2)/2} a^N a'^N' C_l / sqrt(N! N'!), truncated to
/// N <= |a|^2+10|a|, N' <= |a'|^2+10|a'|, N+N' <= n_total, and
/// renormalized. The third tensor factor indexes (M, l) pairs. This
/// variant reports the truncation deficit instead of gating on it.
inline TotalStateBuild build_total_state_report(const TwoBoxConfig& cfg) {
  cfg.validate();
  const cd alpha = std::polar(cfg.alpha_mag, cfg.alpha_phase);
  const cd alpha_prime = std::polar(cfg.alpha_prime_mag, cfg.alpha_prime_phase);
  const int n1 = detail::box_cut(cfg.alpha_mag, cfg.n_total);
  const int n2 = detail::box_cut(cfg.alpha_prime_mag, cfg.n_total);
  const int labels = static_cast<int>(cfg.env_coeffs.size());
  const int env_dim = (cfg.n_total + 1) * labels;

  // Poissonian branch amplitudes via the same ladder recurrence as csib.
  const double pref =
      std::exp(-(cfg.alpha_mag * cfg.alpha_mag +
                 cfg.alpha_prime_mag * cfg.alpha_prime_mag) / 2.0);
  std::vector<cd> ca(n1 + 1), cb(n2 + 1);
  ca[0] = pref;
  for (int n = 0; n < n1; ++n) ca[n + 1] = ca[n] * alpha / std::sqrt(n + 1.0);
  cb[0] = 1.0;
  for (int n = 0; n < n2; ++n)
    cb[n + 1] = cb[n] * alpha_prime / std::sqrt(n + 1.0);

  const BasisSpec b1(n1), b2(n2), be(env_dim - 1);
  Eigen::VectorXcd amp =
      Eigen::VectorXcd::Zero(std::int64_t(n1 + 1) * (n2 + 1) * env_dim);
  for (int N = 0; N <= n1; ++N) {
    for (int Np = 0; Np <= n2; ++Np) {
      if (N + Np > cfg.n_total) continue;
      const int M = cfg.n_total - N - Np;
      const cd coef = ca[N] * cb[Np];
      for (int l = 0; l < labels; ++l) {
        const std::int64_t idx =
            (std::int64_t(N) * (n2 + 1) + Np) * env_dim + M * labels + l;
        amp[idx] = coef * cfg.env_coeffs[l];
      }
    }
  }
  const double norm = amp.norm();
  const double deficit = 1.0 - norm;
  amp /= norm;
  return TotalStateBuild{CompositeState({b1, b2, be}, std::move(amp)),
                         deficit};
}

/// Gated variant: errors when truncation removed more weight than allowed.
inline CompositeState build_total_state(const TwoBoxConfig& cfg,
                                        double max_norm_deficit = 1e-8) {
  TotalStateBuild b = build_total_state_report(cfg);
  if (b.norm_deficit > max_norm_deficit)
    throw precondition_error(
        "build_total_state: truncation removed too much weight; deficit " +
        format_full(b.norm_deficit) + " > " + format_full(max_norm_deficit) +
        " (increase n_total relative to |alpha|^2 + |alpha'|^2)");
  return std::move(b.state);
}

/// Reduced density operator of box one (factor 0).
inline DensityMatrix reduce_to_box_one(const CompositeState& state) {
  return partial_trace(state, 0);
}

/// The maximum-information assignment once the relative phase phi is known:
/// the coherent state ||alpha| e^{i phi}, G>. An information-theoretic
/// convention, not a dynamical derivation.
inline PureState conditioned_state(const TwoBoxConfig& cfg, BasisSpec basis) {
  cfg.validate();
  return csib(std::polar(cfg.alpha_mag, cfg.alpha_phase), basis);
}

}  // namespace leakybox
