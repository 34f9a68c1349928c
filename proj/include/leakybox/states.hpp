#pragma once

// Constructors for the initial states under study, in the ladder basis:
// number states, the coherent state of interacting bosons (CSIB), Gaussian
// number profiles standing in for squeezed (F<1) and Bogoliubov-like (F>1)
// states, Poissonian mixtures, and phase-averaged coherent states.

#include <cmath>
#include <optional>
#include <string>

#include "leakybox/hilbert.hpp"

namespace leakybox {

/// The (|alpha(t)|, phi(t)) pair of the coherent track.
struct CoherentTrack {
  double magnitude = 0.0;
  double phase = 0.0;
};

/// Gaussian number distribution with mean <N>, Fano factor F and a linear
/// phase ramp exp(i*N*phase_slope). Models states whose only role here is
/// their F: sub-Poissonian (0<F<1) and super-Poissonian (F>1).
struct GaussianNumberProfile {
  double mean = 0.0;
  double fano = 1.0;
  double phase_slope = 0.0;
};

/// Hard validation plus the localization warning: the number spread must
/// stay small against the mean for the narrow-distribution regime.
inline std::optional<std::string> profile_warning(
    const GaussianNumberProfile& p) {
  if (std::sqrt(p.fano * p.mean) > p.mean / 3.0)
    return "gaussian profile: sqrt(F*mean) > mean/3; narrow-distribution "
           "assumption is strained";
  return std::nullopt;
}

inline void validate_profile(const GaussianNumberProfile& p) {
  if (!(p.mean >= 0.0))
    throw std::invalid_argument("gaussian profile: mean must be >= 0");
  if (!(p.fano > 0.0))
    throw std::invalid_argument("gaussian profile: fano must be > 0");
}

namespace detail {

// Poisson mass above n_max, by upward recurrence from pmf(n_max+1).
inline double poisson_tail_beyond(double mean, int n_max) {
  if (mean <= 0.0) return 0.0;
  double logp = -mean + (n_max + 1) * std::log(mean) - std::lgamma(n_max + 2.0);
  double p = std::exp(logp);
  double tail = 0.0;
  for (int k = n_max + 1; k < n_max + 2000; ++k) {
    tail += p;
    p *= mean / (k + 1);
    if (p < tail * 1e-18 + 1e-300) break;
  }
  return tail;
}

// CSIB amplitudes truncated to the basis, renormalized; no tail gate.
// c_{N+1} = c_N * alpha / sqrt(N+1) keeps the ladder relation exact to
// one rounding per entry.
inline PureState csib_amplitudes(cd alpha, BasisSpec basis) {
  const int d = basis.dim();
  Eigen::VectorXcd c(d);
  c[0] = std::exp(-std::norm(alpha) / 2.0);
  for (int n = 0; n + 1 < d; ++n) c[n + 1] = c[n] * alpha / std::sqrt(n + 1.0);
  const double tail = poisson_tail_beyond(std::norm(alpha), basis.n_max);
  c /= c.norm();
  return PureState(basis, std::move(c), tail);
}

}  // namespace detail

/// |N,G>: amplitude 1 at N. Fano factor 0.
inline PureState number_state(int N, BasisSpec basis) {
  if (N < 0 || N > basis.n_max)
    throw std::invalid_argument("number_state: N out of basis range");
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(basis.dim());
  c[N] = 1.0;
  return PureState(basis, std::move(c));
}

/// CSIB: c_M = e^{-|alpha|^2/2} alpha^M / sqrt(M!), truncated and
/// renormalized. Fails if the truncated Poisson tail exceeds the threshold.
inline PureState csib(cd alpha, BasisSpec basis,
                      double tail_tol = kTailThreshold) {
  PureState s = detail::csib_amplitudes(alpha, basis);
  if (s.discarded_tail >= tail_tol)
    throw precondition_error(
        "csib: truncation tail " + format_full(s.discarded_tail) +
        " above threshold; need n_max >~ |alpha|^2 + 10|alpha| (got " +
        std::to_string(basis.n_max) + ")");
  return s;
}

/// Pure state with c_N ~ exp(-(N-mean)^2/(4*F*mean)) e^{i N slope}.
inline PureState gaussian_profile_state(const GaussianNumberProfile& p,
                                        BasisSpec basis,
                                        double tail_tol = kTailThreshold) {
  validate_profile(p);
  const int d = basis.dim();
  if (p.mean == 0.0) return number_state(0, basis);
  const double denom = 4.0 * p.fano * p.mean;
  Eigen::VectorXcd c(d);
  double mass_in = 0.0;
  for (int n = 0; n < d; ++n) {
    const double w = std::exp(-(n - p.mean) * (n - p.mean) / denom);
    c[n] = std::polar(w, p.phase_slope * n);
    mass_in += w * w;
  }
  // discarded mass above n_max (the weights decay fast)
  double mass_out = 0.0;
  for (int n = d; n < d + 4000; ++n) {
    const double w = std::exp(-(n - p.mean) * (n - p.mean) / denom);
    mass_out += w * w;
    if (w * w < (mass_in + mass_out) * 1e-18 + 1e-300) break;
  }
  const double tail = mass_out / (mass_in + mass_out);
  if (tail >= tail_tol)
    throw precondition_error("gaussian_profile_state: truncation tail " +
                             format_full(tail) + " above threshold");
  c /= c.norm();
  return PureState(basis, std::move(c), tail);
}

/// Diagonal Poissonian mixture of number states; off-diagonals exactly 0.
inline DensityMatrix poisson_mixture(double mean, BasisSpec basis,
                                     double tail_tol = kTailThreshold) {
  if (mean < 0.0) throw std::invalid_argument("poisson_mixture: mean < 0");
  const double tail = detail::poisson_tail_beyond(mean, basis.n_max);
  if (tail >= tail_tol)
    throw precondition_error("poisson_mixture: truncation tail " +
                             format_full(tail) + " above threshold");
  const int d = basis.dim();
  Eigen::VectorXd p(d);
  if (mean == 0.0) {
    p.setZero();
    p[0] = 1.0;
  } else {
    p[0] = std::exp(-mean);
    for (int n = 0; n + 1 < d; ++n) p[n + 1] = p[n] * mean / (n + 1.0);
  }
  p /= p.sum();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
  for (int n = 0; n < d; ++n) rho(n, n) = p[n];
  return DensityMatrix(basis, std::move(rho), tail);
}

/// Uniform average of CSIB projectors over the phase circle. With enough
/// quadrature points every off-diagonal harmonic e^{i(N-M)theta} integrates
/// to zero exactly, leaving the Poissonian diagonal.
inline DensityMatrix phase_average(double magnitude, BasisSpec basis,
                                   int quadrature_points) {
  if (magnitude < 0.0)
    throw std::invalid_argument("phase_average: magnitude < 0");
  const int needed = 2 * basis.n_max + 2;
  if (quadrature_points < needed)
    throw precondition_error(
        "phase_average: " + std::to_string(quadrature_points) +
        " quadrature points cannot resolve all harmonics; need >= " +
        std::to_string(needed));
  const int d = basis.dim();
  Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(d, d);
  double tail = 0.0;
  for (int q = 0; q < quadrature_points; ++q) {
    const double theta =
        -M_PI + 2.0 * M_PI * static_cast<double>(q) / quadrature_points;
    PureState s = csib(std::polar(magnitude, theta), basis);
    acc.noalias() += s.amp * s.amp.adjoint();
    tail = s.discarded_tail;
  }
  acc /= static_cast<double>(quadrature_points);
  return DensityMatrix(basis, std::move(acc), tail);
}

}  // namespace leakybox
