#pragma once

#include <complex>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace leakybox {

using cd = std::complex<double>;

/// Raised when a run configuration file cannot be parsed or fails
/// validation. The CLI maps this to exit code 1.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numerical precondition is violated (empty step window,
/// truncation tail above threshold, ...). The CLI maps this to exit code 2.
struct precondition_error : std::runtime_error {
  explicit precondition_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Truncation tails larger than this abort state construction instead of
// being silently renormalized away.
inline constexpr double kTailThreshold = 1e-10;

// |sum_N rho_{N+1,N}| below this means the phase of the first off-diagonal
// is numerically undefined.
inline constexpr double kPhaseDegenerate = 1e-14;

/// Full-precision decimal rendering (17 significant digits, scientific
/// notation) so downstream tools can recompute residuals bit-exactly.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

}  // namespace leakybox
