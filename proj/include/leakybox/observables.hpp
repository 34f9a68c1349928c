#pragma once

// Scalar diagnostics separating robust from fragile states: number moments,
// Fano factor, purity, distance from the coherent-state family, and the
// diagonal energy density.

#include <functional>
#include <utility>
#include <vector>

#include "leakybox/states.hpp"

namespace leakybox {

/// <N> and <dN^2> from the diagonal.
inline std::pair<double, double> mean_and_variance(const DensityMatrix& dm) {
  const int d = dm.basis.dim();
  double m = 0.0, m2 = 0.0;
  for (int n = 0; n < d; ++n) {
    const double p = dm.rho(n, n).real();
    m += n * p;
    m2 += double(n) * n * p;
  }
  return {m, m2 - m * m};
}

/// Best coherent-state representative and the overlap with it.
/// The magnitude comes from <N>; the phase from arg sum_N rho_{N+1,N},
/// the matrix-element family the ladder operator acts on. When that sum
/// is numerically zero the phase is reported as 0 and flagged.
struct CsibFit {
  double fidelity = 0.0;
  CoherentTrack track;
  bool phase_defined = true;
};

inline CsibFit fidelity_to_csib(const DensityMatrix& dm) {
  const int d = dm.basis.dim();
  auto [mean, var] = mean_and_variance(dm);
  (void)var;
  cd off(0.0, 0.0);
  for (int n = 0; n + 1 < d; ++n) off += dm.rho(n + 1, n);
  CsibFit fit;
  fit.phase_defined = std::abs(off) >= kPhaseDegenerate;
  fit.track.phase = fit.phase_defined ? std::arg(off) : 0.0;
  fit.track.magnitude = std::sqrt(std::max(mean, 0.0));
  // The fit state is the best representative on *this* basis, so no tail
  // gate: a clipped Poisson is still the right comparison vector.
  const PureState ref = detail::csib_amplitudes(
      std::polar(fit.track.magnitude, fit.track.phase), dm.basis);
  fit.fidelity = (ref.amp.adjoint() * dm.rho * ref.amp)(0, 0).real();
  return fit;
}

/// sum_N rho_NN E(N) / V.
inline double energy_density(const DensityMatrix& dm,
                             const std::function<double(int)>& eigenenergy,
                             double V) {
  const int d = dm.basis.dim();
  double acc = 0.0;
  for (int n = 0; n < d; ++n) acc += dm.rho(n, n).real() * eigenenergy(n);
  return acc / V;
}

inline double energy_density(const PureState& psi,
                             const std::function<double(int)>& eigenenergy,
                             double V) {
  return energy_density(DensityMatrix::from_pure(psi), eigenenergy, V);
}

/// Time series of observables for one run. All lists share one length;
/// entries land every `record_every` steps plus the final state.
struct RunRecord {
  std::vector<double> times;
  std::vector<double> mean_N;
  std::vector<double> var_N;
  std::vector<double> fano;
  std::vector<double> purity;
  std::vector<double> fidelity_csib;
  std::vector<double> phase;
  std::vector<bool> phase_flagged;
  std::vector<double> j_t;
  std::vector<double> mu_t;
  std::vector<std::string> warnings;

  std::size_t size() const { return times.size(); }
};

}  // namespace leakybox
