#pragma once

// Truncated ladder-basis linear algebra: pure states, density matrices,
// the number-lowering action of Xi/xi, tensor products and partial traces.
// Row/column index equals the boson number N; index 0 is the vacuum.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "leakybox/common.hpp"

namespace leakybox {

/// Truncated ladder basis {|0>, ..., |n_max>}.
struct BasisSpec {
  int n_max = 1;

  explicit BasisSpec(int n_max_) : n_max(n_max_) {
    if (n_max < 1) throw std::invalid_argument("BasisSpec: n_max must be >= 1");
  }

  int dim() const { return n_max + 1; }
  bool operator==(const BasisSpec& o) const { return n_max == o.n_max; }
};

/// Default truncation: ceil(mean + 10*sqrt(max(mean,1))). Keeps the
/// Poisson/Gaussian tail below ~1e-12 for mean >= 4; smaller means and
/// broad (F>1) profiles need a caller-supplied n_max.
inline int default_n_max(double mean) {
  if (mean < 0) throw std::invalid_argument("default_n_max: negative mean");
  return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(std::max(mean, 1.0))));
}

/// Amplitude vector over the ladder basis. Constructors normalize and
/// record the truncation tail they discarded; lowering_apply outputs are
/// intentionally unnormalized.
struct PureState {
  BasisSpec basis;
  Eigen::VectorXcd amp;
  double discarded_tail = 0.0;

  PureState(BasisSpec b, Eigen::VectorXcd a, double tail = 0.0)
      : basis(b), amp(std::move(a)), discarded_tail(tail) {
    if (amp.size() != basis.dim())
      throw std::invalid_argument("PureState: amplitude count != basis dim");
  }

  double norm() const { return amp.norm(); }
};

/// rho_NM over the ladder basis.
struct DensityMatrix {
  BasisSpec basis;
  Eigen::MatrixXcd rho;
  double discarded_tail = 0.0;

  DensityMatrix(BasisSpec b, Eigen::MatrixXcd m, double tail = 0.0)
      : basis(b), rho(std::move(m)), discarded_tail(tail) {
    if (rho.rows() != basis.dim() || rho.cols() != basis.dim())
      throw std::invalid_argument("DensityMatrix: shape != basis dim");
  }

  static DensityMatrix from_pure(const PureState& psi) {
    return DensityMatrix(psi.basis, psi.amp * psi.amp.adjoint(),
                         psi.discarded_tail);
  }

  double trace() const { return rho.trace().real(); }

  double hermiticity_defect() const {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  }

  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho);
    return es.eigenvalues().minCoeff();
  }
};

/// Tensor-product amplitudes. Index layout is row-major: the first factor
/// is the slowest-running index.
struct CompositeState {
  std::vector<BasisSpec> factors;
  Eigen::VectorXcd amp;

  CompositeState(std::vector<BasisSpec> f, Eigen::VectorXcd a)
      : factors(std::move(f)), amp(std::move(a)) {
    std::int64_t want = 1;
    for (const auto& b : factors) want *= b.dim();
    if (want != amp.size())
      throw std::invalid_argument(
          "CompositeState: amplitude count != product of factor dims");
  }
};

inline constexpr std::int64_t kDefaultTensorCap = std::int64_t{1} << 22;

/// (Xi/xi)|N,G> = sqrt(N)|N-1,G> applied to a superposition. The component
/// that would come from |n_max+1> is outside the basis, so the output's top
/// entry is zero. The result is NOT renormalized.
inline PureState lowering_apply(const PureState& state) {
  const int d = state.basis.dim();
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(d);
  for (int n = 0; n + 1 < d; ++n)
    out[n] = std::sqrt(double(n + 1)) * state.amp[n + 1];
  return PureState(state.basis, std::move(out), state.discarded_tail);
}

/// Tr(rho^2).
inline double purity(const DensityMatrix& dm) {
  const int d = dm.basis.dim();
  double acc = 0.0;
  for (int n = 0; n < d; ++n)
    for (int m = 0; m < d; ++m)
      acc += (dm.rho(n, m) * dm.rho(m, n)).real();
  return acc;
}

inline CompositeState tensor(const PureState& a, const PureState& b,
                             std::int64_t cap = kDefaultTensorCap) {
  const std::int64_t da = a.basis.dim(), db = b.basis.dim();
  if (da * db > cap)
    throw precondition_error("tensor: product dimension " +
                             std::to_string(da * db) + " exceeds cap " +
                             std::to_string(cap));
  Eigen::VectorXcd out(da * db);
  for (std::int64_t i = 0; i < da; ++i)
    for (std::int64_t j = 0; j < db; ++j) out[i * db + j] = a.amp[i] * b.amp[j];
  return CompositeState({a.basis, b.basis}, std::move(out));
}

inline CompositeState tensor(const CompositeState& a, const PureState& b,
                             std::int64_t cap = kDefaultTensorCap) {
  const std::int64_t da = a.amp.size(), db = b.basis.dim();
  if (da * db > cap)
    throw precondition_error("tensor: product dimension " +
                             std::to_string(da * db) + " exceeds cap " +
                             std::to_string(cap));
  Eigen::VectorXcd out(da * db);
  for (std::int64_t i = 0; i < da; ++i)
    for (std::int64_t j = 0; j < db; ++j) out[i * db + j] = a.amp[i] * b.amp[j];
  auto factors = a.factors;
  factors.push_back(b.basis);
  return CompositeState(std::move(factors), std::move(out));
}

/// Standard partial trace onto factor `keep`. The result's trace equals the
/// squared norm of the composite state.
inline DensityMatrix partial_trace(const CompositeState& state, int keep) {
  const int nf = static_cast<int>(state.factors.size());
  if (keep < 0 || keep >= nf)
    throw std::invalid_argument("partial_trace: invalid factor index");
  std::int64_t pre = 1, post = 1;
  for (int i = 0; i < keep; ++i) pre *= state.factors[i].dim();
  for (int i = keep + 1; i < nf; ++i) post *= state.factors[i].dim();
  const std::int64_t dk = state.factors[keep].dim();

  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dk, dk);
  for (std::int64_t p = 0; p < pre; ++p) {
    for (std::int64_t i = 0; i < dk; ++i) {
      for (std::int64_t ip = 0; ip < dk; ++ip) {
        cd acc(0.0, 0.0);
        const std::int64_t base_i = (p * dk + i) * post;
        const std::int64_t base_ip = (p * dk + ip) * post;
        for (std::int64_t q = 0; q < post; ++q)
          acc += state.amp[base_i + q] * std::conj(state.amp[base_ip + q]);
        out(i, ip) += acc;
      }
    }
  }
  return DensityMatrix(state.factors[keep], std::move(out));
}

}  // namespace leakybox
