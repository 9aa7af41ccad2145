#pragma once

#include <complex>

#include <Eigen/Dense>

#include "smf/constants.hpp"
#include "smf/errors.hpp"

namespace smf {

using cxd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using MatD = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using VecD = Eigen::VectorXd;

inline double max_abs(const MatC& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}
inline double max_abs(const MatD& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double hermiticity_defect(const MatC& m) {
  return max_abs(MatC(m - m.adjoint()));
}

inline double idempotency_defect(const MatC& m) {
  return max_abs(MatC(m * m - m));
}

/// Unitary one-body propagator exp(-i h dt / hbar_c) through the
/// eigendecomposition of a Hermitian h.  Unitary to rounding, which is what
/// keeps orbital families orthonormal over long runs without explicit
/// correction.  Grid mean fields are real symmetric, so that constructor
/// runs the cheaper real solver.
class UnitaryPropagator {
 public:
  explicit UnitaryPropagator(const MatD& h) {
    Eigen::SelfAdjointEigenSolver<MatD> es(h);
    if (es.info() != Eigen::Success)
      throw NumericalError("eigendecomposition of mean-field matrix failed");
    vecs_ = es.eigenvectors().cast<cxd>();
    vals_ = es.eigenvalues();
  }

  explicit UnitaryPropagator(const MatC& h) {
    Eigen::SelfAdjointEigenSolver<MatC> es(h);
    if (es.info() != Eigen::Success)
      throw NumericalError("eigendecomposition of mean-field matrix failed");
    vecs_ = es.eigenvectors();
    vals_ = es.eigenvalues();
  }

  /// exp(-i h dt / hbar_c) * orbitals.
  MatC apply(const MatC& orbitals, double dt) const {
    return vecs_ * (phases(-dt).asDiagonal() *
                    (vecs_.adjoint() * orbitals).eval());
  }

  /// Right action on a dual family (rows are bras): dual * exp(+i h dt / hbar_c).
  MatC apply_dual(const MatC& dual, double dt) const {
    return ((dual * vecs_).eval() * phases(dt).asDiagonal()) * vecs_.adjoint();
  }

  const VecD& eigenvalues() const { return vals_; }
  const MatC& eigenvectors() const { return vecs_; }

 private:
  VecC phases(double dt) const {
    VecC p(vals_.size());
    for (Eigen::Index i = 0; i < vals_.size(); ++i)
      p[i] = std::exp(cxd(0.0, vals_[i] * dt / kHbarC));
    return p;
  }

  MatC vecs_;
  VecD vals_;
};

/// Symmetric (Loewdin) orthonormalization phi <- phi S^{-1/2}.  Leaves the
/// projector onto span(phi) unchanged.  Returns the smallest eigenvalue of
/// the overlap matrix so callers can detect rank loss.
inline double loewdin_orthonormalize(MatC& orbitals) {
  const MatC overlap = orbitals.adjoint() * orbitals;
  Eigen::SelfAdjointEigenSolver<MatC> es(overlap);
  if (es.info() != Eigen::Success)
    throw NumericalError("overlap eigendecomposition failed");
  const double smallest = es.eigenvalues().minCoeff();
  if (smallest <= 0.0) return smallest;
  const VecD inv_sqrt = es.eigenvalues().cwiseSqrt().cwiseInverse();
  orbitals *= es.eigenvectors() * inv_sqrt.asDiagonal() *
              es.eigenvectors().adjoint();
  return smallest;
}

/// Max deviation of <phi_i|phi_j> from the identity.
inline double orthonormality_defect(const MatC& orbitals) {
  const Eigen::Index n = orbitals.cols();
  return max_abs(MatC(orbitals.adjoint() * orbitals - MatC::Identity(n, n)));
}

}  // namespace smf
