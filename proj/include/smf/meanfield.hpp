#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smf/errors.hpp"
#include "smf/linalg.hpp"
#include "smf/model.hpp"

namespace smf {

// N orthonormal single-particle vectors; the induced per-channel density
// rho = phi phi^dagger is a projector.
struct SlaterState {
  MatC orbitals;  // dim x n_particles
  double t = 0.0; // fm/c

  int n() const { return static_cast<int>(orbitals.cols()); }
  MatC density() const { return orbitals * orbitals.adjoint(); }
};

// --- Observables -----------------------------------------------------------

/// <x^2> per particle, Tr(x^2 rho) / Tr(rho), in fm^2.
inline double mean_square_radius(const MatC& rho, const ModelSpec& model) {
  if (model.kind != ModelKind::kGrid1D)
    throw UnsupportedOperation("mean_square_radius: grid models only");
  const double tr = rho.trace().real();
  if (std::abs(tr) < 1e-14)
    throw NumericalError("mean_square_radius: zero-trace density");
  double num = 0.0;
  for (int i = 0; i < model.n_grid; ++i)
    num += model.x(i) * model.x(i) * rho(i, i).real();
  return num / tr;
}

inline double mean_square_radius(const SlaterState& state,
                                 const ModelSpec& model) {
  const VecD w = state.orbitals.cwiseAbs2().rowwise().sum();
  double num = 0.0;
  for (int i = 0; i < model.n_grid; ++i)
    num += model.x(i) * model.x(i) * w[i];
  const double tr = w.sum();
  if (std::abs(tr) < 1e-14)
    throw NumericalError("mean_square_radius: zero-trace density");
  return num / tr;
}

inline double rms_radius(const MatC& rho, const ModelSpec& model) {
  return std::sqrt(mean_square_radius(rho, model));
}

inline double rms_radius(const SlaterState& state, const ModelSpec& model) {
  return std::sqrt(mean_square_radius(state, model));
}

/// Slater-determinant variance of a one-body observable, Tr(O rho O (1-rho)).
/// Per internal channel; multiply by the degeneracy for the full system.
inline double quantal_variance(const MatC& rho, const MatC& obs) {
  if (idempotency_defect(rho) > 1e-6)
    throw NumericalError("quantal_variance: density is not a projector");
  const MatC q = MatC::Identity(rho.rows(), rho.cols()) - rho;
  return (obs * rho * obs * q).trace().real();
}

/// One-body entropy -sum n_i ln n_i over the occupation spectrum
/// (dimensionless, k_B = 1).  Exactly 0 for projectors.  Pair densities are
/// idempotent but not Hermitian, so the general eigensolver is used there.
inline double one_body_entropy(const MatC& rho, bool hermitian = true) {
  VecD occ(rho.rows());
  if (hermitian) {
    Eigen::SelfAdjointEigenSolver<MatC> es(rho);
    if (es.info() != Eigen::Success)
      throw NumericalError("one_body_entropy: eigensolve failed");
    occ = es.eigenvalues();
  } else {
    Eigen::ComplexEigenSolver<MatC> es(rho);
    if (es.info() != Eigen::Success)
      throw NumericalError("one_body_entropy: eigensolve failed");
    for (Eigen::Index i = 0; i < occ.size(); ++i) {
      const cxd ev = es.eigenvalues()[i];
      if (std::abs(ev.imag()) > 1e-8)
        throw NumericalError("one_body_entropy: complex occupation " +
                             std::to_string(ev.imag()));
      occ[i] = ev.real();
    }
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < occ.size(); ++i) {
    double n = occ[i];
    if (n < -1e-8 || n > 1.0 + 1e-8)
      throw NumericalError("one_body_entropy: occupation out of range: " +
                           std::to_string(n));
    n = std::clamp(n, 0.0, 1.0);
    if (n > 0.0) s -= n * std::log(n);
  }
  return s;
}

/// Total energy of the density functional behind mean_field_matrix():
///   E = d_g Tr(T rho) + sum_x dx [ t0 n^2/2 + t3 n^3/3 ] (+ lambda x^2 n).
/// mean_field_matrix() is its exact functional derivative; the pair of
/// functions is cross-checked by an independent oracle in the tests.
inline double total_energy(const SlaterState& state, const ModelSpec& model,
                           bool constraint_on) {
  const MatD t = kinetic_matrix(model);
  double e_kin = 0.0;
  for (int j = 0; j < state.n(); ++j)
    e_kin += (state.orbitals.col(j).adjoint() * t * state.orbitals.col(j))
                 .value()
                 .real();
  e_kin *= model.degeneracy;

  const VecD n = spatial_density_from_orbitals(state.orbitals, model);
  double e_pot = 0.0;
  for (int i = 0; i < model.n_grid; ++i) {
    e_pot += model.dx * (0.5 * model.t0 * n[i] * n[i] +
                         model.t3 / 3.0 * n[i] * n[i] * n[i]);
    if (constraint_on)
      e_pot += model.dx * model.lambda * model.x(i) * model.x(i) * n[i];
  }
  return e_kin + e_pot;
}

// --- Static solution -------------------------------------------------------

namespace detail {

/// Sign changes of a real eigenvector; used to break exact degeneracies
/// deterministically (ascending energy, then ascending node count).
inline int node_count(const VecD& v) {
  int nodes = 0;
  double prev = 0.0;
  const double scale = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double cur = std::abs(v[i]) > 1e-9 * scale ? v[i] : 0.0;
    if (cur == 0.0) continue;
    if (prev != 0.0 && cur * prev < 0.0) ++nodes;
    prev = cur;
  }
  return nodes;
}

inline MatC lowest_orbitals(const MatD& h, int n_occ) {
  Eigen::SelfAdjointEigenSolver<MatD> es(h);
  if (es.info() != Eigen::Success)
    throw NumericalError("mean-field diagonalization failed");
  const VecD& e = es.eigenvalues();
  std::vector<int> order(e.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (std::abs(e[a] - e[b]) > 1e-12 * std::max(1.0, std::abs(e[a])))
      return e[a] < e[b];
    return node_count(es.eigenvectors().col(a)) <
           node_count(es.eigenvectors().col(b));
  });
  MatC phi(h.rows(), n_occ);
  for (int j = 0; j < n_occ; ++j)
    phi.col(j) = es.eigenvectors().col(order[j]).cast<cxd>();
  return phi;
}

}  // namespace detail

struct ChfOptions {
  double mixing = 0.3;      // linear density mixing factor
  double tol = 1e-8;        // max-norm of [h, rho] at convergence
  int max_iterations = 5000;
};

/// Self-consistent constrained ground state.  Iterates
/// diagonalize-occupy-mix on the density profile; the constraint strength
/// is taken from the model (lambda may be 0).
inline SlaterState solve_chf(const ModelSpec& model,
                             const ChfOptions& opts = {}) {
  if (model.kind != ModelKind::kGrid1D)
    throw UnsupportedOperation("solve_chf: grid models only");
  VecD n = VecD::Zero(model.n_grid);
  MatC phi;
  double residual = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    const MatD h = mean_field_matrix(n, model, true);
    phi = detail::lowest_orbitals(h, model.n_particles);
    const VecD n_out = spatial_density_from_orbitals(phi, model);

    // Residual of the *output* state under its own mean field.
    const MatD h_out = mean_field_matrix(n_out, model, true);
    const MatC rho = phi * phi.adjoint();
    residual = max_abs(MatC(h_out.cast<cxd>() * rho - rho * h_out.cast<cxd>()));
    if (residual < opts.tol) return SlaterState{phi, 0.0};

    n = (1.0 - opts.mixing) * n + opts.mixing * n_out;
  }
  throw ConvergenceError(
      "CHF did not converge: residual " + std::to_string(residual), residual);
}

// --- Dynamics --------------------------------------------------------------

inline void check_dt(const ModelSpec& model, double dt) {
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (model.kind == ModelKind::kGrid1D && dt > model.dt_stability_bound())
    throw ConfigError("dt " + std::to_string(dt) +
                      " exceeds stability bound " +
                      std::to_string(model.dt_stability_bound()));
}

/// Self-consistent midpoint propagator for one-body dynamics: build h at a
/// half-step predictor density, then advance the full step with
/// exp(-i h dt / hbar_c).  Second order in dt and exactly unitary.
inline UnitaryPropagator midpoint_propagator(const MatC& orbitals,
                                             const ModelSpec& model, double dt,
                                             bool constraint_on) {
  if (model.kind == ModelKind::kAbstractMatrix)
    return UnitaryPropagator(model.h0);
  const VecD n0 = spatial_density_from_orbitals(orbitals, model);
  const UnitaryPropagator half(mean_field_matrix(n0, model, constraint_on));
  const MatC mid = half.apply(orbitals, 0.5 * dt);
  const VecD n_mid = spatial_density_from_orbitals(mid, model);
  return UnitaryPropagator(mean_field_matrix(n_mid, model, constraint_on));
}

/// One TDHF step.  Orthonormality rides on unitarity alone; no correction.
inline SlaterState tdhf_step(const SlaterState& state, const ModelSpec& model,
                             double dt, bool constraint_on = false) {
  check_dt(model, dt);
  const UnitaryPropagator prop =
      midpoint_propagator(state.orbitals, model, dt, constraint_on);
  return SlaterState{prop.apply(state.orbitals, dt), state.t + dt};
}

}  // namespace smf
