#pragma once

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "smf/errors.hpp"
#include "smf/linalg.hpp"
#include "smf/meanfield.hpp"
#include "smf/model.hpp"
#include "smf/rng.hpp"

namespace smf {

// Two families {|alpha_i>} and {<beta_j|} with <beta_j|alpha_i> = delta_ij.
// The induced one-body density rho = sum_i |alpha_i><beta_i| is idempotent
// with trace n but not Hermitian in general.
//
// While no noise has acted the dual family is exactly the adjoint of the
// ket family; `self_dual` tracks that so the zero-noise limit runs the
// plain mean-field code path on the kets alone (and reproduces a TDHF
// trajectory bit for bit).
struct BiorthogonalPair {
  MatC kets;   // dim x n, columns |alpha_i>
  MatC duals;  // n x dim, rows <beta_j|  (ignored while self_dual)
  bool self_dual = true;
  double t = 0.0;

  int n() const { return static_cast<int>(kets.cols()); }

  MatC density() const {
    return self_dual ? MatC(kets * kets.adjoint()) : MatC(kets * duals);
  }

  static BiorthogonalPair from_slater(const SlaterState& state) {
    return BiorthogonalPair{state.orbitals, state.orbitals.adjoint(), true,
                            state.t};
  }
};

inline double biorthogonality_defect(const BiorthogonalPair& pair) {
  if (pair.self_dual) return orthonormality_defect(pair.kets);
  return max_abs(MatC(pair.duals * pair.kets -
                      MatC::Identity(pair.n(), pair.n())));
}

// One step's stochastic input: two independent gaussian sets and the
// deterministic jump amplitude dB = i sqrt(tau dt) / hbar.
struct NoiseDraw {
  VecD sigma_a;
  VecD sigma_b;
  cxd dB;
};

inline NoiseDraw make_noise_draw(const CounterRng& rng, std::uint64_t step,
                                 const ResidualEnsemble& ensemble,
                                 const ModelSpec& model, double dt) {
  const int n_sigma = ensemble.n_components();
  return NoiseDraw{sample_sigma(rng, step, 0, n_sigma),
                   sample_sigma(rng, step, 1, n_sigma),
                   cxd(0.0, std::sqrt(model.tau * dt) / model.hbar_c)};
}

namespace detail {

/// Midpoint mean-field propagator for a pair: the half-step prediction
/// advances both families so the midpoint density is built from the same
/// rho both jump equations use.
inline UnitaryPropagator pair_midpoint_propagator(const BiorthogonalPair& pair,
                                                  const ModelSpec& model,
                                                  double dt,
                                                  bool constraint_on) {
  if (model.kind == ModelKind::kAbstractMatrix)
    return UnitaryPropagator(model.h0);
  const VecD n0 = spatial_density(pair.density(), model, false);
  const UnitaryPropagator half(mean_field_matrix(n0, model, constraint_on));
  const MatC kets_mid = half.apply(pair.kets, 0.5 * dt);
  const MatC duals_mid = half.apply_dual(pair.duals, 0.5 * dt);
  const VecD n_mid = spatial_density(MatC(kets_mid * duals_mid), model, false);
  return UnitaryPropagator(mean_field_matrix(n_mid, model, constraint_on));
}

}  // namespace detail

/// Restore <beta_j|alpha_i> = delta_ij by the overlap-inverse map
/// duals <- S^-1 duals with S = duals * kets.  The induced density
/// kets (duals kets)^-1 duals is left unchanged.  Throws TrajectoryAbort
/// when the overlap is numerically singular.
inline void rebiorthogonalize(BiorthogonalPair& pair) {
  const MatC s = pair.duals * pair.kets;
  Eigen::PartialPivLU<MatC> lu(s);
  const double scale = max_abs(s);
  double min_pivot = std::numeric_limits<double>::infinity();
  for (int i = 0; i < pair.n(); ++i)
    min_pivot = std::min(min_pivot, std::abs(lu.matrixLU()(i, i)));
  if (!(min_pivot > 1e-10 * std::max(1.0, scale)))
    throw TrajectoryAbort("near-singular pair overlap, pivot " +
                          std::to_string(min_pivot));
  pair.duals = lu.solve(pair.duals);
}

/// One stochastic step for the pair.  The mean-field part is the same
/// exponential-midpoint propagator as TDHF; the noise enters as an
/// Euler-Maruyama kick built from the pre-step density,
///   |d alpha_i> = dB (1-rho) U(rho, sigma_a) |alpha_i>,
///   <d beta_j|  = dB* <beta_j| U(rho, sigma_b) (1-rho).
/// With the contact ensemble U(rho, sigma) = sigma g0 n(x).
inline BiorthogonalPair pair_step(const BiorthogonalPair& pair,
                                  const NoiseDraw& noise,
                                  const ResidualEnsemble& ensemble,
                                  const ModelSpec& model, double dt,
                                  bool constraint_on = false) {
  check_dt(model, dt);

  const bool noise_active =
      ensemble.form == ResidualEnsemble::Form::kContact
          ? model.g0 != 0.0
          : std::any_of(ensemble.separable_terms.begin(),
                        ensemble.separable_terms.end(),
                        [](const auto& t) { return t.first != 0.0; });

  if (!noise_active && pair.self_dual) {
    // Exact zero-noise limit: identical arithmetic to tdhf_step.
    const UnitaryPropagator prop =
        midpoint_propagator(pair.kets, model, dt, constraint_on);
    return BiorthogonalPair{prop.apply(pair.kets, dt), MatC(), true,
                            pair.t + dt};
  }

  BiorthogonalPair cur = pair;
  if (cur.self_dual) {
    cur.duals = cur.kets.adjoint();
    cur.self_dual = false;
  }

  const MatC rho = cur.density();
  const MatC q = MatC::Identity(rho.rows(), rho.cols()) - rho;
  const UnitaryPropagator prop =
      detail::pair_midpoint_propagator(cur, model, dt, constraint_on);

  const MatC u_a = ensemble.field(rho, noise.sigma_a, model, false);
  const MatC u_b = ensemble.field(rho, noise.sigma_b, model, false);

  BiorthogonalPair next;
  next.kets = prop.apply(cur.kets, dt) + noise.dB * (q * (u_a * cur.kets));
  next.duals = prop.apply_dual(cur.duals, dt) +
               std::conj(noise.dB) * ((cur.duals * u_b) * q);
  next.self_dual = false;
  next.t = cur.t + dt;
  rebiorthogonalize(next);
  return next;
}

/// Raw first-order (Euler) increments of both families, before any
/// correction: d kets and d duals such that
///   d rho = d kets * duals + kets * d duals
/// is exactly the one-body stochastic increment
///   dt/(i hbar) [h, rho] + dB (1-rho) U_a rho + dB* rho U_b (1-rho).
/// Used by the matrix-form consistency tests.
inline std::pair<MatC, MatC> pair_euler_increments(
    const BiorthogonalPair& pair, const NoiseDraw& noise,
    const ResidualEnsemble& ensemble, const ModelSpec& model, double dt,
    bool constraint_on = false) {
  BiorthogonalPair cur = pair;
  if (cur.self_dual) {
    cur.duals = cur.kets.adjoint();
    cur.self_dual = false;
  }
  const MatC rho = cur.density();
  const MatC q = MatC::Identity(rho.rows(), rho.cols()) - rho;
  const MatC h = build_mean_field(rho, model, constraint_on, false);
  const MatC u_a = ensemble.field(rho, noise.sigma_a, model, false);
  const MatC u_b = ensemble.field(rho, noise.sigma_b, model, false);
  const cxd idt = dt / (cxd(0.0, 1.0) * model.hbar_c);

  const MatC d_kets = idt * (h * cur.kets) + noise.dB * (q * (u_a * cur.kets));
  const MatC d_duals = -idt * (cur.duals * h) +
                       std::conj(noise.dB) * ((cur.duals * u_b) * q);
  return {d_kets, d_duals};
}

/// Matrix-level twin of pair_step: the stochastic one-body equation
/// evolved directly on rho.  Exact Euler form
///   d rho = dt/(i hbar)[h, rho] + dB (1-rho) U_a rho + dB* rho U_b (1-rho).
inline MatC density_increment_euler(const MatC& rho, const NoiseDraw& noise,
                                    const ResidualEnsemble& ensemble,
                                    const ModelSpec& model, double dt,
                                    bool constraint_on = false) {
  const MatC q = MatC::Identity(rho.rows(), rho.cols()) - rho;
  const MatC h = build_mean_field(rho, model, constraint_on, false);
  const MatC u_a = ensemble.field(rho, noise.sigma_a, model, false);
  const MatC u_b = ensemble.field(rho, noise.sigma_b, model, false);
  const cxd idt = dt / (cxd(0.0, 1.0) * model.hbar_c);
  return idt * (h * rho - rho * h) + noise.dB * (q * u_a * rho) +
         std::conj(noise.dB) * (rho * u_b * q);
}

inline MatC density_step(const MatC& rho, const NoiseDraw& noise,
                         const ResidualEnsemble& ensemble,
                         const ModelSpec& model, double dt,
                         bool constraint_on = false) {
  check_dt(model, dt);
  return rho + density_increment_euler(rho, noise, ensemble, model, dt,
                                       constraint_on);
}

// --- Beyond-mean-field correlation increment -------------------------------

namespace detail {

/// Plain tensor product on pair indices: <ac|X (x) Y|bd> = X_ab Y_cd,
/// stored as (a*dim + c, b*dim + d).
inline MatC tensor2(const MatC& x, const MatC& y) {
  const int m = static_cast<int>(x.rows());
  MatC out(m * m, m * m);
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c)
      for (int b = 0; b < m; ++b)
        for (int d = 0; d < m; ++d)
          out(a * m + c, b * m + d) = x(a, b) * y(c, d);
  return out;
}

/// Right-multiplication by the exchange operator P12.
inline MatC exchange_right(const MatC& t, int m) {
  MatC out(t.rows(), t.cols());
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c)
      for (int b = 0; b < m; ++b)
        for (int d = 0; d < m; ++d)
          out(a * m + c, b * m + d) = t(a * m + c, d * m + b);
  return out;
}

}  // namespace detail

/// Antisymmetrized two-body density of a mean-field state,
/// <kl|rho12|ij> = rho_ki rho_lj - rho_kj rho_li.
inline MatC two_body_density(const MatC& rho) {
  const int m = static_cast<int>(rho.rows());
  const MatC t = detail::tensor2(rho, rho);
  return t - detail::exchange_right(t, m);
}

/// Correlation built up beyond mean field in one stochastic step:
///   dC12 = -tau dt / hbar^2 { (1-rho_1)(1-rho_2) E[U1 U2] rho12
///                             + rho12 E[U'1 U'2] (1-rho_1)(1-rho_2) }
/// evaluated in closed form for ensembles with analytic second moments.
/// Equals the ensemble average of the noise-quadratic part of
/// d(rho (x) rho) antisymmetrized, which is what the finite-difference
/// oracle measures.
inline MatC correlation_increment(const MatC& rho,
                                  const ResidualEnsemble& ensemble,
                                  const ModelSpec& model, double dt) {
  const int m = static_cast<int>(rho.rows());
  const MatC q = MatC::Identity(m, m) - rho;
  MatC acc = MatC::Zero(m * m, m * m);
  const int nc = ensemble.n_components();
  for (int i = 0; i < nc; ++i) {
    MatC f;  // per-component field factor: U(sigma) = sum_i sigma_i f_i
    switch (ensemble.form) {
      case ResidualEnsemble::Form::kContact:
        f = contact_potential(rho, 1.0, model, false).cast<cxd>().asDiagonal();
        break;
      case ResidualEnsemble::Form::kSeparable: {
        const auto& [c, b] = ensemble.separable_terms[i];
        f = c * (b * rho).trace().real() * b;
        break;
      }
      default:
        throw UnsupportedOperation(
            "correlation_increment: no closed-form second moment");
    }
    const MatC x = q * f * rho;  // particle-hole block of the kick
    const MatC y = rho * f * q;  // hole-particle block
    acc += detail::tensor2(x, x) + detail::tensor2(y, y);
  }
  const double c = -model.tau * dt / (model.hbar_c * model.hbar_c);
  const MatC sym = acc - detail::exchange_right(acc, m);
  return c * sym;
}

}  // namespace smf
