#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "smf/errors.hpp"
#include "smf/linalg.hpp"
#include "smf/meanfield.hpp"
#include "smf/model.hpp"
#include "smf/rng.hpp"

namespace smf {

// Residual interaction restricted to 2p-2h transitions, kept in separable
// form: a list of real strengths lambda_n and Hermitian one-body operators
// O_n.  The two-body matrix elements it stands for are
//   <p~ q~|v|p q> = sum_n lambda_n (O_n)_{p~p} (O_n)_{q~q}
// on the particle-particle/hole-hole block of the instantaneous state (plus
// the conjugate block), which is what dissipator_direct assembles
// explicitly.  The particle/hole split is never stored here; operators are
// projected onto it per call, so the interaction follows the state.
struct PHInteraction {
  std::vector<double> strengths;
  std::vector<MatC> operators;

  int n_terms() const { return static_cast<int>(strengths.size()); }

  void validate(int dim) const {
    if (strengths.size() != operators.size())
      throw ConfigError("interaction: strengths/operators size mismatch");
    for (const auto& op : operators) {
      if (op.rows() != dim || op.cols() != dim)
        throw ConfigError("interaction: operator dimension mismatch");
      if (hermiticity_defect(op) > 1e-10 * std::max(1.0, max_abs(op)))
        throw ConfigError("interaction: operator is not Hermitian");
    }
  }

  bool all_zero() const {
    return std::all_of(strengths.begin(), strengths.end(),
                       [](double s) { return s == 0.0; });
  }

  /// Largest commutator norm over operator pairs, relative to the operator
  /// scale.  The dissipator identities below are exact when this is zero;
  /// callers decide how much to tolerate.
  double commutation_defect() const {
    double defect = 0.0;
    for (int m = 0; m < n_terms(); ++m)
      for (int n = m + 1; n < n_terms(); ++n) {
        const double scale =
            std::max(1.0, max_abs(operators[m]) * max_abs(operators[n]));
        defect = std::max(
            defect, max_abs(MatC(operators[m] * operators[n] -
                                 operators[n] * operators[m])) / scale);
      }
    return defect;
  }
};

namespace detail {

/// Particle-hole block of an operator relative to rho: q O rho + rho O q.
inline MatC ph_project(const MatC& op, const MatC& rho, const MatC& q) {
  const MatC raising = q * op * rho;
  return raising + raising.adjoint();
}

}  // namespace detail

/// Recover a separable {lambda_n, O_n} list from raw 2p-2h matrix elements.
/// `supermatrix` is the Hermitian map on particle-hole excitations,
/// V_{(p h),(p' h')}, given in the eigenbasis of rho with holes its occupied
/// vectors (columns of `holes`) and particles the complement (`particles`);
/// its eigenvalues become the strengths and each eigenvector, reshaped to a
/// particle-by-hole block o_n, yields O_n = o_n + o_n^dagger.
inline PHInteraction interaction_from_ph_supermatrix(const MatC& supermatrix,
                                                     const MatC& particles,
                                                     const MatC& holes) {
  const int np = static_cast<int>(particles.cols());
  const int nh = static_cast<int>(holes.cols());
  if (supermatrix.rows() != np * nh || supermatrix.cols() != np * nh)
    throw ConfigError("supermatrix dimension must be n_particle * n_hole");
  if (hermiticity_defect(supermatrix) >
      1e-10 * std::max(1.0, max_abs(supermatrix)))
    throw ConfigError("supermatrix must be Hermitian");

  Eigen::SelfAdjointEigenSolver<MatC> es(supermatrix);
  if (es.info() != Eigen::Success)
    throw NumericalError("supermatrix eigendecomposition failed");

  PHInteraction out;
  for (int k = 0; k < np * nh; ++k) {
    const double lam = es.eigenvalues()[k];
    if (std::abs(lam) < 1e-14 * std::max(1.0, max_abs(supermatrix))) continue;
    MatC block(np, nh);  // index (p h) = p * nh + h
    for (int p = 0; p < np; ++p)
      for (int h = 0; h < nh; ++h) block(p, h) = es.eigenvectors()(p * nh + h, k);
    const MatC raising = particles * block * holes.adjoint();
    out.strengths.push_back(lam);
    out.operators.push_back(raising + raising.adjoint());
  }
  return out;
}

// The dissipator data for one state: the covariance matrix
//   Gamma_mn = 1/2 lambda_m lambda_n Tr(O_m (1-rho) O_n rho),
// its eigenpairs {gamma_k, A_k} with A_k = sum_n u_nk O_n^ph, and the
// coupling g = tau / hbar^2.  Gamma is a Gram matrix, hence positive
// semidefinite; eigenvalues below the clamp threshold are dropped.
struct DissipatorSpec {
  MatC gamma;                  // covariance matrix Gamma_mn (MeV^2)
  VecD gamma_eigs;             // kept eigenvalues, ascending
  std::vector<MatC> jump_ops;  // A_k for the kept eigenvalues
  std::vector<MatC> ops_ph;    // particle-hole projected O_n
  std::vector<double> strengths;
  double g = 0.0;              // tau / hbar^2, (MeV^2 fm/c)^-1
  bool gamma_real_symmetric = false;
  MatC rho_ref;                // state the spec was built from

  double max_gamma() const {
    return gamma_eigs.size() == 0 ? 0.0 : gamma_eigs.maxCoeff();
  }

  void check_fresh(const MatC& rho) const {
    if (rho.rows() != rho_ref.rows() ||
        max_abs(MatC(rho - rho_ref)) > 1e-12 * std::max(1.0, max_abs(rho_ref)))
      throw NumericalError("dissipator spec is stale for this state");
  }
};

inline DissipatorSpec build_dissipator_spec(const MatC& rho,
                                            const PHInteraction& interaction,
                                            const ModelSpec& model) {
  interaction.validate(static_cast<int>(rho.rows()));
  const int nt = interaction.n_terms();
  const MatC q = MatC::Identity(rho.rows(), rho.cols()) - rho;

  DissipatorSpec spec;
  spec.rho_ref = rho;
  spec.g = model.tau / (model.hbar_c * model.hbar_c);
  spec.strengths = interaction.strengths;
  spec.ops_ph.reserve(nt);
  std::vector<MatC> raising(nt);
  for (int n = 0; n < nt; ++n) {
    raising[n] = q * interaction.operators[n] * rho;
    spec.ops_ph.push_back(raising[n] + raising[n].adjoint());
  }

  spec.gamma = MatC::Zero(nt, nt);
  for (int m = 0; m < nt; ++m)
    for (int n = 0; n < nt; ++n)
      spec.gamma(m, n) = 0.5 * interaction.strengths[m] *
                         interaction.strengths[n] *
                         (raising[m].adjoint() * raising[n]).trace();

  const double scale = std::max(1.0, max_abs(spec.gamma));
  if (hermiticity_defect(spec.gamma) > 1e-10 * scale)
    throw NumericalError(
        "covariance matrix not Hermitian: broken operator Hermiticity");
  spec.gamma_real_symmetric =
      spec.gamma.imag().cwiseAbs().maxCoeff() < 1e-10 * scale;

  if (nt == 0) return spec;

  Eigen::SelfAdjointEigenSolver<MatC> es(spec.gamma);
  if (es.info() != Eigen::Success)
    throw NumericalError("covariance eigendecomposition failed");
  const double gmax = std::max(0.0, es.eigenvalues().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, gmax))
    throw NumericalError("covariance matrix has a negative eigenvalue: " +
                         std::to_string(es.eigenvalues().minCoeff()));

  std::vector<double> kept;
  for (int k = 0; k < nt; ++k) {
    const double gk = es.eigenvalues()[k];
    if (gk <= 1e-12 * std::max(1.0, gmax)) continue;  // clamp to zero, drop
    kept.push_back(gk);
    MatC a = MatC::Zero(rho.rows(), rho.cols());
    for (int n = 0; n < nt; ++n) a += es.eigenvectors()(n, k) * spec.ops_ph[n];
    spec.jump_ops.push_back(std::move(a));
  }
  spec.gamma_eigs = Eigen::Map<VecD>(kept.data(), kept.size());
  return spec;
}

/// Lindblad-form dissipator.  Evaluates both the covariance-weighted form
///   sum_mn Gamma_mn [O_n O_m rho + rho O_n O_m - 2 O_m rho O_n]
/// and its diagonalized twin
///   sum_k gamma_k [A_k^2 rho + rho A_k^2 - 2 A_k rho A_k]
/// and insists they agree; the two are related by the eigendecomposition,
/// so a mismatch means the spec is corrupted.
inline MatC dissipator_lindblad(const MatC& rho, const DissipatorSpec& spec) {
  spec.check_fresh(rho);
  const int nt = static_cast<int>(spec.ops_ph.size());
  MatC form_cov = MatC::Zero(rho.rows(), rho.cols());
  for (int m = 0; m < nt; ++m)
    for (int n = 0; n < nt; ++n) {
      if (spec.gamma(m, n) == cxd(0.0, 0.0)) continue;
      const MatC& om = spec.ops_ph[m];
      const MatC& on = spec.ops_ph[n];
      form_cov += spec.gamma(m, n) *
                  (on * om * rho + rho * on * om - 2.0 * om * rho * on);
    }

  MatC form_diag = MatC::Zero(rho.rows(), rho.cols());
  for (int k = 0; k < static_cast<int>(spec.jump_ops.size()); ++k) {
    const MatC& a = spec.jump_ops[k];
    const MatC a2 = a * a;
    form_diag += spec.gamma_eigs[k] * (a2 * rho + rho * a2 - 2.0 * a * rho * a);
  }

  const double scale = std::max(1.0, max_abs(form_cov));
  if (max_abs(MatC(form_cov - form_diag)) > 1e-10 * scale)
    throw NumericalError("dissipator forms disagree: corrupted spec");
  return form_diag;
}

/// Dissipator by explicit partial trace over particle 2,
///   D(rho) = Tr_2 [ v12, F12 ],
///   F12 = 1/2 { (1-rho1)(1-rho2) v12 rho1 rho2 - rho1 rho2 v12 (1-rho1)(1-rho2) },
/// with the two-body v12 assembled index by index from the separable form.
/// O(dim^4) memory; intended for small bases and cross-checks, the
/// production path is dissipator_lindblad.
inline MatC dissipator_direct(const MatC& rho,
                              const PHInteraction& interaction) {
  const int m = static_cast<int>(rho.rows());
  interaction.validate(m);
  const MatC q = MatC::Identity(m, m) - rho;

  // v12 = sum_n lambda_n (o_n (x) o_n + o_n^+ (x) o_n^+), o_n = q O_n rho.
  MatC v = MatC::Zero(m * m, m * m);
  for (int n = 0; n < interaction.n_terms(); ++n) {
    const MatC o = q * interaction.operators[n] * rho;
    const MatC od = o.adjoint();
    for (int a = 0; a < m; ++a)
      for (int c = 0; c < m; ++c)
        for (int b = 0; b < m; ++b)
          for (int d = 0; d < m; ++d)
            v(a * m + c, b * m + d) +=
                interaction.strengths[n] * (o(a, b) * o(c, d) + od(a, b) * od(c, d));
  }

  // Two-body projectors rho1 rho2 and (1-rho1)(1-rho2).
  MatC rr(m * m, m * m), qq(m * m, m * m);
  for (int a = 0; a < m; ++a)
    for (int c = 0; c < m; ++c)
      for (int b = 0; b < m; ++b)
        for (int d = 0; d < m; ++d) {
          rr(a * m + c, b * m + d) = rho(a, b) * rho(c, d);
          qq(a * m + c, b * m + d) = q(a, b) * q(c, d);
        }

  const MatC f = 0.5 * (qq * v * rr - rr * v * qq);
  const MatC comm = v * f - f * v;

  MatC diss = MatC::Zero(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      cxd s = 0.0;
      for (int c = 0; c < m; ++c) s += comm(a * m + c, b * m + c);
      diss(a, b) = s;
    }
  return diss;
}

// --- Deterministic reference evolution --------------------------------------

/// Right-hand side of the dissipative one-body equation
///   d rho/dt = [h(rho), rho]/(i hbar) - (g/2) D(rho),
/// with the covariance spec rebuilt from the instantaneous rho.
inline MatC lindblad_rhs(const MatC& rho, const PHInteraction& interaction,
                         const ModelSpec& model, bool constraint_on = false) {
  const MatC h = build_mean_field(rho, model, constraint_on, true);
  const DissipatorSpec spec = build_dissipator_spec(rho, interaction, model);
  const MatC diss = dissipator_lindblad(rho, spec);
  const cxd inv_ih = 1.0 / (cxd(0.0, 1.0) * model.hbar_c);
  return inv_ih * (h * rho - rho * h) - 0.5 * spec.g * diss;
}

/// One classical RK4 step of the dissipative equation.  rho slowly loses
/// idempotency (that is the physics); Hermiticity is restored against
/// rounding drift after the stage combination.
inline MatC lindblad_step(const MatC& rho, const PHInteraction& interaction,
                          const ModelSpec& model, double dt,
                          bool constraint_on = false) {
  check_dt(model, dt);
  const MatC k1 = lindblad_rhs(rho, interaction, model, constraint_on);
  const MatC k2 =
      lindblad_rhs(rho + 0.5 * dt * k1, interaction, model, constraint_on);
  const MatC k3 =
      lindblad_rhs(rho + 0.5 * dt * k2, interaction, model, constraint_on);
  const MatC k4 = lindblad_rhs(rho + dt * k3, interaction, model, constraint_on);
  MatC next = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  next = 0.5 * (next + next.adjoint().eval());
  return next;
}

// --- Stochastic unraveling ---------------------------------------------------

/// One diffusive jump step on a Slater state:
///   d|alpha> = { dt/(i hbar) h
///              + sum_k dW_k (1-rho) A_k
///              - (g dt/2) sum_k gamma_k [A_k^2 rho + rho A_k rho A_k - 2 A_k rho A_k]
///              } |alpha>,
/// dW_k = -i xi_k sqrt(g gamma_k dt), xi_k standard normal, all orbitals
/// sharing one draw.  The mean-field part uses the same midpoint propagator
/// as TDHF; orbitals are re-orthonormalized symmetrically afterwards, which
/// restores the projector property of rho without moving its range.
inline SlaterState unravel_step(const SlaterState& state,
                                const PHInteraction& interaction,
                                const ModelSpec& model, double dt,
                                const CounterRng& rng, std::uint64_t step,
                                bool constraint_on = false) {
  check_dt(model, dt);
  if (interaction.n_terms() == 0 || interaction.all_zero())
    return tdhf_step(state, model, dt, constraint_on);

  const MatC rho = state.density();
  const DissipatorSpec spec = build_dissipator_spec(rho, interaction, model);
  if (spec.gamma_eigs.size() == 0)
    return tdhf_step(state, model, dt, constraint_on);

  const MatC q = MatC::Identity(rho.rows(), rho.cols()) - rho;
  const UnitaryPropagator prop =
      midpoint_propagator(state.orbitals, model, dt, constraint_on);

  MatC kick = MatC::Zero(rho.rows(), rho.cols());
  for (int k = 0; k < static_cast<int>(spec.jump_ops.size()); ++k) {
    const MatC& a = spec.jump_ops[k];
    const double gk = spec.gamma_eigs[k];
    const cxd dw =
        cxd(0.0, -1.0) * rng.normal(step, k) * std::sqrt(spec.g * gk * dt);
    kick += dw * (q * a);
    kick -= 0.5 * spec.g * dt * gk *
            (a * a * rho + rho * a * rho * a - 2.0 * a * rho * a);
  }

  SlaterState next{prop.apply(state.orbitals, dt) + kick * state.orbitals,
                   state.t + dt};
  const double smallest = loewdin_orthonormalize(next.orbitals);
  if (!(smallest > 1e-10))
    throw TrajectoryAbort("rank loss in orthonormalization, overlap eig " +
                          std::to_string(smallest));
  return next;
}

}  // namespace smf
