#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smf/constants.hpp"
#include "smf/errors.hpp"
#include "smf/linalg.hpp"

namespace smf {

enum class ModelKind { kGrid1D, kAbstractMatrix };

// The physical system: single-particle representation, mean-field
// functional and residual-noise parameters.  Immutable once validated;
// shared read-only across trajectories.
//
// Grid models live on a hard-wall 1D lattice of n_grid points centred on
// x = 0; the wavefunction is implicitly zero outside.  Each spatial
// orbital carries `degeneracy` identical internal channels, so the total
// particle number is n_particles * degeneracy.
struct ModelSpec {
  ModelKind kind = ModelKind::kGrid1D;

  int n_grid = 48;          // grid points
  double dx = 0.4;          // fm
  int n_particles = 5;      // occupied spatial orbitals (per channel)
  int degeneracy = 4;       // internal channels per spatial orbital
  double mass = kNucleonMass;  // MeV/c^2
  double t0 = -1000.0;      // MeV fm, two-body contact coupling
  double t3 = 1100.0;       // MeV fm^2, repulsive density-dependent term
  double lambda = 0.25;     // MeV fm^-2, x^2 constraint strength
  double g0 = 500.0;        // MeV fm, residual contact strength
  double tau = 0.01;        // fm/c, residual-interaction memory time
  double hbar_c = kHbarC;   // MeV fm, fixed

  // Abstract-matrix models: a fixed Hermitian one-body Hamiltonian, no
  // grid geometry.  Self-consistent and contact operations are rejected.
  MatC h0;

  int dim() const {
    return kind == ModelKind::kGrid1D ? n_grid : static_cast<int>(h0.rows());
  }

  double x(int i) const {
    return (i - 0.5 * (n_grid - 1)) * dx;
  }

  VecD grid() const {
    VecD xs(n_grid);
    for (int i = 0; i < n_grid; ++i) xs[i] = x(i);
    return xs;
  }

  int total_particles() const { return n_particles * degeneracy; }

  /// Largest stable TDHF step for the explicit grid kinetics,
  /// dx^2 m / hbar_c with a safety factor of 0.5.
  double dt_stability_bound() const {
    return 0.5 * dx * dx * mass / hbar_c;
  }

  void validate() const {
    if (kind == ModelKind::kGrid1D) {
      if (n_grid < 8) throw ConfigError("model.n_grid: must be >= 8");
      if (!(dx > 0.0)) throw ConfigError("model.dx: must be > 0");
    } else {
      if (h0.rows() < 2 || h0.rows() != h0.cols())
        throw ConfigError("model.h0: must be a square matrix, dim >= 2");
      if (hermiticity_defect(h0) > 1e-12)
        throw ConfigError("model.h0: must be Hermitian");
    }
    if (n_particles < 1) throw ConfigError("model.n_particles: must be >= 1");
    if (degeneracy < 1) throw ConfigError("model.degeneracy: must be >= 1");
    if (total_particles() > dim() * degeneracy || n_particles > dim())
      throw ConfigError("model: Pauli infeasible, n_particles exceeds basis size");
    if (!(mass > 0.0)) throw ConfigError("model.mass: must be > 0");
    if (!(tau > 0.0)) throw ConfigError("model.tau: must be > 0");
    if (std::abs(hbar_c - kHbarC) > 1e-9)
      throw ConfigError("model.hbar_c: fixed at 197.327 MeV fm");
  }
};

// ---------------------------------------------------------------------------
// Density conventions.
//
// The stored one-body density matrix rho is the per-channel object: for a
// Slater state it is the rank-n_particles projector sum |phi_i><phi_i|
// (pair densities sum |alpha_i><beta_i| instead and need not be Hermitian).
// Physical bookkeeping multiplies in the degeneracy:
//
//     particle number  A      = degeneracy * Tr(rho)
//     spatial density  n(x_i) = degeneracy * Re rho_ii / dx    [fm^-1]
//
// spatial_density() below is the single place this convention lives; the
// couplings t0, t3 and g0 only have meaning relative to it.
// ---------------------------------------------------------------------------

struct OneBodyDensity {
  MatC rho;
  bool hermitian = true;
};

/// Physical density profile n(x) from a per-channel density matrix.
/// The diagonal of a Hermitian projector is real and nonnegative to
/// rounding; pair densities (hermitian = false) may carry small imaginary
/// and negative parts of the order of the accumulated noise, so they get
/// the looser tolerance.
inline VecD spatial_density(const MatC& rho, const ModelSpec& model,
                            bool hermitian = true) {
  if (model.kind != ModelKind::kGrid1D)
    throw UnsupportedOperation("spatial_density: grid models only");
  if (rho.rows() != model.n_grid || rho.cols() != model.n_grid)
    throw ConfigError("spatial_density: density dimension mismatch");
  const double tol = hermitian ? 1e-12 : 1e-6;
  VecD n(model.n_grid);
  const double scale = model.degeneracy / model.dx;
  for (int i = 0; i < model.n_grid; ++i) {
    const cxd d = rho(i, i);
    if (std::abs(d.imag()) > tol)
      throw NumericalError("spatial density has imaginary part " +
                           std::to_string(d.imag()));
    if (d.real() < -tol)
      throw NumericalError("spatial density negative: " +
                           std::to_string(d.real()));
    n[i] = scale * d.real();
  }
  return n;
}

/// Density profile straight from orbital amplitudes (real by construction).
inline VecD spatial_density_from_orbitals(const MatC& orbitals,
                                          const ModelSpec& model) {
  VecD n = orbitals.cwiseAbs2().rowwise().sum();
  return (model.degeneracy / model.dx) * n;
}

/// Hard-wall 3-point kinetic matrix, -hbar^2/(2m) d^2/dx^2.
inline MatD kinetic_matrix(const ModelSpec& model) {
  const double c = kinetic_prefactor(model.mass) / (model.dx * model.dx);
  MatD t = MatD::Zero(model.n_grid, model.n_grid);
  for (int i = 0; i < model.n_grid; ++i) {
    t(i, i) = 2.0 * c;
    if (i + 1 < model.n_grid) {
      t(i, i + 1) = -c;
      t(i + 1, i) = -c;
    }
  }
  return t;
}

/// Mean-field Hamiltonian from a physical density profile:
/// kinetic + t0 n(x) + t3 n(x)^2 (+ lambda x^2 when constrained).
/// Real symmetric by construction.
inline MatD mean_field_matrix(const VecD& density, const ModelSpec& model,
                              bool constraint_on) {
  MatD h = kinetic_matrix(model);
  for (int i = 0; i < model.n_grid; ++i) {
    const double n = density[i];
    double v = model.t0 * n + model.t3 * n * n;
    if (constraint_on) {
      const double xi = model.x(i);
      v += model.lambda * xi * xi;
    }
    h(i, i) += v;
  }
  return h;
}

/// Mean-field Hamiltonian from a one-body density matrix.  For abstract
/// models this is the fixed h0 (no self-consistency, no constraint).
inline MatC build_mean_field(const MatC& rho, const ModelSpec& model,
                             bool constraint_on, bool hermitian = true) {
  if (model.kind == ModelKind::kAbstractMatrix) {
    if (constraint_on)
      throw UnsupportedOperation("constraint requires a grid model");
    return model.h0;
  }
  const VecD n = spatial_density(rho, model, hermitian);
  return mean_field_matrix(n, model, constraint_on).cast<cxd>();
}

/// Residual contact potential U(sigma, x) = sigma g0 n(x), diagonal in x.
inline VecD contact_potential(const MatC& rho, double sigma,
                              const ModelSpec& model, bool hermitian = true) {
  if (model.kind != ModelKind::kGrid1D)
    throw UnsupportedOperation("contact_potential: grid models only");
  return sigma * model.g0 * spatial_density(rho, model, hermitian);
}

// Statistical ensemble of residual one-body noise fields.  The contact
// form is U(sigma) = sigma g0 n(x) with a single gaussian component; the
// separable form couples each gaussian to a fixed Hermitian operator
// through its mean field, U(sigma) = sum_i sigma_i c_i Tr(B_i rho) B_i.
// Only the direct (Hartree) term is kept in both forms; for the contact
// interaction the exchange term is proportional to the direct one and is
// absorbed into g0.
struct ResidualEnsemble {
  enum class Form { kContact, kSeparable };
  Form form = Form::kContact;
  std::vector<std::pair<double, MatC>> separable_terms;

  int n_components() const {
    return form == Form::kContact ? 1
                                  : static_cast<int>(separable_terms.size());
  }

  /// Noise field U(rho, sigma) as a dense matrix.
  MatC field(const MatC& rho, const VecD& sigma, const ModelSpec& model,
             bool hermitian = true) const {
    if (form == Form::kContact) {
      return contact_potential(rho, sigma[0], model, hermitian)
          .cast<cxd>()
          .asDiagonal();
    }
    MatC u = MatC::Zero(rho.rows(), rho.cols());
    for (int i = 0; i < n_components(); ++i) {
      const auto& [c, b] = separable_terms[i];
      u += sigma[i] * c * (b * rho).trace().real() * b;
    }
    return u;
  }
};

inline double particle_number(const MatC& rho, const ModelSpec& model) {
  return model.degeneracy * rho.trace().real();
}

}  // namespace smf
