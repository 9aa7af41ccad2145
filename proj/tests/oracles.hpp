// Test-side reference implementations, written independently of the library
// code paths they check.
#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "smf/linalg.hpp"
#include "smf/meanfield.hpp"
#include "smf/model.hpp"

namespace oracle {

using smf::cxd;
using smf::MatC;
using smf::MatD;
using smf::VecD;

/// Eigenvalues of the 3-point Dirichlet kinetic matrix, in closed form:
/// E_k = 2 c (1 - cos(k pi / (n+1))), c = hbar^2 / (2 m dx^2).
inline std::vector<double> discrete_box_levels(const smf::ModelSpec& m) {
  const double c =
      smf::kinetic_prefactor(m.mass) / (m.dx * m.dx);
  std::vector<double> e(m.n_grid);
  for (int k = 1; k <= m.n_grid; ++k)
    e[k - 1] = 2.0 * c * (1.0 - std::cos(k * M_PI / (m.n_grid + 1)));
  return e;
}

/// Continuum particle-in-a-box levels for the same wall positions.
inline double continuum_box_level(const smf::ModelSpec& m, int k) {
  const double box = (m.n_grid + 1) * m.dx;
  return k * k * M_PI * M_PI * smf::kinetic_prefactor(m.mass) / (box * box);
}

/// Total energy by independent quadrature: kinetic through the
/// summation-by-parts gradient form (exact for the 3-point matrix with
/// hard walls), interaction and constraint by direct Riemann sums.
inline double energy_by_quadrature(const MatC& orbitals,
                                   const smf::ModelSpec& m,
                                   bool constraint_on) {
  const double pref = smf::kinetic_prefactor(m.mass);
  double e_kin = 0.0;
  for (int j = 0; j < orbitals.cols(); ++j) {
    // bonds include the walls: phi_{-1} = phi_{n} = 0
    double acc = std::norm(orbitals(0, j));
    for (int i = 0; i + 1 < m.n_grid; ++i)
      acc += std::norm(orbitals(i + 1, j) - orbitals(i, j));
    acc += std::norm(orbitals(m.n_grid - 1, j));
    e_kin += pref * acc / (m.dx * m.dx);
  }
  e_kin *= m.degeneracy;

  double e_pot = 0.0;
  for (int i = 0; i < m.n_grid; ++i) {
    double dens = 0.0;
    for (int j = 0; j < orbitals.cols(); ++j) dens += std::norm(orbitals(i, j));
    dens *= m.degeneracy / m.dx;
    e_pot += m.dx * (0.5 * m.t0 * dens * dens +
                     m.t3 / 3.0 * dens * dens * dens);
    if (constraint_on)
      e_pot += m.dx * m.lambda * m.x(i) * m.x(i) * dens;
  }
  return e_kin + e_pot;
}

/// Ground state by imaginary-time propagation with Loewdin
/// re-orthonormalization; an independent fixed-point route to the
/// constrained minimum.
inline smf::SlaterState imaginary_time_ground_state(const smf::ModelSpec& m,
                                                    double dtau = 0.002,
                                                    int max_iter = 200000,
                                                    double tol = 1e-12) {
  // start from box orbitals
  Eigen::SelfAdjointEigenSolver<MatD> es(smf::kinetic_matrix(m));
  MatC phi = es.eigenvectors().leftCols(m.n_particles).cast<cxd>();
  double e_prev = energy_by_quadrature(phi, m, true);
  for (int it = 0; it < max_iter; ++it) {
    VecD dens = smf::spatial_density_from_orbitals(phi, m);
    const MatD h = smf::mean_field_matrix(dens, m, true);
    // phi <- exp(-h dtau) phi, via the eigenbasis of h
    Eigen::SelfAdjointEigenSolver<MatD> eh(h);
    VecD decay = (-dtau * eh.eigenvalues().array()).exp();
    phi = eh.eigenvectors().cast<cxd>() *
          (decay.cast<cxd>().asDiagonal() *
           (eh.eigenvectors().cast<cxd>().adjoint() * phi).eval());
    smf::loewdin_orthonormalize(phi);
    if (it % 50 == 49) {
      const double e = energy_by_quadrature(phi, m, true);
      if (std::abs(e - e_prev) < tol * std::max(1.0, std::abs(e))) break;
      e_prev = e;
    }
  }
  return smf::SlaterState{phi, 0.0};
}

/// Slater variance of a one-body observable by the explicit
/// particle-hole sum  sum_{p,h} |<p|O|h>|^2.
inline double wick_variance(const MatC& hole_orbitals, const MatC& obs) {
  const int dim = static_cast<int>(hole_orbitals.rows());
  const int nh = static_cast<int>(hole_orbitals.cols());
  // particle space: orthogonal complement via full eigendecomposition of rho
  const MatC rho = hole_orbitals * hole_orbitals.adjoint();
  Eigen::SelfAdjointEigenSolver<MatC> es(rho);
  std::vector<int> holes, parts;
  for (int i = 0; i < dim; ++i)
    (es.eigenvalues()[i] > 0.5 ? holes : parts).push_back(i);
  if (static_cast<int>(holes.size()) != nh) return -1.0;  // split failed
  double acc = 0.0;
  for (int p : parts)
    for (int h : holes)
      acc += std::norm((es.eigenvectors().col(p).adjoint() * obs *
                        es.eigenvectors().col(h))
                           .value());
  return acc;
}

}  // namespace oracle
