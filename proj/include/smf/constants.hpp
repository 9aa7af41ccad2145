#pragma once

// Physical constants and unit conventions.
//
// Energies are in MeV, lengths in fm, times in fm/c.  With this choice
// hbar equals hbar*c numerically, so every propagator phase is
// h * dt / kHbarC and the kinetic prefactor is kHbarC^2 / (2 m c^2).
// Boltzmann constant is 1; entropies are dimensionless.

namespace smf {

inline constexpr double kHbarC = 197.327;       // MeV fm
inline constexpr double kNucleonMass = 938.9;   // MeV / c^2

/// Kinetic-energy prefactor hbar^2 / (2m) in MeV fm^2.  This is the only
/// place in the code base where it is formed.
inline constexpr double kinetic_prefactor(double mass_mev) {
  return kHbarC * kHbarC / (2.0 * mass_mev);
}

}  // namespace smf
