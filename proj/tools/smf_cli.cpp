// placeholder; full CLI lands after the library settles
#include <cstdio>

#include "smf/ensemble.hpp"

int main() {
  smf::ModelSpec model;
  model.validate();

  smf::SlaterState chf = smf::solve_chf(model);
  std::printf("CHF ok: E = %.6f MeV, rms = %.6f fm, t3 = %.1f\n",
              smf::total_energy(chf, model, true), smf::rms_radius(chf, model),
              model.t3);

  const smf::VecD n = smf::spatial_density_from_orbitals(chf.orbitals, model);
  std::printf("density: max %.4f fm^-1, edge %.6f\n", n.maxCoeff(), n[0]);

  // breathing mode after releasing the constraint
  smf::SlaterState s = chf;
  const double e0 = smf::total_energy(s, model, false);
  for (int k = 0; k <= 60; ++k) {
    if (k % 10 == 0)
      std::printf("t=%6.1f  msr=%.6f  E-drift=%.3e  ortho=%.3e\n", s.t,
                  smf::mean_square_radius(s, model),
                  smf::total_energy(s, model, false) - e0,
                  smf::orthonormality_defect(s.orbitals));
    for (int i = 0; i < 50; ++i) s = smf::tdhf_step(s, model, 0.1);
  }
  return 0;
}
