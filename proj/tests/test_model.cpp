#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "smf/linalg.hpp"
#include "smf/model.hpp"

using namespace smf;

namespace {

ModelSpec small_model() {
  ModelSpec m;
  m.n_grid = 16;
  m.dx = 0.5;
  m.n_particles = 2;
  return m;
}

/// Random rank-n projector via orthonormalized gaussian columns.
MatC random_projector(int dim, int rank, unsigned seed) {
  std::srand(seed);
  MatC phi = MatC::Random(dim, rank);
  loewdin_orthonormalize(phi);
  return phi * phi.adjoint();
}

}  // namespace

TEST_CASE("zero density: mean field is the bare kinetic matrix") {
  ModelSpec m = small_model();
  m.lambda = 0.0;
  const MatC h =
      build_mean_field(MatC::Zero(m.n_grid, m.n_grid), m, false);
  REQUIRE(hermiticity_defect(h) == 0.0);

  Eigen::SelfAdjointEigenSolver<MatC> es(h);
  const auto exact = oracle::discrete_box_levels(m);
  for (int k = 0; k < m.n_grid; ++k)
    REQUIRE(es.eigenvalues()[k] == Catch::Approx(exact[k]).margin(1e-10));

  // the low discrete levels agree with the continuum box within
  // discretization error
  for (int k = 1; k <= 3; ++k) {
    const double cont = oracle::continuum_box_level(m, k);
    REQUIRE(std::abs(es.eigenvalues()[k - 1] - cont) < 0.03 * cont);
  }
}

TEST_CASE("constraint adds lambda x^2 on the diagonal") {
  ModelSpec m = small_model();
  m.lambda = 0.25;
  const MatC rho = random_projector(m.n_grid, m.n_particles, 1);
  const MatC h_off = build_mean_field(rho, m, false);
  const MatC h_on = build_mean_field(rho, m, true);
  const MatC diff = h_on - h_off;
  for (int i = 0; i < m.n_grid; ++i) {
    for (int j = 0; j < m.n_grid; ++j) {
      if (i == j) {
        REQUIRE(diff(i, i).real() ==
                Catch::Approx(0.25 * m.x(i) * m.x(i)).margin(1e-12));
      } else {
        REQUIRE(std::abs(diff(i, j)) == 0.0);
      }
    }
  }
}

TEST_CASE("mean field is consistent with the energy functional") {
  ModelSpec m = small_model();
  const MatC rho = random_projector(m.n_grid, m.n_particles, 2);
  const MatC h = build_mean_field(rho, m, true);
  REQUIRE(hermiticity_defect(h) < 1e-12);

  // Two routes to the total energy: the library functional and an
  // independent quadrature oracle...
  Eigen::SelfAdjointEigenSolver<MatC> es(rho);
  MatC phi(m.n_grid, m.n_particles);
  int col = 0;
  for (int i = 0; i < m.n_grid; ++i)
    if (es.eigenvalues()[i] > 0.5) phi.col(col++) = es.eigenvectors().col(i);
  REQUIRE(col == m.n_particles);

  const SlaterState state{phi, 0.0};
  const double e_lib = total_energy(state, m, true);
  const double e_oracle = oracle::energy_by_quadrature(phi, m, true);
  REQUIRE(e_lib == Catch::Approx(e_oracle).margin(1e-10 * std::abs(e_oracle)));

  // ...and a third through <Phi|H|Phi> written with h_MF minus the
  // double-counting correction.
  const VecD n = spatial_density(rho, m);
  double rearrange = 0.0;
  for (int i = 0; i < m.n_grid; ++i)
    rearrange += m.dx * (0.5 * m.t0 * n[i] * n[i] +
                         (2.0 / 3.0) * m.t3 * n[i] * n[i] * n[i]);
  const double e_via_h =
      m.degeneracy * (h * rho).trace().real() - rearrange;
  REQUIRE(e_via_h == Catch::Approx(e_oracle).margin(1e-10 * std::abs(e_oracle)));
}

TEST_CASE("mean field rejects bad densities") {
  ModelSpec m = small_model();
  MatC rho = MatC::Zero(m.n_grid, m.n_grid);
  rho(3, 3) = cxd(-1e-6, 0.0);
  REQUIRE_THROWS_AS(build_mean_field(rho, m, false), NumericalError);
  rho(3, 3) = cxd(0.1, 1e-3);
  REQUIRE_THROWS_AS(build_mean_field(rho, m, false), NumericalError);
  REQUIRE_THROWS_AS(
      build_mean_field(MatC::Zero(m.n_grid + 1, m.n_grid + 1), m, false),
      ConfigError);
}

TEST_CASE("contact potential") {
  ModelSpec m = small_model();
  m.g0 = 500.0;
  const MatC rho = random_projector(m.n_grid, m.n_particles, 3);

  SECTION("sigma = 0 gives zero") {
    REQUIRE(contact_potential(rho, 0.0, m).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("matches g0 times the physical density pointwise") {
    const VecD u = contact_potential(rho, 1.0, m);
    const VecD n = spatial_density(rho, m);
    for (int i = 0; i < m.n_grid; ++i)
      REQUIRE(u[i] == Catch::Approx(500.0 * n[i]).margin(1e-12));
  }

  SECTION("trace identity against a quadrature oracle") {
    const double sigma = 0.7;
    const VecD u = contact_potential(rho, sigma, m);
    double lhs = 0.0;  // Tr(U rho) dx
    for (int i = 0; i < m.n_grid; ++i) lhs += u[i] * rho(i, i).real() * m.dx;
    // independent route: sigma g0 integral n(x)^2 dx, rescaled to the
    // per-channel site measure dx/degeneracy
    double integral = 0.0;
    for (int i = 0; i < m.n_grid; ++i) {
      const double n_i = m.degeneracy * rho(i, i).real() / m.dx;
      integral += n_i * n_i * m.dx;
    }
    const double rhs = sigma * m.g0 * integral * m.dx / m.degeneracy;
    REQUIRE(lhs == Catch::Approx(rhs).margin(1e-10 * std::abs(rhs)));
  }

  SECTION("abstract models are rejected") {
    ModelSpec am;
    am.kind = ModelKind::kAbstractMatrix;
    am.h0 = MatC::Identity(4, 4);
    am.n_particles = 2;
    REQUIRE_THROWS_AS(contact_potential(MatC::Identity(4, 4) * 0.5, 1.0, am),
                      UnsupportedOperation);
  }
}

TEST_CASE("separable noise field uses the operator mean fields") {
  ModelSpec m = small_model();
  ResidualEnsemble ens;
  ens.form = ResidualEnsemble::Form::kSeparable;
  MatC b1 = MatC::Random(m.n_grid, m.n_grid);
  b1 = 0.5 * (b1 + b1.adjoint().eval());
  ens.separable_terms = {{2.0, b1}};
  const MatC rho = random_projector(m.n_grid, m.n_particles, 4);
  VecD sigma(1);
  sigma << 1.5;
  const MatC u = ens.field(rho, sigma, m);
  const MatC expect = 1.5 * 2.0 * (b1 * rho).trace().real() * b1;
  REQUIRE(max_abs(MatC(u - expect)) < 1e-12);
}

TEST_CASE("model validation") {
  ModelSpec m = small_model();
  SECTION("valid by default") { REQUIRE_NOTHROW(m.validate()); }
  SECTION("grid too small") {
    m.n_grid = 4;
    REQUIRE_THROWS_AS(m.validate(), ConfigError);
  }
  SECTION("nonpositive spacing") {
    m.dx = 0.0;
    REQUIRE_THROWS_AS(m.validate(), ConfigError);
  }
  SECTION("Pauli infeasible") {
    m.n_particles = 17;
    REQUIRE_THROWS_AS(m.validate(), ConfigError);
  }
  SECTION("hbar_c is pinned") {
    m.hbar_c = 197.0;
    REQUIRE_THROWS_AS(m.validate(), ConfigError);
  }
  SECTION("memory time positive") {
    m.tau = 0.0;
    REQUIRE_THROWS_AS(m.validate(), ConfigError);
  }
}
