#include "doctest.h"

#include <cmath>

#include "sgspde/phasefield.hpp"

using namespace sgspde;

namespace {

double max_weighted_diff(const PhaseFunction& a, const PhaseFunction& b) {
  const Grid& g = a.grid;
  double worst = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j)
    for (Eigen::Index k = 0; k < g.size(); ++k)
      worst = std::max(worst, std::abs(a.excess(j, k) - b.excess(j, k)) /
                                  (bracket(g.point(j)) * bracket(g.frequency(k))));
  return worst;
}

EikonalOptions with_steps(int steps, bool residual = true) {
  EikonalOptions o;
  o.steps = steps;
  o.check_residual = residual;
  return o;
}

}  // namespace

TEST_CASE("flat phase") {
  Grid g(1, 32, 4.0);
  PhaseFunction phi = flat_phase(g);
  PhaseRegularity r = phase_regularity(phi);
  CHECK(r.delta_min == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.j_seminorm == 0.0);
  CHECK(r.lambda == 0.0);
  PhaseFunction same = solve_eikonal(sg_wave_root(1), 0.3, 0.3, g);
  CHECK(same.excess.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("constant-coefficient transport phase") {
  Grid g(1, 64, 6.0);
  const double c = 0.7, s = 0.1, t = 0.6;
  Symbol kappa = transport_symbol(Point::Constant(1, c));
  PhaseFunction phi = solve_eikonal(kappa, s, t, g);
  double worst = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j)
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      worst = std::max(worst, std::abs(phi.excess(j, k) - c * (t - s) * g.freq(static_cast<int>(k))));
      worst = std::max(worst, std::abs(phi.grad_xi[0](j, k) - (g.coord(static_cast<int>(j)) + c * (t - s))));
    }
  CHECK(worst <= 1e-10);
  CHECK(phi.residual <= 1e-10);
  CHECK(phi.certified);
  CHECK(check_adjoint_eikonal(phi, kappa) <= 1e-9);
}

TEST_CASE("x-independent Hamiltonian <xi>") {
  for (int d : {1, 2}) {
    Grid g(d, d == 1 ? 64 : 16, 5.0);
    const double s = 0, t = 0.4;
    Symbol kappa = bracket_xi_symbol();
    PhaseFunction phi = solve_eikonal(kappa, s, t, g);
    double worst = 0;
    for (Eigen::Index j = 0; j < g.size(); ++j)
      for (Eigen::Index k = 0; k < g.size(); ++k)
        worst = std::max(worst, std::abs(phi.excess(j, k) - (t - s) * bracket(g.frequency(k))));
    CHECK(worst <= 1e-10);
    CHECK(phi.residual <= 1e-10);
    PhaseRegularity r = phase_regularity(phi);
    CHECK(r.delta_min == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(check_adjoint_eikonal(phi, kappa) <= 1e-9);
    CHECK(phi.amplitude.isApproxToConstant(Complex(1)));
  }
}

TEST_CASE("SG-wave phase: step halving, residual, regularity scaling") {
  Grid g(1, 64, 8.0);
  Symbol kappa = sg_wave_root(1.0);
  PhaseFunction p64 = solve_eikonal(kappa, 0, 0.05, g, with_steps(64));
  PhaseFunction p128 = solve_eikonal(kappa, 0, 0.05, g, with_steps(128));
  CHECK(max_weighted_diff(p64, p128) <= 1e-7);
  CHECK(p64.residual <= 1e-6);

  // Fourth-order convergence seen on coarse step counts.
  PhaseFunction p2 = solve_eikonal(kappa, 0, 0.05, g, with_steps(2, false));
  PhaseFunction p4 = solve_eikonal(kappa, 0, 0.05, g, with_steps(4, false));
  PhaseFunction p8 = solve_eikonal(kappa, 0, 0.05, g, with_steps(8, false));
  const double ratio = max_weighted_diff(p2, p4) / max_weighted_diff(p4, p8);
  MESSAGE("SG-wave step-halving ratio " << ratio);
  CHECK(ratio > 12);
  CHECK(ratio < 20);

  PhaseRegularity r05 = phase_regularity(p64);
  PhaseRegularity r025 = phase_regularity(solve_eikonal(kappa, 0, 0.025, g));
  PhaseRegularity r0125 = phase_regularity(solve_eikonal(kappa, 0, 0.0125, g));
  MESSAGE("lambda(0.05)=" << r05.lambda << " c=" << r05.c << " delta_min=" << r05.delta_min);
  CHECK(r05.lambda <= r05.c * 0.05 + 1e-15);
  CHECK(r05.lambda / r025.lambda == doctest::Approx(2.0).epsilon(0.2));
  CHECK(r025.lambda / r0125.lambda == doctest::Approx(2.0).epsilon(0.2));
  CHECK(r05.lambda > r025.lambda);
  CHECK(r025.lambda > r0125.lambda);
  CHECK(r05.delta_min > 0.5);
  CHECK(p64.certified);

  const double adj1 = check_adjoint_eikonal(p64, kappa, 2e-3);
  const double adj2 = check_adjoint_eikonal(p64, kappa, 1e-3);
  MESSAGE("adjoint residuals " << adj1 << " " << adj2);
  CHECK(adj2 <= 1e-4);
  CHECK(adj2 <= adj1);
}

TEST_CASE("crossing characteristics are reported with the admissible horizon") {
  Grid g(1, 16, 2.0);
  // Rotation flow: dX/dy = cos(t) folds at t = pi/2.
  Symbol kappa = Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(-(x.squaredNorm() + xi.squaredNorm()) / 2); },
      {2, 2}, "rotation");
  try {
    solve_eikonal(kappa, 0, 2.0, g, with_steps(64, false));
    FAIL("expected HorizonError");
  } catch (const HorizonError& e) {
    CHECK(e.admissible_t <= std::numbers::pi / 2);
    CHECK(e.admissible_t >= std::numbers::pi / 2 - 2.0 / 64 - 1e-12);
  }
  EikonalOptions o = with_steps(32, false);
  const double h = admissible_horizon(kappa, 0, 2.0, g, o);
  CHECK(h <= 1.0);
  CHECK(h > 0);
}
