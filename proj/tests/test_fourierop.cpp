#include "doctest.h"

#include <cmath>

#include "sgspde/fourierop.hpp"

using namespace sgspde;

namespace {

Field gaussian(const Grid& g, double c = 0) {
  return Field::sample(g, [&](const Point& x) { return std::exp(-(x[0] - c) * (x[0] - c)); });
}

}  // namespace

TEST_CASE("flat phase with unit amplitude is the identity") {
  Grid g(1, 64, 6.0);
  Field u = random_bandlimited_field(g, 4, 0.5, false);
  PhaseFunction flat = flat_phase(g);
  CHECK(relative_l2(apply_fio(flat, Symbol::constant(1.0), u), u) <= 1e-10);
  CHECK(probe_fio_bound(flat, Symbol::constant(1.0), {0, 0}, {0.7, -0.4}, 12) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(probe_fio_bound(flat, bracket_xi_symbol(), {0, 1}, {0, 1}, 12) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(probe_fio_bound(flat, Symbol::constant(1.0), {0, 0}, {0, 0}, 5), ArgumentError);
}

TEST_CASE("flat phase agrees with apply_psido") {
  Grid g(1, 64, 6.0);
  Field u = random_bandlimited_field(g, 5, 0.5, false);
  Symbol a = Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(bracket(x) * std::cos(xi[0]), x[0]); }, {1, 0});
  Field lhs = apply_fio(flat_phase(g), a, u);
  Field rhs = apply_psido(a, 0, u);
  CHECK((lhs.values - rhs.values).cwiseAbs().maxCoeff() <= 1e-12 * rhs.values.cwiseAbs().maxCoeff());
}

TEST_CASE("linear phase shifts the input") {
  Grid g(1, 128, 8.0);
  const double shift = 3 * g.spacing();
  Symbol kappa = transport_symbol(Point::Constant(1, shift / 0.5));
  PhaseFunction phi = solve_eikonal(kappa, 0, 0.5, g);
  Field u = gaussian(g, 0.3);
  Field out = apply_fio(phi, Symbol::constant(1.0), u);
  Field expect = gaussian(g, 0.3 - shift);
  CHECK(relative_l2(out, expect) <= 1e-10);
}

TEST_CASE("linearity and short-time continuity") {
  Grid g(1, 64, 8.0);
  Symbol kappa = sg_wave_root(1.0);
  Field u = random_bandlimited_field(g, 8), v = random_bandlimited_field(g, 9);
  PhaseFunction phi = solve_eikonal(kappa, 0, 0.02, g);
  Symbol one = Symbol::constant(1.0);
  Field mix(g, 2.0 * u.values - Complex(0, 1) * v.values);
  CVector lhs = apply_fio(phi, one, mix).values;
  CVector rhs = 2.0 * apply_fio(phi, one, u).values - Complex(0, 1) * apply_fio(phi, one, v).values;
  CHECK((lhs - rhs).norm() <= 1e-13 * rhs.norm());

  double prev = std::numeric_limits<double>::infinity();
  for (double span : {0.04, 0.02, 0.01}) {
    const double gap = relative_l2(apply_fio(solve_eikonal(kappa, 0, span, g), one, u), u);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("SG-wave FIO bound is stable under refinement") {
  Symbol kappa = sg_wave_root(1.0);
  Symbol one = Symbol::constant(1.0);
  Grid coarse(1, 64, 8.0), fine(1, 128, 8.0);
  const double c1 = probe_fio_bound(solve_eikonal(kappa, 0, 0.05, coarse), one, {0, 0}, {1, 1}, 10, 21);
  const double c2 = probe_fio_bound(solve_eikonal(kappa, 0, 0.05, fine), one, {0, 0}, {1, 1}, 10, 21);
  MESSAGE("C_probe coarse " << c1 << " fine " << c2);
  CHECK(std::isfinite(c1));
  CHECK(c2 == doctest::Approx(c1).epsilon(0.1));
}

TEST_CASE("uncertified phases are refused") {
  Grid g(1, 16, 2.0);
  PhaseFunction phi = flat_phase(g);
  phi.certified = false;
  Field u = gaussian(g);
  CHECK_THROWS_AS(apply_fio(phi, Symbol::constant(1.0), u), RefusalError);
  CHECK(spectral_tail(gaussian(Grid(1, 64, 8.0))) < 1e-10);
}
