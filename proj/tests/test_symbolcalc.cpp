#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sgspde/symbolcalc.hpp"

using namespace sgspde;
using std::numbers::pi;

namespace {

Field gaussian(const Grid& g, double width = 1.0) {
  return Field::sample(g, [&](const Point& x) { return std::exp(-x.squaredNorm() / (2 * width * width)); });
}

Field plane_wave(const Grid& g, Eigen::Index k) {
  const Point kk = g.frequency(k);
  return Field::sample(g, [&](const Point& x) { return std::polar(1.0, kk.dot(x)); });
}

double rel(const CVector& a, const CVector& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("grid transform round trip") {
  for (int d : {1, 2}) {
    Grid g(d, d == 1 ? 128 : 32, 7.0);
    Field u = random_bandlimited_field(g, 11, 0.6, false);
    Field back = inverse_transform(g, forward_transform(u));
    CHECK(relative_l2(back, u) <= 1e-12);
  }
  CHECK_THROWS_AS(Grid(1, 100, 1.0), ShapeError);
  CHECK_THROWS_AS(Grid(3, 16, 1.0), ShapeError);
}

TEST_CASE("forward transform matches the continuous Gaussian transform") {
  Grid g(1, 256, 20.0);
  CVector uhat = forward_transform(gaussian(g));
  double worst = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double xi = g.freq(static_cast<int>(k));
    worst = std::max(worst, std::abs(uhat[k] - std::sqrt(2 * pi) * std::exp(-xi * xi / 2)));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("identity symbol") {
  Grid g(1, 128, 10.0);
  Field u = random_bandlimited_field(g, 3, 0.5, false);
  CHECK(relative_l2(apply_psido(Symbol::constant(1.0), 0, u), u) <= 1e-12);
  Symbol general_one = Symbol::general([](double, const Point&, const Point&) { return Complex(1); }, {0, 0});
  CHECK(relative_l2(apply_psido(general_one, 0, u), u) <= 1e-12);
}

TEST_CASE("plane-wave exactness for multipliers") {
  Symbol a = Symbol::multiplier(
      [](double, const Point& xi) { return Complex(1 + xi.squaredNorm()); }, {0, 2}, "<xi>^2");
  Symbol a_dense = Symbol::general([](double, const Point&, const Point& xi) { return Complex(1 + xi.squaredNorm()); },
                                   {0, 2});
  Grid g(1, 64, 5.0);
  double worst = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    Field w = plane_wave(g, k);
    CVector expect = (1 + g.frequency(k).squaredNorm()) * w.values;
    worst = std::max(worst, rel(apply_psido(a, 0, w).values, expect));
    worst = std::max(worst, rel(apply_psido(a_dense, 0, w).values, expect));
  }
  CHECK(worst <= 1e-10);

  Grid g2(2, 16, 3.0);
  worst = 0;
  for (Eigen::Index k = 0; k < g2.size(); k += 7) {
    Field w = plane_wave(g2, k);
    CVector expect = (1 + g2.frequency(k).squaredNorm()) * w.values;
    worst = std::max(worst, rel(apply_psido(a, 0, w).values, expect));
  }
  CHECK(worst <= 1e-10);
}

TEST_CASE("<x><xi> on a Gaussian matches a direct double-sum quadrature") {
  Grid g(1, 512, 20.0);
  Field u = gaussian(g);
  const int n = g.n();
  const double h = g.spacing(), dk = g.dual_spacing();
  // Oracle: direct sums in both directions, no FFT.
  CVector uhat(n);
  for (int k = 0; k < n; ++k) {
    Complex acc = 0;
    for (int j = 0; j < n; ++j) acc += std::polar(1.0, -g.coord(j) * g.freq(k)) * u.values[j];
    uhat[k] = acc * h;
  }
  CVector expect(n);
  for (int j = 0; j < n; ++j) {
    Complex acc = 0;
    for (int k = 0; k < n; ++k)
      acc += std::polar(1.0, g.coord(j) * g.freq(k)) * std::sqrt(1 + g.freq(k) * g.freq(k)) * uhat[k];
    expect[j] = acc * std::sqrt(1 + g.coord(j) * g.coord(j)) * dk / (2 * pi);
  }
  CHECK(rel(apply_psido(sg_wave_root(1.0), 0, u).values, expect) <= 1e-8);
  Symbol dense = Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(bracket(x) * bracket(xi)); }, {1, 1});
  CHECK(rel(apply_psido(dense, 0, u).values, expect) <= 1e-8);
}

TEST_CASE("linearity") {
  Grid g(1, 64, 6.0);
  Field u = random_bandlimited_field(g, 1), v = random_bandlimited_field(g, 2);
  const Complex al(0.3, -1.2), be(2.0, 0.5);
  Symbol a = Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(std::sin(x[0]) * xi[0], bracket(xi)); }, {0, 1});
  Field mix(g, al * u.values + be * v.values);
  CVector lhs = apply_psido(a, 0, mix).values;
  CVector rhs = al * apply_psido(a, 0, u).values + be * apply_psido(a, 0, v).values;
  CHECK(rel(lhs, rhs) <= 1e-13);
}

TEST_CASE("sk_norm") {
  Grid g(1, 256, 20.0);
  Field u = gaussian(g);
  CHECK(sk_norm(u, {0, 0}) == doctest::Approx(l2_norm(u)).epsilon(1e-15));
  // int (1 + xi^2) 2 pi exp(-xi^2) dxi / (2 pi) = (3/2) sqrt(pi)
  CHECK(std::abs(sk_norm(u, {0, 1}) - std::pow(pi, 0.25) * std::sqrt(1.5)) <= 1e-6);
  // int (1 + x^2) exp(-x^2) dx = (3/2) sqrt(pi) as well
  CHECK(std::abs(sk_norm(u, {1, 0}) - std::pow(pi, 0.25) * std::sqrt(1.5)) <= 1e-6);
  Field scaled(g, Complex(-2, 1) * u.values);
  CHECK(sk_norm(scaled, {0.5, 1}) == doctest::Approx(std::sqrt(5.0) * sk_norm(u, {0.5, 1})).epsilon(1e-12));
  Field r = random_bandlimited_field(g, 9);
  CHECK(sk_norm(r, {0, 0}) <= sk_norm(r, {0.5, 0}));
  CHECK(sk_norm(r, {0.5, 0}) <= sk_norm(r, {0.5, 1}));
  CHECK(sk_norm(r, {-1, -1}) <= sk_norm(r, {0, 0}));
}

TEST_CASE("estimate_seminorm") {
  Grid g(1, 64, 20.0);
  CHECK(estimate_seminorm(Symbol::constant(1.0), 0, {0, 0}, 0, g) == doctest::Approx(1.0));
  Symbol a = sg_wave_root(1.0);
  CHECK(estimate_seminorm(a, 0, {1, 1}, 0, g) == doctest::Approx(1.0));
  const double expect = std::sqrt(1 + 400.0) * std::sqrt(1 + std::pow(g.max_frequency(), 2));
  CHECK(estimate_seminorm(a, 0, {0, 0}, 0, g) == doctest::Approx(expect).epsilon(1e-12));
  double prev = 0;
  for (int ell = 0; ell <= 2; ++ell) {
    const double s = estimate_seminorm(a, 0, {1, 1}, ell, g);
    CHECK(std::isfinite(s));
    CHECK(s >= prev);
    prev = s;
  }
  CHECK_THROWS_AS(estimate_seminorm(a, 0, {1, 1}, 3, g), ShapeError);
  SymbolCheck sc = check_symbol(a, 0, g);
  CHECK(sc.finite);
  CHECK(sc.within_bound);
}

TEST_CASE("compose_leading") {
  Grid g(1, 256, 10.0);
  Symbol b = Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(std::cos(x[0]) * xi[0], bracket(x)); }, {1, 1});
  Symbol one = Symbol::constant(1.0);
  CHECK((tabulate(compose_leading(one, b, g), 0, g) - tabulate(b, 0, g)).norm() == 0.0);

  Symbol m1 = bracket_xi_symbol();
  Symbol m2 = Symbol::multiplier([](double, const Point& xi) { return Complex(xi[0] * xi[0]); }, {0, 2});
  Symbol prod = compose_leading(m1, m2, g);
  CHECK(prod.kind() == SymbolKind::Multiplier);
  CHECK((tabulate(prod, 0, g) - tabulate(m1 * m2, 0, g)).norm() == 0.0);

  Symbol xxi = Symbol::general([](double, const Point& x, const Point& xi) { return Complex(x[0] * xi[0]); }, {1, 1});
  Symbol c = compose_leading(xxi, xxi, g);
  CHECK(c.order() == Order{2, 2});
  const Point x = Point::Constant(1, 0.7), xi = Point::Constant(1, -1.3);
  CHECK(std::abs(c(0, x, xi) - Complex(0.49 * 1.69, -0.7 * -1.3)) <= 1e-12);

  // Oracle: apply the two operators one after the other.
  Field u = gaussian(g);
  Field seq = apply_psido(xxi, 0, apply_psido(xxi, 0, u));
  Field once = apply_psido(c, 0, u);
  CHECK(relative_l2(once, seq) <= 1e-8);
}

TEST_CASE("continuity probe") {
  Grid g(1, 128, 12.0);
  Symbol a = sg_wave_root(1.0);
  ContinuityProbe probe = calibrate_continuity(a, 0, {1, 1}, g, 20, 100);
  CHECK(probe.calibrated > 0);
  CHECK(std::isfinite(probe.bound));
  CHECK_NOTHROW(verify_continuity(a, 0, {1, 1}, g, probe, 20, 5000));
  ContinuityProbe tight{probe.calibrated, 0.5 * probe.calibrated};
  CHECK_THROWS_AS(verify_continuity(a, 0, {1, 1}, g, tight, 20, 100), ContractViolation);
}

TEST_CASE("non-finite symbol values are reported with coordinates") {
  Grid g(1, 16, 2.0);
  Symbol bad = Symbol::general(
      [](double, const Point& x, const Point&) { return Complex(x[0] == 0 ? 1.0 / x[0] : 1.0); }, {0, 0}, "bad");
  Field u = gaussian(g);
  try {
    apply_psido(bad, 0, u);
    FAIL("expected EvaluationError");
  } catch (const EvaluationError& e) {
    CHECK(std::string(e.what()).find("x=") != std::string::npos);
  }
}
