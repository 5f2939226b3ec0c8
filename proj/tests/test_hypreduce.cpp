#include "doctest.h"

#include <cmath>

#include "sgspde/hypreduce.hpp"

using namespace sgspde;

namespace {

Symbol theta_squared() {
  return Symbol::separable({{[](double, const Point& x) { return Complex(1 + x.squaredNorm()); },
                             [](double, const Point& xi) { return Complex(1 + xi.squaredNorm()); }}},
                           {2, 2}, "<x>^2<xi>^2");
}

HyperbolicOperator sg_wave() {
  HyperbolicOperator op;
  op.m = 2;
  op.coefficients = {Symbol::zero(), theta_squared()};
  op.roots = {sg_wave_root(1), sg_wave_root(-1)};
  return op;
}

HyperbolicOperator sg_wave_squared() {
  HyperbolicOperator op;
  op.m = 4;
  Symbol th2 = theta_squared();
  op.coefficients = {Symbol::zero(), 2.0 * th2, Symbol::zero(), -(th2 * th2)};
  op.roots = {sg_wave_root(1), sg_wave_root(1), sg_wave_root(-1), sg_wave_root(-1)};
  return op;
}

HyperbolicOperator involutive_demo() {
  Symbol r1 = Symbol::general(
      [](double t, const Point&, const Point& xi) { return Complex(-t * xi[0] - xi[1]); }, {0, 1}, "tau1");
  Symbol r2 = Symbol::general(
      [](double t, const Point& x, const Point& xi) { return Complex((t - 2 * x[1]) * xi[0]); }, {1, 1}, "tau2");
  r1.with_autonomous(false);
  r2.with_autonomous(false);
  HyperbolicOperator op;
  op.m = 2;
  op.dims = 2;
  op.coefficients = {r1 + r2, -(r1 * r2)};
  op.roots = {r1, r2};
  op.label = "involutive";
  return op;
}

// (D_t - Op(<x><xi>))^2 up to the two-term symbol of the square, plus an extra a2 term.
HyperbolicOperator double_root(const Symbol& extra) {
  HyperbolicOperator op;
  op.m = 2;
  Symbol th = sg_wave_root(1);
  Symbol cross = Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(0, x[0] * xi[0]); }, {1, 1}, "i x xi");
  op.coefficients = {2.0 * th, -(th * th) + cross + extra};
  op.principal = {2.0 * th, -(th * th)};
  op.roots = {th, th};
  return op;
}

double off_diagonal_sup(const Grid& g, const CMatrix& k2) {
  const Eigen::Index n = g.size();
  return std::max(interior_sup(g, lattice_symbol(g, k2.block(0, n, n, n)), {0, 0}),
                  interior_sup(g, lattice_symbol(g, k2.block(n, 0, n, n)), {0, 0}));
}

// Sup of |a| (<x><xi>)^lift over the half window restricted to <x><xi> >= floor.
double asymptotic_sup(const Grid& g, const CMatrix& table, double floor, double lift = 0) {
  double best = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j)
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const Point x = g.point(j), xi = g.frequency(k);
      if (std::abs(x[0]) > 0.5 * g.halfwidth() || std::abs(xi[0]) > 0.5 * g.max_frequency()) continue;
      const double w = bracket(x) * bracket(xi);
      if (w < floor) continue;
      best = std::max(best, std::abs(table(j, k)) * std::pow(w, lift));
    }
  return best;
}

double off_diagonal_asymptotic(const Grid& g, const CMatrix& k2, double floor, double lift = 0) {
  const Eigen::Index n = g.size();
  return std::max(asymptotic_sup(g, lattice_symbol(g, k2.block(0, n, n, n)), floor, lift),
                  asymptotic_sup(g, lattice_symbol(g, k2.block(n, 0, n, n)), floor, lift));
}

CMatrix omega_matrix(const Diagonalization& dz, const Grid& g) {
  const Eigen::Index n = g.size();
  CMatrix out(2 * n, 2 * n);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block(i * n, j * n, n, n) = op_matrix(dz.omega(i, j), 0, g);
  return out;
}

}  // namespace

TEST_CASE("classification of the example operators") {
  Grid g(1, 32, 6.0);
  Classification sg = classify_roots(sg_wave(), g, {0.0});
  CHECK(sg.kind == RootClass::Strict);
  CHECK(sg.separation == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(check_factorization(sg_wave(), g, {0.0}) <= 1e-12);

  Classification sq = classify_roots(sg_wave_squared(), g, {0.0});
  CHECK(sq.kind == RootClass::ConstantMultiplicities);
  CHECK(sq.l == 2);
  CHECK(sq.groups.size() == 2);
  CHECK(sq.separation == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(check_factorization(sg_wave_squared(), g, {0.0}) <= 1e-12);
  CHECK_THROWS_AS(build_system(sg_wave_squared(), g), UnsupportedError);

  Grid g2(2, 8, 2.0);
  HyperbolicOperator inv = involutive_demo();
  CHECK(check_factorization(inv, g2, {0.0, 0.5}) <= 1e-12);
  Classification ic = classify_roots(inv, g2, {0.0, 0.5});
  CHECK(ic.kind == RootClass::Involutive);
  CHECK(ic.separation < 1e-3);
  inv.label.clear();
  CHECK(classify_roots(inv, g2, {0.0, 0.5}).kind == RootClass::Unclassified);
}

TEST_CASE("classification ignores root labels order") {
  Grid g(1, 16, 4.0);
  HyperbolicOperator a = sg_wave_squared();
  HyperbolicOperator b = a;
  b.roots = {sg_wave_root(-1), sg_wave_root(1), sg_wave_root(-1), sg_wave_root(1)};
  Classification ca = classify_roots(a, g, {0.0}), cb = classify_roots(b, g, {0.0});
  CHECK(ca.kind == cb.kind);
  CHECK(ca.l == cb.l);
  CHECK(ca.groups.size() == cb.groups.size());
  CHECK(ca.separation == cb.separation);
}

TEST_CASE("numerical roots and the non-hyperbolic case") {
  Grid g(1, 16, 4.0);
  HyperbolicOperator op = sg_wave();
  op.roots.clear();
  auto roots = principal_roots(op, 0, g);
  double worst = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j)
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const double w = bracket(g.point(j)) * bracket(g.frequency(k));
      worst = std::max({worst, std::abs(roots[0](j, k) + w) / w, std::abs(roots[1](j, k) - w) / w});
    }
  CHECK(worst <= 1e-12);
  CHECK(classify_roots(op, g, {0.0}).kind == RootClass::Strict);

  op.coefficients[1] = -theta_squared();
  CHECK_THROWS_AS(classify_roots(op, g, {0.0}), NotHyperbolicError);
  HyperbolicOperator rooted = sg_wave();
  rooted.roots[0] = Symbol::general([](double, const Point&, const Point&) { return Complex(0, 1); }, {1, 1}, "i");
  CHECK_THROWS_AS(classify_roots(rooted, g, {0.0}), NotHyperbolicError);
}

TEST_CASE("Levi condition") {
  Grid g(1, 32, 4.0);
  CHECK(check_levi(std::vector<Symbol>{Symbol::zero()}, g));
  CHECK(check_levi(std::vector<Symbol>{Symbol::general(
                       [](double, const Point& x, const Point& xi) {
                         return Complex(x[0] * xi[0] / (bracket(x) * bracket(xi)));
                       },
                       {0, 0})},
                   g));
  CHECK_FALSE(check_levi(std::vector<Symbol>{sg_wave_root(1)}, g));
  CHECK(check_levi(sg_wave(), g));
  CHECK(check_levi(double_root(Symbol::zero()), g));
  CHECK_FALSE(check_levi(double_root(sg_wave_root(1)), g));
}

TEST_CASE("SG-wave reduction: data map, reconstruction and the system identity") {
  Grid g(1, 64, 8.0);
  HyperbolicOperator op = sg_wave();
  FirstOrderSystem sys = build_system(op, g);
  REQUIRE(sys.dim() == 4);
  CHECK(sys.blocks.size() == 2);
  CHECK(check_data_map_structure(sys));
  MESSAGE("kept remainder (0,0) norm " << sys.remainder_norm);
  CHECK(sys.remainder_norm < 1);

  const double t = 0.7;
  Field u = Field::sample(g, [&](const Point& x) { return std::exp(-x[0] * x[0]) * std::cos(t); });
  Field dtu = Field::sample(g, [&](const Point& x) { return Complex(0, std::exp(-x[0] * x[0]) * std::sin(t)); });
  Field dt2u = Field::sample(g, [&](const Point& x) { return std::exp(-x[0] * x[0]) * std::cos(t); });

  std::vector<Field> w = w_from_derivatives(sys, {u, dtu}, t);
  std::vector<Field> back = reconstruct_u(sys, w, t);
  CHECK(relative_l2(back[0], u) <= 1e-8);
  CHECK(relative_l2(back[1], dtu) <= 1e-6);

  // D_t W_2 = row 2 of (kappa1 + kappa0) W + g with g = L u.
  Field q1u = apply_psido(sys.kappa1[0] + sys.kappa0(0, 0), t, u);
  Field q1dtu = apply_psido(sys.kappa1[0] + sys.kappa0(0, 0), t, dtu);
  Field lu(g, dt2u.values - apply_psido(op.coefficients[1], t, u).values);
  CVector lhs = dt2u.values - q1dtu.values;
  CVector rhs = lu.values + apply_psido(sys.kappa1[1], t, w[1]).values;
  for (int c = 0; c < 2; ++c) rhs += apply_psido(sys.kappa0(1, c), t, w[c]).values;
  CHECK((lhs - rhs).norm() <= 1e-8 * lhs.norm());
  CHECK(relative_l2(w[1], Field(g, dtu.values - q1u.values)) <= 1e-12);

  // Factor symbol correction i x xi / (2 <x><xi>) up to lattice differencing.
  CMatrix s1 = tabulate(sys.kappa0(0, 0), 0, g);
  double worst = 0;
  for (Eigen::Index j = 8; j < g.size() - 8; ++j)
    for (Eigen::Index k = 8; k < g.size() - 8; ++k) {
      const Point x = g.point(j), xi = g.frequency(k);
      worst = std::max(worst, std::abs(s1(j, k) - Complex(0, x[0] * xi[0] / (2 * bracket(x) * bracket(xi)))));
    }
  MESSAGE("s1 deviation " << worst);
  CHECK(worst <= 0.05);
}

TEST_CASE("m = 1 reduction is the identity map") {
  Grid g(1, 32, 4.0);
  HyperbolicOperator op;
  op.m = 1;
  op.coefficients = {transport_symbol(Point::Constant(1, 0.5))};
  op.roots = op.coefficients;
  FirstOrderSystem sys = build_system(op, g);
  CHECK(sys.dim() == 1);
  Field u = random_bandlimited_field(g, 3);
  CHECK(relative_l2(apply_data_map(sys, {u})[0], u) <= 1e-14);
  CHECK(relative_l2(reconstruct_u(sys, {u}, 0)[0], u) <= 1e-14);
  CHECK(estimate_seminorm(sys.kappa0(0, 0), 0, {0, 0}, 0, g) == 0.0);
}

TEST_CASE("double root with Levi lower-order terms reduces") {
  Grid g(1, 32, 6.0);
  HyperbolicOperator op = double_root(Symbol::zero());
  FirstOrderSystem sys = build_system(op, g);
  CHECK(sys.n == 1);
  CHECK(sys.l == 2);
  CHECK(sys.dim() == 2);
  CHECK(check_data_map_structure(sys));
  Field u = random_bandlimited_field(g, 11);
  Field v = random_bandlimited_field(g, 12);
  auto w = w_from_derivatives(sys, {u, v}, 0);
  auto back = reconstruct_u(sys, w, 0);
  CHECK(relative_l2(back[0], u) <= 1e-12);
  CHECK(relative_l2(back[1], v) <= 1e-10);
}

TEST_CASE("perfect diagonalizer") {
  Grid g(1, 64, 8.0);
  const Eigen::Index n = g.size();
  SUBCASE("constant coefficients") {
    std::vector<Symbol> k1 = {bracket_xi_symbol(), -bracket_xi_symbol()};
    SymbolMatrix k0(2, 2);
    k0(0, 0) = Symbol::constant(0.1);
    k0(0, 1) = Symbol::constant(0.3);
    k0(1, 0) = Symbol::constant(0.2);
    k0(1, 1) = Symbol::constant(-0.1);
    Diagonalization dz = perfect_diagonalize_2x2(k1, k0, g);
    CMatrix k(2 * n, 2 * n);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        k.block(i * n, j * n, n, n) = op_matrix(k0(i, j), 0, g) + (i == j ? op_matrix(k1[i], 0, g) : CMatrix::Zero(n, n));
    CMatrix om = omega_matrix(dz, g);
    CMatrix conj = om.inverse() * k * om;
    const double before = 0.3, after = off_diagonal_sup(g, conj);
    MESSAGE("constant-coefficient off-diagonal " << before << " -> " << after);
    CHECK(before / after >= 10);
    CHECK(estimate_seminorm(dz.omega(0, 1), 0, {0, -1}, 0, g) < 1);
  }
  SUBCASE("SG-wave block") {
    Grid g(1, 128, 8.0);
    FirstOrderSystem sys = build_system(sg_wave(), g);
    std::vector<Symbol> k1 = {sys.kappa1[0], sys.kappa1[1]};
    SymbolMatrix k0(2, 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) k0(i, j) = sys.kappa0(i, j);
    Diagonalization dz = perfect_diagonalize_2x2(k1, k0, g);
    CMatrix k = block_generator(sys, 0, 0);
    const CMatrix om = omega_matrix(dz, g);
    const CMatrix conj = om.inverse() * k * om;
    const double before = off_diagonal_asymptotic(g, k, 8), after = off_diagonal_asymptotic(g, conj, 8);
    const double lifted = off_diagonal_asymptotic(g, conj, 1, 1);
    MESSAGE("SG-wave off-diagonal on <x><xi> >= 8: " << before << " -> " << after << "; (-1,-1) sup " << lifted
                                                     << "; on <x><xi> >= 4: " << off_diagonal_asymptotic(g, conj, 4));
    CHECK(before / after >= 5);
    CHECK(lifted < 2);
  }
  SUBCASE("already diagonal") {
    std::vector<Symbol> k1 = {sg_wave_root(1), sg_wave_root(-1)};
    SymbolMatrix k0(2, 2);
    k0(0, 0) = Symbol::constant(0.25);
    Diagonalization dz = perfect_diagonalize_2x2(k1, k0, g);
    CHECK(tabulate(dz.omega(0, 1), 0, g).cwiseAbs().maxCoeff() == 0.0);
    CHECK(tabulate(dz.omega(1, 0), 0, g).cwiseAbs().maxCoeff() == 0.0);
    CHECK((tabulate(dz.kappa0_tilde[0], 0, g).array() - 0.25).abs().maxCoeff() <= 1e-12);
    CHECK(tabulate(dz.kappa0_tilde[1], 0, g).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("coincident roots are refused") {
    std::vector<Symbol> k1 = {bracket_xi_symbol(), bracket_xi_symbol()};
    SymbolMatrix k0(2, 2);
    CHECK_THROWS_AS(perfect_diagonalize_2x2(k1, k0, g), RefusalError);
  }
}
