#include "doctest.h"

#include <cmath>

#include "sgspde/presets.hpp"
#include "sgspde/propagator.hpp"

using namespace sgspde;

namespace {

Field gaussian(const Grid& g, double c = 0, double width = 1) {
  return Field::sample(g, [&](const Point& x) { return std::exp(-(x[0] - c) * (x[0] - c) / (width * width)); });
}

// Two-component system with kappa1 = diag(k1) and constant kappa0.
FirstOrderSystem manual_system(const Grid& g, std::vector<Symbol> k1, const CMatrix& k0) {
  FirstOrderSystem sys;
  sys.grid = g;
  sys.m = static_cast<int>(k1.size());
  sys.n = 1;
  sys.kappa1 = std::move(k1);
  sys.kappa0 = SymbolMatrix(sys.m, sys.m);
  for (int i = 0; i < sys.m; ++i)
    for (int j = 0; j < sys.m; ++j)
      if (k0(i, j) != Complex(0)) sys.kappa0(i, j) = Symbol::constant(k0(i, j));
  sys.data_map_b = SymbolMatrix(sys.m, sys.m);
  sys.recon_map_Y = SymbolMatrix(sys.m, sys.m);
  for (int i = 0; i < sys.m; ++i) {
    sys.data_map_b(i, i) = Symbol::constant(1.0);
    sys.recon_map_Y(i, i) = Symbol::constant(1.0);
  }
  SystemBlock blk;
  blk.offset = 0;
  blk.root_order.assign(sys.m, 0);
  sys.blocks = {blk};
  return sys;
}

FirstOrderSystem constant_pair(const Grid& g, double off_a, double off_b) {
  CMatrix k0(2, 2);
  k0 << 0.1, off_a, off_b, -0.1;
  return manual_system(g, {bracket_xi_symbol(), -bracket_xi_symbol()}, k0);
}

PropagatorFactory factory(PropagatorKind kind) {
  PropagatorFactory f;
  f.kind = kind;
  return f;
}

}  // namespace

TEST_CASE("reference step: trivial generators") {
  Grid g(1, 64, 4.0);
  FirstOrderSystem zero = build_system(presets::transport(Point::Zero(1)), g);
  State u = random_state(g, 1, 3);
  CHECK(relative_difference(step_reference(zero, 0, u, 0, 0.1), u) <= 1e-15);

  HyperbolicOperator br;
  br.m = 1;
  br.coefficients = {bracket_xi_symbol()};
  br.roots = br.coefficients;
  FirstOrderSystem sys = build_system(br, g);
  const double dt = 5e-4;
  const State out = step_reference(sys, 0, u, 0, dt);
  CVector spec = forward_transform(u[0]);
  for (Eigen::Index k = 0; k < g.size(); ++k) spec[k] *= std::exp(Complex(0, dt * bracket(g.frequency(k))));
  CHECK(relative_l2(out[0], inverse_transform(g, spec)) <= 1e-10);
  CHECK_THROWS_AS(step_reference(sys, 0, u, 0, 1.0), InstabilityError);
}

TEST_CASE("transport is translation") {
  Grid g(1, 128, 8.0);
  const double c = 0.5, span = 8 * g.spacing() / c;
  FirstOrderSystem sys = build_system(presets::transport(Point::Constant(1, c)), g);
  State u{gaussian(g, 0.5)};
  const Field expect = gaussian(g, 0.5 - c * span);
  CHECK(relative_l2(exact_propagator(sys, 0, 0, span).apply(u)[0], expect) <= 1e-10);
  CHECK(relative_l2(build_go_propagator(sys, 0, 0, span).apply(u)[0], expect) <= 1e-10);
  CHECK(relative_l2(propagate_reference(sys, 0, u, 0, span, 200)[0], expect) <= 1e-8);
}

TEST_CASE("constant-coefficient system: exact multiplier oracle") {
  Grid g(1, 64, 8.0);
  FirstOrderSystem sys = constant_pair(g, 0.3, 0.2);
  REQUIRE(block_is_multiplier(sys, 0));
  const double s = 0.1, t = 0.35;
  State u = random_state(g, 2, 9, 0.5);
  const StepOperator exact = exact_propagator(sys, 0, s, t);

  // Oracle: per-frequency exponential assembled independently.
  std::vector<CVector> spec{forward_transform(u[0]), forward_transform(u[1])};
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double b = bracket(g.frequency(k));
    Eigen::Matrix2cd kk;
    kk << b + 0.1, 0.3, 0.2, -b - 0.1;
    // exp(i tau K) = cos(tau w) I + i sin(tau w)/w K with w^2 = eigenvalue^2 for traceless K.
    const Complex w = std::sqrt(Complex((b + 0.1) * (b + 0.1) + 0.06));
    const Eigen::Matrix2cd e = std::cos((t - s) * w) * Eigen::Matrix2cd::Identity() +
                               Complex(0, 1) * std::sin((t - s) * w) / w * kk;
    const Eigen::Vector2cd v = e * Eigen::Vector2cd(spec[0][k], spec[1][k]);
    spec[0][k] = v(0);
    spec[1][k] = v(1);
  }
  const State oracle{inverse_transform(g, spec[0]), inverse_transform(g, spec[1])};
  CHECK(relative_difference(exact.apply(u), oracle) <= 1e-12);

  const double go = relative_difference(build_go_propagator(sys, 0, s, t).apply(u), oracle);
  MESSAGE("constant-coefficient GO error " << go);
  CHECK(go <= 1e-8);
  CHECK(relative_difference(propagate_reference(sys, 0, u, s, t, 400), oracle) <= 1e-8);
  CHECK(check_group_property(sys, 0, factory(PropagatorKind::Exact), t, 0.2, s) <= 1e-9);
  CHECK(check_group_property(sys, 0, factory(PropagatorKind::Exact), t, t, s) <= 1e-8);
  CHECK(check_inverse_property(sys, 0, factory(PropagatorKind::Exact), s, t) <= 1e-10);
}

TEST_CASE("reference stepper conserves the norm of a symmetric system") {
  Grid g(1, 64, 8.0);
  FirstOrderSystem sys = constant_pair(g, 0.3, 0.3);
  sys.kappa0(0, 0) = Symbol::zero();
  sys.kappa0(1, 1) = Symbol::zero();
  State u = random_state(g, 2, 4, 0.5);
  const State v = propagate_reference(sys, 0, u, 0, 1.0, 2000);
  const double drift = std::abs(state_norm(v) - state_norm(u)) / state_norm(u);
  MESSAGE("norm drift over unit time " << drift);
  CHECK(drift <= 1e-6);
}

TEST_CASE("SG-wave: GO against the reference stepper") {
  Grid g(1, 64, 12.0);
  FirstOrderSystem sys = build_system(presets::sg_wave(), g);
  State w{gaussian(g), Field(g, 0.5 * gaussian(g, 0.5).values)};

  const PropagatorGO same = build_go_propagator(sys, 0, 0.2, 0.2);
  CHECK(relative_difference(same.apply(w), w) <= 1e-8);
  for (const auto& phi : same.phases) CHECK((phi.amplitude.array() - Complex(1)).abs().maxCoeff() <= 1e-14);

  const double span = 0.05;
  const State ref = propagate_reference(sys, 0, w, 0, span, 256);
  const State ref_exact = exact_propagator(sys, 0, 0, span).apply(w);
  CHECK(relative_difference(ref, ref_exact) <= 1e-8);
  const double go = relative_difference(build_go_propagator(sys, 0, 0, span).apply(w), ref);
  MESSAGE("SG-wave GO vs reference over 0.05: " << go);
  CHECK(go <= 1e-3);

  // Richardson study of the reference stepper.
  const State r64 = propagate_reference(sys, 0, w, 0, 0.5, 64);
  const State r128 = propagate_reference(sys, 0, w, 0, 0.5, 128);
  const State r256 = propagate_reference(sys, 0, w, 0, 0.5, 256);
  const double ratio = relative_difference(r64, r128) / relative_difference(r128, r256);
  MESSAGE("reference Richardson ratio " << ratio);
  CHECK(ratio == doctest::Approx(16).epsilon(0.15));
}

TEST_CASE("SG-wave GO group and inverse properties") {
  Grid g(1, 64, 12.0);
  FirstOrderSystem sys = build_system(presets::sg_wave(), g);
  PropagatorFactory go = factory(PropagatorKind::GeometricOptics);
  go.go_max_span = 0.05;
  const double group = check_group_property(sys, 0, go, 0.04, 0.02, 0.0);
  const double inverse = check_inverse_property(sys, 0, go, 0.0, 0.04);
  MESSAGE("GO group residual " << group << ", inverse residual " << inverse);
  CHECK(group <= 5e-3);
  CHECK(inverse <= 5e-3);

  const double r1 = go_equation_residual(sys, 0, 0, 0.04, 2);
  const double r2 = go_equation_residual(sys, 0, 0, 0.02, 2);
  MESSAGE("GO equation residual " << r1 << " -> " << r2);
  CHECK(r2 <= 0.75 * r1);
}

TEST_CASE("horizon is reported as a split instruction") {
  Grid g(1, 16, 2.0);
  HyperbolicOperator rot;
  rot.m = 1;
  rot.coefficients = {Symbol::general(
      [](double, const Point& x, const Point& xi) { return Complex(-(x.squaredNorm() + xi.squaredNorm()) / 2); },
      {2, 2}, "rotation")};
  rot.roots = rot.coefficients;
  FirstOrderSystem sys = build_system(rot, g);
  GoOptions o;
  o.eikonal.check_residual = false;
  CHECK_THROWS_AS(build_go_propagator(sys, 0, 0, 2.0, o), HorizonError);
}

TEST_CASE("Duhamel formula") {
  Grid g(1, 64, 8.0);
  HyperbolicOperator zero_op = presets::transport(Point::Zero(1));
  FirstOrderSystem still = build_system(zero_op, g);
  const PropagatorFactory exact = factory(PropagatorKind::Exact);
  State w0{gaussian(g)};
  State y{Field(g, 0.3 * gaussian(g, 1).values)};
  const State out = duhamel_solve(still, 0, w0, std::vector<State>(11, y), 0.5, 1.5, exact);
  CHECK(relative_l2(out[0], Field(g, w0[0].values + Complex(0, 1.0) * y[0].values)) <= 1e-13);

  FirstOrderSystem sg = build_system(presets::sg_wave(), g);
  State sg0{gaussian(g), gaussian(g)};
  CHECK(relative_difference(duhamel_solve(sg, 0, sg0, {}, 0, 0.1, exact), exact_propagator(sg, 0, 0, 0.1).apply(sg0)) <=
        1e-14);

  // Manufactured W(t) = exp(-x^2) sin t for D_t W = <D> W + Y.
  HyperbolicOperator br;
  br.m = 1;
  br.coefficients = {bracket_xi_symbol()};
  br.roots = br.coefficients;
  FirstOrderSystem sys = build_system(br, g);
  const Field base = gaussian(g);
  const Field bd = apply_psido(bracket_xi_symbol(), 0, base);
  const int nodes = 201;
  std::vector<State> forcing;
  for (int k = 0; k < nodes; ++k) {
    const double t = k * 1.0 / (nodes - 1);
    forcing.push_back({Field(g, Complex(0, -std::cos(t)) * base.values - std::sin(t) * bd.values)});
  }
  const State w = duhamel_solve(sys, 0, {Field(g)}, forcing, 0, 1, exact);
  const double err = relative_l2(w[0], Field(g, std::sin(1.0) * base.values));
  MESSAGE("manufactured Duhamel error " << err);
  CHECK(err <= 1e-4);
}

TEST_CASE("scalar solution kernel") {
  SUBCASE("m = 1 is i E") {
    Grid g(1, 64, 8.0);
    FirstOrderSystem sys = build_system(presets::transport(Point::Constant(1, 0.4)), g);
    const auto kernel = scalar_solution_kernel(sys, 0.1, 0.6, factory(PropagatorKind::Exact));
    const Field gfield = gaussian(g);
    const Field expect(g, Complex(0, 1) * exact_propagator(sys, 0, 0.1, 0.6).apply({gfield})[0].values);
    CHECK(relative_l2(kernel(gfield), expect) <= 1e-14);
    CHECK(kernel(Field(g)).values.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("flat wave is minus the d'Alembert convolution") {
    Grid g(1, 256, 16.0);
    FirstOrderSystem sys = build_system(presets::flat_wave(), g);
    REQUIRE(block_is_multiplier(sys, 0));
    const double s = 0.2, t = 0.9, tau = t - s;
    const auto kernel = scalar_solution_kernel(sys, s, t, factory(PropagatorKind::Exact));
    const Field out = kernel(gaussian(g));
    const Field oracle = Field::sample(g, [&](const Point& x) {
      return -std::sqrt(std::numbers::pi) / 4 * (std::erf(x[0] + tau) - std::erf(x[0] - tau));
    });
    const double err = relative_l2(out, oracle);
    MESSAGE("d'Alembert kernel error " << err);
    CHECK(err <= 1e-4);
  }
}
