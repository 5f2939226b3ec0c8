#include "sgspde/presets.hpp"

namespace sgspde::presets {

Symbol sg_weight_squared() {
  return Symbol::separable({{[](double, const Point& x) { return Complex(1 + x.squaredNorm()); },
                             [](double, const Point& xi) { return Complex(1 + xi.squaredNorm()); }}},
                           {2, 2}, "<x>^2<xi>^2");
}

HyperbolicOperator sg_wave() {
  HyperbolicOperator op;
  op.m = 2;
  op.coefficients = {Symbol::zero(), sg_weight_squared()};
  op.roots = {sg_wave_root(1), sg_wave_root(-1)};
  return op;
}

HyperbolicOperator sg_wave_squared() {
  HyperbolicOperator op;
  op.m = 4;
  const Symbol w2 = sg_weight_squared();
  op.coefficients = {Symbol::zero(), 2.0 * w2, Symbol::zero(), -(w2 * w2)};
  op.roots = {sg_wave_root(1), sg_wave_root(1), sg_wave_root(-1), sg_wave_root(-1)};
  return op;
}

HyperbolicOperator involutive_demo() {
  Symbol r1 = Symbol::general(
      [](double t, const Point&, const Point& xi) { return Complex(-t * xi[0] - xi[1]); }, {0, 1}, "-t xi1 - xi2");
  Symbol r2 = Symbol::general(
      [](double t, const Point& x, const Point& xi) { return Complex((t - 2 * x[1]) * xi[0]); }, {1, 1},
      "(t - 2 x2) xi1");
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

HyperbolicOperator transport(const Point& speed) {
  HyperbolicOperator op;
  op.m = 1;
  op.dims = static_cast<int>(speed.size());
  op.coefficients = {transport_symbol(speed)};
  op.roots = op.coefficients;
  return op;
}

HyperbolicOperator flat_wave() {
  HyperbolicOperator op;
  op.m = 2;
  const Symbol xi2 = Symbol::multiplier([](double, const Point& xi) { return Complex(xi.squaredNorm()); }, {0, 2},
                                        "|xi|^2");
  const Symbol br2 = Symbol::multiplier([](double, const Point& xi) { return Complex(1 + xi.squaredNorm()); },
                                        {0, 2}, "<xi>^2");
  op.coefficients = {Symbol::zero(), xi2};
  op.principal = {Symbol::zero(), br2};
  op.roots = {bracket_xi_symbol(), -bracket_xi_symbol()};
  return op;
}

std::vector<std::string> names() {
  return {"sg-wave", "sg-wave-squared", "involutive-demo", "transport", "flat-wave-white-noise"};
}

}  // namespace sgspde::presets
