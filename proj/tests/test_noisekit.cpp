#include "doctest.h"

#include <cmath>
#include <numbers>

#include "sgspde/errors.hpp"
#include "sgspde/noisekit.hpp"

using namespace sgspde;

namespace {

constexpr double kPi = std::numbers::pi;

Point pt(double a) { return Point::Constant(1, a); }

SpectralMeasure delta_pair(double k, double mass = 0.5) { return SpectralMeasure::atoms({{pt(k), mass}, {pt(-k), mass}}); }

// Composite Simpson with n panels (n even).
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(a + i * h);
  return s * h / 3;
}

}  // namespace

TEST_CASE("compatibility integrals") {
  SUBCASE("zero atom") {
    const auto v = compatibility_integral(SpectralMeasure::atoms({{pt(0), 1.0}}), 1);
    CHECK_FALSE(v.infinite);
    CHECK(v.value == doctest::Approx(1).epsilon(1e-15));
    CHECK(v.argmax.norm() == 0.0);
    CHECK(compatibility_integral(SpectralMeasure::atoms({{pt(0), 1.0}}), 0).value == 1.0);
  }
  SUBCASE("Lebesgue closed forms") {
    CHECK(compatibility_integral(SpectralMeasure::lebesgue(1), 1).value == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(compatibility_integral(SpectralMeasure::lebesgue(1), 0).infinite);
    CHECK(compatibility_integral(SpectralMeasure::lebesgue(1), 0.5).infinite);
    CHECK(compatibility_integral(SpectralMeasure::lebesgue(2), 2).value == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(compatibility_integral(SpectralMeasure::lebesgue(2), 1).infinite);
    // int (1 + xi^2)^-2 dxi = pi / 2 in d = 1.
    CHECK(compatibility_integral(SpectralMeasure::lebesgue(1), 2).value == doctest::Approx(kPi / 2).epsilon(1e-12));
  }
  SUBCASE("densities by quadrature") {
    // Lorentzian density: int (1 + xi^2)^-2 dxi = pi / 2, sup at eta = 0.
    auto lorentz = SpectralMeasure::density(1, [](const Point& x) { return 1 / (1 + x.squaredNorm()); }, 4, false);
    const auto v = compatibility_integral(lorentz, 1);
    CHECK(v.value == doctest::Approx(kPi / 2).epsilon(1e-8));
    CHECK(v.argmax.norm() == 0.0);
    // Truncated Riesz density |xi|^-1/2 on [-B, B]; substitute xi = s^2 for a smooth oracle.
    const double band = 8;
    auto riesz = SpectralMeasure::density(1, [](const Point& x) { return std::pow(std::abs(x[0]), -0.5); }, band, true);
    const double oracle = 2 * simpson([](double s) { return 2 / (1 + std::pow(s, 4)); }, 0, std::sqrt(band), 4000);
    const auto r = compatibility_integral(riesz, 1);
    CHECK_FALSE(r.infinite);
    CHECK(r.value == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(r.argmax.norm() == 0.0);
    // Flat untruncated density with exponent 1/2 has a divergent tail.
    auto flat = SpectralMeasure::density(1, [](const Point&) { return 1.0; }, 4, false);
    CHECK(compatibility_integral(flat, 0.5).infinite);
    CHECK(compatibility_integral(flat, 1).value == doctest::Approx(kPi).epsilon(1e-8));
  }
  SUBCASE("translation consistency") {
    const double v = 0.75;
    auto base = SpectralMeasure::atoms({{pt(1), 0.3}, {pt(-2), 0.7}}, false);
    auto moved = SpectralMeasure::atoms({{pt(1 + v), 0.3}, {pt(-2 + v), 0.7}}, false);
    std::vector<Point> grid = default_eta_grid(1, 4, 81), shifted;
    for (const Point& e : grid) shifted.push_back(e - pt(v));
    const auto a = compatibility_integral(base, 1, grid);
    const auto b = compatibility_integral(moved, 1, shifted);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
    CHECK((b.argmax - (a.argmax - pt(v))).norm() <= 1e-12);
  }
}

TEST_CASE("measure validation") {
  CHECK_THROWS_AS(SpectralMeasure::atoms({{pt(1), -1.0}}).validate(), ArgumentError);
  CHECK_THROWS_AS(SpectralMeasure::atoms({{pt(1), 1.0}}).validate(), ArgumentError);
  CHECK_NOTHROW(delta_pair(2).validate());
  CHECK_THROWS_AS(
      SpectralMeasure::density(1, [](const Point& x) { return std::exp(-x[0]); }, 2, true).validate(), ArgumentError);
  Grid g(1, 32, 4.0);
  CHECK_THROWS_AS(build_cm_basis(SpectralMeasure::atoms({{pt(1), 1.0}}, false), 2, g), ArgumentError);
}

TEST_CASE("Cameron-Martin basis") {
  Grid g(1, 64, kPi);
  SUBCASE("symmetric atom pair gives cos and sin") {
    const double k = 3;
    const CMBasis b = build_cm_basis(delta_pair(k), 2, g);
    REQUIRE(b.size() == 2);
    CHECK(b.warning.empty());
    const Field c = Field::sample(g, [&](const Point& x) { return std::cos(k * x[0]); });
    const Field s = Field::sample(g, [&](const Point& x) { return std::sin(k * x[0]); });
    CHECK((b.fields[0].values - c.values).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((b.fields[1].values - s.values).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((b.gram() - CMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
    const CMBasis big = build_cm_basis(delta_pair(k), 5, g);
    CHECK(big.size() == 2);
    CHECK_FALSE(big.warning.empty());
  }
  SUBCASE("zero atom gives a constant field") {
    const CMBasis b = build_cm_basis(SpectralMeasure::atoms({{pt(0), 4.0}}), 1, g);
    REQUIRE(b.size() == 1);
    CHECK((b.fields[0].values.array() - Complex(2)).abs().maxCoeff() <= 1e-14);
  }
  SUBCASE("Lebesgue Gram identity, K = 64") {
    Grid fine(1, 128, 8.0);
    const CMBasis b = build_cm_basis(SpectralMeasure::lebesgue(1), 64, fine);
    REQUIRE(b.size() == 64);
    // Independent Gram: lattice cell mass times conj(f_j) f_k summed over support.
    const double w = fine.dual_spacing();
    CMatrix gram = w * b.coefficients.adjoint() * b.coefficients;
    CHECK((gram - CMatrix::Identity(64, 64)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((b.gram() - CMatrix::Identity(64, 64)).cwiseAbs().maxCoeff() <= 1e-10);
    for (const Field& e : b.fields) CHECK(e.values.imag().cwiseAbs().maxCoeff() == 0.0);
    // Lowest frequencies first for equal masses.
    CHECK(b.fields[0].values.real().maxCoeff() == doctest::Approx(std::sqrt(w)).epsilon(1e-14));
  }
}

TEST_CASE("Wiener paths") {
  const int n = 10000;
  const double dt = 0.01;
  const WienerPath p = sample_path(4, dt, n / 4, 42);
  const Eigen::Map<const Eigen::VectorXd> all(p.increments.data(), p.increments.size());
  const double mean = all.mean();
  const double var = (all.array() - mean).square().sum() / (all.size() - 1);
  CHECK(std::abs(mean) <= 4 * std::sqrt(dt / all.size()));
  CHECK(std::abs(var - dt) <= 4 * dt * std::sqrt(2.0 / all.size()));

  const WienerPath again = sample_path(4, dt, n / 4, 42);
  CHECK(again.increments == p.increments);
  const WienerPath wider = sample_path(8, dt, n / 4, 42);
  CHECK(wider.increments.topRows(4) == p.increments);
  CHECK(sample_path(4, dt, n / 4, 42, 1).increments != p.increments);
  CHECK(p.step_at(0.5) == 50);
  CHECK_THROWS_AS(p.step_at(0.505), ArgumentError);
}

TEST_CASE("covariance check") {
  Grid g(1, 64, 8.0);
  const Field bump = Field::sample(g, [](const Point& x) { return std::exp(-x[0] * x[0]); });
  SUBCASE("zero atom") {
    auto mu = SpectralMeasure::atoms({{pt(0), 1.0}});
    const CMBasis b = build_cm_basis(mu, 1, g);
    const auto c = covariance_check(mu, b, 4000, bump, bump, 0.1, 3);
    CHECK(c.target.real() == doctest::Approx(0.1 * kPi).epsilon(1e-10));  // |int exp(-x^2)|^2 dt
    CHECK(c.z_score <= 4);
  }
  SUBCASE("disjoint spectral support") {
    const double k1 = g.dual_spacing(), k2 = 2 * k1;
    auto mu = delta_pair(k1);
    const CMBasis b = build_cm_basis(mu, 2, g);
    const Field phi = Field::sample(g, [&](const Point& x) { return std::cos(k2 * x[0]); });
    const auto c = covariance_check(mu, b, 2000, phi, phi, 0.1, 4);
    CHECK(std::abs(c.target) <= 1e-12);
    CHECK(std::abs(c.empirical) <= 1e-12);
  }
  SUBCASE("windowed cosine against an atom pair") {
    const double k = 2, s = 1.5;
    auto mu = delta_pair(k);
    const CMBasis b = build_cm_basis(mu, 2, g);
    const Field phi = Field::sample(g, [&](const Point& x) { return std::cos(k * x[0]) * std::exp(-x[0] * x[0] / (s * s)); });
    const double hat = std::sqrt(kPi) * s / 2 * (1 + std::exp(-k * k * s * s));
    const auto c = covariance_check(mu, b, 10000, phi, phi, 0.2, 5);
    CHECK(c.target.real() == doctest::Approx(0.2 * hat * hat).epsilon(1e-9));
    CHECK(c.z_score <= 4);
  }
}

TEST_CASE("Hilbert-Schmidt norms") {
  Grid unit(1, 32, 1.0);
  const CMBasis one = build_cm_basis(SpectralMeasure::atoms({{pt(0), 1.0}}), 1, unit);
  CHECK(hs_norm([&](const Field&) { return Field(unit); }, one, {0, 0}) == 0.0);
  CHECK(hs_norm([](const Field& f) { return f; }, one, {0, 0}) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  Grid g(1, 64, 8.0);
  const auto smooth = [](const Field& f) { return bessel_potential(spatial_weight(f, -2), -1); };
  double prev = 0;
  for (int k : {4, 8, 16, 32}) {
    const double v = hs_norm(smooth, build_cm_basis(SpectralMeasure::white_noise(1), k, g), {1, 0});
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("stochastic integrals") {
  Grid g(1, 32, 4.0);
  auto mu = SpectralMeasure::atoms({{pt(0), 1.0}});
  const CMBasis one = build_cm_basis(mu, 1, g);
  const WienerPath path = sample_path(1, 0.01, 100, 9);
  const TimeFieldMap zero = [&](double, const Field&) { return Field(g); };
  CHECK(stochastic_integral(zero, one, path, 0, 1).values.cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("constant integrand, one mode") {
    const TimeFieldMap twice = [](double, const Field& f) { return Field(f.grid, 2.0 * f.values); };
    const double s = 0.2, t = 0.7, norm2 = 4 * 8.0;  // sk_norm(2 * 1)^2 on a box of length 8
    const int paths = 10000;
    std::vector<double> v(paths);
    for (int p = 0; p < paths; ++p) {
      const WienerPath w = sample_path(1, 0.05, 14, 17, p);
      v[p] = stochastic_integral(twice, one, w, s, t).values[0].real();
    }
    double m2 = 0;
    for (double x : v) m2 += x * x;
    const double var = m2 / paths, target = (t - s) * norm2 / 8.0;  // pointwise value: variance (t - s) * 4
    double fourth = 0;
    for (double x : v) fourth += std::pow(x * x - var, 2);
    const double se = std::sqrt(fourth / (paths - 1) / paths);
    CHECK(std::abs(var - target) <= 4 * se);
  }
  SUBCASE("time-dependent integrand: isometry") {
    Grid h(1, 64, 8.0);
    const CMBasis b = build_cm_basis(SpectralMeasure::white_noise(1), 32, h);
    const TimeFieldMap phi = [](double theta, const Field& f) {
      return Field(f.grid, (1 + theta) * bessel_potential(spatial_weight(f, -1), -1).values);
    };
    const auto r = ito_isometry_check(phi, b, {0, 0}, 0, 1, 200, 10000, 21);
    MESSAGE("isometry: mc " << r.mc_mean << " target " << r.target << " discrete " << r.discrete_target << " z "
                            << r.z_score);
    CHECK(r.z_score <= 4);
    CHECK(std::abs(r.discrete_target - r.target) <= 0.01 * r.target);
  }
  SUBCASE("route independence and adaptedness") {
    Grid h(1, 64, 8.0);
    const CMBasis b = build_cm_basis(SpectralMeasure::white_noise(1), 16, h);
    const TimeFieldMap phi = [](double theta, const Field& f) {
      return Field(f.grid, std::cos(theta) * spatial_weight(f, -1).values);
    };
    const WienerPath w = sample_path(16, 0.02, 50, 8);
    const Field direct = stochastic_integral(phi, b, w, 0.1, 0.6);
    Field via_noise(h);
    for (int i = 5; i < 30; ++i) via_noise.values += phi(w.time(i), noise_increment(b, w, i)).values;
    CHECK(relative_l2(direct, via_noise) <= 1e-12);
    WienerPath cut = w;
    cut.increments.rightCols(20).setConstant(1e6);
    CHECK(stochastic_integral(phi, b, cut, 0.1, 0.6).values == direct.values);
    for (int i = 0; i < w.steps; ++i) CHECK(noise_increment(b, w, i).values.imag().cwiseAbs().maxCoeff() <= 1e-12);
  }
}
