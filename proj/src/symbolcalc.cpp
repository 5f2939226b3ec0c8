#include "sgspde/symbolcalc.hpp"

#include <random>

namespace sgspde {

const CMatrix& plane_wave_matrix(const Grid& g) {
  thread_local Grid cached_grid;
  thread_local CMatrix cached;
  if (cached.size() == 0 || cached_grid != g) {
    const Eigen::Index n = g.size();
    cached.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Point x = g.point(j);
      for (Eigen::Index k = 0; k < n; ++k) cached(j, k) = std::polar(1.0, x.dot(g.frequency(k)));
    }
    cached_grid = g;
  }
  return cached;
}

namespace {

double quadrature_factor(const Grid& g) { return std::pow(g.dual_spacing() / (2 * std::numbers::pi), g.dims()); }

}  // namespace

Field apply_table(const CMatrix& table, const Field& u) {
  const Grid& g = u.grid;
  if (table.rows() != g.size() || table.cols() != g.size()) throw ShapeError("apply_table: table shape mismatch");
  const CVector uhat = forward_transform(u);
  const CMatrix& e = plane_wave_matrix(g);
  CVector out = e.cwiseProduct(table) * uhat;
  out *= quadrature_factor(g);
  return Field(g, std::move(out));
}

Field apply_psido(const Symbol& a, double t, const Field& u) {
  if (!u.all_finite()) throw EvaluationError("apply_psido: input field has non-finite values");
  const Grid& g = u.grid;
  if (a.is_zero()) return Field(g);
  if (a.has_lattice() || a.kind() == SymbolKind::General) return apply_table(tabulate(a, t, g), u);

  const CVector uhat = forward_transform(u);
  const Eigen::Index n = g.size();
  CVector out = CVector::Zero(n);
  for (const auto& term : a.terms()) {
    CVector spec(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const Point xi = g.frequency(k);
      const Complex s = term.fxi(t, xi);
      if (!std::isfinite(s.real()) || !std::isfinite(s.imag()))
        throw EvaluationError("symbol '" + a.name() + "' is not finite at xi=" + std::to_string(xi[0]));
      spec[k] = s * uhat[k];
    }
    Field v = inverse_transform(g, spec);
    if (a.kind() == SymbolKind::Multiplier) {
      out += v.values;
      continue;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      const Complex f = term.fx(t, g.point(j));
      if (!std::isfinite(f.real()) || !std::isfinite(f.imag()))
        throw EvaluationError("symbol '" + a.name() + "' is not finite at x=" + std::to_string(g.point(j)[0]));
      out[j] += f * v.values[j];
    }
  }
  return Field(g, std::move(out));
}

CMatrix op_matrix_from_table(const Grid& g, const CMatrix& table) {
  const CMatrix& e = plane_wave_matrix(g);
  CMatrix m = e.cwiseProduct(table) * e.adjoint();
  m /= static_cast<double>(g.size());
  return m;
}

CMatrix op_matrix(const Symbol& a, double t, const Grid& g) { return op_matrix_from_table(g, tabulate(a, t, g)); }

CMatrix lattice_symbol(const Grid& g, const CMatrix& op) {
  const CMatrix& e = plane_wave_matrix(g);
  return e.conjugate().cwiseProduct(op * e);
}

Field bessel_potential(const Field& u, double s) {
  if (s == 0) return u;
  const Grid& g = u.grid;
  CVector uhat = forward_transform(u);
  for (Eigen::Index k = 0; k < g.size(); ++k) uhat[k] *= std::pow(bracket(g.frequency(k)), s);
  return inverse_transform(g, uhat);
}

Field spatial_weight(const Field& u, double s) {
  if (s == 0) return u;
  Field out = u;
  for (Eigen::Index j = 0; j < u.grid.size(); ++j) out.values[j] *= std::pow(bracket(u.grid.point(j)), s);
  return out;
}

double sk_norm(const Field& u, SobolevKatoIndex idx) {
  if (!u.all_finite()) throw EvaluationError("sk_norm: input field has non-finite values");
  return l2_norm(spatial_weight(bessel_potential(u, idx.zeta), idx.z));
}

CMatrix table_difference(const Grid& g, const CMatrix& table, int p) {
  const int d = g.dims();
  const int n = g.n();
  const bool along_x = p < d;
  const int axis = along_x ? p : p - d;
  const double step = along_x ? g.spacing() : g.dual_spacing();
  const Eigen::Index stride = (d == 2 && axis == 0) ? n : 1;
  const Eigen::Index len = g.size();
  CMatrix out(table.rows(), table.cols());
  for (Eigen::Index i = 0; i < len; ++i) {
    const int c = g.axis_index(i, axis);
    Eigen::Index lo = i, hi = i;
    double width = 0;
    if (c > 0) {
      lo = i - stride;
      width += step;
    }
    if (c < n - 1) {
      hi = i + stride;
      width += step;
    }
    if (along_x)
      out.row(i) = (table.row(hi) - table.row(lo)) / width;
    else
      out.col(i) = (table.col(hi) - table.col(lo)) / width;
  }
  return out;
}

double interior_sup(const Grid& g, const CMatrix& table, Order order, double fraction) {
  const double xmax = fraction * g.halfwidth() + 1e-12, kmax = fraction * g.max_frequency() + 1e-12;
  double best = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const Point x = g.point(j);
    if (x.cwiseAbs().maxCoeff() > xmax) continue;
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      const Point xi = g.frequency(k);
      if (xi.cwiseAbs().maxCoeff() > kmax) continue;
      best = std::max(best, std::abs(table(j, k)) * std::pow(bracket(x), -order.m) * std::pow(bracket(xi), -order.mu));
    }
  }
  return best;
}

double table_seminorm(const Grid& g, const CMatrix& table, Order order, int ell) {
  if (ell < 0 || ell > 2) throw ShapeError("seminorm order must be 0, 1 or 2");
  const int d = g.dims();
  const Eigen::Index n = g.size();
  Eigen::VectorXd bx(n), bk(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    bx[j] = bracket(g.point(j));
    bk[j] = bracket(g.frequency(j));
  }
  auto weighted_sup = [&](const CMatrix& t, int nx, int nxi) {
    const Eigen::VectorXd wx = bx.array().pow(nx - order.m);
    const Eigen::VectorXd wk = bk.array().pow(nxi - order.mu);
    return ((t.cwiseAbs().array().colwise() * wx.array()).rowwise() * wk.transpose().array()).maxCoeff();
  };
  double best = weighted_sup(table, 0, 0);
  if (ell == 0) return best;
  std::vector<CMatrix> first(2 * d);
  for (int p = 0; p < 2 * d; ++p) {
    first[p] = table_difference(g, table, p);
    best = std::max(best, weighted_sup(first[p], p < d ? 1 : 0, p < d ? 0 : 1));
  }
  if (ell == 1) return best;
  for (int p = 0; p < 2 * d; ++p)
    for (int q = p; q < 2 * d; ++q) {
      const int nx = (p < d) + (q < d);
      best = std::max(best, weighted_sup(table_difference(g, first[p], q), nx, 2 - nx));
    }
  return best;
}

double estimate_seminorm(const Symbol& a, double t, Order order, int ell, const Grid& g) {
  return table_seminorm(g, tabulate(a, t, g), order, ell);
}

Symbol compose_leading(const Symbol& a, const Symbol& b, const Grid& g) {
  if (a.kind() == SymbolKind::Multiplier && b.kind() == SymbolKind::Multiplier && !a.has_lattice() &&
      !b.has_lattice())
    return a * b;
  const int d = g.dims();
  const double hx = g.spacing();
  const double hk = g.dual_spacing();
  const Order order = a.order() + b.order();
  Symbol c = Symbol::general(
      [a, b, d, hx, hk](double t, const Point& x, const Point& xi) {
        Complex acc = a(t, x, xi) * b(t, x, xi);
        for (int j = 0; j < d; ++j) {
          Point xp = x, xm = x, kp = xi, km = xi;
          xp[j] += hx;
          xm[j] -= hx;
          kp[j] += hk;
          km[j] -= hk;
          const Complex da = (a(t, x, kp) - a(t, x, km)) / (2 * hk);
          const Complex db = (b(t, xp, xi) - b(t, xm, xi)) / (2 * hx);
          acc += Complex(0, -1) * da * db;
        }
        return acc;
      },
      order, "(" + a.name() + " # " + b.name() + ")");
  if (a.has_lattice() || b.has_lattice()) {
    c.set_lattice(a.has_lattice() ? a.lattice_grid() : b.lattice_grid(), [a, b](double t, const Grid& gg) -> CMatrix {
      const CMatrix ta = tabulate(a, t, gg);
      const CMatrix tb = tabulate(b, t, gg);
      CMatrix out = ta.cwiseProduct(tb);
      for (int j = 0; j < gg.dims(); ++j)
        out += Complex(0, -1) *
               table_difference(gg, ta, gg.dims() + j).cwiseProduct(table_difference(gg, tb, j));
      return out;
    });
  }
  c.with_autonomous(a.autonomous() && b.autonomous());
  return c;
}

Field random_bandlimited_field(const Grid& g, std::uint64_t seed, double band, bool real_valued) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double cutoff = band * g.max_frequency();
  CVector spec = CVector::Zero(g.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    const double a = normal(rng), b = normal(rng);
    if (g.frequency(k).norm() <= cutoff) spec[k] = Complex(a, b);
  }
  Field u = inverse_transform(g, spec);
  const double width = g.halfwidth() / 3;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    if (real_valued) u.values[j] = u.values[j].real();
    u.values[j] *= std::exp(-g.point(j).squaredNorm() / (2 * width * width));
  }
  const double norm = l2_norm(u);
  if (norm > 0) u.values /= norm;
  return u;
}

double continuity_ratio(const Symbol& a, double t, SobolevKatoIndex idx, const Field& u) {
  const double den = sk_norm(u, idx);
  if (den == 0) return 0;
  const Field v = apply_psido(a, t, u);
  return sk_norm(v, {idx.z - a.order().m, idx.zeta - a.order().mu}) / den;
}

ContinuityProbe calibrate_continuity(const Symbol& a, double t, SobolevKatoIndex idx, const Grid& g, int trials,
                                     std::uint64_t seed, double safety) {
  ContinuityProbe probe;
  for (int i = 0; i < trials; ++i)
    probe.calibrated = std::max(probe.calibrated, continuity_ratio(a, t, idx, random_bandlimited_field(g, seed + i)));
  probe.bound = safety * probe.calibrated;
  return probe;
}

double verify_continuity(const Symbol& a, double t, SobolevKatoIndex idx, const Grid& g, const ContinuityProbe& probe,
                         int trials, std::uint64_t seed) {
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    const double r = continuity_ratio(a, t, idx, random_bandlimited_field(g, seed + i));
    worst = std::max(worst, r);
    if (r > probe.bound)
      throw ContractViolation("continuity probe exceeded for '" + a.name() + "' on field " + std::to_string(i), r,
                              probe.bound);
  }
  return worst;
}

SymbolCheck check_symbol(const Symbol& a, double t, const Grid& g) {
  SymbolCheck out;
  const CMatrix table = tabulate(a, t, g);
  out.seminorm0 = table_seminorm(g, table, a.order(), 0);
  out.seminorm1 = table_seminorm(g, table, a.order(), 1);
  out.finite = std::isfinite(out.seminorm0) && std::isfinite(out.seminorm1);
  if (a.bound()) out.within_bound = out.seminorm0 <= *a.bound() * (1 + 1e-12);
  return out;
}

}  // namespace sgspde
