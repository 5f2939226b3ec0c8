#include "sgspde/symbol.hpp"

#include <cmath>
#include <mutex>
#include <sstream>

namespace sgspde {

namespace detail {

struct TableCache {
  std::mutex lock;
  bool valid = false;
  Grid grid;
  double t = 0;
  CMatrix table;
};

}  // namespace detail

namespace {

using Fn = Symbol::Fn;

CMatrix pointwise_table(const Fn& f, double t, const Grid& g) {
  const Eigen::Index n = g.size();
  CMatrix out(n, n);
  std::vector<Point> freqs(n);
  for (Eigen::Index k = 0; k < n; ++k) freqs[k] = g.frequency(k);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Point x = g.point(j);
    for (Eigen::Index k = 0; k < n; ++k) out(j, k) = f(t, x, freqs[k]);
  }
  return out;
}

// Base index and cubic Lagrange weights for fractional lattice coordinate s.
void cubic_stencil(double s, int n, int& base, double w[4]) {
  base = static_cast<int>(std::floor(s)) - 1;
  base = std::clamp(base, 0, n - 4);
  const double u = s - base;
  w[0] = -(u - 1) * (u - 2) * (u - 3) / 6;
  w[1] = u * (u - 2) * (u - 3) / 2;
  w[2] = -u * (u - 1) * (u - 3) / 2;
  w[3] = u * (u - 1) * (u - 2) / 6;
}

std::shared_ptr<detail::TableCache> fresh_cache() { return std::make_shared<detail::TableCache>(); }

}  // namespace

template <>
Symbol Symbol::general(Fn f, Order o, std::string name) {
  Symbol s;
  s.eval_ = std::move(f);
  s.order_ = o;
  s.name_ = std::move(name);
  s.kind_ = SymbolKind::General;
  s.cache_ = fresh_cache();
  return s;
}

template <>
Symbol Symbol::multiplier(PartFn f, Order o, std::string name) {
  Symbol s;
  s.eval_ = [f](double t, const Point&, const Point& xi) { return f(t, xi); };
  s.order_ = o;
  s.name_ = std::move(name);
  s.kind_ = SymbolKind::Multiplier;
  s.terms_ = {Term{[](double, const Point&) { return Complex(1); }, f}};
  s.cache_ = fresh_cache();
  return s;
}

template <>
Symbol Symbol::separable(std::vector<Term> terms, Order o, std::string name) {
  Symbol s;
  s.eval_ = [terms](double t, const Point& x, const Point& xi) {
    Complex acc = 0;
    for (const auto& term : terms) acc += term.fx(t, x) * term.fxi(t, xi);
    return acc;
  };
  s.order_ = o;
  s.name_ = std::move(name);
  s.kind_ = SymbolKind::Separable;
  s.terms_ = std::move(terms);
  s.cache_ = fresh_cache();
  return s;
}

template <>
Symbol Symbol::constant(Complex c, std::string name) {
  Symbol s = multiplier([c](double, const Point&) { return c; }, Order{0, 0},
                        name.empty() ? "const" : std::move(name));
  s.zero_ = (c == Complex(0));
  s.bound_ = std::abs(c);
  if (c.imag() == 0) {
    const double v = c.real();
    s.jet_ = [v](double, const Point& x, const Point& xi) {
      Jet j;
      j.value = v;
      j.dx = Point::Zero(x.size());
      j.dxi = Point::Zero(xi.size());
      j.dxx = Jet::Small::Zero(x.size(), x.size());
      j.dxxi = Jet::Small::Zero(x.size(), xi.size());
      j.dxixi = Jet::Small::Zero(xi.size(), xi.size());
      return j;
    };
  }
  return s;
}

template <>
Symbol Symbol::lattice_backed(const Grid& g, LatticeFn fn, Order o, bool autonomous, std::string name) {
  Symbol s;
  s.order_ = o;
  s.name_ = std::move(name);
  s.kind_ = SymbolKind::General;
  s.autonomous_ = autonomous;
  s.lattice_grid_ = g;
  s.cache_ = fresh_cache();
  if (autonomous) {
    auto table = std::make_shared<const CMatrix>(fn(0.0, g));
    s.eval_ = [g, table](double, const Point& x, const Point& xi) { return interpolate_table(g, *table, x, xi); };
    Fn eval = s.eval_;
    s.lattice_ = [g, table, eval](double t, const Grid& target) -> CMatrix {
      if (target == g) return *table;
      return pointwise_table(eval, t, target);
    };
  } else {
    auto memo = fresh_cache();
    auto table_at = [g, fn, memo](double t) {
      std::lock_guard<std::mutex> guard(memo->lock);
      if (!memo->valid || memo->t != t) {
        memo->table = fn(t, g);
        memo->t = t;
        memo->valid = true;
      }
      return memo->table;
    };
    s.eval_ = [g, table_at](double t, const Point& x, const Point& xi) {
      return interpolate_table(g, table_at(t), x, xi);
    };
    Fn eval = s.eval_;
    s.lattice_ = [g, table_at, eval](double t, const Grid& target) -> CMatrix {
      if (target == g) return table_at(t);
      return pointwise_table(eval, t, target);
    };
  }
  return s;
}

template <>
Symbol Symbol::from_table(const Grid& g, CMatrix table, Order o, std::string name) {
  if (table.rows() != g.size() || table.cols() != g.size()) throw ShapeError("from_table: table shape mismatch");
  auto shared = std::make_shared<const CMatrix>(std::move(table));
  return lattice_backed(
      g, [shared](double, const Grid&) { return *shared; }, o, true, std::move(name));
}

template <>
void Symbol::reset_cache() {
  cache_ = fresh_cache();
}

CMatrix tabulate(const Symbol& a, double t, const Grid& g) {
  const Eigen::Index n = g.size();
  if (a.is_zero()) return CMatrix::Zero(n, n);
  auto& cache = a.cache();
  if (cache) {
    std::lock_guard<std::mutex> guard(cache->lock);
    if (cache->valid && cache->grid == g && (a.autonomous() || cache->t == t)) return cache->table;
  }
  CMatrix out;
  if (a.has_lattice()) {
    out = a.lattice_fn()(t, g);
  } else if (a.kind() == SymbolKind::Multiplier || a.kind() == SymbolKind::Separable) {
    out = CMatrix::Zero(n, n);
    CVector fx(n), fxi(n);
    for (const auto& term : a.terms()) {
      for (Eigen::Index j = 0; j < n; ++j) fx[j] = term.fx(t, g.point(j));
      for (Eigen::Index k = 0; k < n; ++k) fxi[k] = term.fxi(t, g.frequency(k));
      out.noalias() += fx * fxi.transpose();
    }
  } else {
    out = pointwise_table([&a](double tt, const Point& x, const Point& xi) { return a(tt, x, xi); }, t, g);
  }
  if (!out.allFinite()) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k)
        if (!std::isfinite(out(j, k).real()) || !std::isfinite(out(j, k).imag())) {
          std::ostringstream msg;
          msg << "symbol '" << a.name() << "' is not finite at x=(" << g.point(j).transpose() << "), xi=("
              << g.frequency(k).transpose() << "), t=" << t;
          throw EvaluationError(msg.str());
        }
  }
  if (cache) {
    std::lock_guard<std::mutex> guard(cache->lock);
    cache->grid = g;
    cache->t = t;
    cache->table = out;
    cache->valid = true;
  }
  return out;
}

Complex interpolate_table(const Grid& g, const CMatrix& table, const Point& x, const Point& xi) {
  const int d = g.dims();
  const int n = g.n();
  int bx[2] = {0, 0}, bk[2] = {0, 0};
  double wx[2][4], wk[2][4];
  for (int a = 0; a < d; ++a) {
    cubic_stencil((x[a] + g.halfwidth()) / g.spacing(), n, bx[a], wx[a]);
    cubic_stencil(xi[a] / g.dual_spacing() + n / 2, n, bk[a], wk[a]);
  }
  Complex acc = 0;
  if (d == 1) {
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) acc += wx[0][p] * wk[0][q] * table(bx[0] + p, bk[0] + q);
    return acc;
  }
  for (int p0 = 0; p0 < 4; ++p0)
    for (int p1 = 0; p1 < 4; ++p1) {
      const Eigen::Index row = g.flat_index(bx[0] + p0, bx[1] + p1);
      const double wrow = wx[0][p0] * wx[1][p1];
      for (int q0 = 0; q0 < 4; ++q0)
        for (int q1 = 0; q1 < 4; ++q1)
          acc += wrow * wk[0][q0] * wk[1][q1] * table(row, g.flat_index(bk[0] + q0, bk[1] + q1));
    }
  return acc;
}

namespace {

enum class BinOp { Add, Sub, Mul, Div };

Complex apply_op(BinOp op, Complex a, Complex b) {
  switch (op) {
    case BinOp::Add:
      return a + b;
    case BinOp::Sub:
      return a - b;
    case BinOp::Mul:
      return a * b;
    case BinOp::Div:
      return a / b;
  }
  return 0;
}

Jet combine_jets(BinOp op, const Jet& a, const Jet& b) {
  Jet j;
  const double sgn = op == BinOp::Sub ? -1.0 : 1.0;
  j.value = a.value + sgn * b.value;
  j.dx = a.dx + sgn * b.dx;
  j.dxi = a.dxi + sgn * b.dxi;
  j.dxx = a.dxx + sgn * b.dxx;
  j.dxxi = a.dxxi + sgn * b.dxxi;
  j.dxixi = a.dxixi + sgn * b.dxixi;
  return j;
}

Symbol combine(const Symbol& a, const Symbol& b, BinOp op, Order order) {
  Symbol out = Symbol::general(
      [a, b, op](double t, const Point& x, const Point& xi) { return apply_op(op, a(t, x, xi), b(t, x, xi)); }, order);
  const bool sep_a = a.kind() != SymbolKind::General && !a.has_lattice();
  const bool sep_b = b.kind() != SymbolKind::General && !b.has_lattice();
  if (a.kind() == SymbolKind::Multiplier && b.kind() == SymbolKind::Multiplier && sep_a && sep_b) {
    auto fa = a.terms()[0].fxi, fb = b.terms()[0].fxi;
    out = Symbol::multiplier([fa, fb, op](double t, const Point& xi) { return apply_op(op, fa(t, xi), fb(t, xi)); },
                             order);
  } else if (sep_a && sep_b && op != BinOp::Div) {
    std::vector<Symbol::Term> terms;
    if (op == BinOp::Mul) {
      for (const auto& ta : a.terms())
        for (const auto& tb : b.terms())
          terms.push_back({[fa = ta.fx, fb = tb.fx](double t, const Point& x) { return fa(t, x) * fb(t, x); },
                           [ga = ta.fxi, gb = tb.fxi](double t, const Point& xi) { return ga(t, xi) * gb(t, xi); }});
    } else {
      terms = a.terms();
      for (const auto& tb : b.terms()) {
        if (op == BinOp::Sub)
          terms.push_back({[f = tb.fx](double t, const Point& x) { return -f(t, x); }, tb.fxi});
        else
          terms.push_back(tb);
      }
    }
    out = Symbol::separable(std::move(terms), order);
  }
  if (a.has_lattice() || b.has_lattice()) {
    const Grid lg = a.has_lattice() ? a.lattice_grid() : b.lattice_grid();
    out.set_lattice(lg, [a, b, op](double t, const Grid& g) -> CMatrix {
      const CMatrix ta = tabulate(a, t, g);
      const CMatrix tb = tabulate(b, t, g);
      return ta.binaryExpr(tb, [op](Complex p, Complex q) { return apply_op(op, p, q); });
    });
  }
  if ((op == BinOp::Add || op == BinOp::Sub) && a.has_jet() && b.has_jet()) {
    out.with_jet([a, b, op](double t, const Point& x, const Point& xi) {
      return combine_jets(op, a.jet_fn()(t, x, xi), b.jet_fn()(t, x, xi));
    });
  }
  out.with_autonomous(a.autonomous() && b.autonomous());
  std::string sym = op == BinOp::Add ? " + " : op == BinOp::Sub ? " - " : op == BinOp::Mul ? " * " : " / ";
  out.with_name("(" + a.name() + sym + b.name() + ")");
  return out;
}

Order max_order(const Order& a, const Order& b) { return {std::max(a.m, b.m), std::max(a.mu, b.mu)}; }

}  // namespace

Symbol operator+(const Symbol& a, const Symbol& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return combine(a, b, BinOp::Add, max_order(a.order(), b.order()));
}

Symbol operator-(const Symbol& a, const Symbol& b) {
  if (b.is_zero()) return a;
  return combine(a, b, BinOp::Sub, max_order(a.order(), b.order()));
}

Symbol operator*(const Symbol& a, const Symbol& b) {
  if (a.is_zero() || b.is_zero()) return Symbol::zero();
  return combine(a, b, BinOp::Mul, a.order() + b.order());
}

Symbol operator*(Complex c, const Symbol& a) {
  if (c == Complex(0) || a.is_zero()) return Symbol::zero();
  Symbol out = combine(Symbol::constant(c), a, BinOp::Mul, a.order());
  if (c.imag() == 0 && a.has_jet()) {
    const double r = c.real();
    out.with_jet([a, r](double t, const Point& x, const Point& xi) {
      Jet j = a.jet_fn()(t, x, xi);
      j.value *= r;
      j.dx *= r;
      j.dxi *= r;
      j.dxx *= r;
      j.dxxi *= r;
      j.dxixi *= r;
      return j;
    });
  }
  return out;
}

Symbol operator-(const Symbol& a) { return Complex(-1) * a; }

Symbol divide(const Symbol& a, const Symbol& b) {
  if (a.is_zero()) return Symbol::zero();
  return combine(a, b, BinOp::Div, a.order() - b.order());
}

Symbol time_derivative_d(const Symbol& a, double dt) {
  if (a.autonomous() || a.is_zero()) return Symbol::zero();
  const Complex mi(0, -1);
  Symbol out = Symbol::general(
      [a, dt, mi](double t, const Point& x, const Point& xi) {
        return mi * (a(t + dt, x, xi) - a(t - dt, x, xi)) / (2 * dt);
      },
      a.order(), "D_t " + a.name());
  if (a.has_lattice()) {
    out.set_lattice(a.lattice_grid(), [a, dt, mi](double t, const Grid& g) -> CMatrix {
      return (tabulate(a, t + dt, g) - tabulate(a, t - dt, g)) * (mi / (2 * dt));
    });
  }
  out.with_autonomous(false);
  return out;
}

Jet jet(const Symbol& a, double t, const Point& x, const Point& xi) {
  if (a.has_jet()) return a.jet_fn()(t, x, xi);
  const int d = static_cast<int>(x.size());
  // Stacked phase-space coordinate z = (x, xi).
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> z(2 * d), hs(2 * d);
  z << x, xi;
  for (int i = 0; i < 2 * d; ++i) hs[i] = 1e-3 * std::sqrt(1 + z[i] * z[i]);
  auto f = [&](const auto& zz) { return a(t, zz.head(d), zz.tail(d)).real(); };
  const double f0 = f(z);
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 4, 1> grad(2 * d);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4> hess(2 * d, 2 * d);
  for (int i = 0; i < 2 * d; ++i) {
    auto zi = z;
    const double h = hs[i];
    zi[i] = z[i] + h;
    const double p1 = f(zi);
    zi[i] = z[i] - h;
    const double m1 = f(zi);
    zi[i] = z[i] + 2 * h;
    const double p2 = f(zi);
    zi[i] = z[i] - 2 * h;
    const double m2 = f(zi);
    grad[i] = (m2 - 8 * m1 + 8 * p1 - p2) / (12 * h);
    hess(i, i) = (-p2 + 16 * p1 - 30 * f0 + 16 * m1 - m2) / (12 * h * h);
    for (int k = 0; k < i; ++k) {
      auto zz = z;
      const double hk = hs[k];
      double acc = 0;
      for (int si = -1; si <= 1; si += 2)
        for (int sk = -1; sk <= 1; sk += 2) {
          zz[i] = z[i] + si * h;
          zz[k] = z[k] + sk * hk;
          acc += si * sk * f(zz);
        }
      hess(i, k) = hess(k, i) = acc / (4 * h * hk);
    }
  }
  Jet j;
  j.value = f0;
  j.dx = grad.head(d);
  j.dxi = grad.tail(d);
  j.dxx = hess.topLeftCorner(d, d);
  j.dxxi = hess.topRightCorner(d, d);
  j.dxixi = hess.bottomRightCorner(d, d);
  return j;
}

Symbol bracket_x_symbol() {
  return Symbol::separable({{[](double, const Point& x) { return Complex(bracket(x)); },
                             [](double, const Point&) { return Complex(1); }}},
                           Order{1, 0}, "<x>")
      .with_bound(1.0);
}

Symbol bracket_xi_symbol() {
  Symbol s = Symbol::multiplier([](double, const Point& xi) { return Complex(bracket(xi)); }, Order{0, 1}, "<xi>");
  s.with_bound(1.0).with_jet([](double, const Point& x, const Point& xi) {
    const int d = static_cast<int>(xi.size());
    const double b = bracket(xi);
    Jet j;
    j.value = b;
    j.dx = Point::Zero(d);
    j.dxi = xi / b;
    j.dxx = Jet::Small::Zero(d, d);
    j.dxxi = Jet::Small::Zero(d, d);
    j.dxixi = (Jet::Small::Identity(d, d) / b - xi * xi.transpose() / (b * b * b));
    (void)x;
    return j;
  });
  return s;
}

Symbol sg_wave_root(double sign) {
  Symbol s = Symbol::separable({{[sign](double, const Point& x) { return Complex(sign * bracket(x)); },
                                 [](double, const Point& xi) { return Complex(bracket(xi)); }}},
                               Order{1, 1}, sign > 0 ? "<x><xi>" : "-<x><xi>");
  s.with_bound(1.0).with_jet([sign](double, const Point& x, const Point& xi) {
    const int d = static_cast<int>(x.size());
    const double bx = bracket(x), bk = bracket(xi);
    const auto id = Jet::Small::Identity(d, d);
    Jet j;
    j.value = sign * bx * bk;
    j.dx = sign * bk * x / bx;
    j.dxi = sign * bx * xi / bk;
    j.dxx = sign * bk * (id / bx - x * x.transpose() / (bx * bx * bx));
    j.dxixi = sign * bx * (id / bk - xi * xi.transpose() / (bk * bk * bk));
    j.dxxi = sign * (x / bx) * (xi / bk).transpose();
    return j;
  });
  return s;
}

Symbol transport_symbol(const Point& speed) {
  Symbol s = Symbol::multiplier([speed](double, const Point& xi) { return Complex(speed.dot(xi)); }, Order{0, 1},
                                "c.xi");
  s.with_bound(speed.norm()).with_jet([speed](double, const Point& x, const Point& xi) {
    const int d = static_cast<int>(xi.size());
    Jet j;
    j.value = speed.dot(xi);
    j.dx = Point::Zero(d);
    j.dxi = speed;
    j.dxx = Jet::Small::Zero(d, d);
    j.dxxi = Jet::Small::Zero(d, d);
    j.dxixi = Jet::Small::Zero(d, d);
    (void)x;
    return j;
  });
  return s;
}

}  // namespace sgspde
