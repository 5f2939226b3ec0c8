#include "sgspde/hypreduce.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace sgspde {

namespace {

constexpr double kCoincide = 1e-10;   // roots closer than this times <x><xi> are the same root
constexpr double kImagTol = 1e-8;
constexpr double kBracketMax = 1e3;

double weight(const Grid& g, Eigen::Index j, Eigen::Index k) { return bracket(g.point(j)) * bracket(g.frequency(k)); }

std::vector<double> default_times(const std::vector<double>& times) {
  return times.empty() ? std::vector<double>{0.0} : times;
}

std::vector<CMatrix> root_tables(const HyperbolicOperator& op, double t, const Grid& g) {
  std::vector<CMatrix> out;
  if (op.roots.empty()) {
    for (const RMatrix& r : principal_roots(op, t, g)) out.push_back(r.cast<Complex>());
    return out;
  }
  if (static_cast<int>(op.roots.size()) != op.m) throw ShapeError("operator needs m roots");
  for (const Symbol& r : op.roots) {
    CMatrix tab = tabulate(r, t, g);
    for (Eigen::Index j = 0; j < tab.rows(); ++j)
      for (Eigen::Index k = 0; k < tab.cols(); ++k)
        if (std::abs(tab(j, k).imag()) > kImagTol * weight(g, j, k))
          throw NotHyperbolicError("root " + r.name() + " is not real at x=" + std::to_string(g.point(j)[0]) +
                                   " xi=" + std::to_string(g.frequency(k)[0]) + " t=" + std::to_string(t));
    out.push_back(tab);
  }
  return out;
}

// Roots as symbols; numerical roots are wrapped as lattice tables.
std::vector<Symbol> root_symbols(const HyperbolicOperator& op, const Grid& g) {
  if (!op.roots.empty()) return op.roots;
  std::vector<Symbol> out;
  const auto tabs = principal_roots(op, 0, g);
  for (std::size_t j = 0; j < tabs.size(); ++j)
    out.push_back(Symbol::from_table(g, tabs[j].cast<Complex>(), {1, 1}, "root" + std::to_string(j + 1)));
  return out;
}

void validate(const HyperbolicOperator& op) {
  if (op.m < 1) throw ArgumentError("operator order m must be at least 1");
  if (static_cast<int>(op.coefficients.size()) != op.m) throw ShapeError("operator needs m coefficients");
  if (!op.principal.empty() && static_cast<int>(op.principal.size()) != op.m)
    throw ShapeError("operator needs m principal parts");
}

std::vector<std::vector<int>> group_roots(const std::vector<std::vector<bool>>& same) {
  const int m = static_cast<int>(same.size());
  std::vector<int> owner(m, -1);
  std::vector<std::vector<int>> groups;
  for (int j = 0; j < m; ++j) {
    if (owner[j] >= 0) continue;
    owner[j] = static_cast<int>(groups.size());
    groups.push_back({j});
    for (int k = j + 1; k < m; ++k)
      if (owner[k] < 0 && same[j][k]) {
        owner[k] = owner[j];
        groups.back().push_back(k);
      }
  }
  return groups;
}

double time_derivative(const Symbol& a, double t, const Point& x, const Point& xi) {
  const double h = 1e-5;
  return (a(t + h, x, xi).real() - a(t - h, x, xi).real()) / (2 * h);
}

double bracket_ratio(const HyperbolicOperator& op, const std::vector<Symbol>& roots, const Grid& g,
                     const std::vector<double>& times, const std::vector<std::vector<int>>& groups) {
  double worst = 0;
  for (std::size_t ga = 0; ga < groups.size(); ++ga)
    for (std::size_t gb = ga + 1; gb < groups.size(); ++gb) {
      const Symbol& a = roots[groups[ga][0]];
      const Symbol& b = roots[groups[gb][0]];
      for (double t : times)
        for (Eigen::Index j = 0; j < g.size(); ++j)
          for (Eigen::Index k = 0; k < g.size(); ++k) {
            const Point x = g.point(j), xi = g.frequency(k);
            const Jet ja = jet(a, t, x, xi), jb = jet(b, t, x, xi);
            const double poisson = time_derivative(a, t, x, xi) - time_derivative(b, t, x, xi) + ja.dxi.dot(jb.dx) -
                                   ja.dx.dot(jb.dxi);
            const double gap = std::abs(ja.value - jb.value);
            worst = std::max(worst, std::abs(poisson) / (gap + 1e-8 * weight(g, j, k)));
          }
    }
  (void)op;
  return worst;
}

// ---- D_t polynomials with dense lattice operator coefficients, index k is the D_t^k coefficient.

using OpPoly = std::vector<CMatrix>;

OpPoly compose_factor(const CMatrix& q, const OpPoly& p) {
  const Eigen::Index n = q.rows();
  OpPoly out(p.size() + 1, CMatrix::Zero(n, n));
  for (std::size_t k = 0; k < p.size(); ++k) {
    out[k + 1] += p[k];
    out[k] -= q * p[k];
  }
  return out;
}

// Left coefficients c_i with r = sum_i c_i basis[i]; basis[i] is monic of degree i.
std::vector<CMatrix> expand_in_basis(OpPoly r, const std::vector<OpPoly>& basis) {
  const Eigen::Index n = basis[0][0].rows();
  std::vector<CMatrix> c(basis.size(), CMatrix::Zero(n, n));
  r.resize(basis.size(), CMatrix::Zero(n, n));
  for (int deg = static_cast<int>(basis.size()) - 1; deg >= 0; --deg) {
    c[deg] = r[deg];
    for (int k = 0; k <= deg; ++k) r[k] -= c[deg] * basis[deg][k];
  }
  return c;
}

// ---- pointwise symbol polynomials in tau, index k is the tau^k coefficient table.

using TablePoly = std::vector<CMatrix>;

// Two-term composition (tau - theta) # f for autonomous coefficients.
TablePoly compose_root(const Grid& g, const CMatrix& theta, const TablePoly& f) {
  const int d = g.dims();
  const Eigen::Index n = theta.rows();
  TablePoly out(f.size() + 1, CMatrix::Zero(n, n));
  std::vector<CMatrix> dtheta;
  for (int a = 0; a < d; ++a) dtheta.push_back(table_difference(g, theta, d + a));
  for (std::size_t k = 0; k < f.size(); ++k) {
    out[k + 1] += f[k];
    out[k] -= theta.cwiseProduct(f[k]);
    for (int a = 0; a < d; ++a) out[k] += Complex(0, 1) * dtheta[a].cwiseProduct(table_difference(g, f[k], a));
  }
  return out;
}

struct BlockAlgebra {
  std::vector<CMatrix> factors;       // Q per row
  std::vector<OpPoly> w_polys;        // W_(i+1) = w_polys[i] u
  std::vector<CMatrix> last_row;      // M_i, D_t W_m = Q W_m - sum M_i W_i + g
  std::vector<std::vector<CMatrix>> dt_powers;  // D_t^k = sum_i dt_powers[k][i] w_polys[i]
};

BlockAlgebra factor_block(const HyperbolicOperator& op, const Grid& g, const std::vector<CMatrix>& theta,
                          const std::vector<int>& order, bool strict) {
  const int m = op.m;
  const Eigen::Index n = g.size();
  std::vector<CMatrix> coeff_ops;
  for (int j = 0; j < m; ++j) coeff_ops.push_back(op_matrix(op.coefficients[j], 0, g));

  BlockAlgebra alg;
  if (strict) {
    TablePoly f{CMatrix::Ones(n, n)};
    for (int i = 0; i < m; ++i) f = compose_root(g, theta[order[i]], f);
    TablePoly rem(m + 1, CMatrix::Zero(n, n));
    rem[m].setOnes();
    for (int j = 1; j <= m; ++j) rem[m - j] = -tabulate(op.coefficients[j - 1], 0, g);
    for (int k = 0; k <= m; ++k) rem[k] -= f[k];
    for (int i = 0; i < m; ++i) {
      const CMatrix& th = theta[order[i]];
      CMatrix value = CMatrix::Zero(n, n);
      for (int k = m; k >= 0; --k) value = value.cwiseProduct(th) + rem[k];
      CMatrix denom = CMatrix::Ones(n, n);
      for (int k = 0; k < m; ++k)
        if (k != i) denom = denom.cwiseProduct(th - theta[order[k]]);
      alg.factors.push_back(op_matrix_from_table(g, th - value.cwiseQuotient(denom)));
    }
    if (m == 2) alg.factors[1] = coeff_ops[0] - alg.factors[0];
  } else {
    const CMatrix q = op_matrix_from_table(g, theta[order[0]]);
    alg.factors.assign(m, q);
  }

  alg.w_polys.push_back({CMatrix::Identity(n, n)});
  for (int i = 1; i < m; ++i) alg.w_polys.push_back(compose_factor(alg.factors[i - 1], alg.w_polys.back()));
  OpPoly product = compose_factor(alg.factors[m - 1], alg.w_polys.back());

  OpPoly rem(m, CMatrix::Zero(n, n));
  for (int k = 0; k < m; ++k) rem[k] = -coeff_ops[m - 1 - k] - product[k];
  alg.last_row = expand_in_basis(rem, alg.w_polys);

  for (int k = 0; k < m; ++k) {
    OpPoly mono(k + 1, CMatrix::Zero(n, n));
    mono[k].setIdentity();
    alg.dt_powers.push_back(expand_in_basis(mono, alg.w_polys));
  }
  return alg;
}

struct Plan {
  Classification cls;
  std::vector<Symbol> roots;     // one per distinct root
  std::vector<int> multiplicity;
  bool strict = false;
};

Plan plan_reduction(const HyperbolicOperator& op, const Grid& g, double tol) {
  Plan plan;
  plan.cls = classify_roots(op, g, {0.0}, tol);
  if (op.m == 1) {
    plan.strict = true;
  } else {
    if (!op.autonomous())
      throw UnsupportedError("reduction of time-dependent operators is implemented for m = 1 only");
    if (op.m > 3) throw UnsupportedError("reduction is implemented for m <= 3");
    const RootClass k = plan.cls.kind;
    if (k != RootClass::Strict && k != RootClass::ConstantMultiplicities)
      throw UnsupportedError("reduction needs strict or constant-multiplicity roots, got " + plan.cls.describe());
    if (k == RootClass::ConstantMultiplicities && plan.cls.groups.size() > 1)
      throw UnsupportedError("constant multiplicities with several distinct roots are classified but not reduced");
    plan.strict = k == RootClass::Strict;
  }
  const std::vector<Symbol> all = root_symbols(op, g);
  for (const auto& grp : plan.cls.groups) {
    plan.roots.push_back(all[grp[0]]);
    plan.multiplicity.push_back(static_cast<int>(grp.size()));
  }
  return plan;
}

std::vector<std::vector<int>> block_orders(int m, int n) {
  std::vector<std::vector<int>> out;
  if (n == 1) return {std::vector<int>(m, 0)};
  for (int p = 0; p < n; ++p) {
    std::vector<int> ord;
    for (int i = 0; i < n; ++i) ord.push_back((p + i) % n);
    out.push_back(ord);
  }
  return out;
}

std::vector<CMatrix> levi_tables(const HyperbolicOperator& op, const Grid& g) {
  Plan plan = plan_reduction(op, g, 1e-3);
  std::vector<CMatrix> out;
  if (op.m == 1) return out;
  std::vector<CMatrix> theta;
  for (const Symbol& r : plan.roots) theta.push_back(tabulate(r, 0, g));
  for (const auto& ord : block_orders(op.m, static_cast<int>(plan.roots.size()))) {
    BlockAlgebra alg = factor_block(op, g, theta, ord, plan.strict);
    for (int i = 0; i < op.m; ++i) {
      out.push_back(lattice_symbol(g, alg.factors[i]) - theta[ord[i]]);
      out.push_back(lattice_symbol(g, alg.last_row[i]));
    }
  }
  return out;
}

Grid refined(const Grid& g) { return Grid(g.dims(), 4 * g.n(), 2 * g.halfwidth()); }

bool stable_pair(double coarse, double fine) {
  if (!std::isfinite(coarse) || !std::isfinite(fine)) return false;
  return fine <= 2 * coarse + 1e-9;
}

}  // namespace

bool HyperbolicOperator::autonomous() const {
  auto all = [](const std::vector<Symbol>& v) {
    return std::all_of(v.begin(), v.end(), [](const Symbol& s) { return s.autonomous(); });
  };
  return all(coefficients) && all(principal) && all(roots);
}

std::string Classification::describe() const {
  std::ostringstream os;
  switch (kind) {
    case RootClass::Strict: os << "strict"; break;
    case RootClass::ConstantMultiplicities: os << "constant-multiplicities"; break;
    case RootClass::Involutive: os << "involutive"; break;
    case RootClass::Unclassified: os << "unclassified"; break;
  }
  os << " C=" << separation << " l=" << l << " groups=" << groups.size();
  if (kind == RootClass::Involutive) os << " bracket=" << bracket_ratio;
  return os.str();
}

double check_factorization(const HyperbolicOperator& op, const Grid& g, const std::vector<double>& times, int taus,
                           std::uint64_t seed) {
  validate(op);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-3.0, 3.0);
  double worst = 0;
  for (double t : default_times(times)) {
    const std::vector<CMatrix> roots = root_tables(op, t, g);
    std::vector<CMatrix> coeffs;
    for (int j = 0; j < op.m; ++j) coeffs.push_back(tabulate(op.principal_part(j), t, g));
    for (Eigen::Index j = 0; j < g.size(); ++j)
      for (Eigen::Index k = 0; k < g.size(); ++k) {
        const double w = weight(g, j, k);
        for (int r = 0; r < taus; ++r) {
          const Complex tau = w * unit(rng);
          Complex lhs = std::pow(tau, op.m), rhs = 1;
          for (int i = 1; i <= op.m; ++i) lhs -= coeffs[i - 1](j, k) * std::pow(tau, op.m - i);
          for (const CMatrix& root : roots) rhs *= tau - root(j, k);
          worst = std::max(worst, std::abs(lhs - rhs) / std::pow(std::abs(tau) + w, op.m));
        }
      }
  }
  return worst;
}

std::vector<RMatrix> principal_roots(const HyperbolicOperator& op, double t, const Grid& g) {
  validate(op);
  const int m = op.m;
  const Eigen::Index n = g.size();
  std::vector<CMatrix> coeffs;
  for (int j = 0; j < m; ++j) coeffs.push_back(tabulate(op.principal_part(j), t, g));
  std::vector<RMatrix> out(m, RMatrix(n, n));
  CMatrix companion = CMatrix::Zero(m, m);
  Eigen::ComplexEigenSolver<CMatrix> solver;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      companion.setZero();
      for (int i = 0; i + 1 < m; ++i) companion(i + 1, i) = 1;
      for (int i = 0; i < m; ++i) companion(i, m - 1) = coeffs[m - 1 - i](j, k);
      solver.compute(companion, false);
      std::vector<double> re(m);
      const double w = weight(g, j, k);
      for (int i = 0; i < m; ++i) {
        const Complex r = solver.eigenvalues()(i);
        if (std::abs(r.imag()) > 1e-6 * w)
          throw NotHyperbolicError("principal symbol has a non-real root " + std::to_string(r.real()) + "+" +
                                   std::to_string(r.imag()) + "i at x=" + std::to_string(g.point(j)[0]) +
                                   " xi=" + std::to_string(g.frequency(k)[0]) + " t=" + std::to_string(t));
        re[i] = r.real();
      }
      std::sort(re.begin(), re.end());
      for (int i = 0; i < m; ++i) out[i](j, k) = re[i];
    }
  return out;
}

Classification classify_roots(const HyperbolicOperator& op, const Grid& g, const std::vector<double>& times,
                              double separation_tol) {
  validate(op);
  const int m = op.m;
  const auto ts = default_times(times);
  std::vector<std::vector<bool>> always(m, std::vector<bool>(m, true)), ever(m, std::vector<bool>(m, false));
  std::vector<std::vector<double>> min_gap(m, std::vector<double>(m, std::numeric_limits<double>::infinity()));
  for (double t : ts) {
    const std::vector<CMatrix> roots = root_tables(op, t, g);
    for (int a = 0; a < m; ++a)
      for (int b = a + 1; b < m; ++b)
        for (Eigen::Index j = 0; j < g.size(); ++j)
          for (Eigen::Index k = 0; k < g.size(); ++k) {
            const double gap = std::abs(roots[a](j, k).real() - roots[b](j, k).real()) / weight(g, j, k);
            const bool same = gap <= kCoincide;
            if (same) ever[a][b] = true;
            else always[a][b] = false;
            min_gap[a][b] = std::min(min_gap[a][b], gap);
          }
  }
  Classification c;
  c.groups = group_roots(always);
  c.l = 0;
  for (const auto& grp : c.groups) c.l = std::max(c.l, static_cast<int>(grp.size()));
  c.separation = std::numeric_limits<double>::infinity();
  for (std::size_t ga = 0; ga < c.groups.size(); ++ga)
    for (std::size_t gb = ga + 1; gb < c.groups.size(); ++gb)
      for (int a : c.groups[ga])
        for (int b : c.groups[gb]) c.separation = std::min(c.separation, min_gap[std::min(a, b)][std::max(a, b)]);
  if (c.separation >= separation_tol) {
    c.kind = c.l == 1 ? RootClass::Strict : RootClass::ConstantMultiplicities;
    return c;
  }
  if (op.label == "involutive") {
    c.bracket_ratio = bracket_ratio(op, root_symbols(op, g), g, ts, c.groups);
    c.kind = c.bracket_ratio <= kBracketMax ? RootClass::Involutive : RootClass::Unclassified;
  }
  return c;
}

bool check_levi(const std::vector<Symbol>& h, const Grid& g) {
  const Grid fine = refined(g);
  for (const Symbol& s : h) {
    const double coarse = estimate_seminorm(s, 0, {0, 0}, 1, g);
    const double f = estimate_seminorm(s, 0, {0, 0}, 1, fine);
    if (!stable_pair(coarse, f)) return false;
  }
  return true;
}

bool check_levi(const HyperbolicOperator& op, const Grid& g) {
  validate(op);
  if (op.m == 1) return true;
  const auto coarse = levi_tables(op, g);
  const Grid fine_grid = refined(g);
  const auto fine = levi_tables(op, fine_grid);
  for (std::size_t i = 0; i < coarse.size(); ++i)
    if (!stable_pair(interior_sup(g, coarse[i], {0, 0}), interior_sup(fine_grid, fine[i], {0, 0})))
      return false;
  return true;
}

FirstOrderSystem build_system(const HyperbolicOperator& op, const Grid& g, double separation_tol) {
  validate(op);
  Plan plan = plan_reduction(op, g, separation_tol);
  FirstOrderSystem sys;
  sys.grid = g;
  sys.m = op.m;
  sys.n = static_cast<int>(plan.roots.size());
  sys.l = plan.cls.l;
  sys.multiplicities = plan.multiplicity;
  sys.distinct_roots = plan.roots;
  sys.autonomous = op.autonomous();
  const int m = op.m, dim = sys.dim();
  sys.kappa0 = SymbolMatrix(dim, dim);
  sys.data_map_b = SymbolMatrix(dim, m);
  sys.recon_map_Y = SymbolMatrix(m, dim);
  const Symbol one = Symbol::constant(1.0, "1");

  if (m == 1) {
    sys.kappa1 = {plan.roots[0]};
    sys.kappa0(0, 0) = (op.coefficients[0] - plan.roots[0]).with_order({0, 0});
    sys.data_map_b(0, 0) = one;
    sys.recon_map_Y(0, 0) = one;
    sys.blocks = {{{0}, 0}};
    sys.remainder_norm = 0;
    return sys;
  }

  std::vector<CMatrix> theta;
  for (const Symbol& r : plan.roots) theta.push_back(tabulate(r, 0, g));
  int offset = 0;
  for (const auto& ord : block_orders(m, sys.n)) {
    BlockAlgebra alg = factor_block(op, g, theta, ord, plan.strict);
    for (int i = 0; i < m; ++i) {
      const int row = offset + i;
      sys.kappa1.push_back(plan.roots[ord[i]]);
      CMatrix diag = lattice_symbol(g, alg.factors[i]) - theta[ord[i]];
      if (i == m - 1) {
        const CMatrix last = lattice_symbol(g, alg.last_row[m - 1]);
        sys.remainder_norm = std::max(sys.remainder_norm, interior_sup(g, last, {0, 0}));
        diag -= last;
      }
      sys.kappa0(row, row) = Symbol::from_table(g, diag, {0, 0}, "k0");
      if (i + 1 < m) sys.kappa0(row, row + 1) = one;
      sys.data_map_b(row, i) = one;
      for (int k = 0; k < i; ++k)
        sys.data_map_b(row, k) = Symbol::from_table(g, lattice_symbol(g, alg.w_polys[i][k]),
                                                    {double(i - k), double(i - k)}, "b");
    }
    for (int i = 0; i + 1 < m; ++i) {
      CMatrix entry = -lattice_symbol(g, alg.last_row[i]);
      sys.remainder_norm = std::max(sys.remainder_norm, interior_sup(g, entry, {0, 0}));
      sys.kappa0(offset + m - 1, offset + i) = Symbol::from_table(g, entry, {0, 0}, "k0");
    }
    if (offset == 0)
      for (int k = 0; k < m; ++k)
        for (int i = 0; i <= k; ++i)
          sys.recon_map_Y(k, i) = i == k ? one
                                         : Symbol::from_table(g, lattice_symbol(g, alg.dt_powers[k][i]),
                                                              {double(k - i), double(k - i)}, "Y");
    sys.blocks.push_back({ord, offset});
    offset += m;
  }
  return sys;
}

namespace {

Field apply_row(const SymbolMatrix& mat, int row, const std::vector<Field>& in, double t) {
  const Grid& g = in.at(0).grid;
  Field out(g, CVector::Zero(g.size()));
  for (int c = 0; c < mat.cols(); ++c) {
    const Symbol& s = mat(row, c);
    if (s.is_zero()) continue;
    if (!(in[c].grid == g)) throw ShapeError("components live on different grids");
    out.values += apply_psido(s, t, in[c]).values;
  }
  return out;
}

}  // namespace

std::vector<Field> reconstruct_u(const FirstOrderSystem& sys, const std::vector<Field>& w, double t) {
  if (static_cast<int>(w.size()) != sys.dim()) throw ShapeError("reconstruct_u: expected nm components");
  std::vector<Field> out;
  for (int k = 0; k < sys.m; ++k) out.push_back(apply_row(sys.recon_map_Y, k, w, t));
  return out;
}

std::vector<Field> apply_data_map(const FirstOrderSystem& sys, const std::vector<Field>& u0) {
  if (static_cast<int>(u0.size()) != sys.m) throw ShapeError("apply_data_map: expected m data fields");
  std::vector<Field> out;
  for (int r = 0; r < sys.dim(); ++r) out.push_back(apply_row(sys.data_map_b, r, u0, 0));
  return out;
}

std::vector<Field> w_from_derivatives(const FirstOrderSystem& sys, const std::vector<Field>& derivs, double t) {
  if (static_cast<int>(derivs.size()) != sys.m) throw ShapeError("w_from_derivatives: expected m fields");
  std::vector<Field> out;
  for (int r = 0; r < sys.dim(); ++r) out.push_back(apply_row(sys.data_map_b, r, derivs, t));
  return out;
}

bool check_data_map_structure(const FirstOrderSystem& sys) {
  const Grid& g = sys.grid;
  for (const SystemBlock& blk : sys.blocks)
    for (int i = 0; i < sys.m; ++i) {
      const int row = blk.offset + i;
      for (int k = 0; k < sys.m; ++k) {
        const Symbol& s = sys.data_map_b(row, k);
        if (k > i) {
          if (!s.is_zero() && tabulate(s, 0, g).cwiseAbs().maxCoeff() != 0) return false;
        } else if (k == i) {
          if ((tabulate(s, 0, g).array() - Complex(1)).abs().maxCoeff() > 1e-14) return false;
        } else {
          const double semi = estimate_seminorm(s, 0, {double(i - k), double(i - k)}, 0, g);
          if (!std::isfinite(semi)) return false;
        }
      }
    }
  return true;
}

Diagonalization perfect_diagonalize(const std::vector<Symbol>& kappa1, const SymbolMatrix& kappa0, const Grid& g,
                                    double t, double gap_tol) {
  const int k = static_cast<int>(kappa1.size());
  if (kappa0.rows() != k || kappa0.cols() != k) throw ShapeError("diagonalizer: kappa0 must be square of size k");
  const Eigen::Index n = g.size();
  std::vector<CMatrix> k1;
  for (const Symbol& s : kappa1) k1.push_back(tabulate(s, t, g));
  std::vector<std::vector<CMatrix>> k0(k, std::vector<CMatrix>(k));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) k0[i][j] = tabulate(kappa0(i, j), t, g);

  std::vector<std::vector<CMatrix>> omega(k, std::vector<CMatrix>(k, CMatrix(n, n)));
  std::vector<CMatrix> lambda(k, CMatrix(n, n));
  Diagonalization out;
  out.min_gap = std::numeric_limits<double>::infinity();
  Eigen::ComplexEigenSolver<CMatrix> solver;
  CMatrix mat(k, k);
  for (Eigen::Index x = 0; x < n; ++x)
    for (Eigen::Index y = 0; y < n; ++y) {
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) mat(i, j) = k0[i][j](x, y) + (i == j ? k1[i](x, y) : Complex(0));
      solver.compute(mat, true);
      const double w = weight(g, x, y);
      std::vector<bool> used(k, false);
      for (int i = 0; i < k; ++i) {
        int best = -1;
        double dist = std::numeric_limits<double>::infinity();
        for (int e = 0; e < k; ++e)
          if (!used[e] && std::abs(solver.eigenvalues()(e) - mat(i, i)) < dist) {
            dist = std::abs(solver.eigenvalues()(e) - mat(i, i));
            best = e;
          }
        used[best] = true;
        const Complex pivot = solver.eigenvectors()(i, best);
        if (std::abs(pivot) < 1e-12) throw RefusalError("diagonalizer: eigenvector has no component on its root");
        lambda[i](x, y) = solver.eigenvalues()(best);
        for (int r = 0; r < k; ++r) omega[r][i](x, y) = solver.eigenvectors()(r, best) / pivot;
      }
      for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
          out.min_gap = std::min(out.min_gap, std::abs(lambda[i](x, y) - lambda[j](x, y)) / w);
    }
  if (!(out.min_gap >= gap_tol))
    throw RefusalError("diagonalizer: eigenvalue gap " + std::to_string(out.min_gap) + " below " +
                       std::to_string(gap_tol));
  out.omega = SymbolMatrix(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j)
      out.omega(i, j) = i == j ? Symbol::constant(1.0, "1") : Symbol::from_table(g, omega[i][j], {-1, -1}, "N");
    out.kappa0_tilde.push_back(Symbol::from_table(g, lambda[i] - k1[i], {0, 0}, "k0~"));
  }
  return out;
}

Diagonalization perfect_diagonalize_2x2(const std::vector<Symbol>& kappa1, const SymbolMatrix& kappa0, const Grid& g,
                                        double t, double gap_tol) {
  if (kappa1.size() != 2) throw ShapeError("perfect_diagonalize_2x2 needs a 2x2 block");
  return perfect_diagonalize(kappa1, kappa0, g, t, gap_tol);
}

CMatrix block_generator(const FirstOrderSystem& sys, int block, double t) {
  const SystemBlock& blk = sys.blocks.at(block);
  const Grid& g = sys.grid;
  const Eigen::Index n = g.size();
  const int m = sys.m;
  CMatrix out = CMatrix::Zero(m * n, m * n);
  for (int i = 0; i < m; ++i) {
    const int row = blk.offset + i;
    out.block(i * n, i * n, n, n) += op_matrix(sys.kappa1[row], t, g);
    for (int j = 0; j < m; ++j) {
      const Symbol& s = sys.kappa0(row, blk.offset + j);
      if (!s.is_zero()) out.block(i * n, j * n, n, n) += op_matrix(s, t, g);
    }
  }
  return out;
}

bool x_independent(const CMatrix& table, double tol) {
  const double scale = std::max(1.0, table.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 1; j < table.rows(); ++j)
    if ((table.row(j) - table.row(0)).cwiseAbs().maxCoeff() > tol * scale) return false;
  return true;
}

}  // namespace sgspde
