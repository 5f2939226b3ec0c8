#include "sgspde/propagator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

namespace sgspde {

namespace {

const Complex kI(0, 1);

CVector stack(const State& w) {
  const Eigen::Index n = w.at(0).grid.size();
  CVector out(n * static_cast<Eigen::Index>(w.size()));
  for (std::size_t c = 0; c < w.size(); ++c) out.segment(c * n, n) = w[c].values;
  return out;
}

State unstack(const Grid& g, int m, const CVector& v) {
  const Eigen::Index n = g.size();
  State out;
  for (int c = 0; c < m; ++c) out.emplace_back(g, v.segment(c * n, n));
  return out;
}

void check_state(const State& w, const Grid& g, int m) {
  if (static_cast<int>(w.size()) != m) throw ShapeError("state has the wrong number of components");
  for (const Field& f : w)
    if (!(f.grid == g)) throw ShapeError("state component lives on a different grid");
}

std::vector<int> block_rows(const FirstOrderSystem& sys, int block) {
  const SystemBlock& blk = sys.blocks.at(block);
  std::vector<int> rows;
  for (int i = 0; i < sys.m; ++i) rows.push_back(blk.offset + i);
  return rows;
}

// m x m symbol matrix of kappa1 + kappa0 at frequency column k (row 0 of each table).
std::vector<CMatrix> frequency_generators(const FirstOrderSystem& sys, int block, double t) {
  const Grid& g = sys.grid;
  const int m = sys.m;
  const auto rows = block_rows(sys, block);
  std::vector<std::vector<CVector>> entries(m, std::vector<CVector>(m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      CVector row = tabulate(sys.kappa0(rows[i], rows[j]), t, g).row(0).transpose();
      if (i == j) row += tabulate(sys.kappa1[rows[i]], t, g).row(0).transpose();
      entries[i][j] = row;
    }
  std::vector<CMatrix> out(g.size(), CMatrix(m, m));
  for (Eigen::Index k = 0; k < g.size(); ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) out[k](i, j) = entries[i][j](k);
  return out;
}

CMatrix rk4_polynomial(const CMatrix& z) {
  const Eigen::Index n = z.rows();
  CMatrix id = CMatrix::Identity(n, n);
  // 1 + z + z^2/2 + z^3/6 + z^4/24 by Horner.
  CMatrix acc = id + z / 4.0;
  acc = id + z * acc / 3.0;
  acc = id + z * acc / 2.0;
  return id + z * acc;
}

CMatrix matrix_power(CMatrix base, int e) {
  CMatrix result = CMatrix::Identity(base.rows(), base.cols());
  while (e > 0) {
    if (e & 1) result = result * base;
    e >>= 1;
    if (e) base = base * base;
  }
  return result;
}

int auto_steps(const FirstOrderSystem& sys, int block, double s, double t, const ReferenceOptions& opts) {
  const double rho = std::max(kappa1_radius(sys, block, s), kappa1_radius(sys, block, t));
  return std::max(opts.min_steps, static_cast<int>(std::ceil(std::abs(t - s) * rho / opts.target_cfl)));
}

}  // namespace

// ---- StepOperator

StepOperator StepOperator::multiplier(const Grid& g, int m, std::vector<CMatrix> per_frequency) {
  if (static_cast<Eigen::Index>(per_frequency.size()) != g.size()) throw ShapeError("one matrix per frequency needed");
  StepOperator op;
  op.grid_ = g;
  op.m_ = m;
  op.per_frequency_ = std::move(per_frequency);
  return op;
}

StepOperator StepOperator::dense(const Grid& g, int m, CMatrix matrix) {
  if (matrix.rows() != g.size() * m || matrix.cols() != matrix.rows()) throw ShapeError("dense step has wrong shape");
  StepOperator op;
  op.grid_ = g;
  op.m_ = m;
  op.dense_ = std::move(matrix);
  return op;
}

State StepOperator::apply(const State& w) const {
  check_state(w, grid_, m_);
  if (!is_multiplier()) return unstack(grid_, m_, dense_ * stack(w));
  std::vector<CVector> spectra;
  for (const Field& f : w) spectra.push_back(forward_transform(f));
  std::vector<CVector> out(m_, CVector(grid_.size()));
  CVector v(m_);
  for (Eigen::Index k = 0; k < grid_.size(); ++k) {
    for (int c = 0; c < m_; ++c) v(c) = spectra[c](k);
    const CVector r = per_frequency_[k] * v;
    for (int c = 0; c < m_; ++c) out[c](k) = r(c);
  }
  State result;
  for (int c = 0; c < m_; ++c) result.push_back(inverse_transform(grid_, out[c]));
  return result;
}

CMatrix StepOperator::matrix() const {
  if (!is_multiplier()) return dense_;
  const Eigen::Index n = grid_.size();
  CMatrix out(n * m_, n * m_);
  for (int i = 0; i < m_; ++i)
    for (int j = 0; j < m_; ++j) {
      CMatrix table(n, n);
      for (Eigen::Index k = 0; k < n; ++k) table.col(k).setConstant(per_frequency_[k](i, j));
      out.block(i * n, j * n, n, n) = op_matrix_from_table(grid_, table);
    }
  return out;
}

StepOperator StepOperator::after(const StepOperator& other) const {
  if (!(grid_ == other.grid_) || m_ != other.m_) throw ShapeError("composing step operators of different shapes");
  if (is_multiplier() && other.is_multiplier()) {
    std::vector<CMatrix> prod(per_frequency_.size());
    for (std::size_t k = 0; k < prod.size(); ++k) prod[k] = per_frequency_[k] * other.per_frequency_[k];
    return multiplier(grid_, m_, std::move(prod));
  }
  return dense(grid_, m_, matrix() * other.matrix());
}

State zero_state(const Grid& g, int m) { return State(m, Field(g)); }

double state_norm(const State& w) {
  double s = 0;
  for (const Field& f : w) s += f.values.squaredNorm();
  return std::sqrt(s);
}

double relative_difference(const State& a, const State& b) {
  if (a.size() != b.size()) throw ShapeError("states differ in size");
  double num = 0, den = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    num += (a[c].values - b[c].values).squaredNorm();
    den += b[c].values.squaredNorm();
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

State random_state(const Grid& g, int m, std::uint64_t seed, double band) {
  State out;
  for (int c = 0; c < m; ++c) out.push_back(random_bandlimited_field(g, seed * 131 + c, band, false));
  return out;
}

State localized_state(const Grid& g, int m, std::uint64_t seed, double band) {
  const double width = g.halfwidth() / 4;
  const Field envelope = Field::sample(g, [&](const Point& x) { return std::exp(-x.squaredNorm() / (width * width)); });
  State out = random_state(g, m, seed, band);
  for (Field& f : out) f.values = f.values.cwiseProduct(envelope.values);
  return out;
}

bool block_is_multiplier(const FirstOrderSystem& sys, int block) {
  if (!sys.autonomous) return false;
  const auto rows = block_rows(sys, block);
  for (int i : rows) {
    if (!x_independent(tabulate(sys.kappa1[i], 0, sys.grid))) return false;
    for (int j : rows)
      if (!sys.kappa0(i, j).is_zero() && !x_independent(tabulate(sys.kappa0(i, j), 0, sys.grid), 1e-7)) return false;
  }
  return true;
}

StepOperator exact_propagator(const FirstOrderSystem& sys, int block, double s, double t) {
  if (!sys.autonomous) throw UnsupportedError("exact propagator needs an autonomous system");
  const double span = t - s;
  if (block_is_multiplier(sys, block)) {
    auto gens = frequency_generators(sys, block, s);
    for (CMatrix& k : gens) k = (kI * span * k).exp();
    return StepOperator::multiplier(sys.grid, sys.m, std::move(gens));
  }
  return StepOperator::dense(sys.grid, sys.m, (kI * span * block_generator(sys, block, s)).exp());
}

// ---- reference stepper

double kappa1_radius(const FirstOrderSystem& sys, int block, double t) {
  double rho = 0;
  for (int i : block_rows(sys, block)) rho = std::max(rho, tabulate(sys.kappa1[i], t, sys.grid).cwiseAbs().maxCoeff());
  return rho;
}

State step_reference(const FirstOrderSystem& sys, int block, const State& w, double t, double dt,
                     const ReferenceOptions& opts) {
  check_state(w, sys.grid, sys.m);
  const double rho = kappa1_radius(sys, block, t);
  if (std::abs(dt) * rho > opts.cfl)
    throw InstabilityError("step_reference: dt=" + std::to_string(dt) + " exceeds the stability bound " +
                           std::to_string(opts.cfl / rho));
  const CVector y = stack(w);
  const CMatrix k0 = block_generator(sys, block, t);
  const CMatrix kh = sys.autonomous ? k0 : block_generator(sys, block, t + dt / 2);
  const CMatrix k1 = sys.autonomous ? k0 : block_generator(sys, block, t + dt);
  const CVector a = kI * (k0 * y);
  const CVector b = kI * (kh * (y + dt / 2 * a));
  const CVector c = kI * (kh * (y + dt / 2 * b));
  const CVector d = kI * (k1 * (y + dt * c));
  const CVector out = y + dt / 6 * (a + 2.0 * b + 2.0 * c + d);
  const double before = y.norm(), after = out.norm();
  if (!out.allFinite() || (before > 0 && after > 10 * before))
    throw InstabilityError("step_reference: norm grew by more than 10x in one step");
  return unstack(sys.grid, sys.m, out);
}

State propagate_reference(const FirstOrderSystem& sys, int block, const State& w, double s, double t, int steps,
                          const ReferenceOptions& opts) {
  if (steps <= 0) steps = auto_steps(sys, block, s, t, opts);
  if (t == s) return w;
  if (!sys.autonomous) {
    State cur = w;
    const double dt = (t - s) / steps;
    for (int k = 0; k < steps; ++k) cur = step_reference(sys, block, cur, s + k * dt, dt, opts);
    return cur;
  }
  return reference_propagator(sys, block, s, t, steps, opts).apply(w);
}

StepOperator reference_propagator(const FirstOrderSystem& sys, int block, double s, double t, int steps,
                                  const ReferenceOptions& opts) {
  if (steps <= 0) steps = auto_steps(sys, block, s, t, opts);
  const double dt = (t - s) / steps;
  const double rho = std::max(kappa1_radius(sys, block, s), kappa1_radius(sys, block, t));
  if (std::abs(dt) * rho > opts.cfl)
    throw InstabilityError("reference_propagator: dt=" + std::to_string(dt) + " exceeds the stability bound " +
                           std::to_string(opts.cfl / rho));
  if (block_is_multiplier(sys, block)) {
    auto gens = frequency_generators(sys, block, s);
    for (CMatrix& k : gens) k = matrix_power(rk4_polynomial(kI * dt * k), steps);
    return StepOperator::multiplier(sys.grid, sys.m, std::move(gens));
  }
  if (sys.autonomous)
    return StepOperator::dense(sys.grid, sys.m,
                               matrix_power(rk4_polynomial(kI * dt * block_generator(sys, block, s)), steps));
  const Eigen::Index dim = sys.grid.size() * sys.m;
  CMatrix acc = CMatrix::Identity(dim, dim);
  for (int k = 0; k < steps; ++k) {
    const double t0 = s + k * dt;
    const CMatrix a0 = kI * block_generator(sys, block, t0);
    const CMatrix ah = kI * block_generator(sys, block, t0 + dt / 2);
    const CMatrix a1 = kI * block_generator(sys, block, t0 + dt);
    const CMatrix ka = a0 * acc;
    const CMatrix kb = ah * (acc + dt / 2 * ka);
    const CMatrix kc = ah * (acc + dt / 2 * kb);
    const CMatrix kd = a1 * (acc + dt * kc);
    acc += dt / 6 * (ka + 2.0 * kb + 2.0 * kc + kd);
  }
  return StepOperator::dense(sys.grid, sys.m, std::move(acc));
}

// ---- geometric optics

State PropagatorGO::apply(const State& w) const {
  const int m = static_cast<int>(phases.size());
  check_state(w, grid, m);
  const State diag = unstack(grid, m, omega_inverse * stack(w));
  State out;
  for (int i = 0; i < m; ++i) out.push_back(apply_fio(phases[i], phases[i].amplitude, diag[i]));
  return unstack(grid, m, omega * stack(out));
}

StepOperator PropagatorGO::as_step() const {
  const int m = static_cast<int>(phases.size());
  const Eigen::Index n = grid.size();
  CMatrix mid = CMatrix::Zero(n * m, n * m);
  for (int i = 0; i < m; ++i) {
    if (!phases[i].certified || !(phases[i].delta_min > 0))
      throw RefusalError("GO propagator: phase is not certified");
    mid.block(i * n, i * n, n, n) = fio_matrix(phases[i], phases[i].amplitude);
  }
  return StepOperator::dense(grid, m, omega * mid * omega_inverse);
}

namespace {

double taper(double r, double inner, double outer) {
  if (r <= inner) return 1;
  if (r >= outer) return 0;
  const double c = std::cos(0.5 * std::numbers::pi * (r - inner) / (outer - inner));
  return c * c;
}

// 1 on the interior of phase space, cos^2 decay to 0 between the inner and outer fractions of the box.
CMatrix edge_window(const Grid& g, double inner, double outer) {
  CMatrix w(g.size(), g.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const double wx = taper(g.point(j).cwiseAbs().maxCoeff() / g.halfwidth(), inner, outer);
    for (Eigen::Index k = 0; k < g.size(); ++k)
      w(j, k) = wx * taper(g.frequency(k).cwiseAbs().maxCoeff() / g.max_frequency(), inner, outer);
  }
  return w;
}

// X with A X - X B = C from complex Schur forms of A and B.
CMatrix solve_sylvester(const Eigen::ComplexSchur<CMatrix>& a, const Eigen::ComplexSchur<CMatrix>& b, const CMatrix& c) {
  const CMatrix& s = a.matrixT();
  const CMatrix& t = b.matrixT();
  const CMatrix rhs = a.matrixU().adjoint() * c * b.matrixU();
  const Eigen::Index n = s.rows();
  CMatrix y(n, t.cols());
  for (Eigen::Index k = 0; k < t.cols(); ++k) {
    CVector col = rhs.col(k);
    for (Eigen::Index j = 0; j < k; ++j) col += t(j, k) * y.col(j);
    CMatrix shifted = s;
    shifted.diagonal().array() -= t(k, k);
    y.col(k) = shifted.triangularView<Eigen::Upper>().solve(col);
  }
  return a.matrixU() * y * b.matrixU().adjoint();
}

}  // namespace

PropagatorGO build_go_propagator(const FirstOrderSystem& sys, int block, double s, double t, const GoOptions& opts) {
  const Grid& g = sys.grid;
  const int m = sys.m;
  const auto rows = block_rows(sys, block);
  PropagatorGO go;
  go.grid = g;
  go.block = block;
  go.s = s;
  go.t = t;

  std::vector<std::function<Complex(double, const Point&, const Point&)>> lower(m);
  const Eigen::Index n = g.size();
  if (m == 1) {
    const Symbol c = sys.kappa0(rows[0], rows[0]);
    lower[0] = [c](double tt, const Point& x, const Point& p) { return c(tt, x, p); };
    go.omega = CMatrix::Identity(n, n);
    go.omega_inverse = go.omega;
  } else {
    if (!sys.autonomous) throw UnsupportedError("GO propagator for m >= 2 needs an autonomous system");
    std::vector<Symbol> k1;
    SymbolMatrix k0(m, m);
    for (int i = 0; i < m; ++i) {
      k1.push_back(sys.kappa1[rows[i]]);
      for (int j = 0; j < m; ++j) k0(i, j) = sys.kappa0(rows[i], rows[j]);
    }
    const Diagonalization dz = perfect_diagonalize(k1, k0, g, s, opts.gap_tol);
    go.omega.resize(n * m, n * m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) go.omega.block(i * n, j * n, n, n) = op_matrix(dz.omega(i, j), s, g);
    go.omega_inverse = go.omega.partialPivLu().inverse();
    const CMatrix gen = block_generator(sys, block, s);
    std::vector<CMatrix> roots;
    for (int i = 0; i < m; ++i) roots.push_back(tabulate(k1[i], s, g));
    CMatrix conj = go.omega_inverse * gen * go.omega;
    const CMatrix window = edge_window(g, opts.refine_inner, opts.refine_outer);
    // Lattice refinement: D_i N_ij - N_ij D_j = -F_ij on the windowed off-diagonal blocks.
    for (int sweep = 0; sweep < opts.refine_sweeps; ++sweep) {
      std::vector<Eigen::ComplexSchur<CMatrix>> schur;
      for (int i = 0; i < m; ++i) schur.emplace_back(conj.block(i * n, i * n, n, n));
      CMatrix step = CMatrix::Identity(n * m, n * m);
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
          if (i == j) continue;
          const CMatrix f = lattice_symbol(g, conj.block(i * n, j * n, n, n));
          const CMatrix rhs = -op_matrix_from_table(g, (f.array() * window.array()).matrix());
          step.block(i * n, j * n, n, n) = solve_sylvester(schur[i], schur[j], rhs);
        }
      go.omega = go.omega * step;
      go.omega_inverse = go.omega.partialPivLu().inverse();
      conj = go.omega_inverse * gen * go.omega;
    }
    for (int i = 0; i < m; ++i) {
      CMatrix diag = lattice_symbol(g, conj.block(i * n, i * n, n, n)) - roots[i];
      auto table = std::make_shared<const CMatrix>(std::move(diag));
      lower[i] = [g, table](double, const Point& x, const Point& p) { return interpolate_table(g, *table, x, p); };
    }
  }

  for (int i = 0; i < m; ++i) {
    auto c = lower[i];
    AmplitudeRate rate = [c](double tt, const Point& x, const Point& p, const Jet& j, const SmallMatrix& a,
                             const SmallMatrix& b) {
      const double spread = 0.5 * (j.dxixi * b * a.inverse()).trace();
      return Complex(spread) + kI * c(tt, x, p);
    };
    try {
      go.phases.push_back(solve_eikonal(sys.kappa1[rows[i]], s, t, g, opts.eikonal, rate));
    } catch (const HorizonError& e) {
      throw HorizonError("phase horizon exceeded on [" + std::to_string(s) + ", " + std::to_string(t) +
                             "]; split the interval at t=" + std::to_string(e.admissible_t) + " (" + e.what() + ")",
                         e.admissible_t);
    }
  }
  return go;
}

StepOperator go_propagator(const FirstOrderSystem& sys, int block, double s, double t, double max_span,
                           const GoOptions& opts) {
  if (!(max_span > 0)) throw ArgumentError("go_propagator: max_span must be positive");
  const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(t - s) / max_span - 1e-12)));
  const double h = (t - s) / pieces;
  StepOperator acc = build_go_propagator(sys, block, s, s + h, opts).as_step();
  for (int k = 1; k < pieces; ++k)
    acc = build_go_propagator(sys, block, s + k * h, s + (k + 1) * h, opts).as_step().after(acc);
  return acc;
}

double go_equation_residual(const FirstOrderSystem& sys, int block, double s, double t, int probes, double h,
                            const GoOptions& opts) {
  const PropagatorGO mid = build_go_propagator(sys, block, s, t, opts);
  const PropagatorGO hi = build_go_propagator(sys, block, s, t + h, opts);
  const PropagatorGO lo = build_go_propagator(sys, block, s, t - h, opts);
  const CMatrix k = block_generator(sys, block, t);
  double worst = 0;
  for (int p = 0; p < probes; ++p) {
    const State u = localized_state(sys.grid, sys.m, 1000 + p);
    const CVector e = stack(mid.apply(u));
    const CVector dt = -kI * (stack(hi.apply(u)) - stack(lo.apply(u))) / (2 * h);
    const CVector ke = k * e;
    worst = std::max(worst, (dt - ke).norm() / ke.norm());
  }
  return worst;
}

// ---- factory and checks

const char* to_string(PropagatorKind k) {
  switch (k) {
    case PropagatorKind::Exact: return "exact";
    case PropagatorKind::Reference: return "reference";
    case PropagatorKind::GeometricOptics: return "go";
  }
  return "?";
}

StepOperator PropagatorFactory::operator()(const FirstOrderSystem& sys, int block, double s, double t) const {
  switch (kind) {
    case PropagatorKind::Exact: return exact_propagator(sys, block, s, t);
    case PropagatorKind::Reference: {
      const int steps =
          reference_steps > 0 ? std::max(1, static_cast<int>(std::ceil(reference_steps * std::abs(t - s)))) : 0;
      return reference_propagator(sys, block, s, t, steps, reference);
    }
    case PropagatorKind::GeometricOptics: return go_propagator(sys, block, s, t, go_max_span, go);
  }
  throw ArgumentError("unknown propagator kind");
}

double check_group_property(const FirstOrderSystem& sys, int block, const PropagatorFactory& make, double t, double s,
                            double t0, int probes, std::uint64_t seed) {
  const StepOperator ets = make(sys, block, s, t), est0 = make(sys, block, t0, s), ett0 = make(sys, block, t0, t);
  double worst = 0;
  for (int p = 0; p < probes; ++p) {
    const State u = random_state(sys.grid, sys.m, seed + p);
    worst = std::max(worst, relative_difference(ets.apply(est0.apply(u)), ett0.apply(u)));
  }
  return worst;
}

double check_inverse_property(const FirstOrderSystem& sys, int block, const PropagatorFactory& make, double s,
                              double t, int probes, std::uint64_t seed) {
  const StepOperator fwd = make(sys, block, s, t), back = make(sys, block, t, s);
  double worst = 0;
  for (int p = 0; p < probes; ++p) {
    const State u = random_state(sys.grid, sys.m, seed + p);
    worst = std::max(worst, relative_difference(back.apply(fwd.apply(u)), u));
  }
  return worst;
}

State duhamel_solve(const FirstOrderSystem& sys, int block, const State& w0, const std::vector<State>& forcing,
                    double s, double t, const PropagatorFactory& make) {
  check_state(w0, sys.grid, sys.m);
  if (forcing.empty()) return make(sys, block, s, t).apply(w0);
  if (forcing.size() < 2) throw ShapeError("duhamel_solve: forcing needs at least two time nodes");
  const int intervals = static_cast<int>(forcing.size()) - 1;
  const double h = (t - s) / intervals;
  auto add_scaled = [](State& acc, const State& y, Complex c) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i].values += c * y[i].values;
  };
  State cur = w0;
  add_scaled(cur, forcing[0], kI * (h / 2));
  StepOperator step;
  if (sys.autonomous) step = make(sys, block, s, s + h);
  for (int k = 1; k <= intervals; ++k) {
    if (!sys.autonomous) step = make(sys, block, s + (k - 1) * h, s + k * h);
    cur = step.apply(cur);
    add_scaled(cur, forcing[k], kI * (k == intervals ? h / 2 : h));
  }
  return cur;
}

namespace {

Field first_reconstruction_row(const FirstOrderSystem& sys, const State& w, double t) {
  Field out(sys.grid);
  for (int i = 0; i < sys.m; ++i) {
    const Symbol& y = sys.recon_map_Y(0, i);
    if (!y.is_zero()) out.values += apply_psido(y, t, w[i]).values;
  }
  return out;
}

}  // namespace

KernelAction scalar_solution_kernel(const FirstOrderSystem& sys, double s, double t, const PropagatorFactory& make) {
  const StepOperator e = make(sys, 0, s, t);
  return [sys, e, t](const Field& g) {
    State w = zero_state(sys.grid, sys.m);
    w[sys.m - 1] = g;
    Field out = first_reconstruction_row(sys, e.apply(w), t);
    out.values *= kI;
    return out;
  };
}

Field ScalarKernel::apply(const Field& g) const {
  if (!is_multiplier()) return Field(grid, dense * g.values);
  return inverse_transform(grid, apply_spectrum(forward_transform(g)));
}

CVector ScalarKernel::apply_spectrum(const CVector& ghat) const {
  if (!is_multiplier()) throw UnsupportedError("spectral application needs a multiplier kernel");
  return multiplier.cwiseProduct(ghat);
}

CMatrix ScalarKernel::matrix() const {
  if (!is_multiplier()) return dense;
  CMatrix table(grid.size(), grid.size());
  for (Eigen::Index k = 0; k < grid.size(); ++k) table.col(k).setConstant(multiplier[k]);
  return op_matrix_from_table(grid, table);
}

ScalarKernel scalar_kernel(const FirstOrderSystem& sys, double s, double t, const PropagatorFactory& make) {
  const StepOperator e = make(sys, 0, s, t);
  const Grid& g = sys.grid;
  const Eigen::Index n = g.size();
  const int m = sys.m;
  ScalarKernel out;
  out.grid = g;
  bool y_flat = e.is_multiplier();
  std::vector<CMatrix> ytab(m);
  for (int c = 0; c < m && y_flat; ++c) {
    if (sys.recon_map_Y(0, c).is_zero()) continue;
    ytab[c] = tabulate(sys.recon_map_Y(0, c), t, g);
    y_flat = x_independent(ytab[c], 1e-9);
  }
  if (y_flat) {
    out.multiplier = CVector::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k)
      for (int c = 0; c < m; ++c)
        if (ytab[c].size() > 0) out.multiplier[k] += ytab[c](0, k) * e.per_frequency()[k](c, m - 1);
    out.multiplier *= kI;
    return out;
  }
  const CMatrix full = e.matrix();
  out.dense = CMatrix::Zero(n, n);
  for (int c = 0; c < m; ++c) {
    if (sys.recon_map_Y(0, c).is_zero()) continue;
    out.dense += op_matrix(sys.recon_map_Y(0, c), t, g) * full.block(c * n, (m - 1) * n, n, n);
  }
  out.dense *= kI;
  return out;
}

Field v0_term(const FirstOrderSystem& sys, const std::vector<Field>& cauchy_data, double t,
              const PropagatorFactory& make) {
  const std::vector<Field> all = apply_data_map(sys, cauchy_data);
  const State w0(all.begin(), all.begin() + sys.m);
  return first_reconstruction_row(sys, make(sys, 0, 0, t).apply(w0), t);
}

}  // namespace sgspde
