#include "sgspde/phasefield.hpp"

#include <cmath>
#include <sstream>

namespace sgspde {

namespace {

struct RayState {
  Point x, p;
  double psi = 0;  // action minus X . xi0
  SmallMatrix a, b;
  Complex log_amp = 0;
};

struct RayDeriv {
  Point x, p;
  double psi;
  SmallMatrix a, b;
  Complex log_amp;
};

RayDeriv ray_rhs(const Symbol& kappa, double t, const RayState& s, const Point& xi0, const AmplitudeRate& rate) {
  const Jet j = jet(kappa, t, s.x, s.p);
  RayDeriv d;
  d.x = -j.dxi;
  d.p = j.dx;
  d.psi = j.value - (s.p - xi0).dot(j.dxi);
  d.a = -(j.dxxi.transpose() * s.a + j.dxixi * s.b);
  d.b = j.dxx * s.a + j.dxxi * s.b;
  d.log_amp = rate ? rate(t, s.x, s.p, j, s.a, s.b) : Complex(0);
  return d;
}

RayState axpy(const RayState& s, double h, const RayDeriv& d) {
  RayState o;
  o.x = s.x + h * d.x;
  o.p = s.p + h * d.p;
  o.psi = s.psi + h * d.psi;
  o.a = s.a + h * d.a;
  o.b = s.b + h * d.b;
  o.log_amp = s.log_amp + h * d.log_amp;
  return o;
}

struct RayResult {
  RayState end;
  int first_fold = -1;  // first step index with det(dX/dy) <= 0
};

RayResult integrate_ray(const Symbol& kappa, double s0, double dt, int steps, const Point& y, const Point& xi,
                        const AmplitudeRate& rate) {
  const int d = static_cast<int>(y.size());
  RayState st;
  st.x = y;
  st.p = xi;
  st.a = SmallMatrix::Identity(d, d);
  st.b = SmallMatrix::Zero(d, d);
  RayResult out;
  double t = s0;
  for (int i = 0; i < steps; ++i) {
    const RayDeriv k1 = ray_rhs(kappa, t, st, xi, rate);
    const RayDeriv k2 = ray_rhs(kappa, t + dt / 2, axpy(st, dt / 2, k1), xi, rate);
    const RayDeriv k3 = ray_rhs(kappa, t + dt / 2, axpy(st, dt / 2, k2), xi, rate);
    const RayDeriv k4 = ray_rhs(kappa, t + dt, axpy(st, dt, k3), xi, rate);
    st.x += dt / 6 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    st.p += dt / 6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    st.psi += dt / 6 * (k1.psi + 2 * k2.psi + 2 * k3.psi + k4.psi);
    st.a += dt / 6 * (k1.a + 2 * k2.a + 2 * k3.a + k4.a);
    st.b += dt / 6 * (k1.b + 2 * k2.b + 2 * k3.b + k4.b);
    st.log_amp += dt / 6 * (k1.log_amp + 2.0 * k2.log_amp + 2.0 * k3.log_amp + k4.log_amp);
    t = s0 + (i + 1) * dt;
    if (out.first_fold < 0 && st.a.determinant() <= 0) out.first_fold = i + 1;
  }
  out.end = std::move(st);
  return out;
}

// Newton refinement of the foot point y with X(t; y, xi) = x.
RayResult back_map(const Symbol& kappa, double s0, double dt, int steps, const Point& x, const Point& xi,
                   const Point& y0, int newton_max, const AmplitudeRate& rate, RayResult first) {
  Point y = y0;
  RayResult cur = std::move(first);
  const double tol = 1e-13 * bracket(x);
  for (int it = 0; it < newton_max; ++it) {
    const Point miss = cur.end.x - x;
    if (miss.norm() <= tol) break;
    y -= cur.end.a.partialPivLu().solve(miss);
    cur = integrate_ray(kappa, s0, dt, steps, y, xi, rate);
  }
  cur.end.psi += (cur.end.x - x).dot(xi - cur.end.p);
  // Foot point stored in x slot of the result for the caller.
  cur.end.x = y;
  return cur;
}

double weight(const Point& x, const Point& xi) { return bracket(x) * bracket(xi); }

}  // namespace

std::vector<TracedPoint> trace_points(const Symbol& kappa, double s, double t, int steps, const Grid& g,
                                      const std::vector<std::pair<Eigen::Index, Eigen::Index>>& targets,
                                      int newton_max, const AmplitudeRate& rate) {
  std::vector<TracedPoint> out(targets.size());
  const double dt = steps > 0 ? (t - s) / steps : 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const Point x = g.point(targets[i].first);
    const Point xi = g.frequency(targets[i].second);
    TracedPoint& tp = out[i];
    if (steps == 0 || t == s) {
      tp.grad_x = xi;
      tp.grad_xi = x;
      continue;
    }
    RayResult fin = back_map(kappa, s, dt, steps, x, xi, x, newton_max, rate,
                             integrate_ray(kappa, s, dt, steps, x, xi, rate));
    tp.excess = fin.end.psi;
    tp.grad_x = fin.end.p;
    tp.grad_xi = fin.end.x;
    tp.amplitude = std::exp(fin.end.log_amp);
  }
  return out;
}

RMatrix PhaseFunction::values() const {
  RMatrix v = excess;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const Point x = grid.point(j);
    for (Eigen::Index k = 0; k < grid.size(); ++k) v(j, k) += x.dot(grid.frequency(k));
  }
  return v;
}

CMatrix PhaseFunction::exp_i_phase() const {
  const CMatrix& e = plane_wave_matrix(grid);
  return e.cwiseProduct(excess.unaryExpr([](double v) { return std::polar(1.0, v); }));
}

PhaseFunction flat_phase(const Grid& g, double s) {
  PhaseFunction phi;
  phi.grid = g;
  phi.s = phi.t = s;
  const Eigen::Index n = g.size();
  phi.excess = RMatrix::Zero(n, n);
  phi.grad_x.assign(g.dims(), RMatrix(n, n));
  phi.grad_xi.assign(g.dims(), RMatrix(n, n));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      for (int a = 0; a < g.dims(); ++a) {
        phi.grad_x[a](j, k) = g.frequency(k)[a];
        phi.grad_xi[a](j, k) = g.point(j)[a];
      }
  phi.amplitude = CMatrix::Ones(n, n);
  phi.delta_min = 1;
  phi.certified = true;
  phi.t_grid = {s};
  phi.hamiltonian = Symbol::zero();
  return phi;
}

PhaseFunction solve_eikonal(const Symbol& kappa, double s, double t_end, const Grid& g, const EikonalOptions& opts,
                            const AmplitudeRate& rate) {
  if (opts.steps < 1) throw ShapeError("solve_eikonal: steps must be positive");
  if (t_end == s) {
    PhaseFunction phi = flat_phase(g, s);
    phi.hamiltonian = kappa;
    return phi;
  }
  const int d = g.dims();
  const Eigen::Index n = g.size();
  const int steps = opts.steps;
  const double dt = (t_end - s) / steps;

  PhaseFunction phi;
  phi.grid = g;
  phi.s = s;
  phi.t = t_end;
  phi.steps = steps;
  phi.hamiltonian = kappa;
  for (int i = 0; i <= steps; ++i) phi.t_grid.push_back(s + i * dt);
  phi.excess.resize(n, n);
  phi.grad_x.assign(d, RMatrix(n, n));
  phi.grad_xi.assign(d, RMatrix(n, n));
  phi.amplitude.resize(n, n);

  int fold = -1;
  std::vector<double> landing(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Point xi = g.frequency(k);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Point x = g.point(j);
      RayResult seed = integrate_ray(kappa, s, dt, steps, x, xi, rate);
      if (seed.first_fold >= 0) fold = fold < 0 ? seed.first_fold : std::min(fold, seed.first_fold);
      if (d == 1) landing[j] = seed.end.x[0];
      // The seed ray from y = x is the first Newton iterate.
      RayResult fin = back_map(kappa, s, dt, steps, x, xi, x, opts.newton_max, rate, std::move(seed));
      phi.excess(j, k) = fin.end.psi;
      for (int a = 0; a < d; ++a) {
        phi.grad_x[a](j, k) = fin.end.p[a];
        phi.grad_xi[a](j, k) = fin.end.x[a];
      }
      phi.amplitude(j, k) = std::exp(fin.end.log_amp);
    }
    if (d == 1)
      for (Eigen::Index j = 1; j < n; ++j)
        if (landing[j] <= landing[j - 1]) fold = fold < 0 ? steps : std::min(fold, steps);
  }
  if (fold >= 0) {
    const double admissible = s + (fold - 1) * dt;
    std::ostringstream msg;
    msg << "characteristics cross before t=" << t_end << "; largest admissible t is " << admissible;
    throw HorizonError(msg.str(), admissible);
  }

  if (opts.check_residual && steps >= 3) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> probes;
    for (Eigen::Index j = 0; j < n; j += opts.probe_stride)
      for (Eigen::Index k = 0; k < n; k += opts.probe_stride) probes.emplace_back(j, k);
    std::vector<std::vector<TracedPoint>> shifted;
    for (int off : {-2, -1, 1, 2})
      shifted.push_back(trace_points(kappa, s, t_end + off * dt, steps + off, g, probes, opts.newton_max));
    double worst = 0;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const auto [j, k] = probes[i];
      const double djdt =
          (shifted[0][i].excess - 8 * shifted[1][i].excess + 8 * shifted[2][i].excess - shifted[3][i].excess) /
          (12 * dt);
      Point p(d);
      for (int a = 0; a < d; ++a) p[a] = phi.grad_x[a](j, k);
      const Point x = g.point(j);
      const double r = std::abs(djdt - kappa(t_end, x, p).real()) / weight(x, g.frequency(k));
      worst = std::max(worst, r);
    }
    phi.residual = worst;
    if (worst > opts.residual_tol) {
      std::ostringstream msg;
      msg << "eikonal residual " << worst << " exceeds tolerance " << opts.residual_tol;
      throw AccuracyError(msg.str(), worst);
    }
  }
  const PhaseRegularity reg = phase_regularity(phi);
  phi.delta_min = reg.delta_min;
  phi.certified = reg.delta_min > 0;
  return phi;
}

namespace {

// First derivatives of J from the traced gradients, as complex tables for the seminorm helpers.
std::vector<CMatrix> excess_gradients(const PhaseFunction& phi) {
  const Grid& g = phi.grid;
  const int d = g.dims();
  const Eigen::Index n = g.size();
  std::vector<CMatrix> out;
  for (int a = 0; a < d; ++a) {
    CMatrix dx(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) dx(j, k) = phi.grad_x[a](j, k) - g.frequency(k)[a];
    out.push_back(std::move(dx));
  }
  for (int a = 0; a < d; ++a) {
    CMatrix dk(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index k = 0; k < n; ++k) dk(j, k) = phi.grad_xi[a](j, k) - g.point(j)[a];
    out.push_back(std::move(dk));
  }
  return out;
}

}  // namespace

PhaseRegularity phase_regularity(const PhaseFunction& phi) {
  const Grid& g = phi.grid;
  const int d = g.dims();
  const Eigen::Index n = g.size();
  PhaseRegularity out;

  // Mixed Hessian phi''_{x xi}(a, b) = d_xi_b of grad_x[a].
  std::vector<CMatrix> mixed(d * d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) mixed[a * d + b] = table_difference(g, phi.grad_x[a].cast<Complex>(), d + b);
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k) {
      double det = d == 1 ? mixed[0](j, k).real()
                          : mixed[0](j, k).real() * mixed[3](j, k).real() - mixed[1](j, k).real() * mixed[2](j, k).real();
      dmin = std::min(dmin, std::abs(det));
    }
  out.delta_min = dmin;

  Eigen::VectorXd bx(n), bk(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    bx[j] = bracket(g.point(j));
    bk[j] = bracket(g.frequency(j));
  }
  // |D_xi^alpha D_x^beta J| / (<x>^(1-|beta|) <xi>^(1-|alpha|))
  auto sup = [&](const CMatrix& t, int nx, int nxi) {
    const Eigen::VectorXd wx = bx.array().pow(nx - 1.0);
    const Eigen::VectorXd wk = bk.array().pow(nxi - 1.0);
    return ((t.cwiseAbs().array().colwise() * wx.array()).rowwise() * wk.transpose().array()).maxCoeff();
  };
  const CMatrix jt = phi.excess.cast<Complex>();
  double first = sup(jt, 0, 0);
  const auto grads = excess_gradients(phi);
  for (int p = 0; p < 2 * d; ++p) first = std::max(first, sup(grads[p], p < d, p >= d));
  double second_max = 0, second_sum = 0;
  for (int p = 0; p < 2 * d; ++p)
    for (int q = p; q < 2 * d; ++q) {
      const int nx = (p < d) + (q < d);
      const double v = sup(table_difference(g, grads[p], q), nx, 2 - nx);
      second_max = std::max(second_max, v);
      second_sum += v;
    }
  out.j_seminorm = std::max(first, second_max);
  out.lambda = first + second_sum;
  out.c = phi.t != phi.s ? out.lambda / std::abs(phi.t - phi.s) : 0.0;
  return out;
}

double check_adjoint_eikonal(const PhaseFunction& phi, const Symbol& kappa, double ds) {
  const Grid& g = phi.grid;
  const int d = g.dims();
  const Eigen::Index n = g.size();
  const int steps = std::max(phi.steps, 1);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> probes;
  const int stride = std::max<int>(1, static_cast<int>(n / 32));
  for (Eigen::Index j = 0; j < n; j += stride)
    for (Eigen::Index k = 0; k < n; k += stride) probes.emplace_back(j, k);
  const auto plus = trace_points(kappa, phi.s + ds, phi.t, steps, g, probes);
  const auto minus = trace_points(kappa, phi.s - ds, phi.t, steps, g, probes);
  double worst = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto [j, k] = probes[i];
    const Point xi = g.frequency(k);
    Point y(d);
    for (int a = 0; a < d; ++a) y[a] = phi.grad_xi[a](j, k);
    const double dphids = (plus[i].excess - minus[i].excess) / (2 * ds);
    const double r = std::abs(dphids + kappa(phi.s, y, xi).real()) / weight(g.point(j), xi);
    worst = std::max(worst, r);
  }
  return worst;
}

double admissible_horizon(const Symbol& kappa, double s, double t_max, const Grid& g, const EikonalOptions& opts,
                          int max_halvings) {
  double span = t_max - s;
  for (int i = 0; i <= max_halvings; ++i) {
    try {
      PhaseFunction phi = solve_eikonal(kappa, s, s + span, g, opts);
      if (phi.delta_min >= opts.delta_threshold) return s + span;
    } catch (const HorizonError&) {
    } catch (const AccuracyError&) {
    }
    span /= 2;
  }
  throw HorizonError("no admissible horizon found after halving", s);
}

}  // namespace sgspde
