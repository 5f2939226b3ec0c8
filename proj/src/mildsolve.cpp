#include "sgspde/mildsolve.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <thread>

#include "sgspde/errors.hpp"

namespace sgspde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense weight <x>^z <D>^zeta on the lattice.
CMatrix weight_matrix(const Grid& g, SobolevKatoIndex idx) {
  const Eigen::Index n = g.size();
  CMatrix table(n, n);
  for (Eigen::Index k = 0; k < n; ++k) table.col(k).setConstant(std::pow(bracket(g.frequency(k)), idx.zeta));
  CMatrix w = op_matrix_from_table(g, table);
  for (Eigen::Index j = 0; j < n; ++j) w.row(j) *= std::pow(bracket(g.point(j)), idx.z);
  return w;
}

double largest_singular_value(const CMatrix& a) {
  if (a.rows() <= 256) return Eigen::BDCSVD<CMatrix>(a).singularValues()(0);
  CVector v = CVector::Ones(a.cols()).normalized();
  double sigma = 0;
  for (int it = 0; it < 200; ++it) {
    const CVector w = a.adjoint() * (a * v);
    const double nv = w.norm();
    if (nv == 0) return 0;
    const double next = std::sqrt(nv);
    v = w / nv;
    if (std::abs(next - sigma) <= 1e-10 * next) return next;
    sigma = next;
  }
  return sigma;
}

Field scaled_to(const Field& f, SobolevKatoIndex idx, double radius) {
  const double n = sk_norm(f, idx);
  return n > 0 ? Field(f.grid, f.values * (radius / n)) : f;
}

double envelope_max(const Nonlinearity& g, double horizon) {
  double c = 0;
  for (int k = 0; k <= 32; ++k) c = std::max(c, g.envelope(horizon * k / 32));
  return c;
}

}  // namespace

// ---- nonlinearities

Field Nonlinearity::apply(double t, const Field& w) const {
  Field out(w.grid);
  if (is_zero) return out;
  for (Eigen::Index j = 0; j < w.grid.size(); ++j) out.values[j] = eval(t, w.grid.point(j), w.values[j].real());
  return out;
}

Nonlinearity Nonlinearity::zero() {
  Nonlinearity g;
  g.eval = [](double, const Point&, double) { return 0.0; };
  g.envelope = [](double) { return 0.0; };
  g.depends_on_u = false;
  g.is_zero = true;
  g.name = "zero";
  return g;
}

Nonlinearity Nonlinearity::source(Eval f, std::string name) {
  Nonlinearity g;
  g.eval = std::move(f);
  g.depends_on_u = false;
  g.name = std::move(name);
  return g;
}

Nonlinearity Nonlinearity::constant(double value) {
  Nonlinearity g = source([value](double, const Point&, double) { return value; }, "constant");
  g.is_zero = value == 0;
  return g;
}

Nonlinearity Nonlinearity::of(Eval f, LipClass lip, std::string name) {
  Nonlinearity g;
  g.eval = std::move(f);
  g.lip = lip;
  g.name = std::move(name);
  return g;
}

Nonlinearity weighted_saturation(double gap) {
  Nonlinearity g = Nonlinearity::of(
      [gap](double, const Point& x, double u) { return std::pow(bracket(x), -gap) * u / (1 + u * u); },
      {0, 0, gap, 0}, "weighted-saturation");
  g.envelope = [](double) { return 1.0; };
  return g;
}

Nonlinearity square_map(double zeta, double radius) {
  Nonlinearity g = Nonlinearity::of([](double, const Point&, double u) { return u * u; }, {0, zeta, 0, 0}, "square");
  g.local_radius = radius;
  return g;
}

LipschitzProbe lipschitz_probe(const Nonlinearity& g, const Grid& grid, int samples, double ball_radius,
                               double horizon, std::uint64_t seed) {
  if (samples < 1 || !(ball_radius > 0)) throw ArgumentError("lipschitz_probe: need samples and a positive radius");
  const SobolevKatoIndex src = g.lip.source(), dst = g.lip.target();
  LipschitzProbe out;
  out.samples = samples;
  const double scales[] = {1.0, 0.1, 0.01};
  for (int s = 0; s < samples; ++s) {
    const double t = samples > 1 ? horizon * s / (samples - 1) : 0;
    const double radius = ball_radius * (1 + s % 4) / 4.0;
    const Field w = scaled_to(random_bandlimited_field(grid, seed * 7919 + 2 * s), src, radius);
    const Field dir = random_bandlimited_field(grid, seed * 7919 + 2 * s + 1);
    Field v(grid, w.values + scaled_to(dir, src, scales[s % 3] * radius).values);
    if (sk_norm(v, src) > ball_radius) v = scaled_to(v, src, ball_radius);
    const Field gw = g.apply(t, w), gv = g.apply(t, v);
    const double growth = sk_norm(gw, dst) / (1 + sk_norm(w, src));
    const double dv = sk_norm(Field(grid, w.values - v.values), src);
    const double lip = dv > 0 ? sk_norm(Field(grid, gw.values - gv.values), dst) / dv : 0;
    out.growth = std::max(out.growth, growth);
    out.lipschitz = std::max(out.lipschitz, lip);
    if (g.envelope) {
      const double c = g.envelope(t) * (1 + 1e-9) + 1e-300;
      if (growth > c || lip > c)
        throw ContractViolation("nonlinearity '" + g.name + "' exceeds its envelope at sample " + std::to_string(s) +
                                    " (t=" + std::to_string(t) + ", seeds " + std::to_string(seed * 7919 + 2 * s) +
                                    "/" + std::to_string(seed * 7919 + 2 * s + 1) + ")",
                                std::max(growth, lip), g.envelope(t));
    }
  }
  return out;
}

double square_lipschitz_constant(const Grid& g) {
  if (g.dims() != 1) throw UnsupportedError("square_lipschitz_constant is defined for d = 1");
  double sum = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k) sum += g.dual_spacing() / std::pow(bracket(g.frequency(k)), 2);
  return 2 * std::sqrt(2.0) * std::sqrt(sum / std::numbers::pi);
}

SobolevKatoIndex iteration_index(const SPDEProblem& p, const FirstOrderSystem& sys) {
  return {p.index.z + sys.m - sys.l, p.index.zeta};
}

// ---- kernels

KernelFamily::KernelFamily(const FirstOrderSystem& sys, double dt, int steps, PropagatorFactory make)
    : sys_(std::make_shared<const FirstOrderSystem>(sys)), dt_(dt), steps_(steps), make_(std::move(make)) {
  if (!(dt > 0) || steps < 0) throw ArgumentError("KernelFamily: invalid time grid");
  const std::size_t count = sys.autonomous ? steps + 1 : std::size_t(steps + 1) * (steps + 2) / 2;
  cache_.resize(count);
}

const ScalarKernel& KernelFamily::at(int j, int i) const {
  if (i < 0 || j > steps_ || i > j) throw ArgumentError("KernelFamily: need 0 <= i <= j <= steps");
  const std::size_t slot = sys_->autonomous ? std::size_t(j - i) : std::size_t(j) * (j + 1) / 2 + i;
  auto& entry = cache_[slot];
  if (!entry) {
    const double s = sys_->autonomous ? 0 : i * dt_;
    entry = std::make_unique<ScalarKernel>(scalar_kernel(*sys_, s, s + (j - i) * dt_, make_));
  }
  return *entry;
}

void KernelFamily::warm() const {
  for (int j = 0; j <= steps_; ++j)
    for (int i = 0; i <= (sys_->autonomous ? 0 : j); ++i) at(j, i);
}

bool KernelFamily::multiplier() const { return at(std::min(1, steps_), 0).is_multiplier(); }

double KernelFamily::max_norm(SobolevKatoIndex from, SobolevKatoIndex to) const {
  const Grid& g = sys_->grid;
  const CMatrix wt = weight_matrix(g, to);
  const CMatrix wf_inv = weight_matrix(g, from).inverse();
  double best = 0;
  for (int j = 0; j <= steps_; ++j)
    for (int i = 0; i <= (sys_->autonomous ? 0 : j); ++i)
      best = std::max(best, largest_singular_value(wt * at(j, i).matrix() * wf_inv));
  return best;
}

// ---- contraction

double contraction_formula(double c, double t0, double sup_integral) { return 2 * c * t0 * (1 + sup_integral); }

ContractionEstimate contraction_constant(const SPDEProblem& p, const KernelFamily& kernels,
                                         const ContractionOptions& opts) {
  const FirstOrderSystem& sys = kernels.system();
  ContractionEstimate est;
  est.horizon = kernels.steps() * kernels.dt();
  auto lip = [&](const Nonlinearity& g) {
    if (g.is_zero || !g.depends_on_u) return 0.0;
    if (g.envelope) return envelope_max(g, est.horizon);
    const double r = std::min(opts.ball_radius, g.local_radius);
    return lipschitz_probe(g, sys.grid, opts.lipschitz_samples, r, est.horizon, opts.seed).lipschitz;
  };
  est.lipschitz = std::max(lip(p.gamma), lip(p.sigma));
  const CompatibilityValue ci = compatibility_integral(p.measure, sys.m - sys.l);
  est.sup_integral = ci.infinite ? kInf : ci.value;
  if (est.lipschitz == 0) return est;
  est.kernel_norm = kernels.max_norm(p.index, iteration_index(p, sys));
  est.kappa = contraction_formula(est.kernel_norm * est.lipschitz, est.horizon, est.sup_integral);
  return est;
}

HorizonChoice choose_horizon(const SPDEProblem& p, const FirstOrderSystem& sys, double dt,
                             const PropagatorFactory& make, double floor, const ContractionOptions& opts) {
  HorizonChoice out;
  double horizon = p.horizon;
  while (true) {
    const int steps = std::max(1, static_cast<int>(std::lround(horizon / dt)));
    const KernelFamily kernels(sys, dt, steps, make);
    out.estimate = contraction_constant(p, kernels, opts);
    out.kappas.push_back(out.estimate.kappa);
    if (out.estimate.kappa < 1) {
      out.horizon = steps * dt;
      out.steps = steps;
      return out;
    }
    horizon /= 2;
    if (horizon < floor || horizon < dt)
      throw NoContractionError("no contraction down to T0=" + std::to_string(horizon * 2) +
                                   " (kappa=" + std::to_string(out.estimate.kappa) + ")",
                               out.estimate.kappa);
  }
}

// ---- mild map and Picard iteration

std::vector<Field> noise_increments(const CMBasis& basis, const WienerPath& path, int steps) {
  if (path.steps < steps) throw ArgumentError("path shorter than the time grid");
  if (path.increments.rows() < basis.size()) throw ShapeError("path has fewer modes than the basis");
  const Grid& g = basis.grid;
  Eigen::MatrixXd modes(g.size(), basis.size());
  for (int k = 0; k < basis.size(); ++k) modes.col(k) = basis.fields[k].values.real();
  const Eigen::MatrixXd fields = modes * path.increments.topLeftCorner(basis.size(), steps);
  std::vector<Field> out;
  out.reserve(steps);
  for (int i = 0; i < steps; ++i) out.emplace_back(g, CVector(fields.col(i).cast<Complex>()));
  return out;
}

std::vector<Field> homogeneous_term(const SPDEProblem& p, const KernelFamily& kernels) {
  const FirstOrderSystem& sys = kernels.system();
  const int n = kernels.steps();
  std::vector<Field> v0(n + 1, Field(sys.grid));
  bool any = false;
  for (const Field& f : p.cauchy_data) any = any || f.values.cwiseAbs().maxCoeff() > 0;
  if (!any) return v0;
  if (static_cast<int>(p.cauchy_data.size()) != sys.m) throw ShapeError("expected m Cauchy data fields");
  for (int j = 0; j <= n; ++j) v0[j] = v0_term(sys, p.cauchy_data, j * kernels.dt(), kernels.factory());
  return v0;
}

std::vector<Field> mild_map(const SPDEProblem& p, const KernelFamily& kernels, const std::vector<Field>& v0,
                            const std::vector<Field>& u, const std::vector<Field>& dW) {
  const int n = kernels.steps();
  const double dt = kernels.dt();
  const Grid& g = kernels.system().grid;
  const bool has_gamma = !p.gamma.is_zero, has_sigma = !p.sigma.is_zero;
  std::vector<Field> out = v0;
  if (!has_gamma && !has_sigma) return out;
  if (has_sigma && static_cast<int>(dW.size()) < n) throw ShapeError("missing noise increments");

  std::vector<CVector> gam(n + 1), sig(n);
  const bool spectral = kernels.multiplier();
  for (int i = 0; i <= n; ++i) {
    const double t = i * dt;
    if (has_gamma) {
      const Field f = p.gamma.apply(t, u[i]);
      gam[i] = spectral ? forward_transform(f) : f.values;
    }
    if (has_sigma && i < n) {
      Field f = p.sigma.apply(t, u[i]);
      f.values = f.values.cwiseProduct(dW[i].values);
      sig[i] = spectral ? forward_transform(f) : f.values;
    }
  }
  for (int j = 1; j <= n; ++j) {
    CVector acc = CVector::Zero(g.size());
    for (int i = 0; i <= j; ++i) {
      const ScalarKernel& k = kernels.at(j, i);
      const double w = (i == 0 || i == j) ? 0.5 * dt : dt;
      if (spectral) {
        if (has_gamma) acc.array() += w * k.multiplier.array() * gam[i].array();
        if (has_sigma && i < j) acc.array() += k.multiplier.array() * sig[i].array();
      } else {
        if (has_gamma) acc.noalias() += w * (k.dense * gam[i]);
        if (has_sigma && i < j) acc.noalias() += k.dense * sig[i];
      }
    }
    out[j].values += spectral ? inverse_transform(g, acc).values : acc;
  }
  return out;
}

namespace {

PicardResult picard_iterate(const SPDEProblem& p, const KernelFamily& kernels, const std::vector<Field>& v0,
                            const std::vector<Field>& dW, const PicardOptions& opts) {
  const FirstOrderSystem& sys = kernels.system();
  const int n = kernels.steps();
  const SobolevKatoIndex it = iteration_index(p, sys);
  PicardResult res;
  for (int j = 0; j <= n; ++j) res.times.push_back(j * kernels.dt());
  const double radius = std::min(p.gamma.local_radius, p.sigma.local_radius);

  auto sup_diff = [&](const std::vector<Field>& a, const std::vector<Field>& b) {
    double d = 0;
    for (int j = 0; j <= n; ++j) d = std::max(d, sk_norm(Field(a[j].grid, a[j].values - b[j].values), it));
    return d;
  };
  std::vector<Field> u = v0;
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    std::vector<Field> next = mild_map(p, kernels, v0, u, dW);
    if (std::isfinite(radius))
      for (Field& f : next)
        if (sk_norm(f, it) > radius) {
          f = scaled_to(f, it, radius);
          res.clipped = true;
        }
    const double d = sup_diff(next, u);
    res.differences.push_back(d);
    u = std::move(next);
    res.iterations = iter;
    if (!std::isfinite(d)) break;
    if (d > opts.tol && !p.gamma.depends_on_u && !p.sigma.depends_on_u && !res.clipped && iter < opts.max_iter) {
      // The map is constant in u: the next image repeats this one exactly.
      res.differences.push_back(0);
      res.iterations = iter + 1;
      res.u = std::move(u);
      return res;
    }
    if (d <= opts.tol) {
      res.residual = sup_diff(mild_map(p, kernels, v0, u, dW), u);
      res.u = std::move(u);
      return res;
    }
  }
  throw NonConvergenceError("Picard iteration did not reach tol=" + std::to_string(opts.tol) + " in " +
                                std::to_string(res.iterations) + " iterations",
                            res.differences);
}

}  // namespace

PicardResult picard_solve(const SPDEProblem& p, const KernelFamily& kernels, const CMBasis& basis,
                          const WienerPath& path, const PicardOptions& opts) {
  const std::vector<Field> dW =
      p.sigma.is_zero ? std::vector<Field>{} : noise_increments(basis, path, kernels.steps());
  return picard_iterate(p, kernels, homogeneous_term(p, kernels), dW, opts);
}

// ---- ensembles

MonteCarloStats monte_carlo_moments(const SPDEProblem& p, const KernelFamily& kernels, const CMBasis& basis,
                                    int paths, std::uint64_t seed, const PicardOptions& opts, int threads) {
  if (paths < 1) throw ArgumentError("monte_carlo_moments: need at least one path");
  const int n = kernels.steps();
  const Eigen::Index size = kernels.system().grid.size();
  const SobolevKatoIndex it = iteration_index(p, kernels.system());
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  kernels.warm();
  kernels.multiplier();
  const std::vector<Field> v0 = homogeneous_term(p, kernels);

  struct PathOutcome {
    Eigen::MatrixXd u;  // size x (n + 1)
    Eigen::VectorXd norms;
    std::string error;
  };
  auto solve_one = [&](int q, PathOutcome& out) {
    try {
      const WienerPath path = sample_path(basis.size(), kernels.dt(), n, seed, q);
      const std::vector<Field> dW = p.sigma.is_zero ? std::vector<Field>{} : noise_increments(basis, path, n);
      const PicardResult r = picard_iterate(p, kernels, v0, dW, opts);
      out.u.resize(size, n + 1);
      out.norms.resize(n + 1);
      for (int j = 0; j <= n; ++j) {
        out.u.col(j) = r.u[j].values.real();
        out.norms[j] = sk_norm(r.u[j], it);
      }
    } catch (const Error& e) {
      out.error = e.what();
    }
  };

  MonteCarloStats st;
  for (int j = 0; j <= n; ++j) st.times.push_back(j * kernels.dt());
  st.mean.assign(n + 1, Eigen::VectorXd::Zero(size));
  std::vector<Eigen::VectorXd> m2(n + 1, Eigen::VectorXd::Zero(size));
  std::vector<double> nmean(n + 1, 0), nm2(n + 1, 0);
  int ok = 0;
  const int chunk = 16 * threads;
  std::vector<PathOutcome> batch(chunk);
  for (int first = 0; first < paths; first += chunk) {
    const int count = std::min(chunk, paths - first);
    for (int k = 0; k < count; ++k) batch[k] = PathOutcome{};
    if (threads == 1) {
      for (int k = 0; k < count; ++k) solve_one(first + k, batch[k]);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
          for (int k = w; k < count; k += threads) solve_one(first + k, batch[k]);
        });
      for (auto& t : pool) t.join();
    }
    for (int k = 0; k < count; ++k) {
      const PathOutcome& r = batch[k];
      if (!r.error.empty()) {
        ++st.failures;
        st.failure_messages.push_back("path " + std::to_string(first + k) + ": " + r.error);
        continue;
      }
      ++ok;
      for (int j = 0; j <= n; ++j) {
        const Eigen::VectorXd delta = r.u.col(j) - st.mean[j];
        st.mean[j] += delta / ok;
        m2[j] += delta.cwiseProduct(r.u.col(j) - st.mean[j]);
        const double dn = r.norms[j] - nmean[j];
        nmean[j] += dn / ok;
        nm2[j] += dn * (r.norms[j] - nmean[j]);
      }
    }
  }
  st.paths = ok;
  st.variance.resize(n + 1);
  st.norm_mean = nmean;
  st.norm_stderr.assign(n + 1, 0);
  for (int j = 0; j <= n; ++j) {
    st.variance[j] = ok > 1 ? Eigen::VectorXd(m2[j] / (ok - 1)) : Eigen::VectorXd::Zero(size);
    st.norm_stderr[j] = ok > 1 ? std::sqrt(nm2[j] / (ok - 1) / ok) : 0;
  }
  return st;
}

double linear_crosscheck(const SPDEProblem& p, const KernelFamily& kernels, const CMBasis& basis,
                         const WienerPath& path) {
  if (p.gamma.depends_on_u || p.sigma.depends_on_u)
    throw ArgumentError("linear_crosscheck needs gamma and sigma independent of u");
  const int n = kernels.steps();
  const Grid& g = kernels.system().grid;
  Field by_modes(g), by_fields(g);
  if (p.sigma.is_zero || n == 0) return 0;
  const std::vector<Field> dW = noise_increments(basis, path, n);
  for (int i = 0; i < n; ++i) {
    const Field s = p.sigma.apply(i * kernels.dt(), Field(g));
    const ScalarKernel& k = kernels.at(n, i);
    for (int m = 0; m < basis.size(); ++m)
      by_modes.values += path.increments(m, i) * k.apply(Field(g, s.values.cwiseProduct(basis.fields[m].values))).values;
    by_fields.values += k.apply(Field(g, s.values.cwiseProduct(dW[i].values))).values;
  }
  const double scale = std::max(by_modes.values.norm(), by_fields.values.norm());
  return scale > 0 ? (by_modes.values - by_fields.values).norm() / scale : 0;
}

}  // namespace sgspde
