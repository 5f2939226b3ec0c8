#include "sgspde/noisekit.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sgspde/errors.hpp"

namespace sgspde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre rule on [-1, 1] by Golub-Welsch.
struct Rule {
  Eigen::VectorXd nodes, weights;
};

const Rule& gauss_legendre(int n) {
  thread_local std::vector<Rule> cache(64);
  Rule& r = cache.at(n);
  if (r.nodes.size() == n) return r;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = k / std::sqrt(4.0 * k * k - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  r.nodes = es.eigenvalues();
  r.weights = 2 * es.eigenvectors().row(0).transpose().array().square();
  return r;
}

// Composite rule on [a, b], geometrically graded toward a, b and each interior breakpoint.
void graded_rule(double a, double b, std::vector<double> breaks, int levels, int order, std::vector<double>& x,
                 std::vector<double>& w) {
  x.clear();
  w.clear();
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  const Rule& gl = gauss_legendre(order);
  auto segment = [&](double p, double q) {
    const double half = 0.5 * (q - p), mid = 0.5 * (p + q);
    for (int i = 0; i < order; ++i) {
      x.push_back(mid + half * gl.nodes[i]);
      w.push_back(half * gl.weights[i]);
    }
  };
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double p = breaks[i], q = breaks[i + 1];
    if (p < a || q > b || !(q > p)) continue;
    const double mid = 0.5 * (p + q);
    for (int j = 0; j < levels; ++j) {
      const double f0 = std::ldexp(1.0, -j - 1), f1 = std::ldexp(1.0, -j);
      segment(p + (mid - p) * f0, p + (mid - p) * f1);
      segment(q - (q - mid) * f1, q - (q - mid) * f0);
    }
    const double tail = std::ldexp(1.0, -levels);
    segment(p, p + (mid - p) * tail);
    segment(q - (q - mid) * tail, q);
  }
}

// Tensor graded quadrature of f over [-half, half]^d with breakpoints per axis.
double integrate_box(const std::function<double(const Point&)>& f, int d, double half,
                     const std::vector<std::vector<double>>& breaks) {
  const int levels = d == 1 ? 60 : 16, order = d == 1 ? 16 : 8;
  std::vector<std::vector<double>> xs(d), ws(d);
  for (int a = 0; a < d; ++a) graded_rule(-half, half, breaks[a], levels, order, xs[a], ws[a]);
  double total = 0;
  Point p(d);
  if (d == 1) {
    for (std::size_t i = 0; i < xs[0].size(); ++i) {
      p[0] = xs[0][i];
      total += ws[0][i] * f(p);
    }
    return total;
  }
  for (std::size_t i = 0; i < xs[0].size(); ++i)
    for (std::size_t j = 0; j < xs[1].size(); ++j) {
      p[0] = xs[0][i];
      p[1] = xs[1][j];
      total += ws[0][i] * ws[1][j] * f(p);
    }
  return total;
}

// Decay exponent p of rho(R u) ~ R^-p sampled along axes and diagonals.
double decay_exponent(const SpectralMeasure& mu, double radius) {
  const int d = mu.dims();
  std::vector<Point> dirs;
  for (int a = 0; a < d; ++a) {
    Point u = Point::Zero(d);
    u[a] = 1;
    dirs.push_back(u);
    dirs.push_back(-u);
  }
  dirs.push_back(Point::Ones(d).normalized());
  double p = kInf;
  for (const Point& u : dirs) {
    const double r1 = mu.density_at(radius * u), r2 = mu.density_at(2 * radius * u);
    if (r1 <= 0) continue;
    p = std::min(p, r2 > 0 ? std::log2(r1 / r2) : kInf);
  }
  return p;
}

double density_integral(const SpectralMeasure& mu, double exponent, const Point& eta) {
  const int d = mu.dims();
  auto f = [&](const Point& xi) {
    const double r = mu.density_at(xi);
    return r == 0 ? 0.0 : r * std::pow(1 + (xi + eta).squaredNorm(), -exponent);
  };
  std::vector<std::vector<double>> breaks(d);
  for (int a = 0; a < d; ++a) breaks[a] = {0.0, -eta[a]};
  if (mu.truncated()) return integrate_box(f, d, mu.band(), breaks);
  const double radius = std::max({mu.band(), 10.0, 4 * eta.norm()});
  if (decay_exponent(mu, radius) + 2 * exponent <= d + 1e-6) return kInf;
  double half = std::max(mu.band(), 1.0);
  double prev = integrate_box(f, d, half, breaks);
  for (int k = 0; k < 40; ++k) {
    half *= 2;
    const double cur = integrate_box(f, d, half, breaks);
    if (std::abs(cur - prev) <= 1e-10 * std::abs(cur)) return cur;
    prev = cur;
  }
  return kInf;
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double unit_open(std::uint64_t bits) { return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; }

// Lexicographic sign: +1 when the first nonzero component is positive.
int lexicographic_sign(const Point& xi) {
  for (Eigen::Index i = 0; i < xi.size(); ++i) {
    if (xi[i] > 0) return 1;
    if (xi[i] < 0) return -1;
  }
  return 0;
}

}  // namespace

// ---- measures

SpectralMeasure SpectralMeasure::atoms(std::vector<Atom> atoms, bool symmetric) {
  if (atoms.empty()) throw ArgumentError("atomic measure needs at least one atom");
  SpectralMeasure mu;
  mu.kind_ = Kind::Atoms;
  mu.d_ = static_cast<int>(atoms.front().location.size());
  for (const Atom& a : atoms)
    if (a.location.size() != mu.d_) throw ShapeError("atoms of mixed dimension");
  mu.atoms_ = std::move(atoms);
  mu.symmetric_ = symmetric;
  mu.name_ = "atoms";
  return mu;
}

SpectralMeasure SpectralMeasure::density(int d, DensityFn rho, double band, bool truncated, bool symmetric,
                                         std::string name) {
  if (d != 1 && d != 2) throw ShapeError("density measures support d = 1 or 2");
  if (!(band > 0)) throw ArgumentError("density band must be positive");
  SpectralMeasure mu;
  mu.kind_ = Kind::Density;
  mu.d_ = d;
  mu.rho_ = std::move(rho);
  mu.band_ = band;
  mu.truncated_ = truncated;
  mu.symmetric_ = symmetric;
  mu.name_ = std::move(name);
  return mu;
}

SpectralMeasure SpectralMeasure::lebesgue(int d, double scale) {
  if (d != 1 && d != 2) throw ShapeError("Lebesgue measure supports d = 1 or 2");
  if (!(scale > 0)) throw ArgumentError("Lebesgue scale must be positive");
  SpectralMeasure mu;
  mu.kind_ = Kind::Lebesgue;
  mu.d_ = d;
  mu.scale_ = scale;
  mu.truncated_ = false;
  mu.name_ = "lebesgue";
  return mu;
}

SpectralMeasure SpectralMeasure::white_noise(int d) {
  SpectralMeasure mu = lebesgue(d, std::pow(2 * std::numbers::pi, -d));
  mu.name_ = "white";
  return mu;
}

double SpectralMeasure::density_at(const Point& xi) const {
  switch (kind_) {
    case Kind::Lebesgue: return scale_;
    case Kind::Density:
      if (truncated_ && xi.cwiseAbs().maxCoeff() > band_) return 0;
      return rho_(xi);
    case Kind::Atoms: break;
  }
  throw ArgumentError("atomic measure has no density");
}

void SpectralMeasure::validate(std::uint64_t seed) const {
  if (kind_ == Kind::Atoms) {
    for (const Atom& a : atoms_) {
      if (!(a.mass >= 0) || !std::isfinite(a.mass)) throw ArgumentError("atom mass must be nonnegative and finite");
      if (!a.location.allFinite()) throw ArgumentError("atom location must be finite");
    }
    if (!symmetric_) return;
    for (const Atom& a : atoms_) {
      double mirrored = 0, here = 0;
      for (const Atom& b : atoms_) {
        const double tol = 1e-12 * (1 + a.location.norm());
        if ((b.location + a.location).norm() <= tol) mirrored += b.mass;
        if ((b.location - a.location).norm() <= tol) here += b.mass;
      }
      if (std::abs(mirrored - here) > 1e-12 * std::max(1.0, here))
        throw ArgumentError("atomic measure is not symmetric: unmatched mass at a location");
    }
    return;
  }
  if (kind_ == Kind::Lebesgue) return;
  std::uint64_t state = seed;
  for (int k = 0; k < 256; ++k) {
    Point xi(d_);
    for (int a = 0; a < d_; ++a) xi[a] = (2 * unit_open(state = splitmix(state)) - 1) * band_;
    const double r = rho_(xi);
    if (!(r >= 0) || !std::isfinite(r)) throw ArgumentError("density must be nonnegative and finite");
    if (symmetric_ && std::abs(r - rho_(-xi)) > 1e-12 * std::max(1.0, r))
      throw ArgumentError("density is not even");
  }
}

// ---- compatibility integrals

std::vector<Point> default_eta_grid(int d, double half, int per_axis) {
  if (per_axis < 1) throw ArgumentError("eta grid needs at least one point per axis");
  std::vector<double> axis(per_axis);
  for (int i = 0; i < per_axis; ++i) axis[i] = per_axis == 1 ? 0 : -half + 2 * half * i / (per_axis - 1);
  std::vector<Point> out;
  if (d == 1) {
    for (double a : axis) out.push_back(Point::Constant(1, a));
  } else {
    for (double a : axis)
      for (double b : axis) {
        Point p(2);
        p << a, b;
        out.push_back(p);
      }
  }
  for (int a = 0; a < d; ++a)
    for (double sgn : {-1.0, 1.0}) {
      Point p = Point::Zero(d);
      p[a] = sgn * 10 * half;
      out.push_back(p);
    }
  return out;
}

CompatibilityValue compatibility_integral(const SpectralMeasure& mu, double exponent,
                                          const std::vector<Point>& eta_grid) {
  if (!(exponent >= 0)) throw ArgumentError("compatibility exponent must be nonnegative");
  if (eta_grid.empty()) throw ArgumentError("empty eta grid");
  const int d = mu.dims();
  CompatibilityValue out;
  out.argmax = Point::Zero(d);
  if (mu.kind() == SpectralMeasure::Kind::Lebesgue) {
    if (exponent <= d / 2.0) {
      out.infinite = true;
      out.value = kInf;
      return out;
    }
    out.value = mu.scale() * std::pow(std::numbers::pi, d / 2.0) * std::tgamma(exponent - d / 2.0) / std::tgamma(exponent);
    return out;
  }
  out.value = -1;
  for (const Point& eta : eta_grid) {
    if (eta.size() != d) throw ShapeError("eta point has the wrong dimension");
    double v = 0;
    if (mu.kind() == SpectralMeasure::Kind::Atoms) {
      for (const Atom& a : mu.atom_list()) v += a.mass * std::pow(1 + (a.location + eta).squaredNorm(), -exponent);
    } else {
      v = density_integral(mu, exponent, eta);
    }
    if (!std::isfinite(v)) {
      out.infinite = true;
      out.value = kInf;
      out.argmax = eta;
      return out;
    }
    if (v > out.value) {
      out.value = v;
      out.argmax = eta;
    }
  }
  return out;
}

CompatibilityValue compatibility_integral(const SpectralMeasure& mu, double exponent) {
  const int d = mu.dims();
  double half = 1;
  int per_axis = d == 1 ? 41 : 21;
  if (mu.kind() == SpectralMeasure::Kind::Atoms) {
    for (const Atom& a : mu.atom_list()) half = std::max(half, a.location.norm() + 1);
  } else if (mu.kind() == SpectralMeasure::Kind::Density) {
    half = std::min(mu.band(), 50.0);
    if (d == 2) per_axis = 9;
  }
  return compatibility_integral(mu, exponent, default_eta_grid(d, half, per_axis));
}

// ---- Cameron-Martin basis

MeasureSupport measure_support(const SpectralMeasure& mu, const Grid& g) {
  if (mu.dims() != g.dims()) throw ShapeError("measure and grid dimensions differ");
  MeasureSupport s;
  if (mu.kind() == SpectralMeasure::Kind::Atoms) {
    std::vector<double> masses;
    for (const Atom& a : mu.atom_list()) {
      if (a.mass <= 0) continue;
      s.points.push_back(a.location);
      masses.push_back(a.mass);
    }
    s.mass = Eigen::Map<Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
    return s;
  }
  const int d = g.dims();
  const double dk = g.dual_spacing();
  const Rule& gl = gauss_legendre(8);
  std::vector<double> masses;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    bool edge = false;
    for (int a = 0; a < d; ++a) edge = edge || g.axis_index(k, a) == 0;
    if (edge) continue;  // no mirror on the lattice
    const Point xi = g.frequency(k);
    double w = 0;
    if (mu.kind() == SpectralMeasure::Kind::Lebesgue) {
      w = mu.scale() * g.dual_cell_volume();
    } else {
      Point p(d);
      if (d == 1) {
        for (int i = 0; i < 8; ++i) {
          p[0] = xi[0] + 0.5 * dk * gl.nodes[i];
          w += 0.5 * dk * gl.weights[i] * mu.density_at(p);
        }
      } else {
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j) {
            p << xi[0] + 0.5 * dk * gl.nodes[i], xi[1] + 0.5 * dk * gl.nodes[j];
            w += 0.25 * dk * dk * gl.weights[i] * gl.weights[j] * mu.density_at(p);
          }
      }
    }
    if (w <= 0) continue;
    s.points.push_back(xi);
    masses.push_back(w);
  }
  s.mass = Eigen::Map<Eigen::VectorXd>(masses.data(), static_cast<Eigen::Index>(masses.size()));
  return s;
}

CMatrix CMBasis::gram() const { return coefficients.adjoint() * support.mass.asDiagonal() * coefficients; }

CMBasis build_cm_basis(const SpectralMeasure& mu, int modes, const Grid& g) {
  if (modes < 1) throw ArgumentError("basis needs at least one mode");
  if (!mu.symmetric()) throw ArgumentError("Cameron-Martin basis needs a symmetric measure");
  mu.validate();
  CMBasis basis;
  basis.grid = g;
  basis.support = measure_support(mu, g);
  const auto& pts = basis.support.points;
  const Eigen::VectorXd& mass = basis.support.mass;
  const std::size_t np = pts.size();

  // Group support points into zero modes and +- pairs.
  struct Group {
    std::size_t plus, minus;  // equal for a zero-frequency point
    double mass;
  };
  std::vector<Group> groups;
  std::vector<bool> used(np, false);
  for (std::size_t i = 0; i < np; ++i) {
    if (used[i]) continue;
    const double tol = 1e-12 * (1 + pts[i].norm());
    if (pts[i].norm() <= tol) {
      used[i] = true;
      groups.push_back({i, i, mass[i]});
      continue;
    }
    std::size_t mirror = np;
    for (std::size_t j = i + 1; j < np; ++j)
      if (!used[j] && (pts[j] + pts[i]).norm() <= tol) {
        mirror = j;
        break;
      }
    if (mirror == np || std::abs(mass[mirror] - mass[i]) > 1e-12 * mass[i])
      throw ArgumentError("measure support is not symmetric");
    used[i] = used[mirror] = true;
    const bool positive = lexicographic_sign(pts[i]) > 0;
    groups.push_back({positive ? i : mirror, positive ? mirror : i, mass[i]});
  }
  std::stable_sort(groups.begin(), groups.end(), [&](const Group& a, const Group& b) {
    if (a.mass != b.mass) return a.mass > b.mass;
    return pts[a.plus].norm() < pts[b.plus].norm();
  });

  std::vector<CVector> cols;
  for (const Group& grp : groups) {
    if (static_cast<int>(cols.size()) >= modes) break;
    CVector c = CVector::Zero(static_cast<Eigen::Index>(np));
    if (grp.plus == grp.minus) {
      c[grp.plus] = 1 / std::sqrt(grp.mass);
      cols.push_back(c);
      continue;
    }
    const double amp = 1 / std::sqrt(2 * grp.mass);
    c[grp.plus] = c[grp.minus] = amp;
    cols.push_back(c);
    if (static_cast<int>(cols.size()) >= modes) break;
    c.setZero();
    c[grp.plus] = Complex(0, amp);
    c[grp.minus] = Complex(0, -amp);
    cols.push_back(c);
  }
  if (static_cast<int>(cols.size()) < modes)
    basis.warning = "requested " + std::to_string(modes) + " modes, measure supports " + std::to_string(cols.size()) +
                    " on this grid; basis reduced";
  basis.coefficients.resize(static_cast<Eigen::Index>(np), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) basis.coefficients.col(static_cast<Eigen::Index>(k)) = cols[k];

  // e_k(x) = sum_a exp(-i x . xi_a) mass_a f_k(xi_a).
  CMatrix phase(g.size(), static_cast<Eigen::Index>(np));
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const Point x = g.point(j);
    for (std::size_t a = 0; a < np; ++a) phase(j, static_cast<Eigen::Index>(a)) = std::exp(Complex(0, -x.dot(pts[a])));
  }
  const CMatrix realized = phase * mass.asDiagonal() * basis.coefficients;
  for (Eigen::Index k = 0; k < realized.cols(); ++k) {
    const double scale = std::max(1e-300, realized.col(k).cwiseAbs().maxCoeff());
    const double imag = realized.col(k).imag().cwiseAbs().maxCoeff() / scale;
    if (imag > 1e-12) throw AccuracyError("realized basis field is not real", imag);
    basis.fields.emplace_back(g, CVector(realized.col(k).real().cast<Complex>()));
  }
  return basis;
}

// ---- Wiener paths

int WienerPath::step_at(double t) const {
  const double r = t / dt;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * std::max(1.0, std::abs(r)) || k < 0 || k > steps)
    throw ArgumentError("time " + std::to_string(t) + " is not on the path grid");
  return static_cast<int>(k);
}

namespace {

std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path, std::uint64_t mode) {
  return splitmix(splitmix(splitmix(seed) ^ path) ^ mode);
}

double keyed_normal(std::uint64_t stream, std::uint64_t step) {
  const std::uint64_t key = splitmix(stream ^ step);
  const double u1 = unit_open(splitmix(key ^ 0x5851f42d4c957f2dULL));
  const double u2 = unit_open(splitmix(key ^ 0x14057b7ef767814fULL));
  return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

}  // namespace

double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t mode, std::uint64_t step) {
  return keyed_normal(stream_key(seed, path, mode), step);
}

WienerPath sample_path(int modes, double dt, int steps, std::uint64_t seed, std::uint64_t path_index) {
  if (modes < 0 || steps < 0 || !(dt > 0)) throw ArgumentError("invalid Wiener path shape");
  WienerPath p;
  p.dt = dt;
  p.steps = steps;
  p.seed = seed;
  p.index = path_index;
  p.increments.resize(modes, steps);
  const double sd = std::sqrt(dt);
  for (int k = 0; k < modes; ++k) {
    const std::uint64_t stream = stream_key(seed, path_index, k);
    for (int i = 0; i < steps; ++i) p.increments(k, i) = sd * keyed_normal(stream, i);
  }
  return p;
}

Field noise_increment(const CMBasis& basis, const WienerPath& path, int step) {
  if (path.increments.rows() < basis.size()) throw ShapeError("path has fewer modes than the basis");
  if (step < 0 || step >= path.steps) throw ArgumentError("step outside the path");
  Field out(basis.grid);
  for (int k = 0; k < basis.size(); ++k) out.values += path.increments(k, step) * basis.fields[k].values;
  return out;
}

// ---- covariance and Hilbert-Schmidt bookkeeping

Complex transform_at(const Field& u, const Point& xi) {
  const Grid& g = u.grid;
  Complex acc = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j) acc += std::exp(Complex(0, -g.point(j).dot(xi))) * u.values[j];
  return acc * g.cell_volume();
}

CovarianceCheck covariance_check(const SpectralMeasure& mu, const CMBasis& basis, int paths, const Field& phi,
                                 const Field& psi, double dt, std::uint64_t seed) {
  if (paths < 2) throw ArgumentError("covariance check needs at least two paths");
  const Grid& g = basis.grid;
  const double h = g.cell_volume();
  const int K = basis.size();
  CVector a(K), b(K);
  for (int k = 0; k < K; ++k) {
    a[k] = h * basis.fields[k].values.dot(phi.values.conjugate());
    b[k] = h * basis.fields[k].values.dot(psi.values.conjugate());
  }
  // dot conjugates its first argument; e_k is real so a_k = h sum e_k phi.
  std::vector<Complex> prod(paths);
  for (int p = 0; p < paths; ++p) {
    const WienerPath w = sample_path(K, dt, 1, seed, p);
    Complex xa = 0, xb = 0;
    for (int k = 0; k < K; ++k) {
      xa += a[k] * w.increments(k, 0);
      xb += b[k] * w.increments(k, 0);
    }
    prod[p] = xa * std::conj(xb);
  }
  CovarianceCheck out;
  out.empirical = std::accumulate(prod.begin(), prod.end(), Complex(0)) / double(paths);
  double var = 0;
  for (const Complex& z : prod) var += std::norm(z - out.empirical);
  out.standard_error = std::sqrt(var / (paths - 1) / paths);
  const MeasureSupport support = measure_support(mu, g);
  Complex target = 0;
  for (std::size_t i = 0; i < support.points.size(); ++i)
    target += support.mass[static_cast<Eigen::Index>(i)] * transform_at(phi, support.points[i]) *
              std::conj(transform_at(psi, support.points[i]));
  out.target = dt * target;
  out.z_score = out.standard_error > 0 ? std::abs(out.empirical - out.target) / out.standard_error
                                       : (std::abs(out.empirical - out.target) > 1e-14 ? kInf : 0.0);
  return out;
}

double hs_norm(const FieldMap& phi, const CMBasis& basis, SobolevKatoIndex idx) {
  double s = 0;
  for (const Field& e : basis.fields) s += std::pow(sk_norm(phi(e), idx), 2);
  return std::sqrt(s);
}

Field stochastic_integral(const TimeFieldMap& phi, const CMBasis& basis, const WienerPath& path, double s, double t) {
  if (path.increments.rows() < basis.size()) throw ShapeError("path has fewer modes than the basis");
  const int i0 = path.step_at(s), i1 = path.step_at(t);
  Field out(basis.grid);
  for (int i = i0; i < i1; ++i) {
    const double si = path.time(i);
    for (int k = 0; k < basis.size(); ++k) out.values += path.increments(k, i) * phi(si, basis.fields[k]).values;
  }
  return out;
}

IsometryCheck ito_isometry_check(const TimeFieldMap& phi, const CMBasis& basis, SobolevKatoIndex idx, double s,
                                 double t, int steps, int paths, std::uint64_t seed) {
  if (steps < 1 || paths < 2 || !(t > s) || s < 0) throw ArgumentError("invalid isometry check setup");
  const double dt = (t - s) / steps;
  const int offset = static_cast<int>(std::lround(s / dt));
  if (std::abs(offset * dt - s) > 1e-9 * std::max(1.0, s)) throw ArgumentError("s must be a multiple of the step");
  const int K = basis.size();
  auto hs2 = [&](double theta) {
    double acc = 0;
    for (const Field& e : basis.fields) acc += std::pow(sk_norm(phi(theta, e), idx), 2);
    return acc;
  };
  IsometryCheck out;
  // Images phi(s_i)(e_k) as columns i * K + k, split into real and imaginary parts.
  const Eigen::Index n = basis.grid.size(), cols = Eigen::Index(steps) * K;
  Eigen::MatrixXd images_re(n, cols), images_im(n, cols);
  for (int i = 0; i < steps; ++i) {
    const double si = s + i * dt;
    for (int k = 0; k < K; ++k) {
      const CVector v = phi(si, basis.fields[k]).values;
      images_re.col(Eigen::Index(i) * K + k) = v.real();
      images_im.col(Eigen::Index(i) * K + k) = v.imag();
    }
    out.discrete_target += dt * hs2(si);
  }
  // Composite Simpson on 2 * steps panels.
  const int panels = 2 * steps;
  const double hq = (t - s) / panels;
  for (int j = 0; j <= panels; ++j) {
    const double wgt = (j == 0 || j == panels) ? 1 : (j % 2 ? 4 : 2);
    out.target += wgt * hs2(s + j * hq);
  }
  out.target *= hq / 3;

  const bool real_images = images_im.isZero(0);
  std::vector<double> sq(paths);
  constexpr int kBatch = 128;
  Eigen::MatrixXd increments(cols, kBatch);
  for (int first = 0; first < paths; first += kBatch) {
    const int batch = std::min(kBatch, paths - first);
    for (int b = 0; b < batch; ++b) {
      const WienerPath w = sample_path(K, dt, offset + steps, seed, first + b);
      increments.col(b) = Eigen::Map<const Eigen::VectorXd>(w.increments.data() + Eigen::Index(offset) * K, cols);
    }
    const auto used = increments.leftCols(batch);
    const Eigen::MatrixXd re = images_re * used;
    const Eigen::MatrixXd im = real_images ? Eigen::MatrixXd::Zero(n, batch) : Eigen::MatrixXd(images_im * used);
    for (int b = 0; b < batch; ++b) {
      const CVector acc = re.col(b).cast<Complex>() + Complex(0, 1) * im.col(b).cast<Complex>();
      sq[first + b] = std::pow(sk_norm(Field(basis.grid, acc), idx), 2);
    }
  }
  out.mc_mean = std::accumulate(sq.begin(), sq.end(), 0.0) / paths;
  double var = 0;
  for (double v : sq) var += (v - out.mc_mean) * (v - out.mc_mean);
  out.standard_error = std::sqrt(var / (paths - 1) / paths);
  out.z_score = std::abs(out.mc_mean - out.target) / out.standard_error;
  return out;
}

}  // namespace sgspde
