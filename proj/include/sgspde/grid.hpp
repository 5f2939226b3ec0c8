#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "sgspde/errors.hpp"

namespace sgspde {

template <typename Real>
using PointT = Eigen::Matrix<Real, Eigen::Dynamic, 1, 0, 2, 1>;

template <typename Real>
using CVectorT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using CMatrixT = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using RMatrixT = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

// Japanese bracket <v> = sqrt(1 + |v|^2).
template <typename Derived>
typename Derived::Scalar bracket(const Eigen::MatrixBase<Derived>& v) {
  using std::sqrt;
  return sqrt(typename Derived::Scalar(1) + v.squaredNorm());
}

// Uniform periodic lattice on [-X, X)^d with N points per axis and its dual
// lattice of spacing pi/X. Flat indices are row-major with axis 0 slowest.
// Dual indices are stored in sorted order: k -> (k - N/2) * dk.
template <typename Real>
class BasicGrid {
 public:
  using Point = PointT<Real>;

  BasicGrid() = default;
  BasicGrid(int dims, int n, Real halfwidth) : d_(dims), n_(n), x_(halfwidth) {
    if (dims != 1 && dims != 2) throw ShapeError("grid dimension must be 1 or 2");
    if (n < 2 || (n & (n - 1)) != 0) throw ShapeError("N must be a power of two, got " + std::to_string(n));
    if (!(halfwidth > 0) || !std::isfinite(static_cast<double>(halfwidth)))
      throw ShapeError("box half-width must be positive and finite");
  }

  int dims() const { return d_; }
  int n() const { return n_; }
  Real halfwidth() const { return x_; }
  Eigen::Index size() const { return d_ == 1 ? n_ : Eigen::Index(n_) * n_; }

  Real spacing() const { return 2 * x_ / n_; }
  Real dual_spacing() const { return std::numbers::pi_v<Real> / x_; }
  Real max_frequency() const { return std::numbers::pi_v<Real> * n_ / (2 * x_); }
  Real cell_volume() const { return std::pow(spacing(), d_); }
  Real dual_cell_volume() const { return std::pow(dual_spacing(), d_); }

  Real coord(int i) const { return -x_ + i * spacing(); }
  Real freq(int k) const { return (k - n_ / 2) * dual_spacing(); }

  int axis_index(Eigen::Index flat, int axis) const {
    if (d_ == 1) return static_cast<int>(flat);
    return axis == 0 ? static_cast<int>(flat / n_) : static_cast<int>(flat % n_);
  }
  Eigen::Index flat_index(int i0, int i1 = 0) const { return d_ == 1 ? i0 : Eigen::Index(i0) * n_ + i1; }

  Point point(Eigen::Index j) const {
    Point p(d_);
    for (int a = 0; a < d_; ++a) p[a] = coord(axis_index(j, a));
    return p;
  }
  Point frequency(Eigen::Index k) const {
    Point p(d_);
    for (int a = 0; a < d_; ++a) p[a] = freq(axis_index(k, a));
    return p;
  }

  bool operator==(const BasicGrid& o) const { return d_ == o.d_ && n_ == o.n_ && x_ == o.x_; }
  bool operator!=(const BasicGrid& o) const { return !(*this == o); }

  std::string describe() const {
    return "d=" + std::to_string(d_) + " N=" + std::to_string(n_) + " X=" + std::to_string(static_cast<double>(x_));
  }

 private:
  int d_ = 1;
  int n_ = 2;
  Real x_ = 1;
};

template <typename Real>
struct BasicField {
  using Complex = std::complex<Real>;
  BasicGrid<Real> grid;
  CVectorT<Real> values;

  BasicField() = default;
  explicit BasicField(const BasicGrid<Real>& g) : grid(g), values(CVectorT<Real>::Zero(g.size())) {}
  BasicField(const BasicGrid<Real>& g, CVectorT<Real> v) : grid(g), values(std::move(v)) {
    if (values.size() != g.size()) throw ShapeError("field size does not match grid");
  }

  template <typename F>
  static BasicField sample(const BasicGrid<Real>& g, F&& fn) {
    BasicField f(g);
    for (Eigen::Index j = 0; j < g.size(); ++j) f.values[j] = Complex(fn(g.point(j)));
    return f;
  }

  bool all_finite() const { return values.allFinite(); }
};

namespace detail {

template <typename Real>
Eigen::FFT<Real>& fft_engine() {
  thread_local Eigen::FFT<Real> engine;
  return engine;
}

// In-place unnormalized DFT along one axis of a row-major d-dimensional array.
template <typename Real>
void dft_axis(const BasicGrid<Real>& g, CVectorT<Real>& a, int axis, bool inverse) {
  const int n = g.n();
  std::vector<std::complex<Real>> in(n), out(n);
  auto& fft = fft_engine<Real>();
  fft.SetFlag(Eigen::FFT<Real>::Unscaled);
  const Eigen::Index lines = g.size() / n;
  for (Eigen::Index line = 0; line < lines; ++line) {
    auto idx = [&](int i) -> Eigen::Index {
      if (g.dims() == 1) return i;
      return axis == 0 ? g.flat_index(i, static_cast<int>(line)) : g.flat_index(static_cast<int>(line), i);
    };
    for (int i = 0; i < n; ++i) in[i] = a[idx(i)];
    if (inverse)
      fft.inv(out, in);
    else
      fft.fwd(out, in);
    for (int i = 0; i < n; ++i) a[idx(i)] = out[i];
  }
}

}  // namespace detail

// Continuous-convention transform sampled on the dual lattice (sorted order):
// uhat(xi_k) = h^d sum_j exp(-i x_j . xi_k) u(x_j).
template <typename Real>
CVectorT<Real> forward_transform(const BasicField<Real>& u) {
  const auto& g = u.grid;
  CVectorT<Real> a = u.values;
  for (int ax = 0; ax < g.dims(); ++ax) detail::dft_axis(g, a, ax, false);
  const int n = g.n();
  CVectorT<Real> out(g.size());
  const Real h = g.cell_volume();
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    Eigen::Index src = 0;
    int parity = 0;
    for (int ax = 0; ax < g.dims(); ++ax) {
      const int ks = g.axis_index(k, ax);
      const int m = ((ks - n / 2) % n + n) % n;
      src = src * n + m;
      parity += ks - n / 2;
    }
    // exp(i X xi_k) = (-1)^(k - N/2) per axis
    const Real sign = (parity % 2 == 0) ? Real(1) : Real(-1);
    out[k] = a[src] * (sign * h);
  }
  return out;
}

// Inverse of forward_transform: u(x_j) = (2 pi)^-d sum_k exp(i x_j . xi_k) uhat_k dk^d.
template <typename Real>
BasicField<Real> inverse_transform(const BasicGrid<Real>& g, const CVectorT<Real>& uhat) {
  if (uhat.size() != g.size()) throw ShapeError("spectrum size does not match grid");
  const int n = g.n();
  CVectorT<Real> a(g.size());
  const Real h = g.cell_volume();
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    Eigen::Index dst = 0;
    int parity = 0;
    for (int ax = 0; ax < g.dims(); ++ax) {
      const int ks = g.axis_index(k, ax);
      const int m = ((ks - n / 2) % n + n) % n;
      dst = dst * n + m;
      parity += ks - n / 2;
    }
    const Real sign = (parity % 2 == 0) ? Real(1) : Real(-1);
    a[dst] = uhat[k] * (sign / h);
  }
  for (int ax = 0; ax < g.dims(); ++ax) detail::dft_axis(g, a, ax, true);
  a /= static_cast<Real>(g.size());
  return BasicField<Real>(g, std::move(a));
}

// Discrete L2 norm with the cell volume as quadrature weight.
template <typename Real>
Real l2_norm(const BasicField<Real>& u) {
  return std::sqrt(u.grid.cell_volume() * u.values.squaredNorm());
}

template <typename Real>
Real relative_l2(const BasicField<Real>& a, const BasicField<Real>& b) {
  if (a.grid != b.grid) throw ShapeError("relative_l2: grid mismatch");
  const Real den = b.values.norm();
  const Real num = (a.values - b.values).norm();
  return den > 0 ? num / den : num;
}

using Grid = BasicGrid<double>;
using Field = BasicField<double>;
using Point = PointT<double>;
using Complex = std::complex<double>;
using CVector = CVectorT<double>;
using CMatrix = CMatrixT<double>;
using RMatrix = RMatrixT<double>;

}  // namespace sgspde
