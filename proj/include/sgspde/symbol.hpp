#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgspde/grid.hpp"

namespace sgspde {

namespace detail {
struct TableCache;
}

// Declared bi-order (m, mu): growth <x>^m in space and <xi>^mu in frequency.
struct Order {
  double m = 0;
  double mu = 0;
  Order operator+(const Order& o) const { return {m + o.m, mu + o.mu}; }
  Order operator-(const Order& o) const { return {m - o.m, mu - o.mu}; }
  bool operator==(const Order& o) const = default;
};

enum class SymbolKind { General, Multiplier, Separable };

// First and second derivatives of a real symbol at one phase-space point.
template <typename Real>
struct SymbolJet {
  using Small = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;
  Real value = 0;
  PointT<Real> dx, dxi;
  Small dxx, dxxi, dxixi;  // dxxi(i, j) = d^2 / dx_i dxi_j
};

template <typename Real>
class BasicSymbol {
 public:
  using Complex = std::complex<Real>;
  using Point = PointT<Real>;
  using Fn = std::function<Complex(Real, const Point&, const Point&)>;
  using PartFn = std::function<Complex(Real, const Point&)>;
  using JetFn = std::function<SymbolJet<Real>(Real, const Point&, const Point&)>;
  using LatticeFn = std::function<CMatrixT<Real>(Real, const BasicGrid<Real>&)>;

  struct Term {
    PartFn fx;   // (t, x)
    PartFn fxi;  // (t, xi)
  };

  BasicSymbol() = default;

  static BasicSymbol general(Fn f, Order o, std::string name = {});
  static BasicSymbol multiplier(PartFn f, Order o, std::string name = {});
  static BasicSymbol separable(std::vector<Term> terms, Order o, std::string name = {});
  static BasicSymbol constant(Complex c, std::string name = {});
  static BasicSymbol zero() { return constant(Complex(0), "0"); }
  // Symbol whose values are known exactly on the lattice of g; off-lattice
  // evaluation interpolates the table with tensor cubic Lagrange stencils.
  static BasicSymbol lattice_backed(const BasicGrid<Real>& g, LatticeFn fn, Order o, bool autonomous,
                                    std::string name = {});
  static BasicSymbol from_table(const BasicGrid<Real>& g, CMatrixT<Real> table, Order o, std::string name = {});

  Complex operator()(Real t, const Point& x, const Point& xi) const { return eval_(t, x, xi); }

  const Order& order() const { return order_; }
  SymbolKind kind() const { return kind_; }
  const std::vector<Term>& terms() const { return terms_; }
  const std::string& name() const { return name_; }
  const std::optional<Real>& bound() const { return bound_; }
  const std::string& time_smoothness() const { return smoothness_; }
  bool has_jet() const { return static_cast<bool>(jet_); }
  const JetFn& jet_fn() const { return jet_; }
  bool has_lattice() const { return static_cast<bool>(lattice_); }
  const BasicGrid<Real>& lattice_grid() const { return lattice_grid_; }
  const LatticeFn& lattice_fn() const { return lattice_; }
  bool is_zero() const { return zero_; }
  bool autonomous() const { return autonomous_; }

  BasicSymbol& with_order(Order o) {
    order_ = o;
    return *this;
  }
  BasicSymbol& with_jet(JetFn j) {
    jet_ = std::move(j);
    return *this;
  }
  BasicSymbol& with_bound(Real k0) {
    bound_ = k0;
    return *this;
  }
  BasicSymbol& with_time_smoothness(std::string s) {
    smoothness_ = std::move(s);
    return *this;
  }
  BasicSymbol& with_name(std::string s) {
    name_ = std::move(s);
    return *this;
  }
  BasicSymbol& with_autonomous(bool a) {
    autonomous_ = a;
    reset_cache();
    return *this;
  }

  // Low-level pieces used by the algebra below.
  BasicSymbol& set_lattice(const BasicGrid<Real>& g, LatticeFn fn) {
    lattice_grid_ = g;
    lattice_ = std::move(fn);
    reset_cache();
    return *this;
  }
  void reset_cache();
  // Shared memo of the most recent table; copies of a symbol share it.
  std::shared_ptr<detail::TableCache>& cache() const { return cache_; }
  BasicSymbol& set_kind(SymbolKind k) {
    kind_ = k;
    return *this;
  }
  BasicSymbol& set_zero(bool z) {
    zero_ = z;
    return *this;
  }

 private:
  Fn eval_;
  Order order_;
  SymbolKind kind_ = SymbolKind::General;
  std::vector<Term> terms_;
  std::string name_;
  std::optional<Real> bound_;
  std::string smoothness_ = "smooth";
  JetFn jet_;
  LatticeFn lattice_;
  BasicGrid<Real> lattice_grid_;
  bool zero_ = false;
  bool autonomous_ = true;
  mutable std::shared_ptr<detail::TableCache> cache_;
};

using Symbol = BasicSymbol<double>;

template <>
Symbol Symbol::general(Fn f, Order o, std::string name);
template <>
Symbol Symbol::multiplier(PartFn f, Order o, std::string name);
template <>
Symbol Symbol::separable(std::vector<Term> terms, Order o, std::string name);
template <>
Symbol Symbol::constant(Complex c, std::string name);
template <>
Symbol Symbol::lattice_backed(const Grid& g, LatticeFn fn, Order o, bool autonomous, std::string name);
template <>
Symbol Symbol::from_table(const Grid& g, CMatrix table, Order o, std::string name);
template <>
void Symbol::reset_cache();

using Jet = SymbolJet<double>;

// Pointwise algebra on symbols (not operator composition).
Symbol operator+(const Symbol& a, const Symbol& b);
Symbol operator-(const Symbol& a, const Symbol& b);
Symbol operator*(const Symbol& a, const Symbol& b);
Symbol operator*(Complex c, const Symbol& a);
Symbol operator-(const Symbol& a);
// Pointwise quotient a / b with declared order order(a) - order(b).
Symbol divide(const Symbol& a, const Symbol& b);
// -i d/dt by central differences in t.
Symbol time_derivative_d(const Symbol& a, double dt = 1e-5);

// Table of a(t, x_j, xi_k): rows are spatial flat indices, columns sorted dual indices.
CMatrix tabulate(const Symbol& a, double t, const Grid& g);

// Derivative jet of the real part of a at (t, x, xi); analytic when available,
// otherwise fourth-order central differences.
Jet jet(const Symbol& a, double t, const Point& x, const Point& xi);

// Tensor cubic interpolation of a lattice table at an arbitrary phase-space point.
Complex interpolate_table(const Grid& g, const CMatrix& table, const Point& x, const Point& xi);

// Common building blocks.
Symbol bracket_x_symbol();                    // <x>
Symbol bracket_xi_symbol();                   // <xi>
Symbol sg_wave_root(double sign);             // sign * <x><xi>, with analytic jet
Symbol transport_symbol(const Point& speed);  // speed . xi, with analytic jet

}  // namespace sgspde
