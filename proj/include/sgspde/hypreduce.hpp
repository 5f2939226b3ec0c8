#pragma once

#include <string>
#include <vector>

#include "sgspde/symbolcalc.hpp"

namespace sgspde {

// Row-major matrix of symbols; unset entries are the zero symbol.
class SymbolMatrix {
 public:
  SymbolMatrix() = default;
  SymbolMatrix(int rows, int cols) : rows_(rows), cols_(cols), data_(std::size_t(rows) * cols, Symbol::zero()) {}
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Symbol& operator()(int i, int j) { return data_[std::size_t(i) * cols_ + j]; }
  const Symbol& operator()(int i, int j) const { return data_[std::size_t(i) * cols_ + j]; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Symbol> data_;
};

// L = D_t^m - sum_j Op(a_j) D_t^(m-j) with characteristic roots of the principal symbol.
struct HyperbolicOperator {
  int m = 1;
  std::vector<Symbol> coefficients;  // a_1 .. a_m, order (j, j)
  std::vector<Symbol> principal;     // principal parts of a_j; empty means coefficients are principal
  std::vector<Symbol> roots;         // tau_1 .. tau_m, order (1, 1)
  std::string label;                 // preset label, "involutive" enables the bracket check
  int dims = 1;

  const Symbol& principal_part(int j) const { return principal.empty() ? coefficients[j] : principal[j]; }
  bool autonomous() const;
};

enum class RootClass { Strict, ConstantMultiplicities, Involutive, Unclassified };

struct Classification {
  RootClass kind = RootClass::Unclassified;
  double separation = 0;                 // min inter-group gap / (<x><xi>)
  int l = 1;                             // max multiplicity
  std::vector<std::vector<int>> groups;  // root indices per group
  double bracket_ratio = 0;              // involutive check: max |{tau_j, tau_k}| / |tau_j - tau_k|
  std::string describe() const;
};

// Max over samples of the relative defect of tau^m - sum principal_j tau^(m-j) = prod (tau - tau_j)
// at random real tau.
double check_factorization(const HyperbolicOperator& op, const Grid& g, const std::vector<double>& times,
                           int taus = 10, std::uint64_t seed = 7);

// Roots of the principal symbol at each lattice point, sorted ascending: tables[j](x, xi).
// Throws NotHyperbolicError when a root has a non-negligible imaginary part.
std::vector<RMatrix> principal_roots(const HyperbolicOperator& op, double t, const Grid& g);

Classification classify_roots(const HyperbolicOperator& op, const Grid& g, const std::vector<double>& times,
                              double separation_tol = 1e-3);

// Levi condition: each symbol has finite sampled (0,0) seminorm, stable within a factor 2 when the
// box and the frequency band are both doubled.
bool check_levi(const std::vector<Symbol>& h, const Grid& g);
bool check_levi(const HyperbolicOperator& op, const Grid& g);

struct SystemBlock {
  std::vector<int> root_order;  // distinct-root index driving each row
  int offset = 0;               // first row of the block in the full system
};

struct FirstOrderSystem {
  Grid grid;
  int m = 1;
  int n = 1;
  int l = 1;
  std::vector<int> multiplicities;
  std::vector<Symbol> distinct_roots;
  std::vector<Symbol> kappa1;  // diagonal principal part
  SymbolMatrix kappa0;         // dim x dim
  SymbolMatrix data_map_b;     // dim x m
  SymbolMatrix recon_map_Y;    // m x dim
  std::vector<SystemBlock> blocks;
  double remainder_norm = 0;   // interior (0,0) sup of the kept factorization remainder
  bool autonomous = true;

  int dim() const { return n * m; }
};

FirstOrderSystem build_system(const HyperbolicOperator& op, const Grid& g, double separation_tol = 1e-3);

// (u, D_t u, ..., D_t^(m-1) u) = Op(Y) W.
std::vector<Field> reconstruct_u(const FirstOrderSystem& sys, const std::vector<Field>& w, double t);
// W_0 = Op(b) U_0 with U_0 = (u_0, ..., u_(m-1)).
std::vector<Field> apply_data_map(const FirstOrderSystem& sys, const std::vector<Field>& u0);
// W components of one block from time derivatives (u, D_t u, ..., D_t^(m-1) u) at time t.
std::vector<Field> w_from_derivatives(const FirstOrderSystem& sys, const std::vector<Field>& derivs, double t);

// Unit diagonal, zero strict upper triangle and finite (j-k, j-k) seminorms below the diagonal.
bool check_data_map_structure(const FirstOrderSystem& sys);

struct Diagonalization {
  SymbolMatrix omega;                 // I + N
  std::vector<Symbol> kappa0_tilde;   // diagonal entries of the corrected lower-order part
  double min_gap = 0;                 // min |lambda_j - lambda_k| / (<x><xi>)
};

// Pointwise eigenvector diagonalizer of kappa1 + kappa0 with unit-diagonal normalization.
Diagonalization perfect_diagonalize(const std::vector<Symbol>& kappa1, const SymbolMatrix& kappa0, const Grid& g,
                                    double t = 0, double gap_tol = 1e-8);
Diagonalization perfect_diagonalize_2x2(const std::vector<Symbol>& kappa1, const SymbolMatrix& kappa0, const Grid& g,
                                        double t = 0, double gap_tol = 1e-8);

// Dense lattice generator Op(kappa1) + Op(kappa0) of one block (block rows only).
CMatrix block_generator(const FirstOrderSystem& sys, int block, double t);

// True when every row of the table is the same, i.e. the symbol does not depend on x on the lattice.
bool x_independent(const CMatrix& table, double tol = 1e-12);

}  // namespace sgspde
