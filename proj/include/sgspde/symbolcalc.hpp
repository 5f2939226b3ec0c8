#pragma once

#include <cstdint>

#include "sgspde/symbol.hpp"

namespace sgspde {

// Weighted Sobolev index: spatial weight <x>^z, frequency weight <D>^zeta.
struct SobolevKatoIndex {
  double z = 0;
  double zeta = 0;
};

// Plane-wave matrix E(j, k) = exp(i x_j . xi_k) for the lattice of g (memoized per thread).
const CMatrix& plane_wave_matrix(const Grid& g);

// Kohn-Nirenberg quadrature (2 pi)^-d sum_k exp(i x . xi_k) a(t, x, xi_k) uhat(xi_k) dk^d.
Field apply_psido(const Symbol& a, double t, const Field& u);
Field apply_table(const CMatrix& table, const Field& u);

// Dense matrix of Op(a) on the lattice and its inverse map back to a lattice symbol.
CMatrix op_matrix(const Symbol& a, double t, const Grid& g);
CMatrix op_matrix_from_table(const Grid& g, const CMatrix& table);
CMatrix lattice_symbol(const Grid& g, const CMatrix& op);

// <D>^s u by one FFT multiplier pass.
Field bessel_potential(const Field& u, double s);
// Pointwise <x>^s u.
Field spatial_weight(const Field& u, double s);

double sk_norm(const Field& u, SobolevKatoIndex idx);

// Sampled max over |alpha + beta| <= ell of sup |D_x^alpha D_xi^beta a| <x>^(|alpha|-m) <xi>^(|beta|-mu),
// derivatives by lattice-spacing finite differences.
double estimate_seminorm(const Symbol& a, double t, Order order, int ell, const Grid& g);
double table_seminorm(const Grid& g, const CMatrix& table, Order order, int ell);

// Weighted sup |a| <x>^-m <xi>^-mu over |x_i| <= fraction X and |xi_i| <= fraction xi_max.
double interior_sup(const Grid& g, const CMatrix& table, Order order, double fraction = 0.75);

// Finite difference of a lattice table along phase-space axis p (x axes first, then xi axes).
CMatrix table_difference(const Grid& g, const CMatrix& table, int p);

// Two-term composition a b - i sum_j d_xi_j a d_x_j b with derivative steps equal to the lattice spacings of g.
Symbol compose_leading(const Symbol& a, const Symbol& b, const Grid& g);

// Smooth random field with frequencies limited to band * max_frequency, Gaussian envelope, unit L2 norm.
Field random_bandlimited_field(const Grid& g, std::uint64_t seed, double band = 0.25, bool real_valued = true);

// Empirical mapping ratio sk_norm(Op(a) u, (z - m, zeta - mu)) / sk_norm(u, (z, zeta)).
double continuity_ratio(const Symbol& a, double t, SobolevKatoIndex idx, const Field& u);

struct ContinuityProbe {
  double calibrated = 0;  // max ratio over the calibration fields
  double bound = 0;       // frozen C_probe
};

ContinuityProbe calibrate_continuity(const Symbol& a, double t, SobolevKatoIndex idx, const Grid& g, int trials,
                                     std::uint64_t seed, double safety = 1.5);
// Max ratio over fresh fields; throws ContractViolation if it exceeds the frozen bound.
double verify_continuity(const Symbol& a, double t, SobolevKatoIndex idx, const Grid& g, const ContinuityProbe& probe,
                         int trials, std::uint64_t seed);

struct SymbolCheck {
  double seminorm0 = 0;
  double seminorm1 = 0;
  bool within_bound = true;
  bool finite = true;
};
SymbolCheck check_symbol(const Symbol& a, double t, const Grid& g);

}  // namespace sgspde
