#pragma once

#include <functional>

#include "sgspde/symbolcalc.hpp"

namespace sgspde {

using SmallMatrix = Jet::Small;

// Growth rate of a transported amplitude along one bicharacteristic:
// d(log a)/dt = rate(t, x, p, jet of kappa at (x, p), dX/dy, dP/dy).
using AmplitudeRate =
    std::function<Complex(double, const Point&, const Point&, const Jet&, const SmallMatrix&, const SmallMatrix&)>;

struct EikonalOptions {
  int steps = 64;                 // RK4 steps over [s, t]
  double residual_tol = 1e-6;     // bound on the weighted eikonal residual
  double delta_threshold = 0.5;   // admissibility floor for |det phi''_{x xi}|
  int newton_max = 8;
  int probe_stride = 4;           // sub-lattice stride for the residual probe
  bool check_residual = true;
};

// Tabulated phase on the lattice. Rows are spatial points, columns sorted dual points.
struct PhaseFunction {
  Grid grid;
  double s = 0;
  double t = 0;
  int steps = 0;
  RMatrix excess;                    // J = phi - x.xi
  std::vector<RMatrix> grad_x;       // d phi / d x_a
  std::vector<RMatrix> grad_xi;      // d phi / d xi_a
  CMatrix amplitude;                 // transported amplitude, 1 when no rate was supplied
  double residual = 0;               // max weighted eikonal residual on the probe sub-lattice
  double delta_min = 1;
  bool certified = false;
  std::vector<double> t_grid;
  Symbol hamiltonian;

  RMatrix values() const;            // phi itself
  CMatrix exp_i_phase() const;       // exp(i phi)
};

PhaseFunction flat_phase(const Grid& g, double s = 0);

// Method of bicharacteristics: x' = -d_xi kappa, p' = d_x kappa, with the action accumulated
// along each ray and the rays mapped back to the lattice by Newton iteration on the foot point.
PhaseFunction solve_eikonal(const Symbol& kappa, double s, double t_end, const Grid& g,
                            const EikonalOptions& opts = {}, const AmplitudeRate& rate = {});

struct PhaseRegularity {
  double delta_min = 0;     // min |det phi''_{x xi}|
  double j_seminorm = 0;    // weighted sup over |alpha + beta| <= 2 of J
  double lambda = 0;        // ||J||_0
  double c = 0;             // lambda / |t - s|
};

PhaseRegularity phase_regularity(const PhaseFunction& phi);

// Max weighted residual of d_s phi = -kappa(s, phi'_xi, xi), central difference in s with step ds.
double check_adjoint_eikonal(const PhaseFunction& phi, const Symbol& kappa, double ds = 1e-3);

// Largest t in (s, t_max] reached by halving for which the solve succeeds with delta_min >= threshold.
double admissible_horizon(const Symbol& kappa, double s, double t_max, const Grid& g, const EikonalOptions& opts = {},
                          int max_halvings = 12);

// Values of (J, grad_x phi, grad_xi phi, amplitude) at selected lattice pairs; the core of solve_eikonal.
struct TracedPoint {
  double excess = 0;
  Point grad_x;
  Point grad_xi;
  Complex amplitude = 1;
};
std::vector<TracedPoint> trace_points(const Symbol& kappa, double s, double t, int steps, const Grid& g,
                                      const std::vector<std::pair<Eigen::Index, Eigen::Index>>& targets,
                                      int newton_max = 8, const AmplitudeRate& rate = {});

}  // namespace sgspde
