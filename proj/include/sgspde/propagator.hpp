#pragma once

#include <functional>
#include <vector>

#include "sgspde/fourierop.hpp"
#include "sgspde/hypreduce.hpp"

namespace sgspde {

// Components of one system block, W_1 .. W_m.
using State = std::vector<Field>;

// Linear map W -> E(t, s) W on one block, either a per-frequency m x m multiplier or a dense lattice matrix.
class StepOperator {
 public:
  StepOperator() = default;
  static StepOperator multiplier(const Grid& g, int m, std::vector<CMatrix> per_frequency);
  static StepOperator dense(const Grid& g, int m, CMatrix matrix);

  State apply(const State& w) const;
  CMatrix matrix() const;
  const Grid& grid() const { return grid_; }
  int components() const { return m_; }
  bool is_multiplier() const { return !per_frequency_.empty(); }
  const std::vector<CMatrix>& per_frequency() const { return per_frequency_; }
  // this after other: W -> this(other(W)).
  StepOperator after(const StepOperator& other) const;

 private:
  Grid grid_;
  int m_ = 0;
  std::vector<CMatrix> per_frequency_;
  CMatrix dense_;
};

State zero_state(const Grid& g, int m);
double state_norm(const State& w);
double relative_difference(const State& a, const State& b);
State random_state(const Grid& g, int m, std::uint64_t seed, double band = 0.25);
// random_state under a Gaussian envelope of width X/4, away from the box edges.
State localized_state(const Grid& g, int m, std::uint64_t seed, double band = 0.25);

// True when every kappa entry of the block is autonomous and independent of x on the lattice.
bool block_is_multiplier(const FirstOrderSystem& sys, int block);

// Exact lattice propagator of an autonomous block: per-frequency matrix exponential when the block is
// x-independent, dense matrix exponential of the lattice generator otherwise.
StepOperator exact_propagator(const FirstOrderSystem& sys, int block, double s, double t);

struct ReferenceOptions {
  double cfl = 2.5;        // stability bound on dt * max |kappa1|
  double target_cfl = 0.25;
  int min_steps = 1;
};

// Max |kappa1| over the block's lattice tables at time t.
double kappa1_radius(const FirstOrderSystem& sys, int block, double t);

// One classical RK4 step of dW/dt = i (kappa1 + kappa0) W.
State step_reference(const FirstOrderSystem& sys, int block, const State& w, double t, double dt,
                     const ReferenceOptions& opts = {});
// RK4 from s to t with the given number of steps, or an automatic count from target_cfl when steps <= 0.
State propagate_reference(const FirstOrderSystem& sys, int block, const State& w, double s, double t, int steps = 0,
                          const ReferenceOptions& opts = {});
// RK4 propagator assembled as a dense matrix (or per-frequency multiplier for x-independent blocks).
StepOperator reference_propagator(const FirstOrderSystem& sys, int block, double s, double t, int steps = 0,
                                  const ReferenceOptions& opts = {});

struct GoOptions {
  EikonalOptions eikonal;
  double gap_tol = 1e-8;
  int refine_sweeps = 2;  // lattice off-diagonal elimination passes after the pointwise diagonalizer
  double refine_inner = 0.5;  // corrections tapered to zero between these fractions of the box
  double refine_outer = 0.75;
};

// Geometric-optics propagator E0 = Op(omega) diag(Op_phi_j(a_j)) Op(omega)^-1 on one block.
struct PropagatorGO {
  Grid grid;
  int block = 0;
  double s = 0;
  double t = 0;
  std::vector<PhaseFunction> phases;  // one per row, amplitude transported along the rays
  CMatrix omega;                      // dense Op(omega)
  CMatrix omega_inverse;

  State apply(const State& w) const;
  StepOperator as_step() const;
};

// Throws HorizonError (with the admissible end time) when |t - s| exceeds the phase horizon.
PropagatorGO build_go_propagator(const FirstOrderSystem& sys, int block, double s, double t, const GoOptions& opts = {});
// Splits [s, t] into pieces of length <= max_span and composes GO propagators.
StepOperator go_propagator(const FirstOrderSystem& sys, int block, double s, double t, double max_span,
                           const GoOptions& opts = {});
// Max over localized probes of |(D_t - K) E0 u| / |K u| with a central time difference of step h.
double go_equation_residual(const FirstOrderSystem& sys, int block, double s, double t, int probes = 3,
                            double h = 1e-4, const GoOptions& opts = {});

enum class PropagatorKind { Exact, Reference, GeometricOptics };
const char* to_string(PropagatorKind k);

struct PropagatorFactory {
  PropagatorKind kind = PropagatorKind::Exact;
  int reference_steps = 0;     // per unit span when positive
  double go_max_span = 0.05;
  GoOptions go;
  ReferenceOptions reference;

  StepOperator operator()(const FirstOrderSystem& sys, int block, double s, double t) const;
};

// Max relative difference of E(t,s)E(s,t0)u and E(t,t0)u over probe states.
double check_group_property(const FirstOrderSystem& sys, int block, const PropagatorFactory& make, double t, double s,
                            double t0, int probes = 3, std::uint64_t seed = 5);
// Max relative |E(s,t)E(t,s)u - u| over probe states.
double check_inverse_property(const FirstOrderSystem& sys, int block, const PropagatorFactory& make, double s,
                              double t, int probes = 3, std::uint64_t seed = 6);

// W(t) = E(t,s) W0 + i int_s^t E(t,theta) Y(theta) dtheta, trapezoidal on the uniform grid of forcing.size() nodes.
State duhamel_solve(const FirstOrderSystem& sys, int block, const State& w0, const std::vector<State>& forcing,
                    double s, double t, const PropagatorFactory& make);

// g -> i (first row of Op(Y)) E(t,s) (0, ..., 0, g) on block 0.
using KernelAction = std::function<Field(const Field&)>;
KernelAction scalar_solution_kernel(const FirstOrderSystem& sys, double s, double t, const PropagatorFactory& make);
// The same map as a lattice object: a per-frequency multiplier when E is one and the first row of Y is
// x-independent, a dense n x n matrix otherwise.
struct ScalarKernel {
  Grid grid;
  CVector multiplier;
  CMatrix dense;

  bool is_multiplier() const { return multiplier.size() > 0; }
  Field apply(const Field& g) const;
  // Applies to a spectrum (forward_transform of g) and returns a spectrum; multiplier kernels only.
  CVector apply_spectrum(const CVector& ghat) const;
  CMatrix matrix() const;
};
ScalarKernel scalar_kernel(const FirstOrderSystem& sys, double s, double t, const PropagatorFactory& make);

// First row of Op(Y) E(t, 0) Op(b) U0.
Field v0_term(const FirstOrderSystem& sys, const std::vector<Field>& cauchy_data, double t,
              const PropagatorFactory& make);

}  // namespace sgspde
