#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "sgspde/noisekit.hpp"
#include "sgspde/propagator.hpp"

namespace sgspde {

// g maps H^(z + r, zeta + rho) into H^(z, zeta).
struct LipClass {
  double z = 0;
  double zeta = 0;
  double r = 0;
  double rho = 0;

  SobolevKatoIndex source() const { return {z + r, zeta + rho}; }
  SobolevKatoIndex target() const { return {z, zeta}; }
};

struct Nonlinearity {
  using Eval = std::function<double(double t, const Point& x, double u)>;

  Eval eval;
  LipClass lip;
  double local_radius = std::numeric_limits<double>::infinity();  // ball in the source index
  std::function<double(double t)> envelope;  // declared C(t); empty when undeclared
  bool depends_on_u = true;
  bool is_zero = false;
  std::string name;

  // Pointwise g(t, x, Re w).
  Field apply(double t, const Field& w) const;

  static Nonlinearity zero();
  // g(t, x) independent of u.
  static Nonlinearity source(Eval f, std::string name = "source");
  static Nonlinearity constant(double value);
  static Nonlinearity of(Eval f, LipClass lip, std::string name = "g");
};

// <x>^-gap u / (1 + u^2) at class (0, 0, gap, 0) with envelope 1.
Nonlinearity weighted_saturation(double gap);
// u^2 at class (0, zeta, 0, 0) with local radius R.
Nonlinearity square_map(double zeta, double radius);

struct LipschitzProbe {
  double growth = 0;     // max sk_norm(g(w), target) / (1 + sk_norm(w, source))
  double lipschitz = 0;  // max sk_norm(g(w) - g(v), target) / sk_norm(w - v, source)
  int samples = 0;
};

// Random band-limited w, v in the source ball of radius ball_radius, sampled at times in [0, horizon].
// Throws ContractViolation naming the witness when a declared envelope is exceeded.
LipschitzProbe lipschitz_probe(const Nonlinearity& g, const Grid& grid, int samples, double ball_radius,
                               double horizon = 0, std::uint64_t seed = 1);

// Lattice algebra constant of w -> w^2 in H^(0, 1), d = 1: sk_norm(w^2 - v^2) <= C R sk_norm(w - v) on the radius-R
// ball, C = 2 sqrt(2) s with s^2 = pi^-1 sum_k dk / <xi_k>^2 the discrete Sobolev embedding factor.
double square_lipschitz_constant(const Grid& g);

struct SPDEProblem {
  HyperbolicOperator op;
  Nonlinearity gamma = Nonlinearity::zero();
  Nonlinearity sigma = Nonlinearity::zero();
  SpectralMeasure measure = SpectralMeasure::white_noise(1);
  std::vector<Field> cauchy_data;  // D_t^j u(0), j = 0 .. m-1; empty means zero data
  SobolevKatoIndex index;          // (z, zeta)
  double horizon = 1;              // T
  std::string name;
};

// Solution-space index (z + m - l, zeta) of the iteration.
SobolevKatoIndex iteration_index(const SPDEProblem& p, const FirstOrderSystem& sys);

// Kernel family E_(l-m)(t_j, s_i) on a uniform time grid, cached per lag for autonomous systems.
class KernelFamily {
 public:
  KernelFamily(const FirstOrderSystem& sys, double dt, int steps, PropagatorFactory make);
  const ScalarKernel& at(int j, int i) const;  // t_j = j dt, s_i = i dt, i <= j
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  const FirstOrderSystem& system() const { return *sys_; }
  const PropagatorFactory& factory() const { return make_; }
  bool multiplier() const;
  // Builds every cached kernel; at() is read-only afterwards and safe to share across threads.
  void warm() const;
  // Max over i <= j of the lattice operator norm H^from -> H^to.
  double max_norm(SobolevKatoIndex from, SobolevKatoIndex to) const;

 private:
  std::shared_ptr<const FirstOrderSystem> sys_;
  double dt_;
  int steps_;
  PropagatorFactory make_;
  mutable std::vector<std::unique_ptr<ScalarKernel>> cache_;
};

// 2 C T0 (1 + I).
double contraction_formula(double c, double t0, double sup_integral);

struct ContractionEstimate {
  double kappa = 0;
  double kernel_norm = 0;     // sup over the interval of |E_(l-m)(t, s)| between the index spaces
  double lipschitz = 0;       // max(C_gamma, C_sigma)
  double sup_integral = 0;    // compatibility integral for exponent m - l
  double horizon = 0;
};

struct ContractionOptions {
  int lipschitz_samples = 24;
  double ball_radius = 4;
  std::uint64_t seed = 3;
};

ContractionEstimate contraction_constant(const SPDEProblem& p, const KernelFamily& kernels,
                                         const ContractionOptions& opts = {});

struct HorizonChoice {
  double horizon = 0;
  int steps = 0;
  ContractionEstimate estimate;
  std::vector<double> kappas;  // per halving
};

// Halves T0 (keeping dt) from p.horizon until kappa < 1; throws NoContractionError at the floor.
HorizonChoice choose_horizon(const SPDEProblem& p, const FirstOrderSystem& sys, double dt,
                             const PropagatorFactory& make, double floor = 1e-3, const ContractionOptions& opts = {});

struct PicardOptions {
  double tol = 1e-6;
  int max_iter = 50;
};

struct PicardResult {
  std::vector<double> times;
  std::vector<Field> u;             // u(t_j)
  std::vector<double> differences;  // sup_t sk_norm(u^(n+1) - u^(n))
  double residual = 0;              // sup_t sk_norm(T u - u) at the returned iterate
  bool clipped = false;             // an iterate left the locality ball
  int iterations = 0;
};

// Path-wise noise increments dW_i = sum_k e_k dB_k(i).
std::vector<Field> noise_increments(const CMBasis& basis, const WienerPath& path, int steps);

// One application of the mild-solution map at every node.
std::vector<Field> mild_map(const SPDEProblem& p, const KernelFamily& kernels, const std::vector<Field>& v0,
                            const std::vector<Field>& u, const std::vector<Field>& dW);

std::vector<Field> homogeneous_term(const SPDEProblem& p, const KernelFamily& kernels);

PicardResult picard_solve(const SPDEProblem& p, const KernelFamily& kernels, const CMBasis& basis,
                          const WienerPath& path, const PicardOptions& opts = {});

struct MonteCarloStats {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> mean;      // per time, real part per grid point
  std::vector<Eigen::VectorXd> variance;  // unbiased
  std::vector<double> norm_mean;          // sk_norm(u(t)) in the iteration index
  std::vector<double> norm_stderr;
  int paths = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
};

// Paths 0 .. paths-1 of the counter-based noise for seed, solved on up to `threads` workers (0: hardware count)
// and reduced in path order, so the statistics do not depend on the thread count.
MonteCarloStats monte_carlo_moments(const SPDEProblem& p, const KernelFamily& kernels, const CMBasis& basis,
                                    int paths, std::uint64_t seed, const PicardOptions& opts = {}, int threads = 0);

// Relative L2 difference at the final node between the mode-by-mode stochastic term and the one built from
// field increments; gamma and sigma must not depend on u.
double linear_crosscheck(const SPDEProblem& p, const KernelFamily& kernels, const CMBasis& basis,
                         const WienerPath& path);

}  // namespace sgspde
