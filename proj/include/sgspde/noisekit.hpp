#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sgspde/symbolcalc.hpp"

namespace sgspde {

struct Atom {
  Point location;
  double mass = 0;
};

// Nonnegative tempered measure on R^d: point masses, a density, or a multiple of Lebesgue measure.
class SpectralMeasure {
 public:
  enum class Kind { Atoms, Density, Lebesgue };
  using DensityFn = std::function<double(const Point&)>;

  static SpectralMeasure atoms(std::vector<Atom> atoms, bool symmetric = true);
  // rho on R^d; when truncated the measure lives on [-band, band]^d, otherwise band is the quadrature core box.
  static SpectralMeasure density(int d, DensityFn rho, double band, bool truncated, bool symmetric = true,
                                 std::string name = "density");
  static SpectralMeasure lebesgue(int d, double scale = 1.0);
  // (2 pi)^-d Lebesgue: spatially white noise for the hat convention u^(xi) = int exp(-i x.xi) u dx.
  static SpectralMeasure white_noise(int d);

  Kind kind() const { return kind_; }
  int dims() const { return d_; }
  bool symmetric() const { return symmetric_; }
  const std::vector<Atom>& atom_list() const { return atoms_; }
  double scale() const { return scale_; }
  double band() const { return band_; }
  bool truncated() const { return truncated_; }
  double density_at(const Point& xi) const;
  const std::string& name() const { return name_; }

  // Throws ArgumentError on negative masses or on a failed sampled symmetry check.
  void validate(std::uint64_t seed = 11) const;

 private:
  Kind kind_ = Kind::Atoms;
  int d_ = 1;
  bool symmetric_ = true;
  std::vector<Atom> atoms_;
  DensityFn rho_;
  double band_ = 0;
  bool truncated_ = true;
  double scale_ = 1;
  std::string name_;
};

struct CompatibilityValue {
  double value = 0;
  bool infinite = false;
  Point argmax;  // eta achieving the sup
};

// Uniform grid on [-half, half]^d with per_axis points per axis, plus far probes at distance 10 * half.
std::vector<Point> default_eta_grid(int d, double half, int per_axis = 41);

// sup over eta of int (1 + |xi + eta|^2)^-exponent mu(dxi).
CompatibilityValue compatibility_integral(const SpectralMeasure& mu, double exponent, const std::vector<Point>& eta_grid);
CompatibilityValue compatibility_integral(const SpectralMeasure& mu, double exponent);

// Support points with masses used for the Cameron-Martin basis on a grid: atoms, or symmetric dual-lattice cells.
struct MeasureSupport {
  std::vector<Point> points;
  Eigen::VectorXd mass;
};
MeasureSupport measure_support(const SpectralMeasure& mu, const Grid& g);

// Orthonormal family f_k in L^2_mu (columns of coefficients over support points) and realized fields (f_k mu)^.
struct CMBasis {
  Grid grid;
  MeasureSupport support;
  CMatrix coefficients;        // support.points.size() x K
  std::vector<Field> fields;   // real-valued e_k on the grid
  std::string warning;         // set when K was reduced

  int size() const { return static_cast<int>(fields.size()); }
  // <f_j, f_k>_{L^2_mu}.
  CMatrix gram() const;
};

CMBasis build_cm_basis(const SpectralMeasure& mu, int modes, const Grid& g);

// Independent N(0, dt) increments per (mode, step).
struct WienerPath {
  double dt = 0;
  int steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  Eigen::MatrixXd increments;  // modes x steps

  double time(int step) const { return step * dt; }
  int step_at(double t) const;
};

// Standard normal from a counter-based stream keyed by (seed, path, mode, step).
double counter_normal(std::uint64_t seed, std::uint64_t path, std::uint64_t mode, std::uint64_t step);
WienerPath sample_path(int modes, double dt, int steps, std::uint64_t seed, std::uint64_t path_index = 0);

// sum_k e_k dB_k(step).
Field noise_increment(const CMBasis& basis, const WienerPath& path, int step);

struct CovarianceCheck {
  Complex empirical;
  Complex target;
  double standard_error = 0;
  double z_score = 0;
};

// Monte Carlo covariance of Xi(phi), Xi(psi) over one time step dt against dt int phi^ conj(psi^) dmu.
CovarianceCheck covariance_check(const SpectralMeasure& mu, const CMBasis& basis, int paths, const Field& phi,
                                 const Field& psi, double dt, std::uint64_t seed);

// Continuous Fourier transform h^d sum_j exp(-i x_j . xi) u_j at an arbitrary frequency.
Complex transform_at(const Field& u, const Point& xi);

using FieldMap = std::function<Field(const Field&)>;
// (sum_k sk_norm(phi e_k, idx)^2)^(1/2).
double hs_norm(const FieldMap& phi, const CMBasis& basis, SobolevKatoIndex idx);

// phi(theta) is the integrand operator at time theta.
using TimeFieldMap = std::function<Field(double theta, const Field&)>;
// Left-point sum over path steps in [s, t): sum_i sum_k phi(s_i)(e_k) dB_k(s_i).
Field stochastic_integral(const TimeFieldMap& phi, const CMBasis& basis, const WienerPath& path, double s, double t);

struct IsometryCheck {
  double mc_mean = 0;        // mean of sk_norm(I)^2 over paths
  double standard_error = 0;
  double target = 0;         // int_s^t ||phi(theta)||_HS^2 dtheta by Simpson quadrature
  double discrete_target = 0;  // left-point sum of ||phi(s_i)||_HS^2 dt
  double z_score = 0;
};

IsometryCheck ito_isometry_check(const TimeFieldMap& phi, const CMBasis& basis, SobolevKatoIndex idx, double s,
                                 double t, int steps, int paths, std::uint64_t seed);

}  // namespace sgspde
