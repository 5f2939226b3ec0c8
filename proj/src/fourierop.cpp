#include "sgspde/fourierop.hpp"

namespace sgspde {

namespace {

void require_certified(const PhaseFunction& phi) {
  if (!phi.certified || !(phi.delta_min > 0))
    throw RefusalError("phase on [" + std::to_string(phi.s) + ", " + std::to_string(phi.t) +
                       "] is not certified regular (delta_min=" + std::to_string(phi.delta_min) + ")");
}

}  // namespace

Field apply_fio(const PhaseFunction& phi, const CMatrix& amplitude, const Field& u) {
  require_certified(phi);
  const Grid& g = u.grid;
  if (g != phi.grid) throw ShapeError("apply_fio: field grid does not match phase grid");
  if (amplitude.rows() != g.size() || amplitude.cols() != g.size())
    throw ShapeError("apply_fio: amplitude table shape mismatch");
  const CVector uhat = forward_transform(u);
  CVector out = phi.exp_i_phase().cwiseProduct(amplitude) * uhat;
  out *= std::pow(g.dual_spacing() / (2 * std::numbers::pi), g.dims());
  return Field(g, std::move(out));
}

Field apply_fio(const PhaseFunction& phi, const Symbol& a, const Field& u) {
  require_certified(phi);
  return apply_fio(phi, tabulate(a, phi.t, phi.grid), u);
}

CMatrix fio_matrix(const PhaseFunction& phi, const CMatrix& amplitude) {
  require_certified(phi);
  const Grid& g = phi.grid;
  CMatrix m = phi.exp_i_phase().cwiseProduct(amplitude) * plane_wave_matrix(g).adjoint();
  m /= static_cast<double>(g.size());
  return m;
}

double probe_fio_bound(const PhaseFunction& phi, const Symbol& a, Order order, SobolevKatoIndex idx, int trials,
                       std::uint64_t seed) {
  if (trials < 10) throw ArgumentError("probe_fio_bound needs at least 10 trials");
  const CMatrix amp = tabulate(a, phi.t, phi.grid);
  double worst = 0;
  for (int i = 0; i < trials; ++i) {
    const Field u = random_bandlimited_field(phi.grid, seed + static_cast<std::uint64_t>(i));
    const Field v = apply_fio(phi, amp, u);
    worst = std::max(worst, sk_norm(v, {idx.z - order.m, idx.zeta - order.mu}) / sk_norm(u, idx));
  }
  return worst;
}

double spectral_tail(const Field& u) {
  const Grid& g = u.grid;
  const CVector uhat = forward_transform(u);
  const double peak = uhat.cwiseAbs().maxCoeff();
  if (peak == 0) return 0;
  double tail = 0;
  for (Eigen::Index k = 0; k < g.size(); ++k)
    if (g.frequency(k).cwiseAbs().maxCoeff() >= 0.875 * g.max_frequency()) tail = std::max(tail, std::abs(uhat[k]));
  return tail / peak;
}

}  // namespace sgspde
