#pragma once

#include "sgspde/phasefield.hpp"

namespace sgspde {

// (2 pi)^-d sum_k exp(i phi(x, xi_k)) a(x, xi_k) uhat(xi_k) dk^d; refuses uncertified phases.
Field apply_fio(const PhaseFunction& phi, const Symbol& a, const Field& u);
Field apply_fio(const PhaseFunction& phi, const CMatrix& amplitude, const Field& u);

// Dense lattice matrix of Op_phi(a).
CMatrix fio_matrix(const PhaseFunction& phi, const CMatrix& amplitude);

// Max over random band-limited fields of sk_norm(out, (z - m, zeta - mu)) / sk_norm(in, (z, zeta)).
double probe_fio_bound(const PhaseFunction& phi, const Symbol& a, Order order, SobolevKatoIndex idx, int trials,
                       std::uint64_t seed = 1);

// Largest |uhat| on the outer eighth of the dual band relative to max |uhat|.
double spectral_tail(const Field& u);

}  // namespace sgspde
