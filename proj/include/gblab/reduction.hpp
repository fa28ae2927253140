#pragma once

#include <cmath>
#include <string>

#include "gblab/errors.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"

namespace gblab {

/// Initial data (v(0), d_t v(0)) of the Boussinesq equation.
struct GBState {
  SpectralField v0;
  SpectralField v1;
};

/// Max |F v(-k) - conj F v(k)|, zero for real-valued fields.
inline double conjugate_symmetry_defect(const SpectralField& v) {
  double worst = 0.0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(v[n - 1 - i] - std::conj(v[i])));
  return worst;
}

/// u0 = v0 + i (1 - d_x^2)^{-1} v1.
inline SpectralField gb_to_qnls(const GBState& state) {
  require_same(state.v0.lattice, state.v1.lattice, "gb_to_qnls");
  SpectralField u(state.v0.lattice);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double k = u.lattice.frequency(i);
    u[i] = state.v0[i] + cplx{0.0, 1.0} * state.v1[i] / (1.0 + k * k);
  }
  return u;
}

/// v = Re u, v1 = (1 - d_x^2) Im u.
inline GBState qnls_to_gb(const SpectralField& u) {
  GBState out{SpectralField(u.lattice), SpectralField(u.lattice)};
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double k = u.lattice.frequency(i);
    const cplx ubar = std::conj(u[n - 1 - i]);
    out.v0[i] = 0.5 * (u[i] + ubar);
    out.v1[i] = (1.0 + k * k) * (u[i] - ubar) / cplx{0.0, 2.0};
  }
  return out;
}

/// Symbol of omega_lambda^2: lambda^2 k^2 / (1 + lambda^2 k^2).
inline double omega_symbol(double k, double lambda) {
  const double x = lambda * lambda * k * k;
  return x / (1.0 + x);
}

inline void check_lambda(const FrequencyLattice& lat, double lambda, const char* where) {
  if (std::abs(lat.lambda() - lambda) > 1e-12 * lambda)
    throw GridMismatch(std::string(where) + ": lambda " + std::to_string(lambda) +
                       " does not match the lattice (" + std::to_string(lat.lambda()) + ")");
}

inline SpectralField omega_sq(const SpectralField& u, double lambda) {
  check_lambda(u.lattice, lambda, "omega_sq");
  SpectralField out = u;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= omega_symbol(out.lattice.frequency(i), lambda);
  return out;
}

inline SpacetimeSpectrum omega_sq(const SpacetimeSpectrum& U, double lambda) {
  check_lambda(U.lattice, lambda, "omega_sq");
  SpacetimeSpectrum out = U;
  for (std::size_t it = 0; it < out.taus(); ++it)
    for (std::size_t ik = 0; ik < out.modes(); ++ik) out.at(it, ik) *= omega_symbol(out.k(ik), lambda);
  return out;
}

struct RescaleReport {
  double lambda = 1.0;
  double s = 0.0;
  double norm_rescaled = 0.0;  // ||u0^lambda||_{H^s(T_lambda)}
  double norm_original = 0.0;  // ||u0||_{H^s(T)}
  double bound = 0.0;          // lambda^{-s-3/2} ||u0||
  double identity_value = 0.0; // (lambda^{-3} sum_n <n/lambda>^{2s} |u0^(n)|^2)^{1/2}
  double identity_residual = 0.0;
  bool holds = false;
};

struct RescaledData {
  SpectralField field;
  RescaleReport report;
};

/// u0^lambda(x) = lambda^{-2} u0(x / lambda): F u0^lambda(n / lambda) = lambda^{-1} F u0(n).
inline RescaledData rescale_data(const SpectralField& u0, double lambda, double s) {
  if (std::abs(u0.lattice.lambda() - 1.0) > 1e-15) throw InvalidArgument("rescale_data: input must live on the lambda = 1 lattice");
  if (!(lambda >= 1.0) || !std::isfinite(lambda)) throw InvalidArgument("rescale_data: lambda must be >= 1");
  if (!(s < 0.0)) throw InvalidArgument("rescale_data: the bound is only asserted for s < 0");

  const long jmax = u0.lattice.jmax();
  const FrequencyLattice lat(lambda, static_cast<double>(jmax) / lambda);
  if (lat.jmax() != jmax) throw ConsistencyError("rescale_data: lattice index range drifted");
  RescaledData out{SpectralField(lat), {}};
  for (long n = -jmax; n <= jmax; ++n) out.field.set_j(n, u0.at_j(n) / lambda);

  auto& r = out.report;
  r.lambda = lambda;
  r.s = s;
  r.norm_rescaled = h_norm(out.field, s);
  r.norm_original = h_norm(u0, s);
  r.bound = std::pow(lambda, -s - 1.5) * r.norm_original;
  double acc = 0.0;
  for (long n = -jmax; n <= jmax; ++n)
    acc += std::pow(japanese(static_cast<double>(n) / lambda), 2.0 * s) * std::norm(u0.at_j(n));
  r.identity_value = std::sqrt(acc / (lambda * lambda * lambda));
  r.identity_residual = std::abs(r.identity_value - r.norm_rescaled) / std::max(r.identity_value, 1e-300);
  r.holds = r.norm_rescaled <= r.bound * (1.0 + 1e-12);
  return out;
}

}  // namespace gblab
