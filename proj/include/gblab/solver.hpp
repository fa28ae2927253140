#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "gblab/errors.hpp"
#include "gblab/fft.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"
#include "gblab/quadrature.hpp"
#include "gblab/reduction.hpp"

namespace gblab {

struct SolverConfig {
  double lambda = 1.0;
  double s = -0.5;
  double T = 1.0;
  double dt = 1e-3;
  double K = 16.0;
  int maxPicard = 60;
  double contractionTol = 1e-12;
  double dealias = 2.0;
  bool symmetric = true;            // solve on [-T, T]; otherwise on [0, T]
  bool linear_terms = true;         // (1/2) lambda^{-2} (u - conj u)
  bool quadratic_terms = true;      // -(1/4) omega^2 (u + conj u)^2
  double reference_local_tol = 1e-8;
  bool reference_check = true;      // step-doubling local error check
};

inline std::size_t steps_of(double T, double dt) {
  const double x = T / dt;
  const long n = std::lround(x);
  if (n < 1 || std::abs(x - static_cast<double>(n)) > 1e-9 * std::max(1.0, x))
    throw InvalidArgument("solver: dt = " + std::to_string(dt) + " does not divide T = " + std::to_string(T));
  return static_cast<std::size_t>(n);
}

inline void validate(const SolverConfig& c) {
  if (!(c.lambda >= 1.0)) throw InvalidArgument("solver: lambda must be >= 1");
  if (!(c.T > 0.0) || !(c.dt > 0.0)) throw InvalidArgument("solver: T and dt must be positive");
  if (!(c.K > 0.0)) throw InvalidArgument("solver: K must be positive");
  if (c.maxPicard < 1) throw InvalidArgument("solver: maxPicard must be >= 1");
  if (!(c.contractionTol > 0.0)) throw InvalidArgument("solver: contractionTol must be positive");
  if (!(c.dealias >= 1.5)) throw InvalidArgument("solver: dealias factor must be >= 1.5");
  steps_of(c.T, c.dt);
}

/// Multiplies mode k by e^{-ik^2 t}.
inline SpectralField free_evolve(const SpectralField& u0, double t) {
  SpectralField out = u0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double k = out.lattice.frequency(i);
    out[i] *= std::polar(1.0, -k * k * t);
  }
  return out;
}

/// Physical grid size making a quadratic product alias-free on the lattice.
inline std::size_t product_grid(const FrequencyLattice& lat, double dealias = 2.0) {
  const auto target = static_cast<std::size_t>(std::ceil(dealias * static_cast<double>(lat.modes())));
  return fft::good_size(std::max(target, 3 * static_cast<std::size_t>(lat.jmax()) + 1));
}

/// Truncated F(fg)(k) = (2 pi)^{-1/2} lambda^{-1} sum_{k1} f^(k1) g^(k - k1).
inline SpectralField dealiased_product(const SpectralField& f, const SpectralField& g, double dealias = 2.0) {
  require_same(f.lattice, g.lattice, "dealiased_product");
  const std::size_t n = product_grid(f.lattice, dealias);
  auto a = inverse_transform(f, n);
  auto b = inverse_transform(g, n);
  for (std::size_t m = 0; m < n; ++m) a[m] *= b[m];
  return forward_transform(std::span<const cplx>(a), f.lattice);
}

/// Transform of (u + conj u)^2 = 4 (Re u)^2.
inline SpectralField real_part_square(const SpectralField& u, double dealias = 2.0) {
  const std::size_t n = product_grid(u.lattice, dealias);
  auto a = inverse_transform(u, n);
  for (auto& v : a) {
    const double r = 2.0 * v.real();
    v = r * r;
  }
  return forward_transform(std::span<const cplx>(a), u.lattice);
}

/// F^lambda(u) = (1/2) lambda^{-2} (u - conj u) - (1/4) omega^2 (u + conj u)^2.
inline SpectralField nonlinearity(const SpectralField& u, double lambda, bool linear_terms = true,
                                  bool quadratic_terms = true, double dealias = 2.0) {
  check_lambda(u.lattice, lambda, "nonlinearity");
  SpectralField out(u.lattice);
  if (quadratic_terms) {
    out = real_part_square(u, dealias);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= -0.25 * omega_symbol(out.lattice.frequency(i), lambda);
  }
  if (linear_terms) {
    const double c = 0.5 / (lambda * lambda);
    const std::size_t n = u.size();
    for (std::size_t i = 0; i < n; ++i) out[i] += c * (u[i] - std::conj(u[n - 1 - i]));
  }
  return out;
}

inline SpectralField nonlinearity(const SpectralField& u, const SolverConfig& c) {
  return nonlinearity(u, c.lambda, c.linear_terms, c.quadratic_terms, c.dealias);
}

namespace detail {

/// Phase table e^{i k^2 t} for one time.
inline std::vector<cplx> unwind_phases(const FrequencyLattice& lat, double t) {
  std::vector<cplx> p(lat.modes());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double k = lat.frequency(i);
    p[i] = std::polar(1.0, k * k * t);
  }
  return p;
}

}  // namespace detail

/// int_0^t e^{-ik^2 (t - t')} F^(t', k) dt', evaluated in the interaction picture.
inline SpectralField duhamel(const Trajectory& F, double t) {
  const std::size_t i0 = F.index_of(0.0);
  const std::size_t i1 = F.index_of(t);
  const std::size_t nk = F.modes();
  SpectralField out(F.lattice);
  if (i0 == i1) return out;
  const long dir = i1 > i0 ? 1 : -1;
  const std::size_t rows = (i1 > i0 ? i1 - i0 : i0 - i1) + 1;
  std::vector<cplx> g(rows * nk);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto m = static_cast<std::size_t>(static_cast<long>(i0) + dir * static_cast<long>(r));
    const auto ph = detail::unwind_phases(F.lattice, F.time(m));
    auto src = F.row(m);
    for (std::size_t ik = 0; ik < nk; ++ik) g[r * nk + ik] = ph[ik] * src[ik];
  }
  const auto I = integral(std::span<const cplx>(g), nk, static_cast<double>(dir) * F.dt);
  const auto back = detail::unwind_phases(F.lattice, -F.time(i1));
  for (std::size_t ik = 0; ik < nk; ++ik) out[ik] = back[ik] * I[ik];
  return out;
}

inline double sup_h_norm(const Trajectory& a, double s) {
  double worst = 0.0;
  for (std::size_t m = 0; m < a.count; ++m) worst = std::max(worst, h_norm(a.slice(m), s));
  return worst;
}

inline double sup_h_distance(const Trajectory& a, const Trajectory& b, double s) {
  double worst = 0.0;
  for (std::size_t m = 0; m < a.count; ++m) worst = std::max(worst, h_norm(a.slice(m) - b.slice(m), s));
  return worst;
}

inline Trajectory make_time_grid(const FrequencyLattice& lat, const SolverConfig& c) {
  const std::size_t n = steps_of(c.T, c.dt);
  return c.symmetric ? Trajectory(lat, -c.T, c.dt, 2 * n + 1) : Trajectory(lat, 0.0, c.dt, n + 1);
}

/// Phi(u)(t) = e^{it d^2} u0 - i int_0^t e^{i(t-t') d^2} F(u(t')) dt' on the whole grid.
inline Trajectory picard_map(const SpectralField& u0, const Trajectory& u, const SolverConfig& c) {
  const std::size_t nk = u.modes();
  const std::size_t i0 = u.index_of(0.0);
  // Interaction-picture integrand g_m = e^{ik^2 t_m} F(u(t_m)).
  std::vector<cplx> g(u.count * nk);
  for (std::size_t m = 0; m < u.count; ++m) {
    const auto F = nonlinearity(u.slice(m), c);
    const auto ph = detail::unwind_phases(u.lattice, u.time(m));
    for (std::size_t ik = 0; ik < nk; ++ik) g[m * nk + ik] = ph[ik] * F[ik];
  }
  Trajectory out(u.lattice, u.t_start, u.dt, u.count);
  auto fill = [&](long dir) {
    const std::size_t rows = dir > 0 ? u.count - i0 : i0 + 1;
    if (rows < 2) return;
    std::vector<cplx> seg(rows * nk);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto m = static_cast<std::size_t>(static_cast<long>(i0) + dir * static_cast<long>(r));
      std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(m * nk), nk, seg.begin() + static_cast<std::ptrdiff_t>(r * nk));
    }
    const auto I = cumulative_integral(std::span<const cplx>(seg), nk, static_cast<double>(dir) * u.dt);
    for (std::size_t r = 1; r < rows; ++r) {
      const auto m = static_cast<std::size_t>(static_cast<long>(i0) + dir * static_cast<long>(r));
      auto dst = out.row(m);
      for (std::size_t ik = 0; ik < nk; ++ik) dst[ik] = u0[ik] - cplx{0.0, 1.0} * I[r * nk + ik];
    }
  };
  fill(+1);
  fill(-1);
  std::copy(u0.coeff.begin(), u0.coeff.end(), out.row(i0).begin());
  for (std::size_t m = 0; m < u.count; ++m) {
    const auto ph = detail::unwind_phases(u.lattice, -u.time(m));
    auto dst = out.row(m);
    for (std::size_t ik = 0; ik < nk; ++ik) dst[ik] *= ph[ik];
  }
  return out;
}

struct PicardReport {
  int iterations = 0;
  bool converged = false;
  std::vector<double> differences;  // sup_t ||u^{(n+1)} - u^{(n)}||_{H^s}
  std::vector<double> ratios;       // successive difference ratios
  double residual = 0.0;            // sup_t ||Phi(u) - u||_{H^s}
};

struct PicardResult {
  Trajectory solution;
  std::vector<Trajectory> iterates;  // u^{(1)}, u^{(2)}
  PicardReport report;
};

/// Fixed-point iteration from u^{(0)} = 0 until the C_t H^s increment drops below contractionTol.
inline PicardResult picard_solve(const SpectralField& u0, const SolverConfig& c) {
  validate(c);
  check_lambda(u0.lattice, c.lambda, "picard_solve");
  PicardResult res;
  Trajectory u = make_time_grid(u0.lattice, c);
  auto& rep = res.report;
  int streak = 0;
  for (int n = 1; n <= c.maxPicard; ++n) {
    Trajectory next = picard_map(u0, u, c);
    const double d = sup_h_distance(next, u, c.s);
    rep.differences.push_back(d);
    if (rep.differences.size() >= 2) {
      const double prev = rep.differences[rep.differences.size() - 2];
      const double r = prev > 0.0 ? d / prev : 0.0;
      rep.ratios.push_back(r);
      streak = r >= 1.0 ? streak + 1 : 0;
    }
    if (n <= 2) res.iterates.push_back(next);
    u = std::move(next);
    rep.iterations = n;
    if (d < c.contractionTol) {
      rep.converged = true;
      break;
    }
    if (streak >= 3) throw DivergedError("picard_solve: iteration is not contracting", rep.ratios);
  }
  rep.residual = sup_h_distance(picard_map(u0, u, c), u, c.s);
  res.solution = std::move(u);
  return res;
}

// ---------------------------------------------------------------------------
// Reference integrator: classical RK4 on v = e^{-it d^2} u (Lawson / IF-RK4).

namespace detail {

struct InteractionRhs {
  const SolverConfig* cfg;
  SpectralField operator()(double t, const SpectralField& v) const {
    const auto u = free_evolve(v, t);
    auto F = nonlinearity(u, *cfg);
    const auto ph = unwind_phases(v.lattice, t);
    for (std::size_t i = 0; i < F.size(); ++i) F[i] *= cplx{0.0, -1.0} * ph[i];
    return F;
  }
};

inline SpectralField rk4_step(const InteractionRhs& f, double t, const SpectralField& v, double h) {
  const auto k1 = f(t, v);
  const auto k2 = f(t + 0.5 * h, v + cplx(0.5 * h) * k1);
  const auto k3 = f(t + 0.5 * h, v + cplx(0.5 * h) * k2);
  const auto k4 = f(t + h, v + cplx(h) * k3);
  SpectralField out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace detail

inline Trajectory reference_solve(const SpectralField& u0, const SolverConfig& c) {
  validate(c);
  check_lambda(u0.lattice, c.lambda, "reference_solve");
  Trajectory out = make_time_grid(u0.lattice, c);
  const std::size_t i0 = out.index_of(0.0);
  out.set_slice(i0, u0);
  const detail::InteractionRhs rhs{&c};
  const bool forced = c.linear_terms || c.quadratic_terms;
  auto march = [&](long dir) {
    SpectralField v = u0;
    const double h = static_cast<double>(dir) * c.dt;
    const std::size_t steps = dir > 0 ? out.count - 1 - i0 : i0;
    for (std::size_t r = 0; r < steps; ++r) {
      const auto m = static_cast<std::size_t>(static_cast<long>(i0) + dir * static_cast<long>(r));
      const double t = out.time(m);
      if (forced) {
        SpectralField full = detail::rk4_step(rhs, t, v, h);
        if (c.reference_check) {
          const auto half = detail::rk4_step(rhs, t, v, 0.5 * h);
          const auto two = detail::rk4_step(rhs, t + 0.5 * h, half, 0.5 * h);
          const double err = h_norm(two - full, c.s) / 15.0;
          const double scale = std::max(1.0, h_norm(two, c.s));
          if (err > c.reference_local_tol * scale)
            throw StepRejected("reference_solve: local error " + std::to_string(err) + " at t = " +
                               std::to_string(t) + " exceeds tolerance; reduce dt");
          v = two;
        } else {
          v = std::move(full);
        }
      }
      const auto next = static_cast<std::size_t>(static_cast<long>(m) + dir);
      out.set_slice(next, free_evolve(v, out.time(next)));
    }
  };
  march(+1);
  march(-1);
  return out;
}

// ---------------------------------------------------------------------------
// Second iterate A_2.

/// E(theta, t) = (e^{i theta t} - 1) / (i theta), E(0, t) = t.
inline cplx phase_integral(double theta, double t) {
  const double x = 0.5 * theta * t;
  const double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return t * sinc * std::polar(1.0, x);
}

struct A2Result {
  SpectralField closed;
  SpectralField quadrature;
  double relative_difference = 0.0;
  std::size_t nodes = 0;
};

/// Closed form of F_x A_2(phi)(t0, k).
inline SpectralField a2_closed_form(const SpectralField& phi, double t0, double lambda) {
  check_lambda(phi.lattice, lambda, "a2_iterate");
  const auto& lat = phi.lattice;
  const long J = lat.jmax();
  SpectralField out(lat);
  std::vector<long> support;
  for (long j = -J; j <= J; ++j)
    if (phi.at_j(j) != cplx{}) support.push_back(j);
  const double pref = 1.0 / (lambda * kSqrt2Pi);
  for (long j = -J; j <= J; ++j) {
    if (j == 0) continue;  // m(0) = 0
    const double k = static_cast<double>(j) / lambda;
    cplx acc{};
    for (long j1 : support) {
      const cplx b = phi.at_j(j1 - j);
      if (b == cplx{}) continue;
      const double theta = 2.0 * static_cast<double>(j) * static_cast<double>(j - j1) / (lambda * lambda);
      acc += phi.at_j(j1) * std::conj(b) * phase_integral(theta, t0);
    }
    out.set_j(j, cplx{0.0, 0.5} * omega_symbol(k, lambda) * std::polar(1.0, -k * k * t0) * pref * acc);
  }
  return out;
}

/// Largest resonance |2k(k - k1)| among pairs carrying non-negligible weight.
inline double a2_max_theta(const SpectralField& phi, double rel_cut = 1e-10) {
  const long J = phi.lattice.jmax();
  const double lambda = phi.lattice.lambda();
  double amax = 0.0;
  for (const auto& c : phi.coeff) amax = std::max(amax, std::abs(c));
  if (amax == 0.0) return 0.0;
  std::vector<long> sig;
  for (long j = -J; j <= J; ++j)
    if (std::abs(phi.at_j(j)) >= rel_cut * amax) sig.push_back(j);
  double theta = 0.0;
  for (long a : sig)
    for (long b : sig) {
      const double j = static_cast<double>(a - b);  // output index with k1 = a, k1 - k = b
      theta = std::max(theta, std::abs(2.0 * j * static_cast<double>(b)) / (lambda * lambda));
    }
  return theta;
}

/// A_2 at t0 by Simpson quadrature of the Duhamel integral, with the step chosen
/// so that theta_max * h <= phase_step.
inline SpectralField a2_quadrature(const SpectralField& phi, double t0, double lambda, double phase_step = 0.02,
                                   std::size_t* nodes_out = nullptr) {
  check_lambda(phi.lattice, lambda, "a2_iterate");
  const auto& lat = phi.lattice;
  const double theta = a2_max_theta(phi);
  auto n = static_cast<std::size_t>(std::ceil(theta * t0 / phase_step));
  n = std::max<std::size_t>(n, 8);
  n += n % 2;
  const double h = t0 / static_cast<double>(n);
  const std::size_t nk = lat.modes();
  // Composite Simpson (n even), accumulated node by node.
  std::vector<cplx> I(nk, cplx{});
  for (std::size_t m = 0; m <= n; ++m) {
    const double t = h * static_cast<double>(m);
    const double wgt = (m == 0 || m == n) ? 1.0 : (m % 2 ? 4.0 : 2.0);
    const auto S = free_evolve(phi, t);
    auto P = dealiased_product(S, conjugate(S));
    const auto ph = detail::unwind_phases(lat, t);
    for (std::size_t ik = 0; ik < nk; ++ik)
      I[ik] += wgt * ph[ik] * omega_symbol(lat.frequency(ik), lambda) * P[ik];
  }
  SpectralField out(lat);
  for (std::size_t ik = 0; ik < nk; ++ik) {
    const double k = lat.frequency(ik);
    out[ik] = cplx{0.0, 0.5} * std::polar(1.0, -k * k * t0) * (h / 3.0) * I[ik];
  }
  if (nodes_out) *nodes_out = n + 1;
  return out;
}

inline double relative_l2(const SpectralField& a, const SpectralField& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

/// Both evaluations of A_2(phi)(t0); throws if they disagree beyond tol.
inline A2Result a2_iterate_checked(const SpectralField& phi, double t0, double lambda, double tol = 1e-8,
                                   double phase_step = 0.02) {
  if (!(t0 > 0.0)) throw InvalidArgument("a2_iterate: t0 must be positive");
  A2Result r;
  r.closed = a2_closed_form(phi, t0, lambda);
  r.quadrature = a2_quadrature(phi, t0, lambda, phase_step, &r.nodes);
  r.relative_difference = relative_l2(r.quadrature, r.closed);
  if (r.relative_difference > tol)
    throw ConsistencyError("a2_iterate: closed form and quadrature differ by " +
                           std::to_string(r.relative_difference));
  return r;
}

inline SpectralField a2_iterate(const SpectralField& phi, double t0, double lambda) {
  return a2_iterate_checked(phi, t0, lambda).closed;
}

}  // namespace gblab
