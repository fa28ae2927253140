#pragma once

#include <cmath>
#include <functional>
#include <string>

namespace gblab {

namespace detail {
inline double smooth_step_kernel(double x) { return x > 0.0 ? std::exp(-1.0 / x) : 0.0; }
}  // namespace detail

/// C-infinity cutoff with chi_[-1,1] <= psi <= chi_[-2,2].
///
/// psi(t) = g(2-|t|) / (g(2-|t|) + g(|t|-1)), g(x) = exp(-1/x) for x > 0.
inline double bump(double t) {
  const double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a >= 2.0) return 0.0;
  const double up = detail::smooth_step_kernel(2.0 - a);
  const double down = detail::smooth_step_kernel(a - 1.0);
  return up / (up + down);
}

/// A time cutoff with known compact support [lo, hi].
struct Window {
  std::function<double(double)> profile;
  double lo = 0.0;
  double hi = 0.0;
  std::string name;

  double operator()(double t) const { return profile(t); }
};

/// psi(t / scale), supported on [-2 scale, 2 scale].
inline Window bump_window(double scale = 1.0) {
  return Window{[scale](double t) { return bump(t / scale); }, -2.0 * scale, 2.0 * scale,
                "bump(t/" + std::to_string(scale) + ")"};
}

/// Littlewood-Paley piece: p_0 = psi, p_j(x) = psi(x / 2^j) - psi(x / 2^(j-1)).
inline double lp_piece(int j, double x) {
  if (j == 0) return bump(x);
  return bump(std::ldexp(x, -j)) - bump(std::ldexp(x, -(j - 1)));
}

}  // namespace gblab
