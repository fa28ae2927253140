#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "gblab/errors.hpp"

namespace gblab {

/// Running fourth-order integrals of a vector-valued sampled function.
///
/// Given rows g_0, ..., g_M (each `width` values, stride `width`) on a grid of
/// step h, returns I_m ~ int_{t_0}^{t_m} g for every m: composite Simpson for
/// even m, Simpson plus a closing 3/8 panel for odd m >= 3, and the cubic
/// (9, 19, -5, 1)/24 formula for m = 1. Needs M >= 3 when M is odd or M == 1.
template <class T>
std::vector<T> cumulative_integral(std::span<const T> g, std::size_t width, double h) {
  if (width == 0 || g.size() % width != 0) throw InvalidArgument("cumulative_integral: bad row width");
  const std::size_t rows = g.size() / width;
  std::vector<T> out(g.size(), T{});
  if (rows <= 1) return out;
  if (rows < 4) {
    // Too short for the fourth-order rules: trapezoid.
    for (std::size_t m = 1; m < rows; ++m)
      for (std::size_t c = 0; c < width; ++c)
        out[m * width + c] = out[(m - 1) * width + c] + 0.5 * h * (g[(m - 1) * width + c] + g[m * width + c]);
    return out;
  }
  auto G = [&](std::size_t m, std::size_t c) { return g[m * width + c]; };
  for (std::size_t c = 0; c < width; ++c)
    out[width + c] = h / 24.0 * (9.0 * G(0, c) + 19.0 * G(1, c) - 5.0 * G(2, c) + G(3, c));
  for (std::size_t m = 2; m < rows; m += 2)
    for (std::size_t c = 0; c < width; ++c)
      out[m * width + c] = out[(m - 2) * width + c] + h / 3.0 * (G(m - 2, c) + 4.0 * G(m - 1, c) + G(m, c));
  for (std::size_t m = 3; m < rows; m += 2)
    for (std::size_t c = 0; c < width; ++c)
      out[m * width + c] = out[(m - 3) * width + c] +
                           3.0 * h / 8.0 * (G(m - 3, c) + 3.0 * G(m - 2, c) + 3.0 * G(m - 1, c) + G(m, c));
  return out;
}

/// Composite rule over all rows, same scheme as the last entry of cumulative_integral.
template <class T>
std::vector<T> integral(std::span<const T> g, std::size_t width, double h) {
  auto all = cumulative_integral(g, width, h);
  const std::size_t rows = g.size() / width;
  return std::vector<T>(all.begin() + static_cast<std::ptrdiff_t>((rows - 1) * width), all.end());
}

}  // namespace gblab
