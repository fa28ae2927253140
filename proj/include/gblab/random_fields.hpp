#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gblab/lattice.hpp"
#include "gblab/reduction.hpp"

namespace gblab {

using Rng = std::mt19937_64;

/// Seed for case `index` derived from a root seed (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Complex Gaussian coefficients with envelope exp(-k^2 / (2 width^2)).
inline SpectralField random_field(const FrequencyLattice& lat, Rng& rng, double width = 4.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  SpectralField f(lat);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double k = lat.frequency(i);
    const double env = std::exp(-0.5 * k * k / (width * width));
    const double re = n(rng);
    const double im = n(rng);
    f[i] = env * cplx{re, im};
  }
  return f;
}

/// Field of a real-valued function: F(-k) = conj F(k).
inline SpectralField random_real_field(const FrequencyLattice& lat, Rng& rng, double width = 4.0) {
  SpectralField f = random_field(lat, rng, width);
  const std::size_t n = f.size();
  for (std::size_t i = 0; i < n / 2; ++i) f[n - 1 - i] = std::conj(f[i]);
  f[n / 2] = f[n / 2].real();
  return f;
}

inline GBState random_gb_state(const FrequencyLattice& lat, Rng& rng, double width = 4.0) {
  return GBState{random_real_field(lat, rng, width), random_real_field(lat, rng, width)};
}

/// Sum of Gaussian bumps in (k, tau + k^2): a spacetime spectrum defined
/// independently of the lattice, so one draw can be sampled at any lambda.
struct SmoothSpectrumModel {
  struct Bump {
    double k = 0.0, sigma = 0.0, wk = 1.0, ws = 1.0;
    cplx amp{};
  };
  std::vector<Bump> bumps;

  cplx operator()(double tau, double k) const {
    cplx acc{};
    for (const auto& b : bumps) {
      const double x = (k - b.k) / b.wk;
      const double y = (tau + k * k - b.sigma) / b.ws;
      const double e = x * x + y * y;
      if (e < 60.0) acc += b.amp * std::exp(-e);
    }
    return acc;
  }

  SpacetimeSpectrum sample(const FrequencyLattice& lat, const TauGrid& grid) const {
    SpacetimeSpectrum U(lat, grid);
    for (std::size_t it = 0; it < grid.count; ++it)
      for (std::size_t ik = 0; ik < lat.modes(); ++ik) U.at(it, ik) = (*this)(grid.tau(it), lat.frequency(ik));
    return U;
  }
};

/// Random bump model: centres uniform in |k| <= kmax, modulation centres with
/// log-uniform magnitude up to sigma_max, widths in [wk_lo, 2 wk_lo] and [ws_lo, 4 ws_lo].
inline SmoothSpectrumModel random_smooth_model(std::uint64_t seed, int count, double kmax, double sigma_max,
                                               double wk_lo = 1.0, double ws_lo = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  SmoothSpectrumModel m;
  for (int i = 0; i < count; ++i) {
    SmoothSpectrumModel::Bump b;
    b.k = kmax * (2.0 * u(rng) - 1.0);
    const double mag = std::exp(std::log(sigma_max) * u(rng)) - 1.0;
    b.sigma = (u(rng) < 0.5 ? -1.0 : 1.0) * mag;
    b.wk = wk_lo * (1.0 + u(rng));
    b.ws = ws_lo * (1.0 + 3.0 * u(rng));
    const double re = n(rng);
    const double im = n(rng);
    b.amp = cplx{re, im};
    m.bumps.push_back(b);
  }
  return m;
}

}  // namespace gblab
