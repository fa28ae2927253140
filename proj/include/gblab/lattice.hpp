#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gblab/bump.hpp"
#include "gblab/errors.hpp"
#include "gblab/fft.hpp"

namespace gblab {

using cplx = std::complex<double>;

inline constexpr double kSqrt2Pi = 2.5066282746310005024;  // sqrt(2 pi)

/// <x> = (1 + x^2)^(1/2)
inline double japanese(double x) { return std::sqrt(1.0 + x * x); }

/// Truncated dual lattice Z / lambda, |j| <= ceil(K lambda), k = j / lambda.
class FrequencyLattice {
 public:
  FrequencyLattice() = default;

  FrequencyLattice(double lambda, double K) : lambda_(lambda), K_(K) {
    if (!std::isfinite(lambda) || !std::isfinite(K)) throw InvalidArgument("lattice: non-finite parameter");
    if (lambda < 1.0) throw InvalidArgument("lattice: lambda must be >= 1, got " + std::to_string(lambda));
    if (K <= 0.0) throw InvalidArgument("lattice: K must be > 0, got " + std::to_string(K));
    const double kl = K * lambda;
    jmax_ = static_cast<long>(std::ceil(kl - 1e-9 * std::max(1.0, kl)));
  }

  double lambda() const { return lambda_; }
  double K() const { return K_; }
  long jmax() const { return jmax_; }
  std::size_t modes() const { return static_cast<std::size_t>(2 * jmax_ + 1); }
  double spacing() const { return 1.0 / lambda_; }
  /// Weight of one mode under the normalized counting measure.
  double measure() const { return 1.0 / lambda_; }

  long index_j(std::size_t i) const { return static_cast<long>(i) - jmax_; }
  double frequency(std::size_t i) const { return static_cast<double>(index_j(i)) / lambda_; }
  bool contains_j(long j) const { return j >= -jmax_ && j <= jmax_; }
  std::size_t index_of_j(long j) const { return static_cast<std::size_t>(j + jmax_); }

  /// Lattice index j for frequency k, rounding to the nearest lattice point.
  long j_of(double k) const { return std::lround(k * lambda_); }

  std::vector<double> frequencies() const {
    std::vector<double> out(modes());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = frequency(i);
    return out;
  }

  bool operator==(const FrequencyLattice& o) const { return lambda_ == o.lambda_ && jmax_ == o.jmax_; }

 private:
  double lambda_ = 1.0;
  double K_ = 1.0;
  long jmax_ = 1;
};

inline FrequencyLattice make_lattice(double lambda, double K) { return FrequencyLattice(lambda, K); }

inline void require_same(const FrequencyLattice& a, const FrequencyLattice& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": lattice mismatch");
}

/// Fourier coefficients F_x phi(k) on a truncated lattice.
struct SpectralField {
  FrequencyLattice lattice;
  std::vector<cplx> coeff;

  SpectralField() = default;
  explicit SpectralField(const FrequencyLattice& lat) : lattice(lat), coeff(lat.modes()) {}
  SpectralField(const FrequencyLattice& lat, std::vector<cplx> c) : lattice(lat), coeff(std::move(c)) {
    if (coeff.size() != lattice.modes()) throw GridMismatch("SpectralField: coefficient count mismatch");
  }

  std::size_t size() const { return coeff.size(); }
  cplx& operator[](std::size_t i) { return coeff[i]; }
  const cplx& operator[](std::size_t i) const { return coeff[i]; }

  /// Coefficient at lattice index j (zero outside the truncation).
  cplx at_j(long j) const { return lattice.contains_j(j) ? coeff[lattice.index_of_j(j)] : cplx{}; }
  void set_j(long j, cplx v) {
    if (!lattice.contains_j(j)) throw InvalidArgument("SpectralField: mode outside truncation");
    coeff[lattice.index_of_j(j)] = v;
  }

  SpectralField& operator+=(const SpectralField& o) {
    require_same(lattice, o.lattice, "SpectralField +=");
    for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] += o.coeff[i];
    return *this;
  }
  SpectralField& operator-=(const SpectralField& o) {
    require_same(lattice, o.lattice, "SpectralField -=");
    for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] -= o.coeff[i];
    return *this;
  }
  SpectralField& operator*=(cplx a) {
    for (auto& c : coeff) c *= a;
    return *this;
  }
};

inline SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
inline SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
inline SpectralField operator*(cplx s, SpectralField a) { return a *= s; }

/// Field of conj(u): F(conj u)(k) = conj(F u(-k)).
inline SpectralField conjugate(const SpectralField& u) {
  SpectralField out(u.lattice);
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) out[i] = std::conj(u[n - 1 - i]);
  return out;
}

/// Uniform tau grid: tau_i = center + (i - count/2) * spacing.
struct TauGrid {
  std::size_t count = 0;
  double spacing = 1.0;
  double center = 0.0;

  double tau(std::size_t i) const {
    return center + (static_cast<double>(i) - static_cast<double>(count / 2)) * spacing;
  }
  double max_abs() const { return std::max(std::abs(tau(0)), std::abs(tau(count ? count - 1 : 0))); }
  bool operator==(const TauGrid& o) const {
    return count == o.count && spacing == o.spacing && center == o.center;
  }
};

/// Symmetric grid covering [-T, T] with spacing at most dtau.
inline TauGrid make_tau_grid(double T, double dtau) {
  if (!(T > 0.0) || !(dtau > 0.0)) throw InvalidArgument("tau grid: T and dtau must be positive");
  const auto half = static_cast<std::size_t>(std::ceil(T / dtau - 1e-12));
  return TauGrid{2 * half + 1, T / static_cast<double>(half), 0.0};
}

/// u~(tau, k) on a (tau, k) grid, row-major in (tau, k).
struct SpacetimeSpectrum {
  FrequencyLattice lattice;
  TauGrid grid;
  std::vector<cplx> coeff;

  SpacetimeSpectrum() = default;
  SpacetimeSpectrum(const FrequencyLattice& lat, const TauGrid& g)
      : lattice(lat), grid(g), coeff(lat.modes() * g.count) {}

  std::size_t modes() const { return lattice.modes(); }
  std::size_t taus() const { return grid.count; }
  cplx& at(std::size_t it, std::size_t ik) { return coeff[it * modes() + ik]; }
  const cplx& at(std::size_t it, std::size_t ik) const { return coeff[it * modes() + ik]; }
  double tau(std::size_t it) const { return grid.tau(it); }
  double k(std::size_t ik) const { return lattice.frequency(ik); }

  /// Modulation tau + k^2 of a cell.
  double modulation(std::size_t it, std::size_t ik) const {
    const double kk = k(ik);
    return tau(it) + kk * kk;
  }

  SpacetimeSpectrum& operator+=(const SpacetimeSpectrum& o) {
    require_same(lattice, o.lattice, "SpacetimeSpectrum +=");
    if (!(grid == o.grid)) throw GridMismatch("SpacetimeSpectrum +=: tau grid mismatch");
    for (std::size_t i = 0; i < coeff.size(); ++i) coeff[i] += o.coeff[i];
    return *this;
  }
  SpacetimeSpectrum& operator*=(cplx a) {
    for (auto& c : coeff) c *= a;
    return *this;
  }
};

inline SpacetimeSpectrum operator+(SpacetimeSpectrum a, const SpacetimeSpectrum& b) { return a += b; }
inline SpacetimeSpectrum operator-(SpacetimeSpectrum a, SpacetimeSpectrum b) {
  b *= -1.0;
  return a += b;
}

/// ell^2_k L^2_tau norm with the lattice measure and Delta-tau weights.
inline double l2_norm(const SpacetimeSpectrum& U) {
  double acc = 0.0;
  for (const auto& c : U.coeff) acc += std::norm(c);
  return std::sqrt(acc * U.grid.spacing * U.lattice.measure());
}

/// Time-indexed family of fields on one lattice and a uniform time grid.
struct Trajectory {
  FrequencyLattice lattice;
  double t_start = 0.0;
  double dt = 0.0;
  std::size_t count = 0;
  std::vector<cplx> data;

  Trajectory() = default;
  Trajectory(const FrequencyLattice& lat, double t0, double step, std::size_t n)
      : lattice(lat), t_start(t0), dt(step), count(n), data(n * lat.modes()) {}

  std::size_t modes() const { return lattice.modes(); }
  double time(std::size_t m) const { return t_start + static_cast<double>(m) * dt; }
  double t_end() const { return time(count ? count - 1 : 0); }

  std::span<cplx> row(std::size_t m) { return {data.data() + m * modes(), modes()}; }
  std::span<const cplx> row(std::size_t m) const { return {data.data() + m * modes(), modes()}; }

  SpectralField slice(std::size_t m) const {
    auto r = row(m);
    return SpectralField(lattice, std::vector<cplx>(r.begin(), r.end()));
  }
  void set_slice(std::size_t m, const SpectralField& f) {
    require_same(lattice, f.lattice, "Trajectory::set_slice");
    std::copy(f.coeff.begin(), f.coeff.end(), row(m).begin());
  }
  /// Index of the grid point nearest to t; throws if t is off the grid.
  std::size_t index_of(double t) const {
    const double x = (t - t_start) / dt;
    const long m = std::lround(x);
    if (m < 0 || static_cast<std::size_t>(m) >= count || std::abs(x - static_cast<double>(m)) > 1e-6)
      throw InvalidArgument("Trajectory: time " + std::to_string(t) + " is not on the grid");
    return static_cast<std::size_t>(m);
  }
};

/// Sample points x_m = 2 pi lambda m / n.
inline std::vector<double> spatial_grid(const FrequencyLattice& lat, std::size_t n) {
  std::vector<double> x(n);
  const double L = 2.0 * std::numbers::pi * lat.lambda();
  for (std::size_t m = 0; m < n; ++m) x[m] = L * static_cast<double>(m) / static_cast<double>(n);
  return x;
}

inline std::size_t wrap_index(long j, std::size_t n) {
  const long nn = static_cast<long>(n);
  return static_cast<std::size_t>(((j % nn) + nn) % nn);
}

/// F_x phi(k) = (2 pi)^(-1/2) int_0^{2 pi lambda} e^{-ikx} phi(x) dx from n uniform samples.
inline SpectralField forward_transform(std::span<const cplx> samples, const FrequencyLattice& lat) {
  const std::size_t n = samples.size();
  if (n < lat.modes())
    throw GridMismatch("forward_transform: " + std::to_string(n) + " samples cannot resolve " +
                       std::to_string(lat.modes()) + " modes");
  std::vector<cplx> buf(samples.begin(), samples.end());
  fft::transform(buf, fft::Direction::Forward);
  const double scale = kSqrt2Pi * lat.lambda() / static_cast<double>(n);
  SpectralField out(lat);
  for (std::size_t i = 0; i < lat.modes(); ++i) out[i] = scale * buf[wrap_index(lat.index_j(i), n)];
  return out;
}

inline SpectralField forward_transform(std::span<const double> samples, const FrequencyLattice& lat) {
  std::vector<cplx> c(samples.begin(), samples.end());
  return forward_transform(std::span<const cplx>(c), lat);
}

/// phi(x_m) = (2 pi)^(-1/2) lambda^{-1} sum_k F(k) e^{ikx_m} on n points (n = 0 picks the mode count).
inline std::vector<cplx> inverse_transform(const SpectralField& f, std::size_t n = 0) {
  if (n == 0) n = f.lattice.modes();
  if (n < f.lattice.modes()) throw GridMismatch("inverse_transform: too few sample points");
  std::vector<cplx> buf(n);
  for (std::size_t i = 0; i < f.size(); ++i) buf[wrap_index(f.lattice.index_j(i), n)] += f[i];
  fft::transform(buf, fft::Direction::Backward);
  const double scale = 1.0 / (kSqrt2Pi * f.lattice.lambda());
  for (auto& v : buf) v *= scale;
  return buf;
}

/// u~(tau, k) = (2 pi)^(-1/2) int e^{-i tau t} window(t) u^(t, k) dt.
///
/// The rectangle rule on the trajectory grid is used (spectrally accurate for a
/// smooth window vanishing at the support ends). pad >= 1 zero-pads the time
/// series, refining the tau spacing 2 pi / (pad * count * dt).
inline SpacetimeSpectrum time_transform(const Trajectory& traj, const Window& window, std::size_t pad = 1) {
  if (traj.count < 2) throw InvalidArgument("time_transform: need at least two time slices");
  const double tol = 1e-9 * std::max(1.0, std::abs(traj.dt));
  if (window.lo < traj.t_start - tol || window.hi > traj.t_end() + tol)
    throw InvalidArgument("time_transform: window support [" + std::to_string(window.lo) + ", " +
                          std::to_string(window.hi) + "] exceeds the time grid");
  std::size_t L = traj.count * std::max<std::size_t>(pad, 1);
  if (L % 2 == 1) ++L;  // even length keeps the (-1)^m centring exact
  const std::size_t nk = traj.modes();
  TauGrid grid{L, 2.0 * std::numbers::pi / (static_cast<double>(L) * traj.dt), 0.0};
  SpacetimeSpectrum out(traj.lattice, grid);

  std::vector<double> w(traj.count);
  for (std::size_t m = 0; m < traj.count; ++m) {
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    w[m] = sign * window(traj.time(m));
  }
  std::vector<cplx> col(L);
  const double pref = traj.dt / kSqrt2Pi;
  for (std::size_t ik = 0; ik < nk; ++ik) {
    std::fill(col.begin(), col.end(), cplx{});
    bool any = false;
    for (std::size_t m = 0; m < traj.count; ++m) {
      col[m] = w[m] * traj.data[m * nk + ik];
      any = any || col[m] != cplx{};
    }
    if (!any) continue;
    fft::transform(col, fft::Direction::Forward);
    for (std::size_t it = 0; it < L; ++it) {
      const double tau = grid.tau(it);
      out.at(it, ik) = pref * std::polar(1.0, -tau * traj.t_start) * col[it];
    }
  }
  return out;
}

}  // namespace gblab
