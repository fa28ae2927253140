#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "gblab/bump.hpp"
#include "gblab/errors.hpp"
#include "gblab/lattice.hpp"

namespace gblab {

/// ((1/lambda) sum_k <k>^{2s} |phi^(k)|^2)^{1/2}
inline double h_norm(const SpectralField& phi, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double w = std::pow(japanese(phi.lattice.frequency(i)), 2.0 * s);
    acc += w * std::norm(phi[i]);
  }
  return std::sqrt(acc * phi.lattice.measure());
}

/// ||<k>^s <tau+k^2>^b u~|| in ell^2_k L^2_tau.
inline double xsb_norm(const SpacetimeSpectrum& U, double s, double b) {
  const std::size_t nk = U.modes();
  std::vector<double> wk(nk);
  for (std::size_t ik = 0; ik < nk; ++ik) wk[ik] = std::pow(japanese(U.k(ik)), 2.0 * s);
  double acc = 0.0;
  for (std::size_t it = 0; it < U.taus(); ++it) {
    for (std::size_t ik = 0; ik < nk; ++ik) {
      const double a = std::norm(U.at(it, ik));
      if (a == 0.0) continue;
      const double wb = b == 0.0 ? 1.0 : std::pow(japanese(U.modulation(it, ik)), 2.0 * b);
      acc += wk[ik] * wb * a;
    }
  }
  return std::sqrt(acc * U.grid.spacing * U.lattice.measure());
}

/// ||<k>^s u~|| in ell^2_k L^1_tau.
inline double ys_norm(const SpacetimeSpectrum& U, double s) {
  const std::size_t nk = U.modes();
  std::vector<double> l1(nk, 0.0);
  for (std::size_t it = 0; it < U.taus(); ++it)
    for (std::size_t ik = 0; ik < nk; ++ik) l1[ik] += std::abs(U.at(it, ik));
  double acc = 0.0;
  for (std::size_t ik = 0; ik < nk; ++ik) {
    const double v = l1[ik] * U.grid.spacing;
    acc += std::pow(japanese(U.k(ik)), 2.0 * s) * v * v;
  }
  return std::sqrt(acc * U.lattice.measure());
}

// ---------------------------------------------------------------------------
// Region predicates on (tau, k).

enum class Scale { One, Bracket, BracketSq };

inline double scale_value(Scale sc, double k) {
  switch (sc) {
    case Scale::One: return 1.0;
    case Scale::Bracket: return japanese(k);
    case Scale::BracketSq: return 1.0 + k * k;
  }
  return 1.0;
}

inline const char* scale_name(Scale sc) {
  switch (sc) {
    case Scale::One: return "1";
    case Scale::Bracket: return "<k>";
    case Scale::BracketSq: return "<k>^2";
  }
  return "?";
}

struct RegionPredicate {
  std::function<bool(double tau, double k)> test;
  std::string description;

  bool operator()(double tau, double k) const { return test(tau, k); }
};

inline RegionPredicate operator&&(RegionPredicate a, RegionPredicate b) {
  auto d = "(" + a.description + " and " + b.description + ")";
  return {[a = std::move(a.test), b = std::move(b.test)](double t, double k) { return a(t, k) && b(t, k); },
          std::move(d)};
}
inline RegionPredicate operator||(RegionPredicate a, RegionPredicate b) {
  auto d = "(" + a.description + " or " + b.description + ")";
  return {[a = std::move(a.test), b = std::move(b.test)](double t, double k) { return a(t, k) || b(t, k); },
          std::move(d)};
}
inline RegionPredicate operator!(RegionPredicate a) {
  auto d = "not " + a.description;
  return {[a = std::move(a.test)](double t, double k) { return !a(t, k); }, std::move(d)};
}

/// Index M of the dyadic shell containing modulation bracket m:
/// [0,2) -> 1, [M,2M) -> M, and everything >= Mmax -> Mmax (Mmax <= 0: uncapped).
inline double dyadic_level(double m, double Mmax = 0.0) {
  if (m < 2.0) return 1.0;
  int e = 0;
  std::frexp(m, &e);
  const double M = std::ldexp(1.0, e - 1);
  return (Mmax > 0.0 && M > Mmax) ? Mmax : M;
}

namespace region {

inline RegionPredicate everywhere() {
  return {[](double, double) { return true; }, "all"};
}
inline RegionPredicate nowhere() {
  return {[](double, double) { return false; }, "none"};
}
/// <tau + k^2> <= c * scale(k)
inline RegionPredicate modulation_le(Scale sc, double c = 1.0) {
  return {[sc, c](double t, double k) { return japanese(t + k * k) <= c * scale_value(sc, k); },
          "<tau+k^2> <= " + std::to_string(c) + "*" + scale_name(sc)};
}
/// <tau + k^2> > c * scale(k)
inline RegionPredicate modulation_gt(Scale sc, double c = 1.0) {
  return {[sc, c](double t, double k) { return japanese(t + k * k) > c * scale_value(sc, k); },
          "<tau+k^2> > " + std::to_string(c) + "*" + scale_name(sc)};
}
/// <tau + k^2> ~ M in the dyadic_level sense.
inline RegionPredicate modulation_shell(double M, double Mmax = 0.0) {
  return {[M, Mmax](double t, double k) { return dyadic_level(japanese(t + k * k), Mmax) == M; },
          "<tau+k^2> ~ " + std::to_string(M)};
}
inline RegionPredicate frequency_le(double N) {
  return {[N](double, double k) { return std::abs(k) <= N; }, "|k| <= " + std::to_string(N)};
}

}  // namespace region

/// P_Omega: zero every cell failing the predicate.
inline SpacetimeSpectrum project(const SpacetimeSpectrum& U, const RegionPredicate& pred) {
  SpacetimeSpectrum out(U.lattice, U.grid);
  for (std::size_t it = 0; it < U.taus(); ++it) {
    const double tau = U.tau(it);
    for (std::size_t ik = 0; ik < U.modes(); ++ik)
      if (pred(tau, U.k(ik))) out.at(it, ik) = U.at(it, ik);
  }
  return out;
}

inline void check_mmax(double Mmax) {
  int e = 0;
  if (Mmax < 1.0 || std::frexp(Mmax, &e) != 0.5) throw InvalidArgument("Mmax must be a power of 2 >= 1");
}

/// Smallest power of two covering every modulation bracket on the grid.
inline double auto_mmax(const SpacetimeSpectrum& U) {
  double m = 1.0;
  for (std::size_t it = 0; it < U.taus(); it += std::max<std::size_t>(1, U.taus() - 1))
    for (std::size_t ik = 0; ik < U.modes(); ++ik) m = std::max(m, japanese(U.modulation(it, ik)));
  return dyadic_level(m);
}

/// Shells M = 1, 2, 4, ..., Mmax (Mmax <= 0: auto).
inline std::vector<std::pair<double, SpacetimeSpectrum>> dyadic_shells(const SpacetimeSpectrum& U,
                                                                      double Mmax = 0.0) {
  if (Mmax <= 0.0) Mmax = auto_mmax(U);
  check_mmax(Mmax);
  std::vector<std::pair<double, SpacetimeSpectrum>> out;
  for (double M = 1.0; M <= Mmax; M *= 2.0) out.emplace_back(M, SpacetimeSpectrum(U.lattice, U.grid));
  for (std::size_t it = 0; it < U.taus(); ++it) {
    for (std::size_t ik = 0; ik < U.modes(); ++ik) {
      const double M = dyadic_level(japanese(U.modulation(it, ik)), Mmax);
      const auto idx = static_cast<std::size_t>(std::lround(std::log2(M)));
      out[idx].second.at(it, ik) = U.at(it, ik);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// W^s.

struct WsBreakdown {
  double s = 0.0;
  double low = 0.0;         // X^{s,1} on <tau+k^2> <= <k>
  double mid = 0.0;         // X^{s+1,0} on <k> < <tau+k^2> (s > -1/2) or up to <k>^2 (s = -1/2)
  double shells_sum = 0.0;  // sum_M X^{1/2,0} on <tau+k^2> > <k>^2 (s = -1/2 only)
  double tail = 0.0;        // Y^s on <tau+k^2> > 4 <k>^2
  std::vector<std::pair<double, double>> shells;
  double total = 0.0;
};

inline bool ws_is_endpoint(double s) { return std::abs(s + 0.5) < 1e-12; }

inline void ws_check_s(double s) {
  if (!(s >= -0.5 - 1e-12 && s <= -0.25 + 1e-12))
    throw InvalidArgument("ws_norm: s must lie in [-1/2, -1/4], got " + std::to_string(s));
}

namespace detail {

// Core of the W^s evaluation over an arbitrary cell layout. `each(f)` must call
// f(ik, modulation, value) once per stored cell; `kof(ik)` gives the frequency.
template <class Kof, class Each>
WsBreakdown ws_accumulate(std::size_t nk, Kof kof, Each each, double s, double Mmax, double dtau, double meas) {
  ws_check_s(s);
  check_mmax(Mmax);
  const bool endpoint = ws_is_endpoint(s);
  const std::size_t nshell = static_cast<std::size_t>(std::lround(std::log2(Mmax))) + 1;

  double low = 0.0, mid = 0.0;
  std::vector<double> shell(nshell, 0.0);
  std::vector<double> tail_l1(nk, 0.0);
  std::vector<double> w_s(nk), w_s1(nk), kb(nk);
  for (std::size_t ik = 0; ik < nk; ++ik) {
    kb[ik] = japanese(kof(ik));
    w_s[ik] = std::pow(kb[ik], 2.0 * s);
    w_s1[ik] = std::pow(kb[ik], 2.0 * (s + 1.0));
  }
  each([&](std::size_t ik, double modulation, cplx c) {
    if (c == cplx{}) return;
    const double a = std::norm(c);
    const double m = japanese(modulation);
    const double k2 = kb[ik] * kb[ik];
    if (m <= kb[ik]) {
      low += w_s[ik] * m * m * a;
    } else if (!endpoint || m <= k2) {
      mid += w_s1[ik] * a;
    } else {
      const double M = dyadic_level(m, Mmax);
      shell[static_cast<std::size_t>(std::lround(std::log2(M)))] += w_s1[ik] * a;
    }
    if (m > 4.0 * k2) tail_l1[ik] += std::abs(c);
  });
  WsBreakdown out;
  out.s = s;
  out.low = std::sqrt(low * dtau * meas);
  out.mid = std::sqrt(mid * dtau * meas);
  double M = 1.0;
  for (std::size_t i = 0; i < nshell; ++i, M *= 2.0) {
    const double v = std::sqrt(shell[i] * dtau * meas);
    if (endpoint) out.shells.emplace_back(M, v);
    out.shells_sum += v;
  }
  double tail = 0.0;
  for (std::size_t ik = 0; ik < nk; ++ik) {
    const double v = tail_l1[ik] * dtau;
    tail += w_s[ik] * v * v;
  }
  out.tail = std::sqrt(tail * meas);
  out.total = out.low + out.mid + out.shells_sum + out.tail;
  return out;
}

}  // namespace detail

/// The four pieces of W^s, evaluated in one pass over the grid.
inline WsBreakdown ws_breakdown(const SpacetimeSpectrum& U, double s, double Mmax = 0.0) {
  ws_check_s(s);
  if (Mmax <= 0.0) Mmax = auto_mmax(U);
  auto each = [&](auto&& f) {
    for (std::size_t it = 0; it < U.taus(); ++it)
      for (std::size_t ik = 0; ik < U.modes(); ++ik) f(ik, U.modulation(it, ik), U.at(it, ik));
  };
  return detail::ws_accumulate(
      U.modes(), [&](std::size_t ik) { return U.k(ik); }, each, s, Mmax, U.grid.spacing, U.lattice.measure());
}

inline double ws_norm(const SpacetimeSpectrum& U, double s, double Mmax = 0.0) {
  return ws_breakdown(U, s, Mmax).total;
}

/// The same norm assembled from explicit projections; slower, used as a cross-check.
inline double ws_norm_by_projection(const SpacetimeSpectrum& U, double s, double Mmax = 0.0) {
  ws_check_s(s);
  using namespace region;
  double total = xsb_norm(project(U, modulation_le(Scale::Bracket)), s, 1.0);
  total += ys_norm(project(U, modulation_gt(Scale::BracketSq, 4.0)), s);
  if (!ws_is_endpoint(s)) return total + xsb_norm(project(U, modulation_gt(Scale::Bracket)), s + 1.0, 0.0);
  total += xsb_norm(project(U, modulation_gt(Scale::Bracket) && modulation_le(Scale::BracketSq)), 0.5, 0.0);
  const auto high = project(U, modulation_gt(Scale::BracketSq));
  for (const auto& [M, piece] : dyadic_shells(high, Mmax > 0.0 ? Mmax : auto_mmax(U)))
    total += xsb_norm(piece, 0.5, 0.0);
  return total;
}

// ---------------------------------------------------------------------------
// Mixed ell^1 Besov norm B^{s,b}_{2,1} and its difference form.

/// Largest dyadic index whose piece p_j can be nonzero for |x| <= xmax.
inline int lp_top(double xmax) {
  int j = 0;
  while (std::ldexp(1.0, j) < xmax) ++j;
  return j + 1;
}

/// sum_j sum_l 2^{sj} 2^{bl} ||p_j(k) p_l(tau) u~||
inline double besov_norm(const SpacetimeSpectrum& U, double s, double b) {
  const int jtop = lp_top(U.lattice.K() + 1.0 / U.lattice.lambda());
  const int ltop = lp_top(U.grid.max_abs());
  const std::size_t nk = U.modes();
  std::vector<double> acc(static_cast<std::size_t>((jtop + 1) * (ltop + 1)), 0.0);
  std::vector<std::vector<std::pair<int, double>>> kp(nk);
  for (std::size_t ik = 0; ik < nk; ++ik)
    for (int j = 0; j <= jtop; ++j)
      if (const double p = lp_piece(j, U.k(ik)); p != 0.0) kp[ik].emplace_back(j, p);
  for (std::size_t it = 0; it < U.taus(); ++it) {
    std::vector<std::pair<int, double>> tp;
    for (int l = 0; l <= ltop; ++l)
      if (const double p = lp_piece(l, U.tau(it)); p != 0.0) tp.emplace_back(l, p);
    for (std::size_t ik = 0; ik < nk; ++ik) {
      const double a = std::norm(U.at(it, ik));
      if (a == 0.0) continue;
      for (auto [j, pj] : kp[ik])
        for (auto [l, pl] : tp) acc[static_cast<std::size_t>(j * (ltop + 1) + l)] += pj * pj * pl * pl * a;
    }
  }
  const double w = U.grid.spacing * U.lattice.measure();
  double total = 0.0;
  for (int j = 0; j <= jtop; ++j)
    for (int l = 0; l <= ltop; ++l)
      total += std::pow(2.0, s * j + b * l) *
               std::sqrt(acc[static_cast<std::size_t>(j * (ltop + 1) + l)] * w);
  return total;
}

/// Time transform of a trajectory treated as zero off its grid.
inline SpacetimeSpectrum extension_by_zero(const Trajectory& f, std::size_t pad) {
  Window one{[](double) { return 1.0; }, f.t_start, f.t_end(), "1"};
  return time_transform(f, one, pad);
}

inline double besov_norm(const Trajectory& f, double s, double b, std::size_t pad = 4) {
  return besov_norm(extension_by_zero(f, pad), s, b);
}

/// sum_j 2^{sj} (||f_j|| + int |r|^{-b} ||f_j(.+r) - f_j|| dr/|r|), r on a
/// geometric grid of ratio 2^{1/4} over [dt, 4T]; the shift norm is evaluated
/// by Plancherel in t from a zero-padded transform.
inline double difference_norm(const Trajectory& f, double s, double b) {
  if (!(b > 0.0 && b < 1.0)) throw InvalidArgument("difference_norm: b must lie in (0,1)");
  if (f.count < 2) throw InvalidArgument("difference_norm: trajectory too short");
  const double T = std::max(std::abs(f.t_start), std::abs(f.t_end()));
  const double span = f.t_end() - f.t_start;
  const double rmax = 4.0 * T;
  const auto pad = static_cast<std::size_t>(std::ceil(4.0 * std::max(span, rmax) / span)) + 1;
  const SpacetimeSpectrum U = extension_by_zero(f, pad);

  std::vector<double> rs;
  const double ratio = std::pow(2.0, 0.25);
  for (double r = f.dt; r <= rmax * (1.0 + 1e-12); r *= ratio) rs.push_back(r);
  const double dlog = std::log(ratio);

  const int jtop = lp_top(f.lattice.K() + 1.0 / f.lattice.lambda());
  const double meas = f.lattice.measure();
  const std::size_t nk = U.modes();
  double total = 0.0;
  for (int j = 0; j <= jtop; ++j) {
    std::vector<double> pj(nk);
    bool any = false;
    for (std::size_t ik = 0; ik < nk; ++ik) {
      pj[ik] = lp_piece(j, U.k(ik));
      any = any || pj[ik] != 0.0;
    }
    if (!any) continue;
    // |f~_j(tau)|^2 summed over k, per tau row.
    std::vector<double> row(U.taus(), 0.0);
    for (std::size_t it = 0; it < U.taus(); ++it)
      for (std::size_t ik = 0; ik < nk; ++ik) row[it] += pj[ik] * pj[ik] * std::norm(U.at(it, ik));
    double base = 0.0;
    for (double v : row) base += v;
    base = std::sqrt(base * U.grid.spacing * meas);

    // Trapezoid in log r; both signs of r contribute equally.
    double integral = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const double r = rs[i];
      double acc = 0.0;
      for (std::size_t it = 0; it < U.taus(); ++it) {
        const double c = 2.0 * std::sin(0.5 * U.tau(it) * r);
        acc += c * c * row[it];
      }
      const double g = std::pow(r, -b) * std::sqrt(acc * U.grid.spacing * meas);
      const double w = (i == 0 || i + 1 == rs.size()) ? 0.5 : 1.0;
      integral += w * g * dlog;
    }
    total += std::pow(2.0, s * j) * (base + 2.0 * integral);
  }
  return total;
}

}  // namespace gblab
