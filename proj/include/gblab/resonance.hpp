#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "gblab/errors.hpp"
#include "gblab/lattice.hpp"
#include "gblab/random_fields.hpp"

namespace gblab {

enum class BilinearKind { UVbar, UV, UbarVbar };

inline const char* kind_name(BilinearKind k) {
  switch (k) {
    case BilinearKind::UVbar: return "u_vbar";
    case BilinearKind::UV: return "uv";
    case BilinearKind::UbarVbar: return "ubar_vbar";
  }
  return "?";
}

struct ResonancePoint {
  double tau = 0.0, k = 0.0, tau1 = 0.0, k1 = 0.0;
};

struct ResonanceValue {
  double quantity = 0.0;     // lower bound from the frequencies alone
  double combination = 0.0;  // signed sum of the three modulations
  double max_modulation = 0.0;
  bool holds = true;
};

/// Resonance function of one bilinear interaction.
inline ResonanceValue resonance_fn(BilinearKind kind, const ResonancePoint& p) {
  const double a = p.tau + p.k * p.k;
  ResonanceValue r;
  double b = 0.0, c = 0.0;
  switch (kind) {
    case BilinearKind::UVbar:
      b = p.tau1 + p.k1 * p.k1;
      c = (p.tau1 - p.tau) + (p.k1 - p.k) * (p.k1 - p.k);
      r.combination = a - b + c;
      r.quantity = 2.0 * std::abs(p.k) * std::abs(p.k1 - p.k) / 3.0;
      break;
    case BilinearKind::UV:
      b = p.tau1 + p.k1 * p.k1;
      c = (p.tau - p.tau1) + (p.k - p.k1) * (p.k - p.k1);
      r.combination = a - b - c;
      r.quantity = 2.0 * std::abs(p.k1) * std::abs(p.k - p.k1) / 3.0;
      break;
    case BilinearKind::UbarVbar:
      b = -p.tau1 + p.k1 * p.k1;
      c = (p.tau1 - p.tau) + (p.k1 - p.k) * (p.k1 - p.k);
      r.combination = a + b + c;
      r.quantity = (p.k * p.k + p.k1 * p.k1 + (p.k1 - p.k) * (p.k1 - p.k)) / 3.0;
      break;
  }
  r.max_modulation = std::max({std::abs(a), std::abs(b), std::abs(c)});
  const double slack = 1e-12 * std::max({1.0, std::abs(a), std::abs(b), std::abs(c)});
  r.holds = std::abs(r.combination) + slack >= r.quantity && r.max_modulation + slack >= r.quantity;
  return r;
}

/// (tau1 + xi1^2) + (tau - tau1 + (xi - xi1)^2) - (tau + xi^2/2 + (xi - 2 xi1)^2 / 2)
inline double l4_identity_check(const ResonancePoint& p) {
  const double lhs = (p.tau1 + p.k1 * p.k1) + (p.tau - p.tau1 + (p.k - p.k1) * (p.k - p.k1));
  const double rhs = p.tau + 0.5 * p.k * p.k + 0.5 * (p.k - 2.0 * p.k1) * (p.k - 2.0 * p.k1);
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// Counting estimates.

enum class Lemma { RB1, RB2, DRB1, DRB2 };
enum class Side { Complement, Exceptional, All };

inline const char* lemma_name(Lemma l) {
  switch (l) {
    case Lemma::RB1: return "RB1";
    case Lemma::RB2: return "RB2";
    case Lemma::DRB1: return "DRB1";
    case Lemma::DRB2: return "DRB2";
  }
  return "?";
}

inline const char* side_name(Side s) {
  switch (s) {
    case Side::Complement: return "complement";
    case Side::Exceptional: return "exceptional";
    case Side::All: return "all";
  }
  return "?";
}

/// For DRB1/DRB2, M1 plays the role of M (the bound on <tau + k^2>).
struct CountingCase {
  Lemma lemma = Lemma::RB1;
  Side side = Side::Complement;
  double M1 = 1.0, M2 = 1.0;
  double lambda = 1.0;
  bool derivWeight = true;
};

/// "<x> <~ M" is implemented as <x> <= kLesssimFactor * M.
inline constexpr double kLesssimFactor = 2.0;
inline constexpr double kMaxEnumerated = 1e8;

inline bool is_dyadic(double M) {
  if (!(M >= 1.0) || !std::isfinite(M)) return false;
  int e = 0;
  return std::frexp(M, &e) == 0.5;
}

inline void validate(const CountingCase& c) {
  if (!is_dyadic(c.M1) || !is_dyadic(c.M2)) throw InvalidArgument("counting case: M1, M2 must be dyadic >= 1");
  if (!(c.lambda >= 1.0) || !std::isfinite(c.lambda)) throw InvalidArgument("counting case: lambda must be >= 1");
}

/// Half-width of {x : <x> <= 2M}.
inline double modulation_radius(double M) {
  const double b = kLesssimFactor * M;
  return std::sqrt(b * b - 1.0);
}

/// Length of [-r1, r1] intersected with [d - r2, d + r2].
inline double overlap_length(double d, double r1, double r2) {
  const double lo = std::max(-r1, d - r2);
  const double hi = std::min(r1, d + r2);
  return hi > lo ? hi - lo : 0.0;
}

namespace detail {

inline bool side_selects(Side side, bool in_exceptional) {
  switch (side) {
    case Side::Complement: return !in_exceptional;
    case Side::Exceptional: return in_exceptional;
    case Side::All: return true;
  }
  return false;
}

inline long lattice_index(double k, double lambda) {
  const double j = k * lambda;
  const long r = std::lround(j);
  if (std::abs(j - static_cast<double>(r)) > 1e-9 * std::max(1.0, std::abs(j)))
    throw InvalidArgument("frequency is not on the 1/lambda lattice");
  return r;
}

inline void guard_count(double n) {
  if (n > kMaxEnumerated) throw OverflowGuard("admissible lattice range exceeds 1e8 points");
}

// Integers m in [ceil(a), floor(b)] with m = parity (mod 2).
inline std::pair<long, long> parity_range(double a, double b, long parity) {
  long lo = static_cast<long>(std::ceil(a - 1e-9 * std::max(1.0, std::abs(a))));
  long hi = static_cast<long>(std::floor(b + 1e-9 * std::max(1.0, std::abs(b))));
  if (((lo - parity) % 2 + 2) % 2 != 0) ++lo;
  if (((hi - parity) % 2 + 2) % 2 != 0) --hi;
  return {lo, hi};
}

// Shared shape of RB1 and DRB2: the summed variable enters through
// z = m / lambda with m of fixed parity, and the interval offset is
// d = sigma + z^2 / 2 where sigma = tau + k^2/2.  `offset` recomputes d
// from the original variables for the given m.
template <class Offset>
double annulus_sum(double lambda, double sigma, long parity, double r1, double r2, Side side, bool weight,
                   Offset offset) {
  const double R = r1 + r2;
  const double A = -sigma;
  if (A + R < 0.0) return 0.0;
  const double zhi = std::sqrt(2.0 * (A + R));
  const double zlo = A - R > 0.0 ? std::sqrt(2.0 * (A - R)) : 0.0;
  const bool has_gamma = A >= 0.0;
  const double S = has_gamma ? std::sqrt(2.0 * A) : 0.0;
  const double inv = 1.0 / lambda;
  guard_count(2.0 * lambda * (zhi - zlo) + 4.0);

  double acc = 0.0;
  auto visit = [&](long m) {
    const double z = static_cast<double>(m) / lambda;
    const double len = overlap_length(offset(m), r1, r2);
    if (len <= 0.0) return;
    const bool in_gamma = has_gamma && (std::abs(z - S) <= inv || std::abs(z + S) <= inv);
    if (!side_selects(side, in_gamma)) return;
    acc += (weight ? japanese(z) : 1.0) * len;
  };
  const auto [plo, phi] = parity_range(lambda * zlo, lambda * zhi, parity);
  for (long m = plo >= 0 ? plo : parity; m <= phi; m += 2) visit(m);
  for (long m = phi; m >= plo; m -= 2)
    if (m > 0) visit(-m);
  return acc / lambda;
}

// Shared shape of RB2 and DRB1: offset d = c + 2 q n / lambda, linear in the
// summed lattice index n, exceptional when |d| <= |q| / lambda, weight |q|.
template <class Offset>
double strip_sum(double lambda, double c, double q, double r1, double r2, Side side, bool weight, Offset offset) {
  const double R = r1 + r2;
  const double inv = 1.0 / lambda;
  if (q == 0.0) {
    if (weight) return 0.0;
    const bool in_ex = std::abs(c) <= 0.0;
    if (!side_selects(side, in_ex) || overlap_length(c, r1, r2) <= 0.0) return 0.0;
    throw OverflowGuard("zero frequency admits every lattice point");
  }
  double a = (-R - c) * lambda / (2.0 * q);
  double b = (R - c) * lambda / (2.0 * q);
  if (a > b) std::swap(a, b);
  const long lo = static_cast<long>(std::ceil(a - 1e-9 * std::max(1.0, std::abs(a))));
  const long hi = static_cast<long>(std::floor(b + 1e-9 * std::max(1.0, std::abs(b))));
  guard_count(static_cast<double>(hi - lo) + 1.0);
  double acc = 0.0;
  for (long n = lo; n <= hi; ++n) {
    const double d = offset(n);
    const double len = overlap_length(d, r1, r2);
    if (len <= 0.0) continue;
    const bool in_ex = std::abs(d) <= std::abs(q) * inv;
    if (!side_selects(side, in_ex)) continue;
    acc += len;
  }
  return (weight ? std::abs(q) : 1.0) * acc / lambda;
}

// Dual forms, written in their own variables: (tau1, k1) fixed, summing over
// the output frequency k and integrating over tau.  B-set intervals in tau are
// [-k^2 +- r1] (the M bound) and the M2 interval below.
inline double drb1_direct(const CountingCase& c, double tau1, double k1, double r1, double r2) {
  const double lam = c.lambda;
  if (k1 == 0.0) {
    if (c.derivWeight) return 0.0;
    const bool in_delta = std::abs(tau1) <= 0.0;
    if (!side_selects(c.side, in_delta) || overlap_length(tau1, r1, r2) <= 0.0) return 0.0;
    throw OverflowGuard("zero frequency admits every lattice point");
  }
  // Second interval: tau in [tau1 - (k - k1)^2 +- r2].  Nonempty overlap needs
  // |tau1 - k1^2 + 2 k1 k| < r1 + r2, a linear condition on k.
  const double R = r1 + r2;
  double lo = (k1 * k1 - tau1 - R) / (2.0 * k1), hi = (k1 * k1 - tau1 + R) / (2.0 * k1);
  if (lo > hi) std::swap(lo, hi);
  const long nlo = static_cast<long>(std::floor(lo * lam)) - 1;
  const long nhi = static_cast<long>(std::ceil(hi * lam)) + 1;
  guard_count(static_cast<double>(nhi - nlo) + 1.0);
  double acc = 0.0;
  for (long n = nlo; n <= nhi; ++n) {
    const double k = static_cast<double>(n) / lam;
    const double lo1 = -k * k - r1, hi1 = -k * k + r1;
    const double centre = tau1 - (k - k1) * (k - k1);
    const double len = std::min(hi1, centre + r2) - std::max(lo1, centre - r2);
    if (!(len > 0.0)) continue;
    const bool in_delta = std::abs(tau1 - k1 * k1 + 2.0 * k1 * k) <= std::abs(k1) / lam;
    if (!side_selects(c.side, in_delta)) continue;
    acc += len;
  }
  return (c.derivWeight ? std::abs(k1) : 1.0) * acc / lam;
}

inline double drb2_direct(const CountingCase& c, double tau1, double k1, double r1, double r2) {
  const double lam = c.lambda;
  // Second interval: tau in [tau1 + (k1 - k)^2 +- r2].  The centre gap is
  // tau1 + (k1 - k)^2 + k^2 = tau1 + k1^2/2 + (2k - k1)^2/2, bounded by r1 + r2.
  const double R = r1 + r2;
  const double a = -tau1 - 0.5 * k1 * k1;
  if (a + R < 0.0) return 0.0;
  const double ymax = std::sqrt(2.0 * (a + R));
  const double ymin = a - R > 0.0 ? std::sqrt(2.0 * (a - R)) : 0.0;
  // |2k - k1| in [ymin, ymax]: two k-ranges, each padded by one lattice step.
  const long alo = static_cast<long>(std::floor(0.5 * (k1 - ymax) * lam)) - 1;
  const long ahi = static_cast<long>(std::ceil(0.5 * (k1 - ymin) * lam)) + 1;
  const long blo = std::max(ahi + 1, static_cast<long>(std::floor(0.5 * (k1 + ymin) * lam)) - 1);
  const long bhi = static_cast<long>(std::ceil(0.5 * (k1 + ymax) * lam)) + 1;
  guard_count(static_cast<double>(ahi - alo) + static_cast<double>(bhi - blo) + 2.0);
  const bool real_root = -tau1 - 0.5 * k1 * k1 >= 0.0;
  const double root = real_root ? std::sqrt(2.0 * (-tau1 - 0.5 * k1 * k1)) : 0.0;
  double acc = 0.0;
  auto visit = [&](long n) {
    const double k = static_cast<double>(n) / lam;
    const double lo1 = -k * k - r1, hi1 = -k * k + r1;
    const double centre = tau1 + (k1 - k) * (k1 - k);
    const double len = std::min(hi1, centre + r2) - std::max(lo1, centre - r2);
    if (!(len > 0.0)) return;
    const double y = k - (k1 - k);
    const bool in_delta = real_root && (std::abs(y + root) <= 1.0 / lam || std::abs(y - root) <= 1.0 / lam);
    if (!side_selects(c.side, in_delta)) return;
    acc += (c.derivWeight ? japanese(y) : 1.0) * len;
  };
  for (long n = alo; n <= ahi; ++n) visit(n);
  for (long n = blo; n <= bhi; ++n) visit(n);
  return acc / lam;
}

}  // namespace detail

/// (1/lambda) sum_{k1} int weight * chi dtau1 at the fixed point (tau, k).
/// For DRB1/DRB2 the fixed point is (tau1, k1) and the sum/integral run over
/// (k, tau); pass the fixed pair as (tau, k).
inline double cell_measure(const CountingCase& c, double tau, double k) {
  validate(c);
  const double lam = c.lambda;
  const double r1 = modulation_radius(c.M1), r2 = modulation_radius(c.M2);
  const long j = detail::lattice_index(k, lam);

  switch (c.lemma) {
    case Lemma::RB1: {
      // tau1 in [-k1^2 +- r1] and [tau + (k - k1)^2 +- r2]; z = k1 - (k - k1).
      const double sigma = tau + 0.5 * k * k;
      return detail::annulus_sum(lam, sigma, ((j % 2) + 2) % 2, r1, r2, c.side, c.derivWeight, [&](long m) {
        const double k1 = static_cast<double>(m + j) / (2.0 * lam);
        return (tau + (k - k1) * (k - k1)) - (-k1 * k1);
      });
    }
    case Lemma::RB2: {
      // tau1 in [-k1^2 +- r1] and [tau - (k1 - k)^2 +- r2].
      return detail::strip_sum(lam, tau - k * k, k, r1, r2, c.side, c.derivWeight, [&](long n) {
        const double k1 = static_cast<double>(n) / lam;
        return (tau - (k1 - k) * (k1 - k)) - (-k1 * k1);
      });
    }
    case Lemma::DRB1:
      return detail::drb1_direct(c, tau, k, r1, r2);
    case Lemma::DRB2:
      return detail::drb2_direct(c, tau, k, r1, r2);
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Sup sweeps.

struct SamplerSpec {
  std::size_t random_per_k = 100000;
  // RB2/DRB1 have one sample row per lattice k; random fill is applied to at
  // most this many of them (the smallest |k| first, then a seeded random pick).
  std::size_t max_random_ks = 8;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  double c_case = 64.0;
};

struct SweepResult {
  CountingCase cas;
  double sup_value = 0.0;
  double bound = 0.0;
  double ratio = 0.0;
  double witness_tau = 0.0, witness_k = 0.0;
  std::size_t samples = 0;
  double c_case = 0.0;
  bool within = true;
};

inline double case_bound(const CountingCase& c) {
  if (c.side == Side::Exceptional) return std::min(c.M1, c.M2) / c.lambda;
  return c.M1 * c.M2;
}

namespace detail {

struct Sample {
  double tau, k;
};

inline void push_sided(std::vector<Sample>& out, double tau, double k) {
  const double eps = 1e-9 * std::max(1.0, std::abs(tau));
  out.push_back({tau, k});
  out.push_back({tau - eps, k});
  out.push_back({tau + eps, k});
}

inline std::vector<Sample> sweep_samples(const CountingCase& c, const SamplerSpec& sp) {
  const double lam = c.lambda;
  const double r1 = modulation_radius(c.M1), r2 = modulation_radius(c.M2);
  const double R = r1 + r2, D = std::abs(r1 - r2);
  std::vector<Sample> out;
  Rng rng(sp.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);

  if (c.lemma == Lemma::RB1 || c.lemma == Lemma::DRB2) {
    // Value depends on sigma = tau + k^2/2 and the parity of lambda k only.
    const double zcap = 2.0 * lam * R + 2.0;
    const long mmax = static_cast<long>(std::ceil(lam * zcap));
    for (long j : {0L, 1L}) {
      const double k = static_cast<double>(j) / lam;
      const double shift = -0.5 * k * k;
      push_sided(out, shift, k);  // A = 0
      for (long m = j; m <= mmax; m += 2) {
        const double z = static_cast<double>(m) / lam;
        const double h = 0.5 * z * z;
        for (double e : {0.0, R, -R, D, -D}) push_sided(out, shift - h + e, k);
        for (double zz : {z - 1.0 / lam, z + 1.0 / lam})
          if (zz >= 0.0) push_sided(out, shift - 0.5 * zz * zz, k);
      }
      const double Amax = 0.5 * zcap * zcap + R;
      for (std::size_t i = 0; i < sp.random_per_k; ++i) out.push_back({shift - (-R + (Amax + R) * U(rng)), k});
    }
    return out;
  }

  // RB2 / DRB1: periodic in tau - k^2 with period 2|k|/lambda.
  const long jmax = static_cast<long>(std::ceil(lam * lam * R)) + 2;
  std::vector<long> js;
  for (long j = 1; j <= jmax; ++j) {
    js.push_back(j);
    js.push_back(-j);
  }
  for (long j : js) {
    const double k = static_cast<double>(j) / lam;
    const double base = k * k;
    for (double b : {0.0, R, -R, D, -D, std::abs(k) / lam, -std::abs(k) / lam}) push_sided(out, base + b, k);
  }
  std::vector<long> pick;
  for (long j : js) {
    if (pick.size() >= sp.max_random_ks) break;
    if (std::abs(j) <= 1) pick.push_back(j);
  }
  std::uniform_int_distribution<std::size_t> which(0, js.size() - 1);
  while (pick.size() < std::min(sp.max_random_ks, js.size())) pick.push_back(js[which(rng)]);
  for (long j : pick) {
    const double k = static_cast<double>(j) / lam;
    const double period = 2.0 * std::abs(k) / lam;
    for (std::size_t i = 0; i < sp.random_per_k; ++i)
      out.push_back({k * k - R - period + (2.0 * (R + period)) * U(rng), k});
  }
  return out;
}

}  // namespace detail

/// Max of cell_measure over critical points plus random fill.
inline SweepResult sup_sweep(const CountingCase& c, const SamplerSpec& sp = {}) {
  validate(c);
  const auto samples = detail::sweep_samples(c, sp);
  const unsigned workers = std::max(1u, sp.workers);
  std::vector<double> best(workers, -1.0);
  std::vector<std::size_t> arg(workers, 0);
  auto run = [&](unsigned w) {
    for (std::size_t i = w; i < samples.size(); i += workers) {
      const double v = cell_measure(c, samples[i].tau, samples[i].k);
      if (v > best[w]) {
        best[w] = v;
        arg[w] = i;
      }
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  std::size_t idx = 0;
  double sup = -1.0;
  for (unsigned w = 0; w < workers; ++w)
    if (best[w] > sup || (best[w] == sup && arg[w] < idx)) {
      sup = best[w];
      idx = arg[w];
    }

  SweepResult r;
  r.cas = c;
  r.sup_value = std::max(sup, 0.0);
  r.bound = case_bound(c);
  r.ratio = r.sup_value / r.bound;
  r.witness_tau = samples.empty() ? 0.0 : samples[idx].tau;
  r.witness_k = samples.empty() ? 0.0 : samples[idx].k;
  r.samples = samples.size();
  r.c_case = sp.c_case;
  r.within = r.ratio <= sp.c_case;
  return r;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepResult>& rows) {
  os << "case,side,lambda,M1,M2,lesssim,supValue,bound,ratio,witness_tau,witness_k\n";
  os.precision(12);
  for (const auto& r : rows)
    os << lemma_name(r.cas.lemma) << ',' << side_name(r.cas.side) << ',' << r.cas.lambda << ',' << r.cas.M1 << ','
       << r.cas.M2 << ",le" << kLesssimFactor << "M," << r.sup_value << ',' << r.bound << ',' << r.ratio << ','
       << r.witness_tau << ',' << r.witness_k << '\n';
}

}  // namespace gblab
