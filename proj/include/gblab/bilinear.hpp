#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "gblab/errors.hpp"
#include "gblab/fft.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"
#include "gblab/random_fields.hpp"
#include "gblab/reduction.hpp"
#include "gblab/resonance.hpp"
#include "gblab/stats.hpp"

namespace gblab {

// ---------------------------------------------------------------------------
// Banded spectra: every mode keeps its own window of tau samples on a common
// spacing, tau = origin + (offset[ik] + i) * spacing.

struct BandedSpectrum {
  FrequencyLattice lattice;
  double spacing = 1.0;
  double origin = 0.0;
  std::vector<long> offset;
  std::vector<std::vector<cplx>> rows;

  BandedSpectrum(const FrequencyLattice& lat, double dtau, double orig = 0.0)
      : lattice(lat), spacing(dtau), origin(orig), offset(lat.modes(), 0), rows(lat.modes()) {
    if (!(dtau > 0.0)) throw InvalidArgument("banded spectrum: spacing must be positive");
  }

  std::size_t modes() const { return rows.size(); }
  double k(std::size_t ik) const { return lattice.frequency(ik); }
  double tau(std::size_t ik, std::size_t i) const {
    return origin + static_cast<double>(offset[ik] + static_cast<long>(i)) * spacing;
  }
  std::size_t cells() const {
    std::size_t n = 0;
    for (const auto& r : rows) n += r.size();
    return n;
  }
  bool empty() const {
    for (const auto& r : rows)
      for (const auto& c : r)
        if (c != cplx{}) return false;
    return true;
  }
  BandedSpectrum& operator*=(cplx a) {
    for (auto& r : rows)
      for (auto& c : r) c *= a;
    return *this;
  }
};

inline BandedSpectrum from_dense(const SpacetimeSpectrum& U) {
  BandedSpectrum B(U.lattice, U.grid.spacing, U.tau(0));
  for (std::size_t ik = 0; ik < U.modes(); ++ik) {
    B.rows[ik].resize(U.taus());
    for (std::size_t it = 0; it < U.taus(); ++it) B.rows[ik][it] = U.at(it, ik);
  }
  return B;
}

inline SpacetimeSpectrum to_dense(const BandedSpectrum& B) {
  long lo = 0, hi = 0;
  bool any = false;
  for (std::size_t ik = 0; ik < B.modes(); ++ik) {
    if (B.rows[ik].empty()) continue;
    const long a = B.offset[ik], b = a + static_cast<long>(B.rows[ik].size());
    lo = any ? std::min(lo, a) : a;
    hi = any ? std::max(hi, b) : b;
    any = true;
  }
  if (!any) hi = lo + 1;
  TauGrid g;
  g.count = static_cast<std::size_t>(hi - lo);
  g.spacing = B.spacing;
  g.center = B.origin + static_cast<double>(lo + static_cast<long>(g.count / 2)) * B.spacing;
  SpacetimeSpectrum U(B.lattice, g);
  for (std::size_t ik = 0; ik < B.modes(); ++ik)
    for (std::size_t i = 0; i < B.rows[ik].size(); ++i)
      U.at(static_cast<std::size_t>(B.offset[ik] - lo) + i, ik) = B.rows[ik][i];
  return U;
}

/// Spectrum of the complex conjugate: conj u~(-tau, -k).
inline BandedSpectrum conjugate(const BandedSpectrum& B) {
  BandedSpectrum out(B.lattice, B.spacing, -B.origin);
  const std::size_t n = B.modes();
  for (std::size_t ik = 0; ik < n; ++ik) {
    const auto& src = B.rows[n - 1 - ik];
    const long L = static_cast<long>(src.size());
    out.offset[ik] = -B.offset[n - 1 - ik] - L + 1;
    out.rows[ik].assign(src.rbegin(), src.rend());
    for (auto& c : out.rows[ik]) c = std::conj(c);
  }
  return out;
}

inline double auto_mmax(const BandedSpectrum& B) {
  double m = 1.0;
  for (std::size_t ik = 0; ik < B.modes(); ++ik) {
    const auto L = B.rows[ik].size();
    if (L == 0) continue;
    const double k2 = B.k(ik) * B.k(ik);
    m = std::max({m, japanese(B.tau(ik, 0) + k2), japanese(B.tau(ik, L - 1) + k2)});
  }
  return dyadic_level(m);
}

inline WsBreakdown ws_breakdown(const BandedSpectrum& B, double s, double Mmax = 0.0) {
  ws_check_s(s);
  if (Mmax <= 0.0) Mmax = auto_mmax(B);
  auto each = [&](auto&& f) {
    for (std::size_t ik = 0; ik < B.modes(); ++ik) {
      const double k2 = B.k(ik) * B.k(ik);
      for (std::size_t i = 0; i < B.rows[ik].size(); ++i) f(ik, B.tau(ik, i) + k2, B.rows[ik][i]);
    }
  };
  return detail::ws_accumulate(
      B.modes(), [&](std::size_t ik) { return B.k(ik); }, each, s, Mmax, B.spacing, B.lattice.measure());
}

inline double ws_norm(const BandedSpectrum& B, double s, double Mmax = 0.0) { return ws_breakdown(B, s, Mmax).total; }

// ---------------------------------------------------------------------------
// Regions.

enum class Region { None = -1, O0 = 0, O1 = 1, O2 = 2, O3 = 3, O4 = 4 };

struct RegionTag {
  Region region = Region::None;
  std::string sub;  // e.g. "21", "41'", "43"
};

/// Frequency-only classification; "<~ 1" is <= 1 and ">>" is a factor 4.
inline Region region_of(double k, double k1) {
  if (k == 0.0) return Region::None;
  const double a = std::abs(k1), b = std::abs(k1 - k), n = std::abs(k);
  if (a <= 1.0 || b <= 1.0) return Region::O0;
  if (n > 1.0 && std::min(a, b) > 4.0 * n) return Region::O3;
  if (n <= 1.0 && std::min(a, b) > 4.0) return Region::O4;
  if (a <= b) return Region::O1;
  return Region::O2;
}

/// Modulations of the two factors in the kind's convolution form.
inline std::pair<double, double> factor_modulations(BilinearKind kind, const ResonancePoint& p) {
  const double d = (p.k1 - p.k) * (p.k1 - p.k);
  switch (kind) {
    case BilinearKind::UVbar: return {p.tau1 + p.k1 * p.k1, (p.tau1 - p.tau) + d};
    case BilinearKind::UV: return {p.tau1 + p.k1 * p.k1, (p.tau - p.tau1) + d};
    case BilinearKind::UbarVbar: return {-p.tau1 + p.k1 * p.k1, (p.tau1 - p.tau) + d};
  }
  return {0.0, 0.0};
}

inline RegionTag region_classify(const ResonancePoint& p, BilinearKind kind) {
  RegionTag t;
  t.region = region_of(p.k, p.k1);
  if (t.region == Region::None || t.region == Region::O0) {
    t.sub = t.region == Region::O0 ? "0" : "";
    return t;
  }
  const auto [m1, m2] = factor_modulations(kind, p);
  const double a = std::abs(p.k1), b = std::abs(p.k1 - p.k);
  const std::string j = std::to_string(static_cast<int>(t.region));
  if (t.region == Region::O4) {
    const double N = std::abs(p.k);
    if (std::abs(m1) >= a) t.sub = "41";
    else if (std::abs(m1) >= N * a) t.sub = "41'";
    else if (std::abs(m2) >= b) t.sub = "42";
    else if (std::abs(m2) >= N * b) t.sub = "42'";
    else t.sub = "43";
    return t;
  }
  if (std::abs(m1) >= a) t.sub = j + "1";
  else if (std::abs(m2) >= b) t.sub = j + "2";
  else t.sub = j + "3";
  return t;
}

inline const char* region_name(Region r) {
  switch (r) {
    case Region::None: return "none";
    case Region::O0: return "Omega0";
    case Region::O1: return "Omega1";
    case Region::O2: return "Omega2";
    case Region::O3: return "Omega3";
    case Region::O4: return "Omega4";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Bilinear forms.

/// Keeps the (k, k1) pairs for which it returns true.
using PairFilter = std::function<bool(double k, double k1)>;

inline PairFilter only_region(Region r) {
  return [r](double k, double k1) { return region_of(k, k1) == r; };
}

namespace detail {

// out(k) = c * sum_{k1} a(k1) * b(k - k1) with tau-convolution.
inline BandedSpectrum convolve(const BandedSpectrum& a, const BandedSpectrum& b, const PairFilter& keep) {
  if (std::abs(a.spacing - b.spacing) > 1e-12 * a.spacing) throw GridMismatch("bilinear: tau spacings differ");
  require_same(a.lattice, b.lattice, "bilinear");
  const double lam = a.lattice.lambda();
  const long jo = a.lattice.jmax() + b.lattice.jmax();
  const FrequencyLattice out_lat(lam, static_cast<double>(jo) / lam);
  BandedSpectrum out(out_lat, a.spacing, a.origin + b.origin);

  std::vector<std::size_t> ia, ib;
  for (std::size_t i = 0; i < a.modes(); ++i)
    if (!a.rows[i].empty()) ia.push_back(i);
  for (std::size_t i = 0; i < b.modes(); ++i)
    if (!b.rows[i].empty()) ib.push_back(i);

  auto pair_ok = [&](std::size_t i, std::size_t j, long& jout) {
    const long j1 = a.lattice.index_j(i);
    jout = j1 + b.lattice.index_j(j);
    return !keep || keep(static_cast<double>(jout) / lam, static_cast<double>(j1) / lam);
  };

  const std::size_t no = out.modes();
  std::vector<long> lo(no, 0), hi(no, 0);
  std::vector<char> used(no, 0);
  for (auto i : ia) {
    for (auto j : ib) {
      long jout = 0;
      if (!pair_ok(i, j, jout)) continue;
      const auto o = out_lat.index_of_j(jout);
      const long s = a.offset[i] + b.offset[j];
      const long e = s + static_cast<long>(a.rows[i].size() + b.rows[j].size()) - 1;
      lo[o] = used[o] ? std::min(lo[o], s) : s;
      hi[o] = used[o] ? std::max(hi[o], e) : e;
      used[o] = 1;
    }
  }
  for (std::size_t o = 0; o < no; ++o) {
    if (!used[o]) continue;
    out.offset[o] = lo[o];
    out.rows[o].assign(static_cast<std::size_t>(hi[o] - lo[o]), cplx{});
  }
  const double c = a.spacing / (2.0 * std::numbers::pi * lam);
  for (auto i : ia) {
    const auto& ra = a.rows[i];
    for (auto j : ib) {
      long jout = 0;
      if (!pair_ok(i, j, jout)) continue;
      const auto o = out_lat.index_of_j(jout);
      const auto& rb = b.rows[j];
      cplx* dst = out.rows[o].data() + (a.offset[i] + b.offset[j] - lo[o]);
      for (std::size_t p = 0; p < ra.size(); ++p) {
        const cplx x = ra[p] * c;
        if (x == cplx{}) continue;
        cplx* d = dst + p;
        for (std::size_t q = 0; q < rb.size(); ++q) d[q] += x * rb[q];
      }
    }
  }
  return out;
}

}  // namespace detail

/// B_Omega(u, v) in the kind's conjugation pattern, before any weight.
inline BandedSpectrum bilinear_convolution(const BandedSpectrum& u, const BandedSpectrum& v, BilinearKind kind,
                                           const PairFilter& keep = {}) {
  switch (kind) {
    case BilinearKind::UV: return detail::convolve(u, v, keep);
    case BilinearKind::UVbar: return detail::convolve(u, conjugate(v), keep);
    case BilinearKind::UbarVbar: return detail::convolve(conjugate(u), conjugate(v), keep);
  }
  return detail::convolve(u, v, keep);
}

/// Multiply by omega_lambda^2(k) <tau + k^2>^{-1}.
inline BandedSpectrum apply_lambda_inverse(BandedSpectrum B) {
  const double lam = B.lattice.lambda();
  for (std::size_t ik = 0; ik < B.modes(); ++ik) {
    const double k = B.k(ik);
    const double w = omega_symbol(k, lam);
    for (std::size_t i = 0; i < B.rows[ik].size(); ++i) B.rows[ik][i] *= w / japanese(B.tau(ik, i) + k * k);
  }
  return B;
}

inline BandedSpectrum bilinear_image(const BandedSpectrum& u, const BandedSpectrum& v, BilinearKind kind,
                                     const PairFilter& keep = {}) {
  return apply_lambda_inverse(bilinear_convolution(u, v, kind, keep));
}

inline SpacetimeSpectrum bilinear_image(const SpacetimeSpectrum& u, const SpacetimeSpectrum& v, BilinearKind kind,
                                        const PairFilter& keep = {}) {
  if (!(u.grid == v.grid)) throw GridMismatch("bilinear_image: tau grids differ");
  return to_dense(bilinear_image(from_dense(u), from_dense(v), kind, keep));
}

inline SpacetimeSpectrum bilinear_convolution(const SpacetimeSpectrum& u, const SpacetimeSpectrum& v,
                                              BilinearKind kind, const PairFilter& keep = {}) {
  if (!(u.grid == v.grid)) throw GridMismatch("bilinear_convolution: tau grids differ");
  return to_dense(bilinear_convolution(from_dense(u), from_dense(v), kind, keep));
}

// ---------------------------------------------------------------------------
// Field generators.

struct FieldBump {
  double k0 = 0.0, kw = 1.0;      // centre and width in k
  double sigma0 = 0.0, sw = 1.0;  // centre and width in tau + k^2
  cplx amp{1.0, 0.0};
};

/// Sum of Gaussian bumps, each truncated at `window` widths, on banded rows.
inline BandedSpectrum banded_field(const FrequencyLattice& lat, double dtau, const std::vector<FieldBump>& bumps,
                                   double window = 5.0) {
  BandedSpectrum B(lat, dtau);
  for (std::size_t ik = 0; ik < lat.modes(); ++ik) {
    const double k = lat.frequency(ik);
    double smin = 0.0, smax = 0.0;
    bool any = false;
    for (const auto& b : bumps) {
      if (std::abs(k - b.k0) > window * b.kw) continue;
      smin = any ? std::min(smin, b.sigma0 - window * b.sw) : b.sigma0 - window * b.sw;
      smax = any ? std::max(smax, b.sigma0 + window * b.sw) : b.sigma0 + window * b.sw;
      any = true;
    }
    if (!any) continue;
    const long o = static_cast<long>(std::floor((smin - k * k) / dtau));
    const long e = static_cast<long>(std::ceil((smax - k * k) / dtau));
    B.offset[ik] = o;
    B.rows[ik].assign(static_cast<std::size_t>(e - o + 1), cplx{});
    for (std::size_t i = 0; i < B.rows[ik].size(); ++i) {
      const double sigma = B.tau(ik, i) + k * k;
      cplx acc{};
      for (const auto& b : bumps) {
        const double x = (k - b.k0) / b.kw, y = (sigma - b.sigma0) / b.sw;
        if (std::abs(x) > window || std::abs(y) > window) continue;
        acc += b.amp * std::exp(-0.5 * (x * x + y * y));
      }
      B.rows[ik][i] = acc;
    }
  }
  return B;
}

struct FieldPair {
  BandedSpectrum u, v;
  double N1 = 0.0;
};

/// High x high -> low data for the kind: u near N1, the second factor placed so
/// that the output frequency sits in |k| <~ 1.
inline FieldPair adversarial_pair(double lambda, double N1, BilinearKind kind, double dtau = 0.25) {
  const double w = 1.0, window = 5.0;
  const FrequencyLattice lat(lambda, N1 + window * w + 1.0);
  const double k2 = kind == BilinearKind::UVbar ? N1 : -N1;
  FieldPair p{banded_field(lat, dtau, {FieldBump{N1, w, 0.0, 1.0, 1.0}}, window),
              banded_field(lat, dtau, {FieldBump{k2, w, 0.0, 1.0, 1.0}}, window), N1};
  return p;
}

inline std::vector<FieldBump> random_bumps(Rng& rng, int count, double kmax, double sigma_max) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<FieldBump> out;
  for (int i = 0; i < count; ++i) {
    FieldBump b;
    b.k0 = kmax * (2.0 * U(rng) - 1.0);
    b.kw = 0.5 + U(rng);
    const double mag = std::exp(std::log(sigma_max + 1.0) * U(rng)) - 1.0;
    b.sigma0 = (U(rng) < 0.5 ? -1.0 : 1.0) * mag;
    b.sw = 1.0 + 3.0 * U(rng);
    const double re = n(rng);
    const double im = n(rng);
    b.amp = cplx{re, im};
    out.push_back(b);
  }
  return out;
}

inline FieldPair random_pair(double lambda, std::uint64_t seed, double dtau = 0.25, double kmax = 6.0,
                             double sigma_max = 40.0) {
  Rng rng(seed);
  const FrequencyLattice lat(lambda, kmax + 5.0 * 1.5 + 1.0);
  auto bu = random_bumps(rng, 3, kmax, sigma_max);
  auto bv = random_bumps(rng, 3, kmax, sigma_max);
  return FieldPair{banded_field(lat, dtau, bu), banded_field(lat, dtau, bv), 0.0};
}

// ---------------------------------------------------------------------------
// Ratio probes.

/// Loss factor in the bilinear estimate for u v-bar.
inline double cs_factor(double s, double lambda) {
  if (ws_is_endpoint(s)) return std::sqrt(lambda);
  if (std::abs(s + 0.25) < 1e-12) return std::sqrt(std::log(1.0 + lambda));
  return std::pow(lambda, -2.0 * s - 0.5);
}

enum class Generator { Random, AdversarialOmega4, PerRegion };

inline const char* generator_name(Generator g) {
  switch (g) {
    case Generator::Random: return "random";
    case Generator::AdversarialOmega4: return "adversarial-omega4";
    case Generator::PerRegion: return "per-region";
  }
  return "?";
}

struct ProbeOptions {
  std::uint64_t seed = 1;
  int trials = 4;
  double dtau = 0.25;
  double constant = 1.0;  // C in ratio <= C * C_s(lambda)
  std::vector<double> N1;  // adversarial family; empty: dyadic 8 .. max(8, 2 lambda)
};

struct ProbeReport {
  BilinearKind kind = BilinearKind::UVbar;
  Generator generator = Generator::Random;
  double s = 0.0, lambda = 1.0;
  double cs = 1.0;         // C_s(lambda) for u v-bar, 1 otherwise
  double bound = 1.0;      // constant * cs
  std::vector<double> ratios;
  std::vector<double> labels;  // N1 per ratio (adversarial) or trial index
  std::vector<std::array<double, 5>> region_ratios;  // per-region generator
  double max_ratio = 0.0;
  int skipped = 0;
  bool within = true;
  std::vector<std::string> findings;
  std::uint64_t seed = 0;
};

inline double pair_ratio(const FieldPair& p, double s, BilinearKind kind, const PairFilter& keep = {}) {
  const double nu = ws_norm(p.u, s), nv = ws_norm(p.v, s);
  if (nu == 0.0 || nv == 0.0) return std::nan("");
  return ws_norm(bilinear_image(p.u, p.v, kind, keep), s) / (nu * nv);
}

inline std::vector<double> default_n1_family(double lambda) {
  std::vector<double> out;
  for (double N = 8.0; N <= std::max(8.0, 2.0 * lambda); N *= 2.0) out.push_back(N);
  return out;
}

inline ProbeReport ratio_probe(double s, double lambda, BilinearKind kind, Generator gen,
                               const ProbeOptions& opt = {}) {
  if (!(s >= -0.5 - 1e-12 && s <= -0.25 + 1e-12)) throw InvalidArgument("ratio_probe: s must lie in [-1/2, -1/4]");
  if (!(lambda >= 1.0)) throw InvalidArgument("ratio_probe: lambda must be >= 1");
  ProbeReport r;
  r.kind = kind;
  r.generator = gen;
  r.s = s;
  r.lambda = lambda;
  r.seed = opt.seed;
  r.cs = kind == BilinearKind::UVbar ? cs_factor(s, lambda) : 1.0;
  r.bound = opt.constant * r.cs;

  auto record = [&](double ratio, double label) {
    if (std::isnan(ratio)) {
      ++r.skipped;
      return;
    }
    r.ratios.push_back(ratio);
    r.labels.push_back(label);
    r.max_ratio = std::max(r.max_ratio, ratio);
  };

  if (gen == Generator::AdversarialOmega4) {
    const auto family = opt.N1.empty() ? default_n1_family(lambda) : opt.N1;
    for (double N1 : family) record(pair_ratio(adversarial_pair(lambda, N1, kind, opt.dtau), s, kind), N1);
  } else {
    for (int t = 0; t < opt.trials; ++t) {
      const auto p = random_pair(lambda, derive_seed(opt.seed, static_cast<std::uint64_t>(t)), opt.dtau);
      if (gen == Generator::Random) {
        record(pair_ratio(p, s, kind), t);
        continue;
      }
      const double nu = ws_norm(p.u, s), nv = ws_norm(p.v, s);
      if (nu == 0.0 || nv == 0.0) {
        ++r.skipped;
        continue;
      }
      std::array<double, 5> per{};
      for (int j = 0; j < 5; ++j)
        per[static_cast<std::size_t>(j)] =
            ws_norm(bilinear_image(p.u, p.v, kind, only_region(static_cast<Region>(j))), s) / (nu * nv);
      r.region_ratios.push_back(per);
      record(*std::max_element(per.begin(), per.end()), t);
    }
  }
  r.within = r.max_ratio <= r.bound;
  for (std::size_t i = 0; i < r.ratios.size(); ++i)
    if (r.ratios[i] > 10.0 * r.bound)
      r.findings.push_back("ratio " + std::to_string(r.ratios[i]) + " exceeds 10x bound at label " +
                           std::to_string(r.labels[i]));
  return r;
}

struct SlopeReport {
  BilinearKind kind = BilinearKind::UVbar;
  Generator generator = Generator::AdversarialOmega4;
  double s = 0.0;
  std::vector<double> lambdas, ratios;
  double slope = 0.0;
  std::uint64_t seed = 0;
};

/// Max probe ratio per lambda and its log-log slope.
inline SlopeReport slope_sweep(double s, const std::vector<double>& lambdas, BilinearKind kind, Generator gen,
                               const ProbeOptions& opt = {}) {
  SlopeReport out;
  out.kind = kind;
  out.generator = gen;
  out.s = s;
  out.seed = opt.seed;
  for (double lam : lambdas) {
    const auto r = ratio_probe(s, lam, kind, gen, opt);
    out.lambdas.push_back(lam);
    out.ratios.push_back(r.max_ratio);
  }
  out.slope = stats::loglog_slope(out.lambdas, out.ratios);
  return out;
}

inline nlohmann::json to_json(const SlopeReport& r) {
  return {{"kind", kind_name(r.kind)}, {"generator", generator_name(r.generator)}, {"s", r.s},
          {"lambda", r.lambdas},       {"ratios", r.ratios},                       {"slope", r.slope},
          {"seed", r.seed}};
}

inline nlohmann::json to_json(const ProbeReport& r) {
  nlohmann::json j = {{"kind", kind_name(r.kind)}, {"generator", generator_name(r.generator)},
                      {"s", r.s},                  {"lambda", r.lambda},
                      {"cs", r.cs},                {"bound", r.bound},
                      {"ratios", r.ratios},        {"labels", r.labels},
                      {"max_ratio", r.max_ratio},  {"skipped", r.skipped},
                      {"within", r.within},        {"findings", r.findings},
                      {"seed", r.seed}};
  if (!r.region_ratios.empty()) j["region_ratios"] = r.region_ratios;
  return j;
}

// ---------------------------------------------------------------------------
// Bourgain's L^4 estimate.

/// ||u||_{L^4_{t,x}} / ||u||_{X^{0,3/8}}, with t over one period 2 pi / dtau of
/// the sampled spectrum and x over [0, 2 pi lambda).  Zero padding by 2 in
/// both directions makes the quadrature of |u|^4 exact.
inline double l4_norm(const SpacetimeSpectrum& U) {
  const double lam = U.lattice.lambda();
  const std::size_t nt = fft::good_size(2 * U.taus()), nx = fft::good_size(2 * U.modes());
  std::vector<cplx> grid(nt * nx, cplx{});
  // Place (tau_i, k_j) at wrapped integer positions relative to the grid centre.
  for (std::size_t it = 0; it < U.taus(); ++it) {
    const long m = static_cast<long>(it) - static_cast<long>(U.taus() / 2);
    const std::size_t row = wrap_index(m, nt);
    for (std::size_t ik = 0; ik < U.modes(); ++ik)
      grid[row * nx + wrap_index(U.lattice.index_j(ik), nx)] = U.at(it, ik);
  }
  // Transform along x for each t row, then along t for each x column.
  for (std::size_t r = 0; r < nt; ++r) fft::transform(std::span<cplx>(grid.data() + r * nx, nx), fft::Direction::Backward);
  std::vector<cplx> col(nt);
  for (std::size_t c = 0; c < nx; ++c) {
    for (std::size_t r = 0; r < nt; ++r) col[r] = grid[r * nx + c];
    fft::transform(std::span<cplx>(col), fft::Direction::Backward);
    for (std::size_t r = 0; r < nt; ++r) grid[r * nx + c] = col[r];
  }
  // u(t, x) = (1 / 2 pi) (1 / lambda) dtau sum e^{i(tau t + k x)} u~; the unimodular
  // phase from the grid centre drops out of |u|.
  const double scale = U.grid.spacing / (2.0 * std::numbers::pi * lam);
  const double period_t = 2.0 * std::numbers::pi / U.grid.spacing;
  const double cell = (period_t / static_cast<double>(nt)) * (2.0 * std::numbers::pi * lam / static_cast<double>(nx));
  double acc = 0.0;
  for (const auto& c : grid) {
    const double a = std::norm(c) * scale * scale;
    acc += a * a;
  }
  return std::pow(acc * cell, 0.25);
}

inline double l4_ratio(const SpacetimeSpectrum& U) {
  const double d = xsb_norm(U, 0.0, 3.0 / 8.0);
  if (d == 0.0) return std::nan("");
  return l4_norm(U) / d;
}

}  // namespace gblab
