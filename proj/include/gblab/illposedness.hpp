#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "gblab/errors.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"
#include "gblab/reduction.hpp"
#include "gblab/solver.hpp"

namespace gblab {

enum class Variant { Torus, Line };

inline const char* variant_name(Variant v) { return v == Variant::Torus ? "torus" : "line"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "torus") return Variant::Torus;
  if (s == "line") return Variant::Line;
  throw InvalidArgument("variant must be 'torus' or 'line', got '" + s + "'");
}

inline constexpr double kCondNFactor = 100.0;  // "1/(2N t0) << 1/lambda" as a factor 100
inline constexpr int kLineRefine = 20;
inline constexpr double kA2Constant = 0.05;

// ---------------------------------------------------------------------------
// cond_N

struct CondN {
  bool pass = false;
  bool positive = false;   // N > 0 and N on Z / lambda
  bool separated = false;  // 1/(2 N t0) <= lambda^{-1} / 100
  bool phase_ok = false;   // 2 N t0 / lambda mod 2 pi in [pi/2, 3 pi/2]
  double separation = 0.0;  // lambda / (2 N t0); passes at <= 1/100
  double phase = 0.0;
  std::string failing;
};

inline CondN check_cond_N(double lambda, double N, double t0) {
  CondN c;
  const double jn = N * lambda;
  c.positive = N > 0.0 && std::abs(jn - std::round(jn)) <= 1e-9 * std::max(1.0, std::abs(jn));
  if (N > 0.0) {
    c.separation = lambda / (2.0 * N * t0);
    c.separated = kCondNFactor * lambda <= 2.0 * N * t0 * (1.0 + 1e-12);
    c.phase = std::fmod(2.0 * N * t0 / lambda, 2.0 * std::numbers::pi);
    c.phase_ok = c.phase >= 0.5 * std::numbers::pi && c.phase <= 1.5 * std::numbers::pi;
  }
  c.pass = c.positive && c.separated && c.phase_ok;
  if (!c.positive) c.failing = "N must be a positive point of Z/lambda";
  else if (!c.separated) c.failing = "1/(2 N t0) exceeds lambda^{-1}/100";
  else if (!c.phase_ok) c.failing = "2 N t0 / lambda mod 2 pi outside [pi/2, 3 pi/2]";
  return c;
}

/// Smallest passing lattice N in (0, Nmax], or 0 if none.
inline double first_cond_N(double lambda, double t0, double Nmax, double Nmin = 0.0) {
  const long j0 = std::max(1L, static_cast<long>(std::ceil(Nmin * lambda - 1e-9)));
  const long j1 = static_cast<long>(std::floor(Nmax * lambda + 1e-9));
  for (long j = j0; j <= j1; ++j)
    if (check_cond_N(lambda, static_cast<double>(j) / lambda, t0).pass) return static_cast<double>(j) / lambda;
  return 0.0;
}

/// Lattice point nearest the centre (phase pi) of the first cond_N window at or above `target`.
inline double centred_cond_N(double lambda, double t0, double target) {
  const double pi = std::numbers::pi;
  const double lo = std::max(target, kCondNFactor * lambda / (2.0 * t0));
  long m = static_cast<long>(std::ceil((2.0 * t0 * lo / lambda - pi) / (2.0 * pi)));
  for (;; ++m) {
    const double N = std::round(lambda * (2.0 * m + 1.0) * pi / (2.0 * t0) * lambda) / lambda;
    if (N >= lo && check_cond_N(lambda, N, t0).pass) return N;
  }
}

/// count passing frequencies near start * growth^i (start 0: the smallest allowed by cond_N).
inline std::vector<double> auto_nlist(double lambda, double t0, int count, double growth, double start = 0.0) {
  if (count < 1 || !(growth > 1.0)) throw InvalidArgument("auto_nlist: need count >= 1 and growth > 1");
  std::vector<double> out;
  double target = start > 0.0 ? start : kCondNFactor * lambda / (2.0 * t0);
  for (int i = 0; i < count; ++i) {
    double N = centred_cond_N(lambda, t0, target);
    if (!out.empty() && N <= out.back()) N = centred_cond_N(lambda, t0, out.back() + 1.0 / lambda);
    out.push_back(N);
    target *= growth;
  }
  return out;
}

// ---------------------------------------------------------------------------
// The data phi_{lambda,N}

/// Lattice used for phi: Z/lambda on the torus, Z/(refine lambda) for the line.
inline double phi_lattice_lambda(double lambda, Variant v, int refine = kLineRefine) {
  return v == Variant::Torus ? lambda : lambda * refine;
}

inline SpectralField make_phi(double lambda, double N, Variant v = Variant::Torus, double K = 0.0,
                              int refine = kLineRefine) {
  if (!(lambda >= 1.0)) throw InvalidArgument("make_phi: lambda must be >= 1");
  if (!(N > 0.0)) throw InvalidArgument("make_phi: N must be positive");
  if (v == Variant::Torus) {
    const double jn = N * lambda;
    if (std::abs(jn - std::round(jn)) > 1e-9 * jn) throw InvalidArgument("make_phi: N is not on Z/lambda");
    const long j = std::lround(jn);
    const double top = static_cast<double>(j + 1) / lambda;
    const FrequencyLattice lat(lambda, K > 0.0 ? K : top);
    if (!lat.contains_j(j + 1)) throw InvalidArgument("make_phi: N + 1/lambda lies beyond the truncation K");
    SpectralField phi(lat);
    phi.set_j(j, 1.0);
    phi.set_j(j + 1, 1.0);
    return phi;
  }
  if (refine < 20) throw InvalidArgument("make_phi: line refinement must be >= 20");
  const double lr = lambda * refine;
  const double top = N + 1.1 / lambda;
  const FrequencyLattice lat(lr, K > 0.0 ? K : top);
  const auto jhi = static_cast<long>(std::floor(top * lr + 1e-9));
  if (!lat.contains_j(jhi)) throw InvalidArgument("make_phi: support lies beyond the truncation K");
  SpectralField phi(lat);
  const double eps = 1e-9 / lr;
  auto inside = [&](double k) {
    return (k >= N - eps && k <= N + 0.1 / lambda + eps) || (k >= N + 1.0 / lambda - eps && k <= top + eps);
  };
  for (long j = static_cast<long>(std::floor(N * lr)) - 1; j <= jhi + 1; ++j)
    if (lat.contains_j(j) && inside(static_cast<double>(j) / lr)) phi.set_j(j, 1.0);
  return phi;
}

// ---------------------------------------------------------------------------
// Sparse spectra: only the nonzero modes of a lattice field.

struct SparseSpectrum {
  double lambda = 1.0;  // lattice Z / lambda
  std::vector<long> j;  // increasing
  std::vector<cplx> c;

  std::size_t size() const { return j.size(); }
  double k(std::size_t i) const { return static_cast<double>(j[i]) / lambda; }
};

inline SparseSpectrum sparse_of(const SpectralField& f) {
  SparseSpectrum s;
  s.lambda = f.lattice.lambda();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != cplx{}) {
      s.j.push_back(f.lattice.index_j(i));
      s.c.push_back(f[i]);
    }
  return s;
}

inline SpectralField dense_of(const SparseSpectrum& s, const FrequencyLattice& lat) {
  if (std::abs(lat.lambda() - s.lambda) > 1e-12 * s.lambda) throw GridMismatch("dense_of: lattice spacing differs");
  SpectralField f(lat);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (lat.contains_j(s.j[i])) f.set_j(s.j[i], s.c[i]);
  return f;
}

inline double h_norm(const SparseSpectrum& f, double s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::pow(japanese(f.k(i)), 2.0 * s) * std::norm(f.c[i]);
  return std::sqrt(acc / f.lambda);
}

/// F_x A_2(phi)(t0) with the lattice measure of phi and omega_{lambda_eq}; only modes
/// that are differences of the support are nonzero.
inline SparseSpectrum a2_sparse(const SparseSpectrum& phi, double t0, double lambda_eq) {
  const double lam = phi.lambda;
  const double pref = 1.0 / (lam * kSqrt2Pi);
  std::unordered_map<long, cplx> acc;
  for (std::size_t a = 0; a < phi.size(); ++a)
    for (std::size_t b = 0; b < phi.size(); ++b) {
      const long jo = phi.j[a] - phi.j[b];
      if (jo == 0) continue;
      const double k = static_cast<double>(jo) / lam;
      const double theta = -2.0 * k * phi.k(b);
      acc[jo] += phi.c[a] * std::conj(phi.c[b]) * phase_integral(theta, t0);
    }
  SparseSpectrum out;
  out.lambda = lam;
  for (const auto& [jo, v] : acc) out.j.push_back(jo);
  std::sort(out.j.begin(), out.j.end());
  for (long jo : out.j) {
    const double k = static_cast<double>(jo) / lam;
    out.c.push_back(cplx{0.0, 0.5} * omega_symbol(k, lambda_eq) * std::polar(1.0, -k * k * t0) * pref * acc[jo]);
  }
  return out;
}

struct A2Bound {
  double value = 0.0;       // ||A_2(phi)(t0)||_{H^s}
  double bound = 0.0;       // c lambda^{-1/2} N^{-1}
  double constant = kA2Constant;
  double normalized = 0.0;  // value * N * lambda^{1/2}
  double path_difference = 0.0;
  bool pass = false;
};

inline A2Bound a2_lower_bound(double lambda, double N, double t0, double s, Variant v = Variant::Torus) {
  const auto cond = check_cond_N(lambda, N, t0);
  if (!cond.pass) throw InvalidArgument("a2_lower_bound: cond_N fails: " + cond.failing);
  if (!(t0 > 0.0 && t0 <= 1.0)) throw InvalidArgument("a2_lower_bound: t0 must lie in (0, 1]");
  A2Bound r;
  const auto phi = make_phi(lambda, N, v);
  if (v == Variant::Torus) {
    const auto checked = a2_iterate_checked(phi, t0, lambda);
    r.value = h_norm(checked.closed, s);
    r.path_difference = checked.relative_difference;
  } else {
    r.value = h_norm(a2_sparse(sparse_of(phi), t0, lambda), s);
  }
  r.bound = kA2Constant / (std::sqrt(lambda) * N);
  r.normalized = r.value * N * std::sqrt(lambda);
  r.pass = r.value >= r.bound;
  return r;
}

// ---------------------------------------------------------------------------
// Sparse Picard iteration with exact phase integration.
//
// The Duhamel integrand of each interacting pair is c e^{i theta t} P(t) with P a
// product of interaction-picture coefficients v = e^{i k^2 t} u.  P is replaced by
// its local quadratic interpolant and the oscillatory factor integrated exactly,
// so the step only has to resolve P, never theta.

struct SparsePicardOptions {
  double lambda = 1.0;  // equation parameter (omega_lambda, lambda^{-2})
  double t0 = 1.0;
  double K = 0.0;       // truncation |k| <= K; 0: no truncation
  double s = -0.5;      // norm of the stopping rule
  double phase_step = 0.1;
  std::size_t nodes = 0;  // time panels; 0: from phase_step
  int maxPicard = 40;
  double tol = 1e-12;     // relative to ||u0||_{H^s}
  double prune = 1e-13;   // relative to max |u0|
  bool linear_terms = true;
  bool square_terms = true;  // u^2 and conj(u)^2
  bool mixed_terms = true;   // 2 u conj(u)
};

/// v(t_m, j) on t_m = m h, m = 0..M.
struct SparseHistory {
  double lambda = 1.0;
  double h = 0.0;
  std::size_t panels = 0;
  std::vector<long> j;
  std::vector<cplx> v;

  std::size_t modes() const { return j.size(); }
  const cplx* row(std::size_t m) const { return v.data() + m * j.size(); }
  double time(std::size_t m) const { return h * static_cast<double>(m); }

  /// u(t_m) = e^{-i k^2 t_m} v(t_m).
  SparseSpectrum state(std::size_t m) const {
    SparseSpectrum s;
    s.lambda = lambda;
    s.j = j;
    s.c.resize(j.size());
    const double t = time(m);
    for (std::size_t i = 0; i < j.size(); ++i) {
      const double k = static_cast<double>(j[i]) / lambda;
      s.c[i] = std::polar(1.0, -k * k * t) * row(m)[i];
    }
    return s;
  }
};

struct SparsePicardResult {
  SparseHistory history;
  int iterations = 0;
  bool converged = false;
  std::vector<double> differences;
  std::vector<double> ratios;
  std::size_t max_terms = 0;
};

namespace detail {

/// mu_p(x) = int_0^1 s^p e^{i x s} ds, p = 0, 1, 2.
inline std::array<cplx, 3> filon_moments(double x) {
  std::array<cplx, 3> mu{};
  if (std::abs(x) < 1.0) {
    cplx term = 1.0;  // (i x)^n / n!
    for (int n = 0; n < 30; ++n) {
      for (int p = 0; p < 3; ++p) mu[static_cast<std::size_t>(p)] += term / static_cast<double>(n + p + 1);
      term *= cplx{0.0, x} / static_cast<double>(n + 1);
      if (std::abs(term) < 1e-18) break;
    }
    return mu;
  }
  const cplx e = std::polar(1.0, x), ix{0.0, x};
  mu[0] = (e - 1.0) / ix;
  mu[1] = (e - mu[0]) / ix;
  mu[2] = (e - 2.0 * mu[1]) / ix;
  return mu;
}

struct FilonWeights {
  std::array<cplx, 3> fwd;  // nodes 0, 1, 2 over the panel [0, 1]
  std::array<cplx, 3> bwd;  // nodes -1, 0, 1 over the panel [0, 1]
};

inline FilonWeights filon_weights(double x) {
  const auto mu = filon_moments(x);
  FilonWeights w;
  w.fwd = {0.5 * (mu[2] - 3.0 * mu[1] + 2.0 * mu[0]), 2.0 * mu[1] - mu[2], 0.5 * (mu[2] - mu[1])};
  w.bwd = {0.5 * (mu[2] - mu[1]), mu[0] - mu[2], 0.5 * (mu[2] + mu[1])};
  return w;
}

enum class TermKind { Self, SelfConj, Square, Mixed, ConjSquare };

struct Term {
  TermKind kind;
  std::size_t a, b;  // indices into the previous support
  long out;          // output lattice index
  double coef;
  double theta;
};

inline double max_abs_over_time(const SparseHistory& H, std::size_t i) {
  double m = 0.0;
  for (std::size_t r = 0; r <= H.panels; ++r) m = std::max(m, std::abs(H.row(r)[i]));
  return m;
}

/// One application of the Duhamel map to the previous iterate.
inline SparseHistory sparse_picard_map(const SparseSpectrum& u0, const SparseHistory& prev,
                                       const SparsePicardOptions& o, std::size_t* term_count = nullptr) {
  const double lam = prev.lambda;
  const std::size_t S = prev.modes();
  const std::size_t M = prev.panels;
  const double h = prev.h;
  const long J = o.K > 0.0 ? static_cast<long>(std::floor(o.K * lam + 1e-9)) : std::numeric_limits<long>::max();
  const double pref = 1.0 / (lam * kSqrt2Pi);
  double scale = 0.0;
  for (const auto& c : u0.c) scale = std::max(scale, std::abs(c));
  const double drop = o.prune * scale;

  std::vector<double> amax(S);
  for (std::size_t i = 0; i < S; ++i) amax[i] = max_abs_over_time(prev, i);
  auto kof = [&](long j) { return static_cast<double>(j) / lam; };

  std::vector<Term> terms;
  auto add = [&](TermKind kind, std::size_t a, std::size_t b, long out, double coef, double theta, double size) {
    if (out > J || out < -J || coef == 0.0) return;
    if (std::abs(coef) * size * o.t0 < drop) return;
    terms.push_back({kind, a, b, out, coef, theta});
  };
  if (o.linear_terms) {
    const double cl = 0.5 / (o.lambda * o.lambda);
    for (std::size_t a = 0; a < S; ++a) {
      const double k = kof(prev.j[a]);
      add(TermKind::Self, a, a, prev.j[a], cl, 0.0, amax[a]);
      add(TermKind::SelfConj, a, a, -prev.j[a], -cl, 2.0 * k * k, amax[a]);
    }
  }
  if (o.square_terms || o.mixed_terms) {
    for (std::size_t a = 0; a < S; ++a) {
      const double ka = kof(prev.j[a]);
      for (std::size_t b = 0; b < S; ++b) {
        const double kb = kof(prev.j[b]);
        const double size = amax[a] * amax[b];
        if (o.square_terms) {
          const long js = prev.j[a] + prev.j[b];
          const double k = kof(js);
          const double c = -0.25 * omega_symbol(k, o.lambda) * pref;
          add(TermKind::Square, a, b, js, c, k * k - ka * ka - kb * kb, size);
          add(TermKind::ConjSquare, a, b, -js, c, k * k + ka * ka + kb * kb, size);
        }
        if (o.mixed_terms) {
          const long jm = prev.j[a] - prev.j[b];
          const double k = kof(jm);
          add(TermKind::Mixed, a, b, jm, -0.5 * omega_symbol(k, o.lambda) * pref, k * k - ka * ka + kb * kb, size);
        }
      }
    }
  }
  if (term_count) *term_count = terms.size();

  // Output support.
  std::vector<long> js(u0.j.begin(), u0.j.end());
  for (const auto& t : terms) js.push_back(t.out);
  std::sort(js.begin(), js.end());
  js.erase(std::unique(js.begin(), js.end()), js.end());
  std::unordered_map<long, std::size_t> where;
  for (std::size_t i = 0; i < js.size(); ++i) where[js[i]] = i;
  const std::size_t So = js.size();

  std::vector<cplx> I((M + 1) * So, cplx{});
  std::vector<cplx> P(M + 1);
  for (const auto& t : terms) {
    for (std::size_t m = 0; m <= M; ++m) {
      const cplx* r = prev.row(m);
      switch (t.kind) {
        case TermKind::Self: P[m] = r[t.a]; break;
        case TermKind::SelfConj: P[m] = std::conj(r[t.a]); break;
        case TermKind::Square: P[m] = r[t.a] * r[t.b]; break;
        case TermKind::Mixed: P[m] = r[t.a] * std::conj(r[t.b]); break;
        case TermKind::ConjSquare: P[m] = std::conj(r[t.a] * r[t.b]); break;
      }
    }
    const double x = t.theta * h;
    const auto w = filon_weights(x);
    const cplx step = std::polar(1.0, x);
    cplx phase = 1.0, acc{};
    const std::size_t o_idx = where[t.out];
    const double ch = t.coef * h;
    for (std::size_t m = 1; m <= M; ++m) {
      cplx val;
      if (m + 1 <= M) {
        val = w.fwd[0] * P[m - 1] + w.fwd[1] * P[m] + w.fwd[2] * P[m + 1];
      } else {
        val = w.bwd[0] * P[m - 2] + w.bwd[1] * P[m - 1] + w.bwd[2] * P[m];
      }
      acc += ch * phase * val;
      I[m * So + o_idx] += acc;
      phase *= step;
      if ((m & 255u) == 0) phase = std::polar(1.0, x * static_cast<double>(m));
    }
  }

  SparseHistory out;
  out.lambda = lam;
  out.h = h;
  out.panels = M;
  std::vector<cplx> base(So, cplx{});
  for (std::size_t i = 0; i < u0.size(); ++i) base[where[u0.j[i]]] = u0.c[i];
  // Keep the data modes and anything above the pruning level.
  std::vector<char> keep(So, 0);
  for (std::size_t i = 0; i < So; ++i) {
    if (base[i] != cplx{}) keep[i] = 1;
    for (std::size_t m = 0; m <= M && !keep[i]; ++m)
      if (std::abs(I[m * So + i]) >= drop) keep[i] = 1;
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < So; ++i)
    if (keep[i]) {
      kept.push_back(i);
      out.j.push_back(js[i]);
    }
  out.v.resize((M + 1) * kept.size());
  for (std::size_t m = 0; m <= M; ++m)
    for (std::size_t q = 0; q < kept.size(); ++q) {
      const std::size_t i = kept[q];
      out.v[m * kept.size() + q] = base[i] - cplx{0.0, 1.0} * I[m * So + i];
    }
  return out;
}

/// sup_m ||a(t_m) - b(t_m)||_{H^s} over the union of supports.
inline double sup_distance(const SparseHistory& a, const SparseHistory& b, double s) {
  std::vector<long> js(a.j.begin(), a.j.end());
  js.insert(js.end(), b.j.begin(), b.j.end());
  std::sort(js.begin(), js.end());
  js.erase(std::unique(js.begin(), js.end()), js.end());
  std::vector<long> ia(js.size(), -1), ib(js.size(), -1);
  for (std::size_t i = 0, p = 0, q = 0; i < js.size(); ++i) {
    while (p < a.j.size() && a.j[p] < js[i]) ++p;
    while (q < b.j.size() && b.j[q] < js[i]) ++q;
    if (p < a.j.size() && a.j[p] == js[i]) ia[i] = static_cast<long>(p);
    if (q < b.j.size() && b.j[q] == js[i]) ib[i] = static_cast<long>(q);
  }
  std::vector<double> w(js.size());
  for (std::size_t i = 0; i < js.size(); ++i) w[i] = std::pow(japanese(static_cast<double>(js[i]) / a.lambda), 2.0 * s);
  double worst = 0.0;
  for (std::size_t m = 0; m <= a.panels; ++m) {
    double acc = 0.0;
    for (std::size_t i = 0; i < js.size(); ++i) {
      const cplx x = ia[i] >= 0 ? a.row(m)[ia[i]] : cplx{};
      const cplx y = ib[i] >= 0 ? b.row(m)[ib[i]] : cplx{};
      acc += w[i] * std::norm(x - y);
    }
    worst = std::max(worst, acc);
  }
  return std::sqrt(worst / a.lambda);
}

}  // namespace detail

/// Panel count: the step resolves phase_step radians of the fastest slow
/// modulation 4 kmax kspread carried by pairs of data modes.
inline std::size_t sparse_panels(const SparseSpectrum& u0, const SparsePicardOptions& o) {
  if (o.nodes > 0) return std::max<std::size_t>(o.nodes, 2);
  double kmax = 0.0, lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < u0.size(); ++i) {
    kmax = std::max(kmax, std::abs(u0.k(i)));
    lo = i ? std::min(lo, u0.k(i)) : u0.k(i);
    hi = i ? std::max(hi, u0.k(i)) : u0.k(i);
  }
  const double spread = std::max(hi - lo, 1.0 / u0.lambda);
  const double theta = 4.0 * kmax * spread + 1.0;
  return std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(theta * o.t0 / o.phase_step)));
}

inline SparsePicardResult sparse_picard_solve(const SparseSpectrum& u0, const SparsePicardOptions& o) {
  if (!(o.t0 > 0.0)) throw InvalidArgument("sparse_picard_solve: t0 must be positive");
  if (!(o.lambda >= 1.0)) throw InvalidArgument("sparse_picard_solve: lambda must be >= 1");
  if (!(o.phase_step > 0.0) || o.maxPicard < 1) throw InvalidArgument("sparse_picard_solve: bad iteration settings");
  SparsePicardResult res;
  const std::size_t M = sparse_panels(u0, o);
  // u^{(1)}: the free evolution, constant in the interaction picture.
  SparseHistory u;
  u.lambda = u0.lambda;
  u.h = o.t0 / static_cast<double>(M);
  u.panels = M;
  u.j = u0.j;
  u.v.resize((M + 1) * u0.size());
  for (std::size_t m = 0; m <= M; ++m) std::copy(u0.c.begin(), u0.c.end(), u.v.begin() + static_cast<long>(m * u0.size()));
  res.iterations = 1;
  const double scale = std::max(h_norm(u0, o.s), std::numeric_limits<double>::min());
  int streak = 0;
  for (int n = 2; n <= o.maxPicard; ++n) {
    std::size_t nt = 0;
    SparseHistory next = detail::sparse_picard_map(u0, u, o, &nt);
    res.max_terms = std::max(res.max_terms, nt);
    const double d = detail::sup_distance(next, u, o.s) / scale;
    res.differences.push_back(d);
    if (res.differences.size() >= 2) {
      const double prev = res.differences[res.differences.size() - 2];
      const double r = prev > 0.0 ? d / prev : 0.0;
      res.ratios.push_back(r);
      streak = r >= 1.0 ? streak + 1 : 0;
    }
    u = std::move(next);
    res.iterations = n;
    if (d < o.tol) {
      res.converged = true;
      break;
    }
    if (streak >= 3) throw DivergedError("sparse_picard_solve: iteration is not contracting", res.ratios);
  }
  res.history = std::move(u);
  return res;
}

// ---------------------------------------------------------------------------
// Inflation sweep

struct InflationConfig {
  double s = -0.75;
  double delta = 0.01;
  double lambda = 1.0;
  double t0 = 1.0;
  std::vector<double> Nlist;  // empty: auto_nlist(lambda, t0, count, growth)
  int count = 6;
  double growth = 2.0;
  Variant variant = Variant::Torus;
  double K = 0.0;  // 0: 4 (N + 2/lambda)
  int refine = kLineRefine;
  double phase_step = 0.1;
  int maxPicard = 40;
  double tol = 1e-12;
  int workers = 1;
};

inline void validate(const InflationConfig& c) {
  auto bad = [](const std::string& f, const std::string& why) { throw InvalidArgument("inflation." + f + ": " + why); };
  if (!std::isfinite(c.s)) bad("s", "must be finite");
  if (!(c.delta > 0.0)) bad("delta", "must be positive");
  if (!(c.lambda >= 1.0)) bad("lambda", "must be >= 1");
  if (!(c.t0 > 0.0 && c.t0 <= 1.0)) bad("t0", "must lie in (0, 1]");
  if (c.count < 1) bad("count", "must be >= 1");
  if (!(c.growth > 1.0)) bad("growth", "must exceed 1");
  if (c.K < 0.0) bad("K", "must be >= 0");
  if (c.refine < 20) bad("refine", "must be >= 20");
  if (!(c.phase_step > 0.0)) bad("phase_step", "must be positive");
  if (c.maxPicard < 2) bad("maxPicard", "must be >= 2");
  if (!(c.tol > 0.0)) bad("tol", "must be positive");
  if (c.workers < 1) bad("workers", "must be >= 1");
  for (std::size_t i = 0; i < c.Nlist.size(); ++i) {
    if (i && !(c.Nlist[i] > c.Nlist[i - 1])) bad("Nlist", "must be increasing");
    const auto cn = check_cond_N(c.lambda, c.Nlist[i], c.t0);
    if (!cn.pass) bad("Nlist", "N = " + std::to_string(c.Nlist[i]) + " fails cond_N: " + cn.failing);
  }
}

struct InflationRow {
  double N = 0.0;
  double data_norm = 0.0;       // ||u_0n||_{H^s}
  double free_norm = 0.0;       // ||u_1n(t0)||_{H^s}
  double second_norm = 0.0;     // ||u_2n(t0)||_{H^s}
  double solution_norm = 0.0;   // ||u_n(t0)||_{H^s}
  double remainder_norm = 0.0;  // ||w_n(t0)||_{H^{-1/2}}
  double remainder_ratio = 0.0; // remainder over ||u_2n(t0)||_{H^{-1/2}}
  int iterations = 0;
  bool converged = false;
  std::size_t panels = 0, support = 0;
  std::string error;
};

struct InflationVerdict {
  std::string kind;             // "plateau" (s < -1/2) or "bounded"
  double data_drop = 0.0;       // first / last data norm
  double solution_spread = 0.0; // max / min solution norm
  double ratio_spread = 0.0;    // max / min of solution / data
  bool pass = false;
};

struct InflationReport {
  InflationConfig config;
  std::vector<InflationRow> rows;
  InflationVerdict verdict;
};

inline constexpr double kPlateauSpread = 1.3;
inline constexpr double kDataDrop = 2.0;
inline constexpr double kBoundedSpread = 2.0;

inline InflationRow inflation_row(const InflationConfig& c, double N) {
  InflationRow row;
  row.N = N;
  const double lr = phi_lattice_lambda(c.lambda, c.variant, c.refine);
  const double K = c.K > 0.0 ? c.K : 4.0 * (N + 2.0 / c.lambda);
  auto phi = sparse_of(make_phi(c.lambda, N, c.variant, N + 2.0 / c.lambda, c.refine));
  SparseSpectrum u0 = phi;
  const double amp = c.delta * std::sqrt(N);
  for (auto& x : u0.c) x *= amp;
  row.data_norm = h_norm(u0, c.s);
  // u_1n is the free evolution: same modulus at every time.
  row.free_norm = row.data_norm;
  SparseSpectrum u2 = a2_sparse(phi, c.t0, c.lambda);
  for (auto& x : u2.c) x *= c.delta * c.delta * N;
  row.second_norm = h_norm(u2, c.s);
  try {
    SparsePicardOptions o;
    o.lambda = c.lambda;
    o.t0 = c.t0;
    o.K = K;
    o.phase_step = c.phase_step;
    o.maxPicard = c.maxPicard;
    o.tol = c.tol;
    const auto res = sparse_picard_solve(u0, o);
    row.iterations = res.iterations;
    row.converged = res.converged;
    row.panels = res.history.panels;
    row.support = res.history.modes();
    const auto un = res.history.state(res.history.panels);
    row.solution_norm = h_norm(un, c.s);
    // w = u_n - u_1n - u_2n at t0.
    std::unordered_map<long, cplx> w;
    for (std::size_t i = 0; i < un.size(); ++i) w[un.j[i]] += un.c[i];
    for (std::size_t i = 0; i < u0.size(); ++i) {
      const double k = u0.k(i);
      w[u0.j[i]] -= std::polar(1.0, -k * k * c.t0) * u0.c[i];
    }
    for (std::size_t i = 0; i < u2.size(); ++i) w[u2.j[i]] -= u2.c[i];
    SparseSpectrum ws;
    ws.lambda = lr;
    for (const auto& [j, v] : w) {
      ws.j.push_back(j);
      ws.c.push_back(v);
    }
    row.remainder_norm = h_norm(ws, -0.5);
    const double u2h = h_norm(u2, -0.5);
    row.remainder_ratio = u2h > 0.0 ? row.remainder_norm / u2h : std::numeric_limits<double>::infinity();
    if (!res.converged) row.error = "picard iteration did not reach tolerance";
  } catch (const DivergedError& e) {
    row.error = e.what();
  }
  return row;
}

inline InflationVerdict inflation_verdict(double s, const std::vector<InflationRow>& rows) {
  InflationVerdict v;
  v.kind = s < -0.5 - 1e-12 ? "plateau" : "bounded";
  std::vector<const InflationRow*> ok;
  for (const auto& r : rows)
    if (r.error.empty()) ok.push_back(&r);
  if (ok.size() < 2 || ok.size() != rows.size()) return v;
  double smin = ok[0]->solution_norm, smax = smin;
  double rmin = smin / ok[0]->data_norm, rmax = rmin;
  for (const auto* r : ok) {
    smin = std::min(smin, r->solution_norm);
    smax = std::max(smax, r->solution_norm);
    rmin = std::min(rmin, r->solution_norm / r->data_norm);
    rmax = std::max(rmax, r->solution_norm / r->data_norm);
  }
  v.data_drop = ok.front()->data_norm / ok.back()->data_norm;
  v.solution_spread = smax / smin;
  v.ratio_spread = rmax / rmin;
  v.pass = v.kind == "plateau" ? (v.data_drop >= kDataDrop && v.solution_spread < kPlateauSpread)
                               : v.ratio_spread < kBoundedSpread;
  return v;
}

inline InflationReport inflation_sweep(InflationConfig cfg) {
  if (cfg.Nlist.empty()) cfg.Nlist = auto_nlist(cfg.lambda, cfg.t0, cfg.count, cfg.growth);
  validate(cfg);
  InflationReport rep;
  rep.rows.resize(cfg.Nlist.size());
  const auto nw = static_cast<std::size_t>(std::min<int>(cfg.workers, static_cast<int>(cfg.Nlist.size())));
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < cfg.Nlist.size(); i += nw) rep.rows[i] = inflation_row(cfg, cfg.Nlist[i]);
  };
  if (nw <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < nw; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  rep.verdict = inflation_verdict(cfg.s, rep.rows);
  rep.config = std::move(cfg);
  return rep;
}

inline nlohmann::json to_json(const InflationConfig& c) {
  return {{"s", c.s},           {"delta", c.delta},         {"lambda", c.lambda},
          {"t0", c.t0},         {"Nlist", c.Nlist},         {"count", c.count},
          {"growth", c.growth}, {"variant", variant_name(c.variant)}, {"K", c.K},
          {"refine", c.refine}, {"phase_step", c.phase_step}, {"maxPicard", c.maxPicard},
          {"tol", c.tol},       {"workers", c.workers}};
}

inline nlohmann::json to_json(const InflationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"N", x.N},
                    {"data_norm", x.data_norm},
                    {"free_norm", x.free_norm},
                    {"second_norm", x.second_norm},
                    {"solution_norm", x.solution_norm},
                    {"remainder_norm", x.remainder_norm},
                    {"remainder_ratio", x.remainder_ratio},
                    {"iterations", x.iterations},
                    {"converged", x.converged},
                    {"panels", x.panels},
                    {"support", x.support},
                    {"error", x.error}});
  return {{"config", to_json(r.config)},
          {"rows", rows},
          {"verdict",
           {{"kind", r.verdict.kind},
            {"data_drop", r.verdict.data_drop},
            {"solution_spread", r.verdict.solution_spread},
            {"ratio_spread", r.verdict.ratio_spread},
            {"pass", r.verdict.pass},
            {"tolerances",
             {{"data_drop_min", kDataDrop}, {"plateau_spread_max", kPlateauSpread},
              {"bounded_spread_max", kBoundedSpread}}}}}};
}

inline void write_inflation_csv(const InflationReport& r, std::ostream& f) {
  f.precision(17);
  f << "N,data_norm,free_norm,second_norm,solution_norm,remainder_norm,remainder_ratio,iterations,converged,panels,"
       "support,error\n";
  for (const auto& x : r.rows)
    f << x.N << ',' << x.data_norm << ',' << x.free_norm << ',' << x.second_norm << ',' << x.solution_norm << ','
      << x.remainder_norm << ',' << x.remainder_ratio << ',' << x.iterations << ',' << (x.converged ? 1 : 0) << ','
      << x.panels << ',' << x.support << ",\"" << x.error << "\"\n";
}

inline void write_inflation_csv(const InflationReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  write_inflation_csv(r, f);
}

/// N against the data and solution norms, for a log-log plot.
inline void write_inflation_plot(const InflationReport& r, std::ostream& f) {
  f.precision(17);
  f << "# N\tdata_norm\tsolution_norm\n";
  for (const auto& x : r.rows) f << x.N << '\t' << x.data_norm << '\t' << x.solution_norm << '\n';
}

inline void write_inflation_plot(const InflationReport& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  write_inflation_plot(r, f);
}

}  // namespace gblab
