#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "gblab/errors.hpp"
#include "gblab/lattice.hpp"
#include "gblab/norms.hpp"
#include "gblab/random_fields.hpp"
#include "gblab/stats.hpp"

namespace gblab {

/// Ratio bounds between W^s and the X^{s,b} / Y^s scales.
enum class Embedding { Xs1ToWs, XthetaYsToWs, WsToXs0, WsToYs };

inline std::string embedding_name(Embedding e) {
  switch (e) {
    case Embedding::Xs1ToWs: return "Xs1_into_Ws";
    case Embedding::XthetaYsToWs: return "Xtheta_cap_Ys_into_Ws";
    case Embedding::WsToXs0: return "Ws_into_Xs0";
    case Embedding::WsToYs: return "Ws_into_Ys";
  }
  return "?";
}

struct EmbeddingConfig {
  std::vector<double> s_values{-0.5, -0.375, -0.25};
  std::vector<double> thetas{0.25, 0.5, 0.75};
  std::vector<double> lambdas{1, 2, 4, 8, 16};
  int fields = 500;
  std::uint64_t seed = 1;
  double K = 4.0;
  double dtau = 0.5;
  int bumps = 8;
  double growth_tol = 0.10;  // allowed constant growth per lambda doubling
  unsigned workers = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw InvalidArgument("embeddings." + m); };
    if (s_values.empty()) fail("s_values: must be non-empty");
    for (double s : s_values)
      if (s > -0.25 || s < -0.5) fail("s_values: each s must lie in [-1/2, -1/4]");
    for (double t : thetas)
      if (!(t > 0.0) || !(t < 1.0)) fail("thetas: each theta must lie in (0, 1)");
    if (lambdas.empty()) fail("lambdas: must be non-empty");
    for (double l : lambdas)
      if (!(l >= 1.0)) fail("lambdas: each lambda must be >= 1");
    if (fields < 1) fail("fields: must be >= 1");
    if (!(K > 0.0)) fail("K: must be > 0");
    if (!(dtau > 0.0)) fail("dtau: must be > 0");
    if (bumps < 1) fail("bumps: must be >= 1");
    if (!(growth_tol >= 0.0)) fail("growth_tol: must be >= 0");
  }
};

struct EmbeddingCell {
  Embedding embedding{};
  double s = 0.0;
  double theta = 0.0;  // 0 when the embedding has no theta
  double lambda = 1.0;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  int fields = 0;
  bool finite = true;
};

struct EmbeddingStability {
  Embedding embedding{};
  double s = 0.0;
  double theta = 0.0;
  double worst_growth = 0.0;  // max over consecutive lambdas of C(2 lambda) / C(lambda) - 1
  bool pass = true;
};

struct EmbeddingReport {
  EmbeddingConfig config;
  std::vector<EmbeddingCell> cells;
  std::vector<EmbeddingStability> stability;
  bool pass = true;
};

namespace detail {

struct EmbeddingKey {
  Embedding e;
  double s, theta;
};

inline std::vector<EmbeddingKey> embedding_keys(const EmbeddingConfig& c) {
  std::vector<EmbeddingKey> keys;
  for (double s : c.s_values) {
    keys.push_back({Embedding::Xs1ToWs, s, 0.0});
    for (double t : c.thetas) keys.push_back({Embedding::XthetaYsToWs, s, t});
    keys.push_back({Embedding::WsToXs0, s, 0.0});
    keys.push_back({Embedding::WsToYs, s, 0.0});
  }
  return keys;
}

inline double embedding_ratio(const SpacetimeSpectrum& U, const EmbeddingKey& key, double ws) {
  switch (key.e) {
    case Embedding::Xs1ToWs: return ws / xsb_norm(U, key.s, 1.0);
    case Embedding::XthetaYsToWs: return ws / (xsb_norm(U, key.s + key.theta, 1.0 - key.theta) + ys_norm(U, key.s));
    case Embedding::WsToXs0: return xsb_norm(U, key.s, 0.0) / ws;
    case Embedding::WsToYs: return ys_norm(U, key.s) / ws;
  }
  return 0.0;
}

}  // namespace detail

/// Field i of the suite: one lambda-independent spectrum model, sampled on each lattice.
inline SpacetimeSpectrum embedding_field(const EmbeddingConfig& c, int i, double lambda) {
  const double sigma = 8.0 * c.K * c.K;
  const auto model = random_smooth_model(derive_seed(c.seed, static_cast<std::uint64_t>(i)), c.bumps, c.K, sigma);
  return model.sample(make_lattice(lambda, c.K), make_tau_grid(sigma, c.dtau));
}

inline EmbeddingReport embedding_suite(const EmbeddingConfig& c) {
  c.validate();
  const auto keys = detail::embedding_keys(c);
  const std::size_t nk = keys.size(), nl = c.lambdas.size(), nf = static_cast<std::size_t>(c.fields);
  // ratios[(il * nk + key) * nf + field]
  std::vector<double> ratios(nl * nk * nf, 0.0);
  const std::size_t jobs = nl * nf;
  const unsigned workers = std::max(1u, c.workers);
  auto run = [&](unsigned w) {
    for (std::size_t job = w; job < jobs; job += workers) {
      const std::size_t il = job / nf, f = job % nf;
      const auto U = embedding_field(c, static_cast<int>(f), c.lambdas[il]);
      double last_s = 2.0, ws = 0.0;
      for (std::size_t q = 0; q < nk; ++q) {
        if (keys[q].s != last_s) {
          ws = ws_norm(U, keys[q].s);
          last_s = keys[q].s;
        }
        ratios[(il * nk + q) * nf + f] = detail::embedding_ratio(U, keys[q], ws);
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

  EmbeddingReport rep;
  rep.config = c;
  for (std::size_t q = 0; q < nk; ++q) {
    EmbeddingStability st{keys[q].e, keys[q].s, keys[q].theta, 0.0, true};
    double prev = 0.0, prev_lambda = 0.0;
    for (std::size_t il = 0; il < nl; ++il) {
      std::vector<double> r(ratios.begin() + static_cast<long>((il * nk + q) * nf),
                            ratios.begin() + static_cast<long>((il * nk + q + 1) * nf));
      EmbeddingCell cell{keys[q].e, keys[q].s, keys[q].theta, c.lambdas[il], 0.0, 0.0, c.fields, true};
      for (double x : r) cell.finite = cell.finite && std::isfinite(x);
      cell.max_ratio = *std::max_element(r.begin(), r.end());
      cell.median_ratio = stats::median(r);
      if (il > 0 && prev > 0.0) {
        // growth normalised to one doubling of lambda
        const double doublings = std::log2(c.lambdas[il] / prev_lambda);
        if (doublings > 0.0) {
          const double g = std::pow(cell.max_ratio / prev, 1.0 / doublings) - 1.0;
          st.worst_growth = std::max(st.worst_growth, g);
        }
      }
      prev = cell.max_ratio;
      prev_lambda = c.lambdas[il];
      st.pass = st.pass && cell.finite;
      rep.cells.push_back(cell);
    }
    st.pass = st.pass && st.worst_growth < c.growth_tol;
    rep.pass = rep.pass && st.pass;
    rep.stability.push_back(st);
  }
  return rep;
}

}  // namespace gblab
