#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gblab/resonance.hpp"

using namespace gblab;

namespace {

// Midpoint Riemann sum of the RB1 complement measure straight from the set
// definitions (lambda = 1): scan k1 over a wide integer range, tau1 on a fine grid.
double rb1_riemann(double tau, double k, double M1, double M2, double h) {
  const double S = std::sqrt(2.0 * (-tau - 0.5 * k * k));
  double acc = 0.0;
  for (int k1 = -40; k1 <= 40; ++k1) {
    const double z = k1 - (k - k1);
    if (std::abs(z - S) <= 1.0 || std::abs(z + S) <= 1.0) continue;
    const double lo = -k1 * k1 - 2.0 * M1 - 1.0;
    const auto n = static_cast<long>((4.0 * M1 + 2.0) / h);
    long hits = 0;
    for (long i = 0; i < n; ++i) {
      const double t1 = lo + (i + 0.5) * h;
      if (japanese(t1 + k1 * k1) <= 2.0 * M1 && japanese(tau - t1 + (k - k1) * (k - k1)) <= 2.0 * M2) ++hits;
    }
    acc += japanese(z) * hits * h;
  }
  return acc;
}

CountingCase make_case(Lemma l, Side s, double M1, double M2, double lambda, bool w = true) {
  CountingCase c;
  c.lemma = l;
  c.side = s;
  c.M1 = M1;
  c.M2 = M2;
  c.lambda = lambda;
  c.derivWeight = w;
  return c;
}

}  // namespace

TEST(ResonanceFn, Examples) {
  EXPECT_EQ(resonance_fn(BilinearKind::UVbar, {1.3, 0.0, -0.7, 5.0}).quantity, 0.0);
  const auto r = resonance_fn(BilinearKind::UVbar, {0.3, 2.0, -1.1, 3.0});
  EXPECT_NEAR(r.quantity, 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.combination, -4.0, 1e-12);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(resonance_fn(BilinearKind::UbarVbar, {0.4, 0.0, 0.2, 0.0}).quantity, 0.0);
  for (double n : {1.0, 2.0, 4.0, 8.0})
    EXPECT_DOUBLE_EQ(resonance_fn(BilinearKind::UbarVbar, {0.0, n, 0.0, n}).quantity, 2.0 * n * n / 3.0);
}

TEST(ResonanceFn, CombinationDependsOnFrequenciesOnly) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-50.0, 50.0);
  std::uniform_int_distribution<int> J(-200, 200);
  for (auto kind : {BilinearKind::UVbar, BilinearKind::UV, BilinearKind::UbarVbar}) {
    for (int i = 0; i < 20000; ++i) {
      const double lam = 1 << (i % 4);
      const ResonancePoint p{U(rng), J(rng) / lam, U(rng), J(rng) / lam};
      const auto r = resonance_fn(kind, p);
      EXPECT_TRUE(r.holds);
      double expect = 0.0;
      if (kind == BilinearKind::UVbar) expect = 2.0 * p.k * (p.k - p.k1);
      if (kind == BilinearKind::UV) expect = 2.0 * p.k1 * (p.k - p.k1);
      if (kind == BilinearKind::UbarVbar) expect = p.k * p.k + p.k1 * p.k1 + (p.k1 - p.k) * (p.k1 - p.k);
      EXPECT_NEAR(r.combination, expect, 1e-10 * (1.0 + std::abs(expect) + std::abs(p.tau) + std::abs(p.tau1)));
      EXPECT_GE(r.max_modulation * (1 + 1e-12), std::abs(r.combination) / 3.0);
    }
  }
}

TEST(L4Identity, ResidualVanishes) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-30.0, 30.0);
  for (int i = 0; i < 100000; ++i) {
    const ResonancePoint p{U(rng), U(rng), U(rng), U(rng)};
    EXPECT_LT(l4_identity_check(p), 1e-12 * 4000.0);
  }
  EXPECT_EQ(l4_identity_check({1.5, 2.0, 0.25, 1.0}), 0.0);
  EXPECT_EQ(l4_identity_check({-3.0, 0.0, 7.0, 0.0}), 0.0);
}

TEST(CellMeasure, RejectsBadCases) {
  EXPECT_THROW(cell_measure(make_case(Lemma::RB1, Side::Complement, 3, 4, 1), 0, 0), InvalidArgument);
  EXPECT_THROW(cell_measure(make_case(Lemma::RB1, Side::Complement, 1, 1, 0.5), 0, 0), InvalidArgument);
  EXPECT_THROW(cell_measure(make_case(Lemma::RB1, Side::Complement, 1, 1, 2), 0, 0.3), InvalidArgument);
}

TEST(CellMeasure, EmptyWhenModulationLarge) {
  const auto c = make_case(Lemma::RB1, Side::Complement, 1, 1, 1);
  EXPECT_EQ(cell_measure(c, 100.0, 0.0), 0.0);
  EXPECT_EQ(cell_measure(c, 50.0, 3.0), 0.0);
}

TEST(CellMeasure, Rb1MatchesRiemannSum) {
  const auto c = make_case(Lemma::RB1, Side::Complement, 4, 4, 1);
  const double exact = cell_measure(c, -8.0, 0.0);
  const double brute = rb1_riemann(-8.0, 0.0, 4, 4, 1e-6);
  EXPECT_GT(exact, 1.0);
  EXPECT_NEAR(exact / brute, 1.0, 1e-6);
}

TEST(CellMeasure, Rb2ExceptionalHasFewPoints) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-400.0, 400.0);
  for (double lam : {1.0, 4.0, 8.0}) {
    for (double M : {1.0, 4.0, 32.0}) {
      const auto c = make_case(Lemma::RB2, Side::Exceptional, M, 2 * M, lam, false);
      for (int i = 0; i < 2000; ++i) {
        const double k = std::floor(U(rng)) / lam;
        if (k == 0.0) continue;
        const double v = cell_measure(c, U(rng), k);
        // At most two lattice k1 fall in the exceptional strip, each worth <= 2 r_min / lambda.
        EXPECT_LE(v, 2.0 * 2.0 * modulation_radius(M) / lam * (1 + 1e-12));
      }
    }
  }
}

TEST(CellMeasure, PartitionIsExact) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-300.0, 300.0);
  for (auto l : {Lemma::RB1, Lemma::RB2, Lemma::DRB1, Lemma::DRB2}) {
    for (double lam : {1.0, 2.0, 8.0}) {
      for (bool w : {false, true}) {
        auto c = make_case(l, Side::Complement, 4, 16, lam, w);
        for (int i = 0; i < 400; ++i) {
          double k = std::round(U(rng) / 10.0 * lam) / lam;
          if (k == 0.0) k = 1.0 / lam;
          const double tau = U(rng);
          c.side = Side::Complement;
          const double a = cell_measure(c, tau, k);
          c.side = Side::Exceptional;
          const double b = cell_measure(c, tau, k);
          c.side = Side::All;
          const double all = cell_measure(c, tau, k);
          EXPECT_NEAR(a + b, all, 1e-12 * std::max(1.0, all));
        }
      }
    }
  }
}

TEST(CellMeasure, ZeroFrequencyForStripLemmas) {
  auto c = make_case(Lemma::RB2, Side::Complement, 2, 2, 2, true);
  EXPECT_EQ(cell_measure(c, 0.5, 0.0), 0.0);
  c.derivWeight = false;
  EXPECT_THROW(cell_measure(c, 0.5, 0.0), OverflowGuard);
  EXPECT_EQ(cell_measure(c, 100.0, 0.0), 0.0);
  c.lemma = Lemma::DRB1;
  EXPECT_THROW(cell_measure(c, 0.5, 0.0), OverflowGuard);
}

TEST(CellMeasure, OverflowGuardOnHugeRange) {
  const auto c = make_case(Lemma::RB2, Side::All, 1 << 20, 1 << 20, 1 << 12, false);
  EXPECT_THROW(cell_measure(c, 0.0, 1.0 / (1 << 12)), OverflowGuard);
}

TEST(Duality, DirectDualFormsMatchRb) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(-500.0, 500.0);
  for (double lam : {1.0, 2.0, 4.0, 8.0}) {
    for (double M : {1.0, 4.0, 64.0}) {
      for (double M2 : {1.0, 8.0}) {
        for (auto side : {Side::Complement, Side::Exceptional}) {
          const auto rb1 = make_case(Lemma::RB1, side, M, M2, lam);
          const auto rb2 = make_case(Lemma::RB2, side, M, M2, lam);
          const auto d1 = make_case(Lemma::DRB1, side, M, M2, lam);
          const auto d2 = make_case(Lemma::DRB2, side, M, M2, lam);
          for (int i = 0; i < 300; ++i) {
            double k = std::round(U(rng) / 20.0 * lam) / lam;
            if (k == 0.0) k = -1.0 / lam;
            const double tau = U(rng);
            const double a = cell_measure(rb2, tau, k), b = cell_measure(d1, tau, k);
            EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, a));
            const double p = cell_measure(rb1, tau, k), q = cell_measure(d2, tau, k);
            EXPECT_NEAR(p, q, 1e-8 * std::max(1.0, p));
          }
        }
      }
    }
  }
}

TEST(SupSweep, CriticalPointsDominateRandomFill) {
  SamplerSpec critical;
  critical.random_per_k = 0;
  SamplerSpec both;
  both.random_per_k = 20000;
  for (auto l : {Lemma::RB1, Lemma::RB2}) {
    for (auto side : {Side::Complement, Side::Exceptional}) {
      const auto c = make_case(l, side, 2, 4, 2);
      const auto a = sup_sweep(c, critical);
      const auto b = sup_sweep(c, both);
      EXPECT_GT(a.sup_value, 0.0);
      EXPECT_NEAR(b.sup_value, a.sup_value, 1e-9 * a.sup_value);
      EXPECT_NEAR(cell_measure(c, a.witness_tau, a.witness_k), a.sup_value, 1e-12);
    }
  }
}

TEST(SupSweep, WorkersAgree) {
  SamplerSpec one;
  one.random_per_k = 1000;
  SamplerSpec three = one;
  three.workers = 3;
  const auto c = make_case(Lemma::RB1, Side::Complement, 4, 2, 4);
  const auto a = sup_sweep(c, one), b = sup_sweep(c, three);
  EXPECT_EQ(a.sup_value, b.sup_value);
  EXPECT_EQ(a.witness_tau, b.witness_tau);
}

TEST(SupSweep, ExceptionalScalesInverselyWithLambda) {
  SamplerSpec sp;
  sp.random_per_k = 2000;
  for (auto l : {Lemma::RB1, Lemma::RB2}) {
    for (double M : {2.0, 8.0}) {
      double prev = 0.0;
      for (double lam : {1.0, 2.0, 4.0, 8.0}) {
        const auto r = sup_sweep(make_case(l, Side::Exceptional, M, M, lam), sp);
        if (prev > 0.0) {
          EXPECT_GT(r.sup_value / prev, 0.25);
          EXPECT_LT(r.sup_value / prev, 1.0);
        }
        prev = r.sup_value;
      }
    }
  }
}

TEST(SupSweep, ComplementRatiosBounded) {
  SamplerSpec sp;
  sp.random_per_k = 500;
  for (auto l : {Lemma::RB1, Lemma::RB2}) {
    double lo = 1e300, hi = 0.0;
    for (double lam : {1.0, 2.0, 4.0})
      for (double M1 : {1.0, 4.0, 16.0})
        for (double M2 : {1.0, 8.0}) {
          const auto r = sup_sweep(make_case(l, Side::Complement, M1, M2, lam), sp);
          EXPECT_TRUE(r.within);
          lo = std::min(lo, r.ratio);
          hi = std::max(hi, r.ratio);
        }
    EXPECT_LT(hi / lo, 10.0);
  }
}

TEST(SupSweep, NonperiodicLimit) {
  SamplerSpec sp;
  sp.random_per_k = 200;
  for (auto l : {Lemma::RB1, Lemma::RB2}) {
    std::vector<double> v;
    for (double lam : {16.0, 32.0, 64.0}) v.push_back(sup_sweep(make_case(l, Side::Complement, 2, 2, lam), sp).sup_value);
    const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
    EXPECT_LT(*mx / *mn, 1.2);
  }
}

TEST(SupSweep, CsvHasOneRowPerResult) {
  SamplerSpec sp;
  sp.random_per_k = 10;
  std::vector<SweepResult> rows{sup_sweep(make_case(Lemma::RB1, Side::Complement, 1, 1, 1), sp),
                                sup_sweep(make_case(Lemma::RB2, Side::Exceptional, 1, 2, 2), sp)};
  std::ostringstream os;
  write_sweep_csv(os, rows);
  const std::string s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 3);
  EXPECT_NE(s.find("RB2,exceptional,2,1,2,le2M"), std::string::npos);
}
