#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "gblab/lattice.hpp"
#include "gblab/random_fields.hpp"

using namespace gblab;

namespace {

double sampled_l2_sq(const std::vector<cplx>& samples, double lambda) {
  double acc = 0.0;
  for (const auto& v : samples) acc += std::norm(v);
  return acc * 2.0 * std::numbers::pi * lambda / static_cast<double>(samples.size());
}

double field_l2_sq(const SpectralField& f) {
  double acc = 0.0;
  for (const auto& c : f.coeff) acc += std::norm(c);
  return acc / f.lattice.lambda();
}

// Adaptive Simpson on [a, b], used as an independent transform oracle.
double simpson(const std::function<double(double)>& f, double a, double b, int n = 4000) {
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return acc * h / 3.0;
}

cplx bump_hat(double tau) {
  const double re = simpson([&](double t) { return bump(t) * std::cos(tau * t); }, -2.0, 2.0);
  const double im = simpson([&](double t) { return -bump(t) * std::sin(tau * t); }, -2.0, 2.0);
  return cplx{re, im} / kSqrt2Pi;
}

}  // namespace

TEST(Lattice, IntegerLattice) {
  const auto lat = make_lattice(1.0, 2.0);
  ASSERT_EQ(lat.modes(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(lat.frequency(i), static_cast<double>(i) - 2.0);
}

TEST(Lattice, QuarterSpacing) {
  const auto lat = make_lattice(4.0, 1.0);
  EXPECT_EQ(lat.modes(), 9u);
  EXPECT_DOUBLE_EQ(lat.frequency(1) - lat.frequency(0), 0.25);
}

TEST(Lattice, CeilingOfKLambdaMatchesEnumeration) {
  const auto lat = make_lattice(2.0, 2.3);
  std::vector<double> direct;
  for (int j = -100; j <= 100; ++j)
    if (std::abs(j) <= std::ceil(2.3 * 2.0)) direct.push_back(j / 2.0);
  ASSERT_EQ(lat.modes(), direct.size());
  EXPECT_EQ(lat.modes(), 11u);
  EXPECT_DOUBLE_EQ(lat.frequency(lat.modes() - 1), 2.5);
  for (std::size_t i = 0; i < direct.size(); ++i) EXPECT_DOUBLE_EQ(lat.frequency(i), direct[i]);
}

TEST(Lattice, StructuralInvariants) {
  for (double lambda : {1.0, 1.5, 3.0, 7.25, 64.0}) {
    for (double K : {0.1, 1.0, 5.5, 17.0}) {
      const auto lat = make_lattice(lambda, K);
      EXPECT_EQ(lat.modes() % 2, 1u);
      EXPECT_EQ(lat.frequency(lat.modes() / 2), 0.0);
      for (std::size_t i = 1; i < lat.modes(); ++i)
        EXPECT_NEAR(lat.frequency(i) - lat.frequency(i - 1), 1.0 / lambda, 1e-14);
    }
  }
}

TEST(Lattice, RejectsBadParameters) {
  EXPECT_THROW(make_lattice(0.5, 1.0), InvalidArgument);
  EXPECT_THROW(make_lattice(1.0, 0.0), InvalidArgument);
  EXPECT_THROW(make_lattice(NAN, 1.0), InvalidArgument);
  EXPECT_THROW(make_lattice(2.0, INFINITY), InvalidArgument);
}

TEST(Transform, ConstantFunction) {
  const auto lat = make_lattice(1.0, 3.0);
  std::vector<double> ones(16, 1.0);
  const auto f = forward_transform(std::span<const double>(ones), lat);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const cplx expect = lat.frequency(i) == 0.0 ? cplx{kSqrt2Pi, 0.0} : cplx{};
    EXPECT_NEAR(std::abs(f[i] - expect), 0.0, 1e-13);
  }
}

TEST(Transform, SinglePlaneWaveClosedForm) {
  // int_0^{2 pi lambda} e^{-ikx} e^{ix/lambda} dx = 2 pi lambda delta_{k, 1/lambda}.
  for (double lambda : {1.0, 3.0, 8.0}) {
    const auto lat = make_lattice(lambda, 2.0);
    const std::size_t n = 2 * lat.modes() + 3;
    const auto x = spatial_grid(lat, n);
    std::vector<cplx> samples(n);
    for (std::size_t m = 0; m < n; ++m) samples[m] = std::polar(1.0, x[m] / lambda);
    const auto f = forward_transform(std::span<const cplx>(samples), lat);
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double expect = lat.index_j(i) == 1 ? 2.0 * std::numbers::pi * lambda / kSqrt2Pi : 0.0;
      EXPECT_NEAR(std::abs(f[i] - expect), 0.0, 1e-12 * lambda);
    }
  }
}

TEST(Transform, RoundTripAndPlancherel) {
  Rng rng(7);
  for (double lambda : {1.0, 2.0, 5.0}) {
    const auto lat = make_lattice(lambda, 6.0);
    const auto f = random_field(lat, rng, 3.0);
    for (std::size_t n : {lat.modes(), lat.modes() + 1, 3 * lat.modes()}) {
      const auto samples = inverse_transform(f, n);
      const auto g = forward_transform(std::span<const cplx>(samples), lat);
      double err = 0.0, ref = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) {
        err = std::max(err, std::abs(g[i] - f[i]));
        ref = std::max(ref, std::abs(f[i]));
      }
      EXPECT_LT(err, 1e-12 * ref);
      EXPECT_NEAR(sampled_l2_sq(samples, lambda) / field_l2_sq(f), 1.0, 1e-12);
    }
  }
}

TEST(Transform, TooFewSamplesRejected) {
  const auto lat = make_lattice(1.0, 4.0);
  std::vector<cplx> few(lat.modes() - 1);
  EXPECT_THROW(forward_transform(std::span<const cplx>(few), lat), GridMismatch);
}

TEST(Transform, RefinementKeepsL2Norm) {
  // Same physical function on T (lambda = 1) and on the doubled circle (period 4 pi):
  // u(x) = sum_n a_n e^{inx} has period 2 pi and hence also period 4 pi.
  Rng rng(11);
  const auto coarse = make_lattice(1.0, 5.0);
  const auto f = random_field(coarse, rng, 2.0);
  const auto fine = make_lattice(2.0, 5.0);
  SpectralField g(fine);
  for (long j = -coarse.jmax(); j <= coarse.jmax(); ++j) g.set_j(2 * j, 2.0 * f.at_j(j));
  // On [0, 4 pi] the L^2 norm doubles: compare per-period norms.
  EXPECT_NEAR(field_l2_sq(g) / 2.0 / field_l2_sq(f), 1.0, 1e-12);
  const auto a = inverse_transform(f, 64);
  const auto b = inverse_transform(g, 128);
  for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(std::abs(a[m] - b[m]), 0.0, 1e-12);
}

TEST(Conjugate, MatchesPhysicalConjugation) {
  Rng rng(3);
  const auto lat = make_lattice(2.0, 3.0);
  const auto f = random_field(lat, rng);
  auto samples = inverse_transform(f, 40);
  for (auto& v : samples) v = std::conj(v);
  const auto direct = forward_transform(std::span<const cplx>(samples), lat);
  const auto c = conjugate(f);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(std::abs(direct[i] - c[i]), 0.0, 1e-12);
}

TEST(TimeTransform, FreeEvolutionGivesShiftedWindowTransform) {
  const auto lat = make_lattice(1.0, 3.0);
  Rng rng(5);
  const auto phi = random_field(lat, rng, 2.0);
  const double dt = 1.0 / 256.0;
  Trajectory traj(lat, -2.5, dt, 1281);
  for (std::size_t m = 0; m < traj.count; ++m) {
    auto row = traj.row(m);
    for (std::size_t ik = 0; ik < lat.modes(); ++ik) {
      const double k = lat.frequency(ik);
      row[ik] = std::polar(1.0, -k * k * traj.time(m)) * phi[ik];
    }
  }
  const auto U = time_transform(traj, bump_window(), 2);
  double worst = 0.0;
  for (std::size_t it = 0; it < U.taus(); it += 97) {
    for (std::size_t ik = 0; ik < lat.modes(); ++ik) {
      const double k = lat.frequency(ik);
      const cplx expect = bump_hat(U.tau(it) + k * k) * phi[ik];
      worst = std::max(worst, std::abs(U.at(it, ik) - expect));
    }
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(TimeTransform, ZeroAndConstantInputs) {
  const auto lat = make_lattice(1.0, 2.0);
  Trajectory traj(lat, -2.0, 0.01, 401);
  const auto Z = time_transform(traj, bump_window());
  for (const auto& c : Z.coeff) EXPECT_EQ(c, cplx{});

  for (std::size_t m = 0; m < traj.count; ++m) traj.row(m)[lat.index_of_j(1)] = 1.0;
  const auto U = time_transform(traj, bump_window());
  std::size_t best = 0;
  for (std::size_t it = 0; it < U.taus(); ++it)
    if (std::abs(U.at(it, lat.index_of_j(1))) > std::abs(U.at(best, lat.index_of_j(1)))) best = it;
  EXPECT_NEAR(U.tau(best), 0.0, U.grid.spacing);
  EXPECT_NEAR(std::abs(U.at(best, lat.index_of_j(1)) - bump_hat(U.tau(best))), 0.0, 1e-9);
}

TEST(TimeTransform, SpacetimePlancherel) {
  const auto lat = make_lattice(2.0, 3.0);
  Rng rng(9);
  const double dt = 0.01;
  Trajectory traj(lat, -2.0, dt, 401);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& v : traj.data) {
    const double re = n(rng);
    const double im = n(rng);
    v = cplx{re, im};
  }
  const Window w = bump_window();
  double direct = 0.0;
  for (std::size_t m = 0; m < traj.count; ++m) {
    const double p = w(traj.time(m));
    for (std::size_t ik = 0; ik < lat.modes(); ++ik) direct += p * p * std::norm(traj.row(m)[ik]);
  }
  direct *= dt * lat.measure();
  const auto U = time_transform(traj, w, 3);
  EXPECT_NEAR(l2_norm(U) * l2_norm(U) / direct, 1.0, 1e-10);
}

TEST(TimeTransform, RejectsWindowBeyondGrid) {
  const auto lat = make_lattice(1.0, 1.0);
  Trajectory traj(lat, -1.0, 0.01, 201);
  EXPECT_THROW(time_transform(traj, bump_window()), InvalidArgument);
}

TEST(SpacetimeSpectrum, PureTensorNormFactorises) {
  const auto lat = make_lattice(3.0, 2.0);
  const auto grid = make_tau_grid(10.0, 0.1);
  Rng rng(1);
  const auto f = random_field(lat, rng);
  std::vector<double> g(grid.count);
  double g2 = 0.0;
  for (std::size_t it = 0; it < grid.count; ++it) {
    g[it] = std::exp(-0.1 * grid.tau(it) * grid.tau(it));
    g2 += g[it] * g[it] * grid.spacing;
  }
  SpacetimeSpectrum U(lat, grid);
  for (std::size_t it = 0; it < grid.count; ++it)
    for (std::size_t ik = 0; ik < lat.modes(); ++ik) U.at(it, ik) = g[it] * f[ik];
  EXPECT_NEAR(l2_norm(U) / (std::sqrt(g2) * std::sqrt(field_l2_sq(f))), 1.0, 1e-10);
}
