#include <gtest/gtest.h>

#include <cmath>

#include "gblab/random_fields.hpp"
#include "gblab/reduction.hpp"

using namespace gblab;

namespace {

double max_diff(const SpectralField& a, const SpectralField& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST(Reduction, ZeroVelocityIsIdentity) {
  Rng rng(1);
  const auto lat = make_lattice(1.0, 8.0);
  GBState st{random_real_field(lat, rng), SpectralField(lat)};
  EXPECT_EQ(max_diff(gb_to_qnls(st), st.v0), 0.0);
}

TEST(Reduction, UnitVelocityMode) {
  const auto lat = make_lattice(1.0, 2.0);
  GBState st{SpectralField(lat), SpectralField(lat)};
  st.v1.set_j(1, 1.0);
  const auto u = gb_to_qnls(st);
  EXPECT_EQ(u.at_j(1), cplx(0.0, 0.5));
}

TEST(Reduction, RoundTrips) {
  Rng rng(2);
  for (double lambda : {1.0, 2.0, 4.0}) {
    const auto lat = make_lattice(lambda, 6.0);
    for (int trial = 0; trial < 20; ++trial) {
      const auto st = random_gb_state(lat, rng);
      EXPECT_LT(conjugate_symmetry_defect(st.v0), 1e-15);
      const auto back = qnls_to_gb(gb_to_qnls(st));
      EXPECT_LT(max_diff(back.v0, st.v0), 1e-12);
      EXPECT_LT(max_diff(back.v1, st.v1), 1e-12);
      // The other composition on arbitrary complex data.
      const auto u = random_field(lat, rng);
      EXPECT_LT(max_diff(gb_to_qnls(qnls_to_gb(u)), u), 1e-12);
    }
  }
}

TEST(Reduction, RealFieldHasNoVelocity) {
  Rng rng(3);
  const auto lat = make_lattice(2.0, 4.0);
  const auto u = random_real_field(lat, rng);
  const auto st = qnls_to_gb(u);
  for (const auto& c : st.v1.coeff) EXPECT_LT(std::abs(c), 1e-15);
}

TEST(Reduction, ImaginaryConstant) {
  const auto lat = make_lattice(1.0, 2.0);
  SpectralField u(lat);
  u.set_j(0, cplx{0.0, 1.0});
  const auto st = qnls_to_gb(u);
  EXPECT_NEAR(std::abs(st.v1.at_j(0) - 1.0), 0.0, 1e-15);
  for (const auto& c : st.v0.coeff) EXPECT_EQ(c, cplx{});
}

TEST(Reduction, LatticeMismatchRejected) {
  GBState st{SpectralField(make_lattice(1.0, 2.0)), SpectralField(make_lattice(2.0, 2.0))};
  EXPECT_THROW(gb_to_qnls(st), GridMismatch);
}

TEST(OmegaSq, SymbolValues) {
  const auto lat = make_lattice(4.0, 3.0);
  SpectralField u(lat);
  for (auto& c : u.coeff) c = 1.0;
  const auto w = omega_sq(u, 4.0);
  EXPECT_EQ(w.at_j(0), cplx{});
  EXPECT_DOUBLE_EQ(w.at_j(1).real(), 0.5);
  const auto lat1 = make_lattice(1.0, 12.0);
  SpectralField v(lat1);
  v.set_j(10, 1.0);
  EXPECT_DOUBLE_EQ(omega_sq(v, 1.0).at_j(10).real(), 100.0 / 101.0);
  EXPECT_THROW(omega_sq(u, 2.0), GridMismatch);
}

TEST(OmegaSq, ContractionAndKernel) {
  Rng rng(4);
  for (double lambda : {1.0, 3.0, 16.0}) {
    const auto lat = make_lattice(lambda, 4.0);
    const auto u = random_field(lat, rng);
    const auto w = omega_sq(u, lambda);
    for (double s : {-1.0, -0.5, 0.0, 1.0}) EXPECT_LE(h_norm(w, s), h_norm(u, s));
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (lat.index_j(i) == 0) EXPECT_EQ(w[i], cplx{});
      else EXPECT_GE(std::abs(w[i]), 0.5 * std::abs(u[i]) - 1e-15);
    }
  }
}

TEST(Rescale, IdentityAtLambdaOne) {
  Rng rng(5);
  const auto lat = make_lattice(1.0, 8.0);
  const auto u = random_field(lat, rng);
  const auto r = rescale_data(u, 1.0, -0.5);
  EXPECT_LT(max_diff(r.field, u), 1e-15);
  EXPECT_TRUE(r.report.holds);
}

TEST(Rescale, SingleModeClosedForm) {
  const auto lat = make_lattice(1.0, 2.0);
  SpectralField u(lat);
  u.set_j(1, 1.0);
  const double lambda = 4.0, s = -0.5;
  const auto r = rescale_data(u, lambda, s);
  const double expect_sq = std::pow(lambda, -3.0) * std::pow(japanese(0.25), -1.0);
  EXPECT_NEAR(r.report.norm_rescaled * r.report.norm_rescaled, expect_sq, 1e-15);
  const double bound_sq = std::pow(lambda, -2.0 * s - 3.0) / japanese(1.0);
  EXPECT_NEAR(r.report.bound * r.report.bound, bound_sq, 1e-15);
  EXPECT_TRUE(r.report.holds);
}

TEST(Rescale, BoundSweep) {
  Rng rng(6);
  const auto lat = make_lattice(1.0, 16.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = random_field(lat, rng, 6.0);
    for (double lambda : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const auto r = rescale_data(u, lambda, -0.5);
      EXPECT_TRUE(r.report.holds);
      EXPECT_LT(r.report.identity_residual, 1e-12);
      for (long n = -lat.jmax(); n <= lat.jmax(); ++n)
        EXPECT_EQ(r.field.at_j(n), u.at_j(n) / lambda);
    }
  }
}

TEST(Rescale, PhysicalPushforward) {
  // u^lambda(x) = lambda^{-2} u(x / lambda), checked from physical samples.
  Rng rng(8);
  const auto lat = make_lattice(1.0, 3.0);
  const auto u = random_field(lat, rng);
  const double lambda = 3.0;
  const auto r = rescale_data(u, lambda, -0.3);
  const auto fine = inverse_transform(r.field, 3 * 40);
  const auto coarse = inverse_transform(u, 40);
  // Fine sample 3m sits at lambda times coarse sample m.
  for (std::size_t m = 0; m < 40; ++m)
    EXPECT_NEAR(std::abs(fine[3 * m] - coarse[m] / (lambda * lambda)), 0.0, 1e-12);
}

TEST(Rescale, RejectsBadInputs) {
  const auto lat = make_lattice(1.0, 2.0);
  SpectralField u(lat);
  EXPECT_THROW(rescale_data(u, 2.0, 0.0), InvalidArgument);
  EXPECT_THROW(rescale_data(u, 0.5, -0.5), InvalidArgument);
  EXPECT_THROW(rescale_data(SpectralField(make_lattice(2.0, 2.0)), 2.0, -0.5), InvalidArgument);
}
