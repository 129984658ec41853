#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "mwell/analytic.hpp"

using namespace mwell;

namespace {

const WellModel kFig1(WallMotion::linear(100.0, 0.5));

// Composite 30-point Gauss rule on [0, L].
template <class F>
cplx integrate(F f, double L, int panels = 64) {
  using Q = boost::math::quadrature::gauss<double, 30>;
  const double h = L / panels;
  double re = 0.0, im = 0.0;
  for (int p = 0; p < panels; ++p) {
    re += Q::integrate([&](double x) { return f(x).real(); }, p * h, (p + 1) * h);
    im += Q::integrate([&](double x) { return f(x).imag(); }, p * h, (p + 1) * h);
  }
  return {re, im};
}

}  // namespace

TEST(Phi, Orthonormal) {
  const double t = 30.0;
  const double L = kFig1.length(t);
  for (int n = 1; n <= 12; n += 3) {
    for (int m = 1; m <= 12; m += 2) {
      const cplx s = integrate([&](double x) { return phi(n, x, t, kFig1) * phi(m, x, t, kFig1); }, L);
      EXPECT_NEAR(s.real(), n == m ? 1.0 : 0.0, 1e-13) << n << "," << m;
    }
  }
}

TEST(Phi, BoundaryAndDomain) {
  EXPECT_EQ(phi(3, 0.0, 10.0, kFig1), cplx(0.0));
  EXPECT_EQ(phi(3, kFig1.length(10.0), 10.0, kFig1), cplx(0.0));
  EXPECT_THROW(phi(3, 106.0, 10.0, kFig1), PreconditionError);
  EXPECT_THROW(phi(0, 1.0, 0.0, kFig1), PreconditionError);
}

TEST(Psi, ModulusEqualsPhiModulus) {
  for (double t : {0.0, 50.0, 100.0}) {
    for (double x : {1.0, 17.3, 55.5}) {
      EXPECT_NEAR(std::abs(psi(11, x, t, kFig1)), std::abs(phi(11, x, t, kFig1)), 1e-15);
    }
  }
}

TEST(Psi, RequiresLinearWall) {
  const WellModel s(WallMotion::fixed(100.0));
  EXPECT_THROW(psi(1, 1.0, 0.0, s), PreconditionError);
}

TEST(Psi, SolvesSchroedingerEquation) {
  // i psi_t = -psi_xx / 2 with centred differences; residual relative to |psi_xx|.
  const double hx = 1e-3, ht = 1e-3;
  for (int n : {1, 11}) {
    for (double t : {5.0, 50.0}) {
      for (double x : {3.1, 40.0, 77.7}) {
        const cplx dt = (psi(n, x, t + ht, kFig1) - psi(n, x, t - ht, kFig1)) / (2.0 * ht);
        const cplx dxx = (psi(n, x + hx, t, kFig1) - 2.0 * psi(n, x, t, kFig1) + psi(n, x - hx, t, kFig1)) / (hx * hx);
        const cplx r = cplx(0.0, 1.0) * dt + 0.5 * dxx;
        EXPECT_LT(std::abs(r), 1e-5 * std::max(1.0, std::abs(dxx))) << "n=" << n << " t=" << t << " x=" << x;
      }
    }
  }
}

TEST(Overlap, MatchesQuadrature) {
  for (double t : {0.0, 50.0}) {
    const double L = kFig1.length(t);
    const OverlapMatrix d(kFig1, t, 20, 20);
    double worst = 0.0;
    for (int k = 1; k <= 20; ++k) {
      for (int n = 1; n <= 20; ++n) {
        const cplx q = integrate([&](double x) { return std::conj(psi(k, x, t, kFig1)) * phi(n, x, t, kFig1); }, L);
        worst = std::max(worst, std::abs(d(k, n) - q));
      }
    }
    EXPECT_LT(worst, 1e-12) << "t = " << t;
  }
}

TEST(Overlap, ColumnNormReachesOne) {
  const OverlapMatrix d(kFig1, 0.0, 650, 11);
  EXPECT_NEAR(d.column_norm2(11), 1.0, 1e-10);
}

TEST(Overlap, ColumnsOrthogonal) {
  const OverlapMatrix d(kFig1, 0.0, 2000, 5);
  EXPECT_LT(std::abs(d.column_inner(2, 5)), 1e-10);
  EXPECT_LT(std::abs(d.column_inner(1, 4)), 1e-10);
}

TEST(Overlap, TailDecaysAsInverseCube) {
  const std::size_t k0 = 1500, k1 = 6000;
  const OverlapMatrix d(kFig1, 0.0, k1, 11);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
  for (std::size_t k = k0; k <= k1; k += 2) {
    const double x = std::log(static_cast<double>(k)), y = std::log(std::abs(d(k, 11)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    m += 1;
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  EXPECT_GT(slope, -3.3);
  EXPECT_LT(slope, -2.7);
}

TEST(Overlap, SingleElementAgreesWithTable) {
  const OverlapMatrix d(kFig1, 50.0, 30, 30);
  EXPECT_EQ(overlap_dkn(17, 4, 50.0, kFig1), d(17, 4));
}

TEST(ExactEvolve, RoundTripThroughMovingBasis) {
  const auto init = WaveState::normalized(kFig1, 0.0, Basis::InstantaneousEigen, {0.6, cplx(0.0, 0.8), 0.3});
  const auto moving = exact_evolve(init, 0.0);
  const auto a = project_to_eigenbasis(moving, 3);
  for (std::size_t n = 0; n < 3; ++n) EXPECT_LT(std::abs(a[n] - init.coefficients()[n]), 1e-6);
}

TEST(ExactEvolve, DiscardedNormBelowTolerance) {
  ExactEvolveOptions opt;
  opt.tolerance = 1e-10;
  const auto s = exact_evolve(eigen_state(11, 0.0, kFig1), 10.0, opt);
  EXPECT_EQ(s.basis(), Basis::Moving);
  EXPECT_GT(1.0 - s.norm2(), 0.0);
  EXPECT_LT(1.0 - s.norm2(), 1e-10);
  EXPECT_NEAR(static_cast<double>(s.size()), 631.0, 0.5);
}

TEST(ExactEvolve, MatchesPsiForMovingInput) {
  const auto s = exact_evolve(moving_basis_state(2, 0.0, kFig1), 40.0);
  EXPECT_DOUBLE_EQ(s.time(), 40.0);
  EXPECT_EQ(s.coefficients()[1], cplx(1.0));
}

TEST(ExactEvolve, TruncationCapRaisesAlarm) {
  ExactEvolveOptions opt;
  opt.tolerance = 1e-14;
  opt.max_terms = 100;
  try {
    exact_evolve(eigen_state(11, 0.0, kFig1), 1.0, opt);
    FAIL() << "expected an alarm";
  } catch (const NumericalAlarm& a) {
    EXPECT_EQ(a.kind(), "truncation_unreachable");
  }
}

TEST(EigenVelocity, EqualsWallSpeedAtMatchedIndex) {
  for (double t : {0.0, 30.0}) {
    const double kbar = velocity_matched_index(t, kFig1);
    EXPECT_NEAR(kFig1.hbar() * std::numbers::pi * kbar / (kFig1.mass() * kFig1.length(t)), 0.5, 1e-14);
    const int k = static_cast<int>(std::floor(kbar));
    EXPECT_LE(eigen_velocity(k, t, kFig1), 0.5);
    EXPECT_GT(eigen_velocity(k + 1, t, kFig1), 0.5);
  }
  EXPECT_NEAR(eigen_velocity(650, 0.0, kFig1) / kFig1.light_speed(), 0.149, 1e-3);
}

TEST(PositionMatrix, MatchesQuadrature) {
  const double L = 7.0;
  const WellModel m(WallMotion::fixed(L));
  for (int k = 1; k <= 6; ++k) {
    for (int j = 1; j <= 6; ++j) {
      const cplx q = integrate([&](double x) { return phi(k, x, 0.0, m) * x * phi(j, x, 0.0, m); }, L, 16);
      EXPECT_NEAR(position_matrix_element(k, j, L), q.real(), 1e-13) << k << "," << j;
    }
  }
}
