#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mwell/analytic.hpp"
#include "mwell/evolution.hpp"
#include "mwell/observables.hpp"

using namespace mwell;

namespace {

const WellModel kFig1(WallMotion::linear(100.0, 0.5));

double closed_form_current(int n, double x, double t, const WellModel& m) {
  const double L = m.length(t);
  const double s = std::sin(n * std::numbers::pi * x / L);
  return 2.0 * m.wall().speed() * x * s * s / (L * L);
}

}  // namespace

TEST(Current, RealStateCarriesNone) {
  const auto s = WaveState::normalized(kFig1, 0.0, Basis::InstantaneousEigen, {0.3, -0.5, 0.8});
  const SpatialGrid g(101, 100.0);
  for (double j : current_density(s, g)) EXPECT_EQ(j, 0.0);
}

TEST(Current, MovingBasisMatchesClosedForm) {
  for (int n : {1, 11, 44}) {
    for (double t : {0.0, 37.0}) {
      const auto s = moving_basis_state(n, t, kFig1);
      const SpatialGrid g(513, kFig1.length(t));
      const auto j = current_density(s, g);
      for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(j[i], closed_form_current(n, g[i], t, kFig1), 1e-10);
    }
  }
}

TEST(Current, ContinuityEquationHolds) {
  const WellModel m(WallMotion::linear(10.0, 0.5));
  const AnalyticEvolution evo(WaveState(m, 0.0, Basis::Moving, {0.6, cplx(0.0, 0.8)}));
  const double t = 4.0;
  auto rho = [&](double x, double tt) { return StateProbe(evo.state_at(tt)).density(x); };
  auto cur = [&](double x, double tt) { return StateProbe(evo.state_at(tt)).current(x); };
  for (double x : {1.0, 3.3, 7.5, 11.0}) {
    std::vector<double> hs{1e-2, 5e-3, 2.5e-3}, dt, dx;
    for (double h : hs) {
      dt.push_back((rho(x, t + h) - rho(x, t - h)) / (2 * h));
      dx.push_back((cur(x + h, t) - cur(x - h, t)) / (2 * h));
    }
    std::vector<double> h2;
    for (double h : hs) h2.push_back(h * h);
    const double residual = richardson_limit(h2, dt) + richardson_limit(h2, dx);
    EXPECT_LT(std::abs(residual), 1e-6) << "x = " << x;
  }
}

TEST(DeltaJ, StationaryStateInStaticWellIsZero) {
  const WellModel m(WallMotion::fixed(100.0));
  const StationaryEvolution evo(eigen_state(3, 0.0, m));
  for (double eps : {1e-4, 1e-2, 1.0}) EXPECT_NEAR(delta_j(evo, 20.0, eps), 0.0, 1e-18);
}

TEST(DeltaJ, SmallXSlopeForPsi1) {
  const AnalyticEvolution evo(moving_basis_state(1, 0.0, kFig1));
  const std::vector<double> eps{1e-2, 1e-3, 1e-4};
  for (double x : {0.5, 1.0}) {
    std::vector<double> slopes;
    for (double e : eps) slopes.push_back(delta_j(evo, x, e) / e);
    const double limit = richardson_limit(eps, slopes);
    const double want = delta_j_slope_psi(1, x, kFig1);
    EXPECT_LT(std::abs(limit / want - 1.0), 1e-2) << "x = " << x;
  }
  EXPECT_NEAR(delta_j_slope_psi(1, 1.0, kFig1), -1.97392088e-9, 1e-16);
}

TEST(DeltaJ, RejectsNonPositiveEps) {
  const AnalyticEvolution evo(moving_basis_state(1, 0.0, kFig1));
  EXPECT_THROW(delta_j(evo, 1.0, 0.0), PreconditionError);
}

TEST(Richardson, ExactForPolynomials) {
  const std::vector<double> h{0.1, 0.05, 0.02};
  std::vector<double> f;
  for (double v : h) f.push_back(3.0 - 2.0 * v + 5.0 * v * v);
  EXPECT_NEAR(richardson_limit(h, f), 3.0, 1e-12);
}

TEST(WeakMomentum, MovingBasisClosedForm) {
  const auto s = moving_basis_state(44, 0.0, kFig1);
  const cplx pw = weak_momentum(s, 2.27);
  EXPECT_NEAR(pw.real(), 0.011350, 1e-12);
  const double expected_im = -(std::numbers::pi * 44 / 100.0) / std::tan(44 * std::numbers::pi * 2.27 / 100.0);
  EXPECT_NEAR(pw.imag(), expected_im, 1e-9 * std::abs(expected_im));
}

TEST(WeakMomentum, ImaginaryPartVanishesMidLobe) {
  const double t = 12.0;
  const auto s = moving_basis_state(3, t, kFig1);
  EXPECT_NEAR(weak_momentum(s, kFig1.length(t) / 6.0).imag(), 0.0, 1e-13);
}

TEST(WeakMomentum, StationaryStateHasZeroRealPart) {
  const WellModel m(WallMotion::fixed(100.0));
  const auto s = eigen_state(5, 0.0, m);
  for (double x : {3.0, 50.5, 91.0}) EXPECT_EQ(weak_momentum(s, x).real(), 0.0);
}

TEST(WeakMomentum, RealPartLinearForPsiN) {
  const double t = 25.0;
  const auto s = moving_basis_state(7, t, kFig1);
  const StateProbe p(s);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (double x = 0.5; x < kFig1.length(t); x += 0.75) {
    if (p.guarded(p.density(x))) continue;
    const double y = p.weak_momentum(x).real();
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    n += 1;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(slope, 0.5 / kFig1.length(t), 1e-8);
}

TEST(WeakMomentum, RealPartTimesDensityIsCurrent) {
  const WellModel m(WallMotion::linear(10.0, 0.5));
  const WaveState s(m, 3.0, Basis::Moving, {0.6, cplx(0.0, 0.8)});
  const StateProbe p(s);
  for (double x = 0.25; x < 11.5; x += 0.5) {
    const double rho = p.density(x);
    if (p.guarded(rho)) continue;
    EXPECT_NEAR(p.weak_momentum(x).real() * rho / m.mass(), p.current(x), 1e-14);
  }
}

TEST(WeakMomentum, NodeGuard) {
  const WellModel m(WallMotion::fixed(100.0));
  const auto s = eigen_state(2, 0.0, m);
  EXPECT_THROW(weak_momentum(s, 50.0), NodeGuardError);
  EXPECT_THROW(weak_momentum(s, 0.0), NodeGuardError);
}

TEST(ObservableField, GuardedPointsAreEmpty) {
  const WellModel m(WallMotion::fixed(10.0));
  const auto f = observable_field(eigen_state(2, 0.0, m), SpatialGrid(11, 10.0));
  EXPECT_FALSE(f.re_pw[0].has_value());
  EXPECT_FALSE(f.re_pw[5].has_value());
  ASSERT_TRUE(f.Q[2].has_value());
  EXPECT_NEAR(*f.Q[2], m.energy(2, 0.0), 1e-14);
}

TEST(LightCone, Examples) {
  const double c = kFig1.light_speed();
  const auto a = light_cone(100.0 - c * 0.5, 0.25, kFig1);
  EXPECT_FALSE(a.inside);
  EXPECT_NEAR(a.t_signal, 0.5, 1e-14);
  EXPECT_NEAR(light_cone(0.0, 0.0, kFig1).t_signal, 0.7297352574, 1e-10);
  EXPECT_TRUE(light_cone(100.0 - c * 0.25, 0.25, kFig1).inside);
  EXPECT_THROW(light_cone(100.0, 0.0, kFig1), PreconditionError);
}

TEST(TailReport, CutoffAtTimeZero) {
  const auto r = tail_report(eigen_state(11, 0.0, kFig1), 0.0, 1e-10);
  EXPECT_NEAR(static_cast<double>(r.k_cut), 650.0, 0.05 * 650.0);
  EXPECT_LT(r.discarded, 1e-10);
  EXPECT_FALSE(r.double_projection);
}

TEST(TailReport, CutoffIsMinimal) {
  const auto r = tail_report(eigen_state(3, 0.0, kFig1), 0.0, 1e-6);
  const auto b = moving_coefficients(eigen_state(3, 0.0, kFig1).coefficients(), kFig1, r.k_cut - 1);
  double kept = 0.0;
  for (const auto& z : b) kept += std::norm(z);
  EXPECT_GE(1.0 - kept, 1e-6);
}

TEST(TailReport, RejectsStaticWall) {
  const WellModel m(WallMotion::fixed(100.0));
  EXPECT_THROW(tail_report(eigen_state(1, 0.0, m), 0.0, 1e-10), PreconditionError);
  EXPECT_THROW(tail_report(eigen_state(1, 0.0, kFig1), 0.0, 2.0), PreconditionError);
}

TEST(CurrentVsTruncation, ConvergesWithTail) {
  const std::vector<std::size_t> cuts{100, 400, 1600, 6400};
  const auto j = current_vs_truncation(eigen_state(11, 0.0, kFig1), 1.0, 0.01, cuts);
  for (std::size_t i = 2; i < j.size(); ++i) {
    EXPECT_LT(std::abs(j[i] - j.back()), std::abs(j[i - 1] - j.back()));
  }
}
