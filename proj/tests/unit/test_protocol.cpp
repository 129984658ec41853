#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "mwell/analytic.hpp"
#include "mwell/evolution.hpp"
#include "mwell/protocol.hpp"

using namespace mwell;

namespace {

const WellModel kFig1(WallMotion::linear(100.0, 0.5));

// Two channels with known weak momenta; half the cavities pass postselection.
ProtocolDesign synthetic_design(double p0 = 0.0, double p1 = 0.08) {
  ProtocolDesign d;
  d.pointer = {1.0, 1.0, 0.1};
  d.window = {4.5, 0.5};
  d.t_w = 0.5;
  d.t_f = 0.6;
  d.t_signal = 0.7;
  d.channel[0] = {0.5, cplx(p0, 0.0)};
  d.channel[1] = {0.5, cplx(p1, -0.02)};
  return d;
}

}  // namespace

TEST(WeakValue, IdentityIsOne) {
  const auto s = moving_basis_state(4, 3.0, kFig1);
  const cplx w = weak_value_generic(LocalAction(ops::identity), s, 17.0);
  EXPECT_NEAR(w.real(), 1.0, 1e-15);
  EXPECT_NEAR(w.imag(), 0.0, 1e-15);
}

TEST(WeakValue, IdentityMatrixIsOne) {
  const auto s = WaveState::normalized(kFig1, 0.0, Basis::InstantaneousEigen, {0.6, cplx(0.0, 0.8)});
  const std::vector<cplx> I{1.0, 0.0, 0.0, 1.0};
  EXPECT_LT(std::abs(weak_value_generic(I, s, 31.0) - 1.0), 1e-15);
}

TEST(WeakValue, MomentumMatchesWeakMomentum) {
  const auto s = moving_basis_state(44, 0.0, kFig1);
  const cplx a = weak_value_generic(LocalAction(ops::momentum), s, 2.27);
  const cplx b = weak_momentum(s, 2.27);
  EXPECT_LT(std::abs(a - b), 1e-10 * std::abs(b));
}

TEST(WeakValue, PositionAtPostselectionPoint) {
  const auto s = moving_basis_state(2, 1.0, kFig1);
  const cplx w = weak_value_generic(LocalAction(ops::position), s, 12.5);
  EXPECT_NEAR(w.real(), 12.5, 1e-13);
  EXPECT_NEAR(w.imag(), 0.0, 1e-13);
}

TEST(WeakValue, NodeGuard) {
  const WellModel m(WallMotion::fixed(100.0));
  EXPECT_THROW(weak_value_generic(LocalAction(ops::identity), eigen_state(2, 0.0, m), 50.0), NodeGuardError);
}

TEST(PositionEstimator, ErrorLinearInDt) {
  const AnalyticEvolution evo(moving_basis_state(44, 0.0, kFig1));
  const double x_f = 2.27;
  const cplx exact = weak_momentum(evo.state_at(0.0), x_f);
  std::vector<double> lx, ly;
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    const cplx est = position_estimator(evo, x_f, 0.0, dt);
    lx.push_back(std::log(dt));
    ly.push_back(std::log(std::abs(est - exact)));
  }
  const double slope = (ly[2] - ly[0]) / (lx[2] - lx[0]);
  EXPECT_NEAR(slope, 1.0, 0.1);
  EXPECT_NEAR(position_estimator(evo, x_f, 0.0, 1e-4).real(), 0.011350, 1e-4);
}

TEST(PositionEstimator, StaticStationaryStateReadsZero) {
  const WellModel m(WallMotion::fixed(100.0));
  const StationaryEvolution evo(eigen_state(3, 0.0, m));
  EXPECT_NEAR(position_estimator(evo, 20.0, 0.0, 1e-3).real(), 0.0, 1e-9);
}

TEST(PositionEstimator, Preconditions) {
  const AnalyticEvolution evo(moving_basis_state(1, 0.0, kFig1));
  EXPECT_THROW(position_estimator(evo, 20.0, 1.0, 1.0), PreconditionError);
}

TEST(Postselection, ProbabilityOfEigenstate) {
  const WellModel m(WallMotion::fixed(10.0));
  const PostselectionWindow w{3.0, 0.5};
  const double L = 10.0, k = 2.0 * std::numbers::pi / L;
  auto F = [&](double x) { return x / L - std::sin(2.0 * k * x) / (2.0 * k * L); };
  EXPECT_NEAR(w.probability(eigen_state(2, 0.0, m)), F(3.5) - F(2.5), 1e-14);
  EXPECT_THROW((PostselectionWindow{0.2, 0.5}.probability(eigen_state(2, 0.0, m))), PreconditionError);
}

TEST(Cavity, MeanReadingFollowsWeakValue) {
  auto d = synthetic_design(0.0, 0.08);
  const std::uint64_t n = 1000000;
  const auto run = run_postselected(d, 1, n, 42);
  const double tol = 3.0 * d.pointer.s / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(run.reading_mean, d.pointer.g * 0.08, tol);
  const double ps = d.pointer.momentum_spread();
  EXPECT_NEAR(run.momentum_mean, d.pointer.g * -0.02 * 2.0 * ps * ps, 3.0 * ps / std::sqrt(static_cast<double>(n)));
}

TEST(Cavity, DecoupledPointerReadsZero) {
  auto d = synthetic_design(0.0, 0.08);
  d.pointer.g = 1e-12;
  for (int bit = 0; bit < 2; ++bit) {
    const auto run = run_postselected(d, bit, 200000, 9);
    EXPECT_NEAR(run.reading_mean, 0.0, 3.0 / std::sqrt(200000.0));
  }
}

TEST(Cavity, StationaryChannelCentredAtZero) {
  const auto d = synthetic_design(0.0, 0.08);
  const auto run = run_postselected(d, 0, 400000, 3);
  EXPECT_NEAR(run.estimate, 0.0, 3.0 / std::sqrt(400000.0));
}

TEST(Cavity, SingleCavityDraw) {
  const auto d = synthetic_design();
  std::mt19937_64 eng(1);
  int passed = 0;
  for (int i = 0; i < 4000; ++i) {
    const auto r = simulate_cavity(d.pointer, d.channel[1], eng);
    EXPECT_EQ(r.postselected, r.reading.has_value());
    passed += r.postselected ? 1 : 0;
  }
  EXPECT_NEAR(passed / 4000.0, 0.5, 4.0 * std::sqrt(0.25 / 4000.0));
}

TEST(Cavity, WeaknessGuard) {
  auto d = synthetic_design();
  d.pointer.g = 5.0;
  std::mt19937_64 eng(1);
  EXPECT_THROW(simulate_cavity(d.pointer, d.channel[1], eng), PreconditionError);
}

TEST(Design, EnforcesTimingAndWeakness) {
  const WellModel rest(WallMotion::fixed(100.0));
  const StationaryEvolution resting(eigen_state(11, 0.0, rest));
  const SpectralEvolution moving(eigen_state(11, 0.0, kFig1), 0.8);
  const PostselectionWindow w{100.0 / 22.0, 0.5};
  const PointerModel p{5e4, 1.0, 0.1};
  const auto d = design_protocol(resting, moving, p, w, 0.5, 0.6);
  EXPECT_LT(d.t_f, d.t_signal);
  EXPECT_EQ(d.channel[0].weak_momentum.real(), 0.0);
  EXPECT_GT(std::abs(d.channel[1].weak_momentum.real()), 1e-7);
  EXPECT_THROW(design_protocol(resting, moving, p, w, 0.5, 0.75), PreconditionError);
  EXPECT_THROW(design_protocol(resting, moving, PointerModel{1e7, 1.0, 0.1}, w, 0.5, 0.6), PreconditionError);
}

TEST(Protocol, RunMetadataPrecedesLightCone) {
  const auto d = synthetic_design();
  const auto run = run_protocol(d, 1, 1000, 5);
  EXPECT_TRUE(run.before_light_cone);
  EXPECT_LT(run.t_acquire, run.t_signal);
  EXPECT_LE(run.t_weak, run.t_acquire);
  EXPECT_EQ(run.seed, 5u);
}

TEST(Protocol, DeterministicAcrossThreadCounts) {
  const auto d = synthetic_design();
  const auto a = run_protocol(d, 1, 300000, 77, {3, false, 1});
  const auto b = run_protocol(d, 1, 300000, 77, {3, false, 4});
  EXPECT_EQ(a.postselected, b.postselected);
  EXPECT_EQ(a.reading_mean, b.reading_mean);
  EXPECT_EQ(a.momentum_mean, b.momentum_mean);
}

TEST(Protocol, RejectsBadArguments) {
  const auto d = synthetic_design();
  EXPECT_THROW(run_protocol(d, 2, 10, 1), PreconditionError);
  EXPECT_THROW(run_protocol(d, 0, 0, 1), PreconditionError);
  auto strong = d;
  strong.pointer.g = 5.0;
  EXPECT_THROW(run_protocol(strong, 1, 10, 1), PreconditionError);
}

TEST(Protocol, SymmetricErrorRates) {
  const auto d = synthetic_design(-0.05, 0.05);
  const auto er = bit_error_rate(d, 800, 1000, 21);
  // Expected rate per bit about 8%; the counts are independent binomials.
  const double diff = static_cast<double>(er.errors[0]) - static_cast<double>(er.errors[1]);
  const double sd = std::sqrt(2.0 * 1000.0 * 0.08 * 0.92);
  EXPECT_LT(std::abs(diff), 4.0 * sd);
  EXPECT_GT(er.errors[0], 0u);
}

TEST(Protocol, ErrorRateNonIncreasingInN) {
  const auto d = synthetic_design();
  double last = 1.0;
  for (std::uint64_t N : {200u, 2000u, 20000u}) {
    const auto er = bit_error_rate(d, N, 200, 1234);
    EXPECT_LE(er.rate(), last + 0.02) << "N = " << N;
    last = er.rate();
  }
  EXPECT_LT(last, 0.01);
}

TEST(Statistics, ClopperPearsonBound) {
  EXPECT_NEAR(rate_upper_bound(0, 400), 1.0 - std::pow(0.05, 1.0 / 400.0), 1e-12);
  EXPECT_EQ(rate_upper_bound(5, 5), 1.0);
  EXPECT_GT(rate_upper_bound(3, 400), 3.0 / 400.0);
}

TEST(Calibration, FindsSizeBelowTarget) {
  const auto d = synthetic_design();
  const auto cal = calibrate_ensemble_size(d, 99, {0.01, 200, 1.1, 1ULL << 40, 1});
  EXPECT_GT(cal.N_star, 0u);
  EXPECT_LT(cal.at_N_star.upper(), 0.01);
  EXPECT_EQ(cal.at_N_star.N, cal.N_star);
}

TEST(Convergence, InverseSquareRootSlope) {
  const auto d = synthetic_design();
  const std::vector<std::uint64_t> sizes{100, 400, 1600, 6400, 25600};
  const auto c = estimator_convergence(d, 1, sizes, 200, 8);
  EXPECT_NEAR(c.slope, -0.5, 0.05);
}
