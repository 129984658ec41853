#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mwell/analytic.hpp"
#include "mwell/bohmian.hpp"
#include "mwell/evolution.hpp"

using namespace mwell;

namespace {

const WellModel kFig1(WallMotion::linear(100.0, 0.5));

// |c1| > 2 |c2| keeps psi free of interior nodes at all times.
WaveState node_free(double t, const WellModel& m = kFig1) {
  return WaveState::normalized(m, t, Basis::Moving, {0.9, 0.43589});
}

}  // namespace

TEST(QuantumPotential, EigenstateGivesItsEnergy) {
  const WellModel m(WallMotion::fixed(100.0));
  const auto s = eigen_state(6, 0.0, m);
  const auto Q = quantum_potential(s, SpatialGrid(301, 100.0));
  std::size_t checked = 0;
  for (const auto& q : Q) {
    if (!q) continue;
    EXPECT_NEAR(*q, m.energy(6, 0.0), 1e-8);
    ++checked;
  }
  EXPECT_GT(checked, 250u);
}

TEST(QuantumPotential, MatchesFiniteDifferenceOfAmplitude) {
  const WellModel m(WallMotion::fixed(10.0));
  const auto s = WaveState::normalized(m, 0.0, Basis::InstantaneousEigen, {0.8, cplx(0.3, 0.4), 0.2});
  const SeriesView view(s);
  auto amp = [&](double x) { return std::abs(view.chi(x)); };
  for (double x : {1.3, 4.0, 6.6}) {
    const double h = 2e-3;
    const double d2 = (-amp(x + 2 * h) + 16 * amp(x + h) - 30 * amp(x) + 16 * amp(x - h) - amp(x - 2 * h)) / (12 * h * h);
    EXPECT_NEAR(quantum_potential(s, x), -0.5 * d2 / amp(x), 1e-6) << "x = " << x;
  }
}

TEST(QuantumPotential, WideWellHighModeIsFlat) {
  const WellModel m(WallMotion::fixed(1000.0));
  const auto s = eigen_state(200, 0.0, m);
  for (double x : {401.2, 502.6, 603.7}) EXPECT_NEAR(quantum_potential(s, x), m.energy(200, 0.0), 1e-10);
}

TEST(BohmVelocity, PsiNGivesScaledVelocity) {
  const double t = 30.0;
  const auto s = moving_basis_state(3, t, kFig1);
  for (double x : {10.0, 25.0, 60.0, 110.0}) EXPECT_NEAR(bohm_velocity(s, x), 0.5 * x / kFig1.length(t), 1e-14);
}

TEST(BohmVelocity, IdenticalToWeakMomentum) {
  const auto s = node_free(17.0);
  for (double x : {5.0, 44.4, 90.0}) EXPECT_EQ(bohm_velocity(s, x), weak_momentum(s, x).real() / kFig1.mass());
}

TEST(BohmVelocity, RealStationaryStateIsZero) {
  const WellModel m(WallMotion::fixed(100.0));
  EXPECT_EQ(bohm_velocity(eigen_state(1, 0.0, m), 33.0), 0.0);
}

TEST(PolarField, PhaseMatchesUnwrappedArgument) {
  const double t = 13.0;
  const auto s = node_free(t);
  const SpatialGrid g(2001, kFig1.length(t));
  const auto f = polar_field(s, g, 1000);
  const SeriesView view(s);
  std::vector<double> arg(g.size());
  for (std::size_t i = 1; i + 1 < g.size(); ++i) arg[i] = std::arg(view.psi(g[i]));
  for (std::size_t i = 2; i + 1 < g.size(); ++i) {
    while (arg[i] - arg[i - 1] > std::numbers::pi) arg[i] -= 2 * std::numbers::pi;
    while (arg[i] - arg[i - 1] < -std::numbers::pi) arg[i] += 2 * std::numbers::pi;
  }
  for (std::size_t i = 20; i + 20 < g.size(); i += 10) {
    EXPECT_NEAR(f.sigma[i], arg[i] - arg[1000], 1e-8) << "x = " << g[i];
  }
  EXPECT_EQ(f.sigma[1000], 0.0);
  for (double a : f.amplitude) EXPECT_GE(a, 0.0);
}

TEST(PolarField, GradientIsVelocity) {
  const double t = 5.0;
  const auto s = node_free(t);
  const SpatialGrid g(4001, kFig1.length(t));
  const auto f = polar_field(s, g);
  const double h = g.spacing();
  for (std::size_t i = 100; i + 100 < g.size(); i += 250) {
    const double grad = (-f.sigma[i + 2] + 8 * f.sigma[i + 1] - 8 * f.sigma[i - 1] + f.sigma[i - 2]) / (12 * h);
    EXPECT_NEAR(grad / kFig1.mass(), bohm_velocity(s, g[i]), 1e-8);
  }
}

TEST(Trajectory, PsiNScalesWithWall) {
  const AnalyticEvolution evo(moving_basis_state(3, 0.0, kFig1));
  const std::vector<double> ts{5.0, 20.0};
  const auto tr = integrate_trajectory(10.0, evo, ts);
  EXPECT_NEAR(tr.x[1], 11.0, 1e-8 * 11.0);
  EXPECT_NEAR(tr.x[0], 10.0 * kFig1.length(5.0) / 100.0, 1e-8);
  EXPECT_NEAR(tr.v[1], 0.5 * 11.0 / 110.0, 1e-10);
}

TEST(Trajectory, StaticStationaryStateDoesNotMove) {
  const WellModel m(WallMotion::fixed(100.0));
  const StationaryEvolution evo(eigen_state(2, 0.0, m));
  const std::vector<double> ts{1.0, 100.0};
  const auto tr = integrate_trajectory(30.0, evo, ts);
  EXPECT_EQ(tr.x[0], 30.0);
  EXPECT_EQ(tr.x[1], 30.0);
}

TEST(Trajectory, NewtonLawAlongPath) {
  const AnalyticEvolution evo(node_free(0.0));
  std::vector<double> ts;
  const double dt = 1e-2;
  for (int i = 1; i <= 400; ++i) ts.push_back(i * dt);
  const auto tr = integrate_trajectory(40.0, evo, ts);
  for (std::size_t i = 50; i + 2 < ts.size(); i += 50) {
    const double accel = (-tr.v[i + 2] + 8 * tr.v[i + 1] - 8 * tr.v[i - 1] + tr.v[i - 2]) / (12 * dt);
    const double force = quantum_force(evo.state_at(ts[i]), tr.x[i]);
    EXPECT_LT(std::abs(kFig1.mass() * accel - force), 1e-4 * std::abs(force)) << "t = " << ts[i];
  }
}

TEST(Trajectory, NoCrossing) {
  const AnalyticEvolution evo(node_free(0.0));
  std::vector<double> x0;
  for (double x = 2.0; x < 99.0; x += 4.0) x0.push_back(x);
  std::vector<double> ts;
  for (int i = 1; i <= 20; ++i) ts.push_back(2.0 * i);
  const auto rows = transport_ensemble(x0, evo, ts);
  for (const auto& r : rows) EXPECT_TRUE(std::is_sorted(r.begin(), r.end()));
}

TEST(Trajectory, AbortsNearNode) {
  const WellModel m(WallMotion::fixed(100.0));
  const auto s = WaveState::normalized(m, 0.0, Basis::InstantaneousEigen, {0.0, 1.0});
  const StationaryEvolution evo(s);
  const std::vector<double> ts{1.0};
  EXPECT_THROW(integrate_trajectory(50.0 + 1e-3, evo, ts), NodeGuardError);
  EXPECT_THROW(integrate_trajectory(0.0, evo, ts), PreconditionError);
}

TEST(Equivariance, EnsembleFollowsDensity) {
  const AnalyticEvolution evo(node_free(0.0));
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> u;
  std::vector<double> us(20000);
  for (auto& v : us) v = u(eng);
  const auto x0 = sample_density(evo.state_at(0.0), us);
  EXPECT_LT(ks_distance(x0, DensityCdf(evo.state_at(0.0))), 0.02);
  const std::vector<double> ts{15.0};
  const auto rows = transport_ensemble(x0, evo, ts);
  EXPECT_LT(ks_distance(rows[0], DensityCdf(evo.state_at(15.0))), 0.02);
}

TEST(Sampling, RejectsOutOfRangeUniforms) {
  const std::vector<double> bad{1.0};
  EXPECT_THROW(sample_density(node_free(0.0), bad), PreconditionError);
}
