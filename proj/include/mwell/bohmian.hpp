#pragma once

// de Broglie-Bohm layer: polar decomposition, quantum potential and force,
// and guidance-equation trajectories dx/dt = v(x, t).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mwell/errors.hpp"
#include "mwell/evolution.hpp"
#include "mwell/model.hpp"
#include "mwell/observables.hpp"
#include "mwell/ode.hpp"
#include "mwell/synthesis.hpp"

namespace mwell {

/// Relative distance-to-node estimate |psi| / |psi'| below which a
/// trajectory is abandoned, in units of L(t).
inline constexpr double kNodeApproach = 1e-3;

/// psi = A exp(i sigma / hbar). sigma is rebuilt by integrating m v along x
/// from the reference point, so it is continuous across nodes.
struct PolarField {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> amplitude;
  std::vector<double> sigma;
  std::size_t reference = 0;
};

namespace detail {

inline std::optional<double> guarded_velocity(const StateProbe& probe, double x, double rho_ref) {
  const Jet j = probe.jet(x);
  const double rho = std::norm(j.chi);
  if (rho == 0.0 || rho < kNodeGuard * rho_ref) return std::nullopt;
  return jet_weak_momentum(j, probe.series().chirp(), probe.model()).real() / probe.model().mass();
}

// Fills empty entries by linear interpolation between the nearest valid ones.
inline std::vector<double> bridge_gaps(const std::vector<std::optional<double>>& v, std::span<const double> x) {
  std::vector<double> out(v.size(), 0.0);
  std::ptrdiff_t last = -1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i]) continue;
    out[i] = *v[i];
    if (last < 0) {
      for (std::size_t k = 0; k < i; ++k) out[k] = *v[i];
    } else if (static_cast<std::size_t>(last) + 1 < i) {
      const auto l = static_cast<std::size_t>(last);
      for (std::size_t k = l + 1; k < i; ++k) {
        const double w = (x[k] - x[l]) / (x[i] - x[l]);
        out[k] = (1.0 - w) * out[l] + w * out[i];
      }
    }
    last = static_cast<std::ptrdiff_t>(i);
  }
  if (last < 0) throw NodeGuardError("polar_field: no point passes the node guard");
  for (std::size_t k = static_cast<std::size_t>(last) + 1; k < v.size(); ++k) out[k] = out[static_cast<std::size_t>(last)];
  return out;
}

}  // namespace detail

/// Polar form on a grid. sigma(x_ref) = 0; sigma is accumulated with
/// Simpson's rule on each cell (velocity also sampled at cell midpoints).
inline PolarField polar_field(const WaveState& state, const SpatialGrid& grid, std::size_t reference = 0) {
  check_grid_matches(state, grid);
  if (reference >= grid.size()) throw PreconditionError("polar_field: reference index outside the grid");
  const StateProbe probe(state);
  const double rho_ref = probe.reference_density();
  const std::size_t n = grid.size();

  PolarField f;
  f.t = state.time();
  f.reference = reference;
  f.x.assign(grid.points().begin(), grid.points().end());
  f.amplitude.resize(n);
  std::vector<std::optional<double>> vn(n), vm(n - 1);
  std::vector<double> xm(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    f.amplitude[i] = std::abs(probe.series().chi(grid[i]));
    vn[i] = detail::guarded_velocity(probe, grid[i], rho_ref);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    xm[i] = 0.5 * (grid[i] + grid[i + 1]);
    vm[i] = detail::guarded_velocity(probe, xm[i], rho_ref);
  }
  const auto v = detail::bridge_gaps(vn, f.x);
  const auto w = detail::bridge_gaps(vm, xm);

  const double m = state.model().mass();
  std::vector<double> cum(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    cum[i + 1] = cum[i] + m * h * (v[i] + 4.0 * w[i] + v[i + 1]) / 6.0;
  }
  f.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.sigma[i] = cum[i] - cum[reference];
  return f;
}

/// Q on a grid; empty where the node guard trips.
inline std::vector<std::optional<double>> quantum_potential(const WaveState& state, const SpatialGrid& grid) {
  return observable_field(state, grid).Q;
}

inline double quantum_potential(const WaveState& state, double x) { return StateProbe(state).quantum_potential(x); }

/// Guidance velocity, defined as Re P^w / m.
inline double bohm_velocity(const WaveState& state, double x) { return weak_momentum(state, x).real() / state.model().mass(); }

/// -dQ/dx, from the third derivative of the series.
inline double quantum_force(const WaveState& state, double x) {
  const StateProbe probe(state);
  const Jet j = probe.jet(x);
  if (probe.guarded(std::norm(j.chi))) throw NodeGuardError("quantum_force: density below the node guard");
  const cplx r1 = j.dchi / j.chi;
  const cplx r2 = j.d2chi / j.chi;
  const cplx r3 = probe.series().d3chi(x) / j.chi;
  const double hb = state.model().hbar();
  const double dq = -(hb * hb / (2.0 * state.model().mass())) *
                    ((r3 - r1 * r2).real() + 2.0 * r1.imag() * (r2 - r1 * r1).imag());
  return -dq;
}

struct Trajectory {
  double x0 = 0.0;
  std::vector<double> t;
  std::vector<double> x;
  std::vector<double> v;
  std::vector<double> Q;
};

struct TrajectoryOptions {
  double rtol = 1e-11;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
};

namespace detail {

// Velocities of all particles at one time; aborts near nodes and walls.
inline void ensemble_velocity(const StateEvolution& evo, double t, const ode::Vec& y, ode::Vec& dy) {
  const WaveState s = evo.state_at(t);
  const StateProbe probe(s);
  const double L = s.length();
  const double m = s.model().mass();
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = y[i].real();
    if (!(x > 0.0 && x < L)) {
      throw NumericalAlarm("trajectory_escape", "trajectory left the well at t = " + std::to_string(t));
    }
    const Jet j = probe.jet(x);
    const cplx psi_prime = cplx(0.0, 2.0 * probe.series().chirp() * x) * j.chi + j.dchi;
    const double a = std::abs(j.chi), b = std::abs(psi_prime);
    if (a < kNodeApproach * L * b) {
      throw NodeGuardError("trajectory approached a node at x = " + std::to_string(x) + ", t = " + std::to_string(t));
    }
    dy[i] = jet_weak_momentum(j, probe.series().chirp(), s.model()).real() / m;
  }
}

}  // namespace detail

/// Integrates a set of guidance trajectories together; returns positions at
/// each output time (rows follow output_times).
inline std::vector<std::vector<double>> transport_ensemble(std::span<const double> x0, const StateEvolution& evo,
                                                           std::span<const double> output_times,
                                                           const TrajectoryOptions& opt = {}) {
  if (x0.empty()) throw PreconditionError("trajectory: empty ensemble");
  const double t0 = evo.initial_time();
  const double L0 = evo.model().length(t0);
  for (double x : x0)
    if (!(x > 0.0 && x < L0)) throw PreconditionError("trajectory: x0 must lie strictly inside the well");
  if (output_times.empty()) return {};
  const double t1 = output_times.back();
  ode::Vec y(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) y[i] = x0[i];
  ode::Dopri5 solver([&evo](double t, const ode::Vec& yy, ode::Vec& dy) { detail::ensemble_velocity(evo, t, yy, dy); },
                     {opt.rtol, opt.atol, opt.max_step});
  const auto res = solver.integrate(t0, std::move(y), t1, output_times);
  std::vector<std::vector<double>> out;
  out.reserve(res.outputs.size());
  for (const auto& row : res.outputs) {
    std::vector<double> r(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) r[i] = row[i].real();
    out.push_back(std::move(r));
  }
  return out;
}

/// Single trajectory with v and Q recorded at each output time.
inline Trajectory integrate_trajectory(double x0, const StateEvolution& evo, std::span<const double> output_times,
                                       const TrajectoryOptions& opt = {}) {
  const double xs[] = {x0};
  const auto rows = transport_ensemble(xs, evo, output_times, opt);
  Trajectory tr;
  tr.x0 = x0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double t = output_times[i];
    const double x = rows[i][0];
    const WaveState s = evo.state_at(t);
    const StateProbe probe(s);
    tr.t.push_back(t);
    tr.x.push_back(x);
    tr.v.push_back(probe.hydrodynamic_velocity(x));
    tr.Q.push_back(probe.quantum_potential(x));
  }
  return tr;
}

/// Probability-weighted samples of |psi|^2 by inverse transform on a
/// tabulated CDF (Simpson cells) refined with bisection on the exact density
/// integral of each cell. `uniforms` supplies values in [0, 1).
inline std::vector<double> sample_density(const WaveState& state, std::span<const double> uniforms,
                                          std::size_t cells = 8192) {
  const SeriesView s(state);
  const double L = s.length();
  const double h = L / static_cast<double>(cells);
  std::vector<double> cdf(cells + 1, 0.0);
  auto rho = [&](double x) { return std::norm(s.chi(x)); };
  std::vector<double> r(2 * cells + 1);
  for (std::size_t i = 0; i <= 2 * cells; ++i) r[i] = rho(0.5 * h * static_cast<double>(i));
  for (std::size_t i = 0; i < cells; ++i) cdf[i + 1] = cdf[i] + h * (r[2 * i] + 4.0 * r[2 * i + 1] + r[2 * i + 2]) / 6.0;
  const double total = cdf.back();
  std::vector<double> out;
  out.reserve(uniforms.size());
  for (double u : uniforms) {
    if (!(u >= 0.0 && u < 1.0)) throw PreconditionError("sample_density: uniforms must lie in [0, 1)");
    const double target = u * total;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    const std::size_t c = std::min<std::size_t>(static_cast<std::size_t>(std::distance(cdf.begin(), it)), cells) - 1;
    // Within the cell the CDF is the Simpson quadratic through the three samples.
    double lo = 0.0, hi = 1.0;
    const double ra = r[2 * c], rm = r[2 * c + 1], rb = r[2 * c + 2];
    auto partial = [&](double th) {
      // integral of the quadratic interpolant over [0, th] in units of h
      const double c0 = ra, c1 = -3.0 * ra + 4.0 * rm - rb, c2 = 2.0 * ra - 4.0 * rm + 2.0 * rb;
      return h * (c0 * th + 0.5 * c1 * th * th + c2 * th * th * th / 3.0);
    };
    const double need = target - cdf[c];
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (partial(mid) < need) lo = mid; else hi = mid;
    }
    out.push_back(h * (static_cast<double>(c) + 0.5 * (lo + hi)));
  }
  return out;
}

/// Tabulated CDF of |psi|^2 normalized to one at x = L, for equivariance checks.
class DensityCdf {
 public:
  DensityCdf(const WaveState& state, std::size_t cells = 8192) : L_(state.length()) {
    const SeriesView s(state);
    h_ = L_ / static_cast<double>(cells);
    cdf_.assign(cells + 1, 0.0);
    for (std::size_t i = 0; i < cells; ++i) {
      const double a = h_ * static_cast<double>(i);
      const double ra = std::norm(s.chi(a)), rm = std::norm(s.chi(a + 0.5 * h_)),
                   rb = std::norm(s.chi(std::min(L_, a + h_)));
      cdf_[i + 1] = cdf_[i] + h_ * (ra + 4.0 * rm + rb) / 6.0;
    }
    for (auto& v : cdf_) v /= cdf_.back();
  }

  double operator()(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= L_) return 1.0;
    const double u = x / h_;
    const auto i = std::min(static_cast<std::size_t>(u), cdf_.size() - 2);
    const double w = u - static_cast<double>(i);
    return (1.0 - w) * cdf_[i] + w * cdf_[i + 1];
  }

 private:
  double L_;
  double h_;
  std::vector<double> cdf_;
};

/// Kolmogorov-Smirnov distance between samples and a CDF.
template <class Cdf>
double ks_distance(std::vector<double> samples, const Cdf& cdf) {
  if (samples.empty()) throw PreconditionError("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max({d, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  return d;
}

}  // namespace mwell
