#pragma once

// Grid views of a WaveState.
//
// Both bases reduce to the same shape at a fixed time,
//
//   psi(x) = exp(i alpha x^2) chi(x),   chi(x) = sum_k beta_k phi_k(x; L),
//
// with alpha = 0 and beta = c for the instantaneous eigenbasis, and
// alpha = m q / (2 hbar L), beta_k = c_k exp(-i theta_k(t)) for the moving
// basis. All spatial derivatives are taken on the sine series, never on
// sampled values.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "mwell/errors.hpp"
#include "mwell/model.hpp"

namespace mwell {

/// chi and its first two derivatives at one point.
struct Jet {
  double x = 0.0;
  cplx chi, dchi, d2chi;
};

/// Dynamical phase of the moving-basis function psi_k at time t:
/// theta_k = pi^2 hbar k^2 t / (2 m L0 L(t)).
inline double moving_phase(const WellModel& model, int k, double t) {
  const double L0 = model.L0();
  const double L = model.length(t);
  const double base = std::numbers::pi * std::numbers::pi * model.hbar() * t /
                      (2.0 * model.mass() * L0 * L);
  return base * static_cast<double>(k) * static_cast<double>(k);
}

/// Calls fn(k, sin(k a), cos(k a)) for k = 1..K with a = pi x / L.
/// Uses the rotation recurrence, reseeded every 64 modes.
template <class Fn>
inline void for_each_mode(double x, double L, std::size_t K, Fn&& fn) {
  const double a = std::numbers::pi * x / L;
  if (x == 0.0) {
    for (std::size_t k = 1; k <= K; ++k) fn(k, 0.0, 1.0);
    return;
  }
  if (x == L) {
    for (std::size_t k = 1; k <= K; ++k) fn(k, 0.0, (k % 2 == 0) ? 1.0 : -1.0);
    return;
  }
  const cplx step(std::cos(a), std::sin(a));
  cplx r = step;
  for (std::size_t k = 1; k <= K; ++k) {
    if (k % 64 == 0) r = cplx(std::cos(a * static_cast<double>(k)), std::sin(a * static_cast<double>(k)));
    fn(k, r.imag(), r.real());
    r *= step;
  }
}

class SeriesView {
 public:
  explicit SeriesView(const WaveState& state)
      : t_(state.time()), L_(state.length()), beta_(state.coefficients().begin(), state.coefficients().end()) {
    const WellModel& m = state.model();
    if (state.basis() == Basis::Moving) {
      alpha_ = m.mass() * m.wall().speed() / (2.0 * m.hbar() * L_);
      for (std::size_t i = 0; i < beta_.size(); ++i) {
        const double th = moving_phase(m, static_cast<int>(i + 1), t_);
        beta_[i] *= cplx(std::cos(th), -std::sin(th));
      }
    }
    amp_ = std::sqrt(2.0 / L_);
  }

  double time() const noexcept { return t_; }
  double length() const noexcept { return L_; }
  /// Coefficient of x^2 in the phase of psi.
  double chirp() const noexcept { return alpha_; }
  /// Effective sine-series amplitudes at this time.
  const std::vector<cplx>& amplitudes() const noexcept { return beta_; }

  Jet jet(double x) const {
    check(x);
    Jet j;
    j.x = x;
    const double kap = std::numbers::pi / L_;
    cplx s0, s1, s2;
    for_each_mode(x, L_, beta_.size(), [&](std::size_t k, double sn, double cs) {
      const double kk = kap * static_cast<double>(k);
      const cplx& b = beta_[k - 1];
      s0 += b * sn;
      s1 += b * (kk * cs);
      s2 -= b * (kk * kk * sn);
    });
    j.chi = amp_ * s0;
    j.dchi = amp_ * s1;
    j.d2chi = amp_ * s2;
    return j;
  }

  /// Third derivative of chi; only the Newton-law diagnostics need it.
  cplx d3chi(double x) const {
    check(x);
    const double kap = std::numbers::pi / L_;
    cplx s;
    for_each_mode(x, L_, beta_.size(), [&](std::size_t k, double, double cs) {
      const double kk = kap * static_cast<double>(k);
      s -= beta_[k - 1] * (kk * kk * kk * cs);
    });
    return amp_ * s;
  }

  cplx chi(double x) const {
    check(x);
    cplx s;
    for_each_mode(x, L_, beta_.size(), [&](std::size_t k, double sn, double) { s += beta_[k - 1] * sn; });
    return amp_ * s;
  }

  cplx psi(double x) const { return chirp_factor(x) * chi(x); }

  cplx chirp_factor(double x) const {
    const double ph = alpha_ * x * x;
    return {std::cos(ph), std::sin(ph)};
  }

 private:
  void check(double x) const {
    if (!(x >= 0.0 && x <= L_)) throw PreconditionError("position outside the well");
  }

  double t_;
  double L_;
  double alpha_ = 0.0;
  double amp_;
  std::vector<cplx> beta_;
};

inline void check_grid_matches(const WaveState& state, const SpatialGrid& grid) {
  const double L = state.length();
  if (std::abs(grid.length() - L) > 1e-12 * L)
    throw PreconditionError("grid domain does not match [0, L(t)] of the state");
}

/// psi(x_i, t) on the grid; endpoint values are exactly zero.
inline std::vector<cplx> state_to_grid(const WaveState& state, const SpatialGrid& grid) {
  check_grid_matches(state, grid);
  const SeriesView view(state);
  std::vector<cplx> out(grid.size());
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) out[i] = view.psi(grid[i]);
  out.front() = 0.0;
  out.back() = 0.0;
  return out;
}

}  // namespace mwell
