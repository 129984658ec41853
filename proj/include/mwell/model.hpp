#pragma once

// Physical model shared by every module: wall laws, the well, spatial grids
// and the spectral wave state. Atomic units throughout (hbar = m_e = 1).

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <type_traits>
#include <string>
#include <variant>
#include <vector>

#include "mwell/errors.hpp"

namespace mwell {

using cplx = std::complex<double>;

inline constexpr double kHbar = 1.0;
inline constexpr double kLightSpeedAu = 137.035999;

/// Relative density below which v = j/rho is not evaluated.
inline constexpr double kNodeGuard = 1e-12;
/// Allowed deviation of sum |c_k|^2 from one.
inline constexpr double kNormTolerance = 1e-10;

// ---------------------------------------------------------------------------
// Wall motion
// ---------------------------------------------------------------------------

struct StaticWall {
  double L0;
};
struct LinearWall {
  double L0, q;
};
/// L(t) = L0 + q t (1 - exp(-gamma t)): starts at rest, tends to speed q.
struct SmoothedWall {
  double L0, q, gamma;
};

class WallMotion {
 public:
  using Law = std::variant<StaticWall, LinearWall, SmoothedWall>;

  static WallMotion fixed(double L0) { return WallMotion(StaticWall{L0}); }
  static WallMotion linear(double L0, double q) { return WallMotion(LinearWall{L0, q}); }
  static WallMotion smoothed(double L0, double q, double gamma) {
    return WallMotion(SmoothedWall{L0, q, gamma});
  }

  const Law& law() const noexcept { return law_; }
  bool is_static() const noexcept { return std::holds_alternative<StaticWall>(law_); }
  bool is_linear() const noexcept { return std::holds_alternative<LinearWall>(law_); }

  double initial_length() const {
    return std::visit([](const auto& w) { return w.L0; }, law_);
  }
  /// Asymptotic wall speed (0 for a static wall).
  double speed() const {
    return std::visit(
        [](const auto& w) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(w)>, StaticWall>) {
            return 0.0;
          } else {
            return w.q;
          }
        },
        law_);
  }

  double length(double t) const {
    check_time(t);
    return std::visit(
        [t](const auto& w) -> double {
          using W = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<W, StaticWall>) {
            return w.L0;
          } else if constexpr (std::is_same_v<W, LinearWall>) {
            return w.L0 + w.q * t;
          } else {
            return w.L0 - w.q * t * std::expm1(-w.gamma * t);
          }
        },
        law_);
  }

  /// dL/dt, analytic.
  double velocity(double t) const {
    check_time(t);
    return std::visit(
        [t](const auto& w) -> double {
          using W = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<W, StaticWall>) {
            return 0.0;
          } else if constexpr (std::is_same_v<W, LinearWall>) {
            return w.q;
          } else {
            const double e = std::exp(-w.gamma * t);
            return -w.q * std::expm1(-w.gamma * t) + w.q * w.gamma * t * e;
          }
        },
        law_);
  }

  std::string name() const {
    switch (law_.index()) {
      case 0: return "static";
      case 1: return "linear";
      default: return "smoothed";
    }
  }

 private:
  explicit WallMotion(Law law) : law_(law) { validate(); }

  void validate() const {
    std::visit(
        [](const auto& w) {
          using W = std::decay_t<decltype(w)>;
          if (!(w.L0 > 0.0) || !std::isfinite(w.L0))
            throw PreconditionError("wall: L0 must be positive");
          if constexpr (!std::is_same_v<W, StaticWall>) {
            if (!(w.q > 0.0) || !std::isfinite(w.q))
              throw PreconditionError("wall: q must be positive (expanding walls only)");
          }
          if constexpr (std::is_same_v<W, SmoothedWall>) {
            if (!(w.gamma > 0.0) || !std::isfinite(w.gamma))
              throw PreconditionError("wall: gamma must be positive");
          }
        },
        law_);
  }

  static void check_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t))
      throw PreconditionError("wall: time must be finite and non-negative");
  }

  Law law_;
};

// ---------------------------------------------------------------------------
// Well
// ---------------------------------------------------------------------------

class WellModel {
 public:
  explicit WellModel(WallMotion wall, double mass = 1.0, double light_speed = kLightSpeedAu)
      : wall_(wall), mass_(mass), c_(light_speed) {
    if (!(mass > 0.0) || !std::isfinite(mass)) throw PreconditionError("model: mass must be positive");
    if (!(light_speed > 0.0) || !std::isfinite(light_speed))
      throw PreconditionError("model: light speed must be positive");
  }

  const WallMotion& wall() const noexcept { return wall_; }
  double mass() const noexcept { return mass_; }
  double hbar() const noexcept { return kHbar; }
  double light_speed() const noexcept { return c_; }
  double L0() const { return wall_.initial_length(); }
  double length(double t) const { return wall_.length(t); }

  /// Instantaneous eigenvalue E_n(t) = n^2 hbar^2 pi^2 / (2 m L(t)^2).
  double energy(int n, double t) const {
    const double L = length(t);
    const double k = n * std::numbers::pi * kHbar / L;
    return k * k / (2.0 * mass_);
  }

  /// m q L(t); the scale that sets how many moving-basis states matter.
  double overlap_scale(double t) const { return mass_ * wall_.speed() * length(t); }

 private:
  WallMotion wall_;
  double mass_;
  double c_;
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

class SpatialGrid {
 public:
  SpatialGrid(std::size_t n, double L) : L_(L) {
    if (n < 3) throw PreconditionError("grid: need at least 3 points");
    if (!(L > 0.0) || !std::isfinite(L)) throw PreconditionError("grid: length must be positive");
    h_ = L / static_cast<double>(n - 1);
    x_.resize(n);
    for (std::size_t i = 0; i < n; ++i) x_[i] = h_ * static_cast<double>(i);
    x_.back() = L;
  }

  std::size_t size() const noexcept { return x_.size(); }
  double length() const noexcept { return L_; }
  double spacing() const noexcept { return h_; }
  double operator[](std::size_t i) const { return x_[i]; }
  std::span<const double> points() const noexcept { return x_; }

 private:
  double L_;
  double h_;
  std::vector<double> x_;
};

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

/// InstantaneousEigen: psi = sum_k c_k phi_k(x,t).
/// Moving: psi = sum_k c_k psi_k(x,t), exact solutions for a linear wall, so
/// the coefficients are time independent.
enum class Basis { InstantaneousEigen, Moving };

inline const char* to_string(Basis b) {
  return b == Basis::Moving ? "moving" : "eigen";
}

class WaveState {
 public:
  WaveState(WellModel model, double t, Basis basis, std::vector<cplx> coeffs)
      : WaveState(std::move(model), t, basis, std::move(coeffs), kNormTolerance) {}

  /// Same as the public constructor with an explicit normalization tolerance;
  /// used by integrators that carry their own drift alarm.
  static WaveState with_tolerance(WellModel model, double t, Basis basis,
                                  std::vector<cplx> coeffs, double tolerance) {
    return WaveState(std::move(model), t, basis, std::move(coeffs), tolerance);
  }

  /// Scales the coefficients to unit norm first.
  static WaveState normalized(WellModel model, double t, Basis basis, std::vector<cplx> coeffs) {
    double s = 0.0;
    for (const auto& c : coeffs) s += std::norm(c);
    if (!(s > 0.0) || !std::isfinite(s)) throw PreconditionError("state: zero or non-finite coefficients");
    const double f = 1.0 / std::sqrt(s);
    for (auto& c : coeffs) c *= f;
    return WaveState(std::move(model), t, basis, std::move(coeffs));
  }

  const WellModel& model() const noexcept { return model_; }
  double time() const noexcept { return t_; }
  Basis basis() const noexcept { return basis_; }
  std::span<const cplx> coefficients() const noexcept { return c_; }
  std::size_t size() const noexcept { return c_.size(); }
  double length() const { return model_.length(t_); }

  double norm2() const {
    double s = 0.0;
    for (const auto& c : c_) s += std::norm(c);
    return s;
  }

 private:
  WaveState(WellModel model, double t, Basis basis, std::vector<cplx> coeffs, double tolerance)
      : model_(std::move(model)), t_(t), basis_(basis), c_(std::move(coeffs)) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw PreconditionError("state: time must be non-negative");
    if (c_.empty()) throw PreconditionError("state: need at least one coefficient");
    for (const auto& c : c_)
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
        throw PreconditionError("state: non-finite coefficient");
    if (basis_ == Basis::Moving && !model_.wall().is_linear())
      throw PreconditionError("state: moving basis requires a linearly expanding wall");
    if (std::abs(norm2() - 1.0) > tolerance)
      throw PreconditionError("state: coefficients are not normalized");
  }

  WellModel model_;
  double t_;
  Basis basis_;
  std::vector<cplx> c_;
};

}  // namespace mwell
