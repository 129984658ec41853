#pragma once

// Dormand-Prince 5(4) with the standard embedded error estimate and 4th-order
// continuous extension, for complex state vectors.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "mwell/errors.hpp"

namespace mwell::ode {

using cplx = std::complex<double>;
using Vec = std::vector<cplx>;

struct Tolerances {
  double rtol = 1e-10;
  double atol = 1e-13;
  double max_step = std::numeric_limits<double>::infinity();
  /// 0 selects the starting step automatically.
  double initial_step = 0.0;
  std::size_t max_steps = 50'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// rhs(t, y, dy) must fill dy (already sized like y).
using Rhs = std::function<void(double, const Vec&, Vec&)>;

/// Called after every accepted step with the new (t, y); returning false
/// stops the integration early.
using StepObserver = std::function<bool(double, const Vec&)>;

namespace tableau {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace tableau

/// Continuous extension over one accepted step [t0, t0 + h].
class DenseSegment {
 public:
  DenseSegment() = default;

  double t_begin() const noexcept { return t0_; }
  double t_end() const noexcept { return t0_ + h_; }
  bool contains(double t) const noexcept {
    return h_ > 0 ? (t >= t0_ && t <= t0_ + h_) : (t <= t0_ && t >= t0_ + h_);
  }

  void evaluate(double t, Vec& out) const {
    const double th = (t - t0_) / h_;
    const double th1 = 1.0 - th;
    out.resize(r1_.size());
    for (std::size_t i = 0; i < r1_.size(); ++i) {
      out[i] = r1_[i] + th * (r2_[i] + th1 * (r3_[i] + th * (r4_[i] + th1 * r5_[i])));
    }
  }

 private:
  friend class Dopri5;
  double t0_ = 0.0, h_ = 0.0;
  Vec r1_, r2_, r3_, r4_, r5_;
};

struct Outcome {
  /// States at the requested output times, in order.
  std::vector<Vec> outputs;
  double t_reached = 0.0;
  Vec y_final;
  /// False when a StepObserver stopped the run.
  bool completed = true;
  Stats stats;
};

class Dopri5 {
 public:
  Dopri5(Rhs rhs, Tolerances tol) : f_(std::move(rhs)), tol_(tol) {
    if (!(tol.rtol > 0.0) || !(tol.atol > 0.0)) throw PreconditionError("ode: tolerances must be positive");
  }

  /// Integrates from (t0, y0) to t1 (either direction). Output times must lie
  /// in [t0, t1] and be monotone in the direction of integration; they are
  /// served from the continuous extension, never by shortening steps.
  Outcome integrate(double t0, Vec y0, double t1, std::span<const double> output_times,
                    const StepObserver& observer = {}) {
    using namespace tableau;
    const double dir = t1 >= t0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < output_times.size(); ++i) {
      const double to = output_times[i];
      if (dir * (to - t0) < 0.0 || dir * (to - t1) > 0.0)
        throw PreconditionError("ode: output time outside the integration interval");
      if (i > 0 && dir * (to - output_times[i - 1]) < 0.0)
        throw PreconditionError("ode: output times must be monotone");
    }

    const std::size_t n = y0.size();
    Outcome out;
    out.outputs.reserve(output_times.size());
    std::size_t next_out = 0;
    auto emit_until = [&](double t_lim, const DenseSegment* seg, const Vec& y_at_lim) {
      while (next_out < output_times.size() && dir * (output_times[next_out] - t_lim) <= 0.0) {
        if (seg == nullptr || output_times[next_out] == t_lim) {
          out.outputs.push_back(y_at_lim);
        } else {
          Vec v;
          seg->evaluate(output_times[next_out], v);
          out.outputs.push_back(std::move(v));
        }
        ++next_out;
      }
    };

    Vec y = std::move(y0);
    double t = t0;
    emit_until(t, nullptr, y);
    if (t0 == t1) {
      out.t_reached = t;
      out.y_final = y;
      return out;
    }

    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ys(n), ynew(n);
    f_(t, y, k1);
    ++out.stats.evaluations;

    const double span = std::abs(t1 - t0);
    double h = tol_.initial_step > 0.0 ? tol_.initial_step : initial_step(t, y, k1, dir, out.stats);
    h = std::min({h, tol_.max_step, span});

    DenseSegment seg;
    std::size_t steps = 0;
    bool last_rejected = false;
    while (dir * (t1 - t) > 0.0) {
      if (++steps > tol_.max_steps) throw NumericalAlarm("step_limit", "ode: maximum number of steps exceeded");
      const bool final_step = h >= std::abs(t1 - t) * (1.0 - 1e-14);
      if (final_step) h = std::abs(t1 - t);
      const double hs = dir * h;

      for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + hs * (a21 * k1[i]);
      f_(t + c2 * hs, ys, k2);
      for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      f_(t + c3 * hs, ys, k3);
      for (std::size_t i = 0; i < n; ++i) ys[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      f_(t + c4 * hs, ys, k4);
      for (std::size_t i = 0; i < n; ++i)
        ys[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      f_(t + c5 * hs, ys, k5);
      for (std::size_t i = 0; i < n; ++i)
        ys[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
      const double tnew = final_step ? t1 : t + hs;
      f_(tnew, ys, k6);
      for (std::size_t i = 0; i < n; ++i)
        ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
      f_(tnew, ynew, k7);
      out.stats.evaluations += 6;

      double err2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const cplx e = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc = tol_.atol + tol_.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err2 += std::norm(e) / (sc * sc);
      }
      const double err = std::sqrt(err2 / static_cast<double>(n));
      if (!std::isfinite(err)) throw NumericalAlarm("non_finite", "ode: non-finite state encountered");

      if (err <= 1.0) {
        ++out.stats.accepted;
        if (!output_times.empty() && next_out < output_times.size()) {
          seg.t0_ = t;
          seg.h_ = hs;
          seg.r1_ = y;
          seg.r2_.resize(n);
          seg.r3_.resize(n);
          seg.r4_.resize(n);
          seg.r5_.resize(n);
          for (std::size_t i = 0; i < n; ++i) {
            const cplx ydiff = ynew[i] - y[i];
            const cplx bspl = hs * k1[i] - ydiff;
            seg.r2_[i] = ydiff;
            seg.r3_[i] = bspl;
            seg.r4_[i] = ydiff - hs * k7[i] - bspl;
            seg.r5_[i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
          }
        }
        std::swap(y, ynew);
        std::swap(k1, k7);
        t = tnew;
        emit_until(t, &seg, y);
        if (observer && !observer(t, y)) {
          out.completed = false;
          break;
        }
        double fac = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 10.0;
        fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
        h = std::min(h * fac, tol_.max_step);
        last_rejected = false;
      } else {
        ++out.stats.rejected;
        last_rejected = true;
        h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      }
      if (h <= std::abs(t) * 4.0 * std::numeric_limits<double>::epsilon() || h < 1e-300) {
        throw NumericalAlarm("step_underflow", "ode: step size underflow");
      }
    }
    out.t_reached = t;
    out.y_final = std::move(y);
    return out;
  }

 private:
  double initial_step(double t, const Vec& y, const Vec& f0, double dir, Stats& stats) const {
    const std::size_t n = y.size();
    double d0 = 0.0, d1v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = tol_.atol + tol_.rtol * std::abs(y[i]);
      d0 += std::norm(y[i]) / (sc * sc);
      d1v += std::norm(f0[i]) / (sc * sc);
    }
    d0 = std::sqrt(d0 / n);
    d1v = std::sqrt(d1v / n);
    double h0 = (d0 < 1e-5 || d1v < 1e-5) ? 1e-6 : 0.01 * d0 / d1v;
    Vec y1(n), f1(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = y[i] + dir * h0 * f0[i];
    f_(t + dir * h0, y1, f1);
    ++stats.evaluations;
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = tol_.atol + tol_.rtol * std::abs(y[i]);
      d2 += std::norm(f1[i] - f0[i]) / (sc * sc);
    }
    d2 = std::sqrt(d2 / n) / h0;
    const double dm = std::max(d1v, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min(100.0 * h0, h1);
  }

  Rhs f_;
  Tolerances tol_;
};

}  // namespace mwell::ode
