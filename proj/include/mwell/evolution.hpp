#pragma once

// Time-evolution backends behind one interface: state_at(t) for any t >= t0.

#include <algorithm>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "mwell/analytic.hpp"
#include "mwell/errors.hpp"
#include "mwell/model.hpp"
#include "mwell/spectral.hpp"

namespace mwell {

class StateEvolution {
 public:
  virtual ~StateEvolution() = default;
  virtual const WellModel& model() const = 0;
  virtual double initial_time() const = 0;
  virtual WaveState state_at(double t) const = 0;
};

/// Linear wall, closed form: the moving-basis coefficients are fixed once.
class AnalyticEvolution final : public StateEvolution {
 public:
  explicit AnalyticEvolution(const WaveState& initial, const ExactEvolveOptions& opt = {})
      : moving_(exact_evolve(initial, 0.0, opt)) {}

  const WellModel& model() const override { return moving_.model(); }
  double initial_time() const override { return 0.0; }
  WaveState state_at(double t) const override {
    if (!(t >= 0.0)) throw PreconditionError("evolution: negative time");
    return exact_evolve(moving_, t);
  }
  /// Moving-basis coefficients b_k.
  std::span<const cplx> coefficients() const { return moving_.coefficients(); }

 private:
  WaveState moving_;
};

/// Static wall: a_n(t) = a_n(t0) exp(-i E_n (t - t0) / hbar).
class StationaryEvolution final : public StateEvolution {
 public:
  explicit StationaryEvolution(const WaveState& initial) : initial_(initial) {
    if (!initial.model().wall().is_static()) throw PreconditionError("stationary evolution requires a static wall");
    if (initial.basis() != Basis::InstantaneousEigen)
      throw PreconditionError("stationary evolution requires an eigenbasis state");
  }

  const WellModel& model() const override { return initial_.model(); }
  double initial_time() const override { return initial_.time(); }
  WaveState state_at(double t) const override {
    const double t0 = initial_.time();
    if (!(t >= t0)) throw PreconditionError("evolution: time precedes the initial state");
    const auto c = initial_.coefficients();
    std::vector<cplx> a(c.begin(), c.end());
    for (std::size_t n = 0; n < a.size(); ++n) {
      a[n] *= std::polar(1.0, -initial_.model().energy(static_cast<int>(n + 1), t0) * (t - t0) / kHbar);
    }
    return WaveState::with_tolerance(initial_.model(), t, Basis::InstantaneousEigen, std::move(a),
                                     2.0 * kNormTolerance);
  }

 private:
  WaveState initial_;
};

/// Galerkin backend. The truncation is fixed up front by a run to t_max with
/// basis growth; later queries integrate from the nearest earlier checkpoint.
class SpectralEvolution final : public StateEvolution {
 public:
  SpectralEvolution(const WaveState& initial, double t_max, SolverConfig cfg = {})
      : model_(initial.model()), t0_(initial.time()), cfg_(cfg) {
    if (initial.basis() != Basis::InstantaneousEigen)
      throw PreconditionError("spectral evolution requires an eigenbasis state");
    if (!(t_max >= t0_)) throw PreconditionError("spectral evolution: t_max precedes the initial time");
    const std::vector<double> times{t_max};
    const auto run = evolve(initial, times, cfg_);
    K_ = run.K;
    t_max_ = t_max;
    std::vector<cplx> a0(K_, 0.0);
    std::copy(initial.coefficients().begin(), initial.coefficients().end(), a0.begin());
    cache_->checkpoints.emplace(t0_, std::move(a0));
    const auto a_end = run.states.front().coefficients();
    cache_->checkpoints.emplace(t_max, std::vector<cplx>(a_end.begin(), a_end.end()));
  }

  const WellModel& model() const override { return model_; }
  double initial_time() const override { return t0_; }
  std::size_t truncation() const noexcept { return K_; }
  double horizon() const noexcept { return t_max_; }

  WaveState state_at(double t) const override {
    if (!(t >= t0_)) throw PreconditionError("evolution: time precedes the initial state");
    if (t > t_max_) throw PreconditionError("spectral evolution: time beyond the prepared horizon");
    std::vector<cplx> a;
    {
      std::scoped_lock lock(cache_->mutex);
      auto& cp = cache_->checkpoints;
      auto it = cp.upper_bound(t);
      it = std::prev(it);
      if (it->first == t) {
        a = it->second;
      } else {
        a = integrate_coefficients(model_, it->first, it->second, t, cfg_);
        cp.emplace(t, a);
      }
    }
    return WaveState::with_tolerance(model_, t, Basis::InstantaneousEigen, std::move(a),
                                     std::max(kNormTolerance, cfg_.norm_alarm));
  }

 private:
  struct Cache {
    std::mutex mutex;
    std::map<double, std::vector<cplx>> checkpoints;
  };

  WellModel model_;
  double t0_;
  double t_max_ = 0.0;
  SolverConfig cfg_;
  std::size_t K_ = 0;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

}  // namespace mwell
