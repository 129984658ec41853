#pragma once

// Galerkin evolution in the instantaneous eigenbasis,
//
//   psi(x,t) = sum_k a_k(t) phi_k(x,t),
//   i hbar a_n' = E_n(t) a_n - i hbar (Ldot/L) sum_k G_nk a_k,
//   G_nk = (L/Ldot) <phi_n | d/dt phi_k> = (-1)^(n+k) 2 n k / (n^2 - k^2),  G_nn = 0.
//
// The diagonal part is removed with a_n = b_n exp(-i eps_n Lambda(t)),
// eps_n = n^2 pi^2 hbar / (2m), Lambda' = 1/L^2, so that
//
//   b' = -(Ldot/L) P (G (P^* b)),   P = diag(exp(i eps_n Lambda)),
//
// which only varies on the coupling time scale.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <memory>
#include <mutex>
#include <new>
#include <numbers>
#include <string>
#include <span>
#include <vector>

#include <fftw3.h>

#include "mwell/errors.hpp"
#include "mwell/model.hpp"
#include "mwell/ode.hpp"

namespace mwell {

namespace detail {

/// Plain complex product, without the inf/nan recovery of operator*.
inline cplx mul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace detail

class CouplingMatrix {
 public:
  explicit CouplingMatrix(std::size_t K) : K_(K), g_(K * K, 0.0) {
    if (K < 1) throw PreconditionError("coupling_matrix: K must be >= 1");
    for (std::size_t n = 1; n <= K; ++n) {
      for (std::size_t k = 1; k <= K; ++k) {
        if (n == k) continue;
        const double nn = static_cast<double>(n), kk = static_cast<double>(k);
        const double sign = ((n + k) % 2 == 0) ? 1.0 : -1.0;
        g_[(n - 1) * K + (k - 1)] = sign * 2.0 * nn * kk / ((nn - kk) * (nn + kk));
      }
    }
  }

  std::size_t size() const noexcept { return K_; }
  /// 1-based element G_nk.
  double operator()(std::size_t n, std::size_t k) const { return g_[(n - 1) * K_ + (k - 1)]; }

  /// out = G v.
  void apply(std::span<const cplx> v, std::span<cplx> out) const {
    for (std::size_t n = 0; n < K_; ++n) {
      const double* row = &g_[n * K_];
      double re = 0.0, im = 0.0;
      for (std::size_t k = 0; k < K_; ++k) {
        re += row[k] * v[k].real();
        im += row[k] * v[k].imag();
      }
      out[n] = {re, im};
    }
  }

 private:
  std::size_t K_;
  std::vector<double> g_;
};

inline CouplingMatrix coupling_matrix(std::size_t K) { return CouplingMatrix(K); }

/// G v in O(K log K). With w_k = (-1)^k v_k and the odd extension
/// e_{+-k} = +-w_k, (G v)_n = (-1)^n n [ (e * h)_n + w_n / (2n) ], h(m) = 1/m,
/// h(0) = 0: one linear convolution. Outputs n in [1, K] only read h on
/// [1 - K, 2K], so a circular convolution of length >= 3K + 1 is exact.
/// Plans use FFTW_ESTIMATE, so results do not depend on planner timing.
class FastCoupling {
 public:
  explicit FastCoupling(std::size_t K) : K_(K) {
    if (K < 1) throw PreconditionError("coupling: K must be >= 1");
    N_ = std::bit_ceil(3 * K_ + 1);
    buf_.reset(static_cast<cplx*>(fftw_malloc(sizeof(cplx) * N_)));
    kernel_.assign(N_, 0.0);
    if (!buf_) throw std::bad_alloc();
    {
      std::scoped_lock lock(planner_mutex());
      auto* b = reinterpret_cast<fftw_complex*>(buf_.get());
      const int n = static_cast<int>(N_);
      fwd_ = fftw_plan_dft_1d(n, b, b, FFTW_FORWARD, FFTW_ESTIMATE);
      inv_ = fftw_plan_dft_1d(n, b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    // Kernel h(m) for m in [1 - K, 2K], stored at m mod N; scaled by 1/N for
    // the unnormalized inverse transform.
    std::fill(buf_.get(), buf_.get() + N_, cplx{});
    const long long k = static_cast<long long>(K_);
    for (long long m = 1 - k; m <= 2 * k; ++m) {
      if (m == 0) continue;
      buf_[wrap(m)] = 1.0 / (static_cast<double>(m) * static_cast<double>(N_));
    }
    fftw_execute(fwd_);
    std::copy(buf_.get(), buf_.get() + N_, kernel_.begin());
  }

  FastCoupling(const FastCoupling&) = delete;
  FastCoupling& operator=(const FastCoupling&) = delete;

  ~FastCoupling() {
    std::scoped_lock lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  std::size_t size() const noexcept { return K_; }

  /// out = G v.
  void apply(std::span<const cplx> v, std::span<cplx> out) {
    cplx* b = buf_.get();
    std::fill(b, b + N_, cplx{});
    for (std::size_t k = 1; k <= K_; ++k) {
      const cplx w = (k % 2 == 0) ? v[k - 1] : -v[k - 1];
      b[k] = w;
      b[N_ - k] = -w;
    }
    fftw_execute(fwd_);
    for (std::size_t i = 0; i < N_; ++i) b[i] = detail::mul(b[i], kernel_[i]);
    fftw_execute(inv_);
    for (std::size_t n = 1; n <= K_; ++n) {
      const double nn = static_cast<double>(n);
      const cplx w = (n % 2 == 0) ? v[n - 1] : -v[n - 1];
      const cplx s = b[n] + w / (2.0 * nn);
      out[n - 1] = (n % 2 == 0) ? nn * s : -nn * s;
    }
  }

 private:
  struct FftwFree {
    void operator()(cplx* p) const { fftw_free(p); }
  };

  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  std::size_t wrap(long long m) const {
    const long long n = static_cast<long long>(N_);
    return static_cast<std::size_t>(((m % n) + n) % n);
  }

  std::size_t K_;
  std::size_t N_ = 0;
  std::unique_ptr<cplx[], FftwFree> buf_;
  std::vector<cplx> kernel_;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

struct SolverConfig {
  /// Truncation; 0 selects ceil(7 M / (pi hbar)) from the largest wall length.
  std::size_t K = 0;
  double rtol = 1e-10;
  double atol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
  /// Alarm when | sum |a_k|^2 - 1 | exceeds this at any accepted step.
  double norm_alarm = 1e-8;
  /// Largest |a_K|^2 tolerated before the basis is enlarged.
  double leak_threshold = 1e-12;
  double growth = 1.5;
  std::size_t max_K = 3000;
  bool auto_grow = true;

  void validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw PreconditionError("solver: tolerances must be positive");
    if (!(norm_alarm > 0.0) || !(leak_threshold > 0.0)) throw PreconditionError("solver: thresholds must be positive");
    if (!(growth > 1.0)) throw PreconditionError("solver: growth factor must exceed 1");
    if (max_K < 1) throw PreconditionError("solver: max_K must be >= 1");
  }
};

struct SpectralRun {
  std::vector<WaveState> states;
  std::size_t K = 0;
  double max_norm_drift = 0.0;
  double max_leak = 0.0;
  ode::Stats stats;
};

namespace detail {

inline double lambda_linear(double L0, double q, double t0, double t) {
  // int_t0^t ds / (L0 + q s)^2 = (t - t0) / (L(t0) L(t))
  return (t - t0) / ((L0 + q * t0) * (L0 + q * t));
}

/// Coefficient dynamics for one truncation; Lambda rides along as an extra
/// component when the wall law has no closed-form Lambda.
class GalerkinSystem {
 public:
  GalerkinSystem(const WellModel& model, std::size_t K, double t0)
      : model_(model), G_(K), K_(K), t0_(t0), eps_(K), phase_(K), tmp_(K), gv_(K) {
    base_ = std::numbers::pi * std::numbers::pi * model.hbar() / (2.0 * model.mass());
    for (std::size_t n = 1; n <= K; ++n) eps_[n - 1] = base_ * static_cast<double>(n * n);
    closed_lambda_ = model.wall().is_linear() || model.wall().is_static();
  }

  std::size_t state_size() const noexcept { return closed_lambda_ ? K_ : K_ + 1; }
  bool closed_lambda() const noexcept { return closed_lambda_; }

  double lambda(double t, const ode::Vec& y) const {
    if (!closed_lambda_) return y[K_].real();
    if (model_.wall().is_static()) {
      const double L0 = model_.L0();
      return (t - t0_) / (L0 * L0);
    }
    return lambda_linear(model_.L0(), model_.wall().speed(), t0_, t);
  }

  void rhs(double t, const ode::Vec& y, ode::Vec& dy) {
    const double L = model_.length(t);
    const double rate = model_.wall().velocity(t) / L;
    const double lam = lambda(t, y);
    fill_phases(lam);
    for (std::size_t n = 0; n < K_; ++n) tmp_[n] = mul(std::conj(phase_[n]), y[n]);
    G_.apply(tmp_, gv_);
    for (std::size_t n = 0; n < K_; ++n) dy[n] = -rate * mul(phase_[n], gv_[n]);
    if (!closed_lambda_) dy[K_] = 1.0 / (L * L);
  }

  /// phase_n = exp(i eps_n lam), by the recurrence n^2 -> (n+1)^2 with an
  /// exact restart every kBlock modes.
  void fill_phases(double lam) {
    constexpr std::size_t kBlock = 32;
    const double c = base_ * lam;
    const cplx r = std::polar(1.0, 2.0 * c);
    for (std::size_t start = 0; start < K_; start += kBlock) {
      const double n = static_cast<double>(start + 1);
      cplx z = std::polar(1.0, eps_[start] * lam);
      cplx step = std::polar(1.0, c * (2.0 * n + 1.0));
      const std::size_t end = std::min(K_, start + kBlock);
      for (std::size_t i = start; i < end; ++i) {
        phase_[i] = z;
        z = mul(z, step);
        step = mul(step, r);
      }
    }
  }

  /// Interaction-picture vector to a_n(t).
  std::vector<cplx> to_coefficients(double t, const ode::Vec& y) const {
    const double lam = lambda(t, y);
    std::vector<cplx> a(K_);
    for (std::size_t n = 0; n < K_; ++n) a[n] = std::polar(1.0, -eps_[n] * lam) * y[n];
    return a;
  }

  ode::Vec from_coefficients(std::span<const cplx> a) const {
    ode::Vec y(state_size(), 0.0);
    std::copy(a.begin(), a.end(), y.begin());
    return y;
  }

  double norm2(const ode::Vec& y) const {
    double s = 0.0;
    for (std::size_t n = 0; n < K_; ++n) s += std::norm(y[n]);
    return s;
  }

 private:
  WellModel model_;
  FastCoupling G_;
  std::size_t K_;
  double t0_;
  bool closed_lambda_;
  double base_ = 0.0;
  std::vector<double> eps_;
  std::vector<cplx> phase_, tmp_, gv_;
};

inline std::size_t auto_truncation(const WellModel& model, std::span<const double> times, std::size_t initial_size) {
  double Lmax = model.L0();
  for (double t : times) Lmax = std::max(Lmax, model.length(t));
  const double M = model.mass() * model.wall().speed() * Lmax;
  const auto k = static_cast<std::size_t>(std::ceil(7.0 * M / (std::numbers::pi * model.hbar())));
  return std::max({k, initial_size, std::size_t{8}});
}

}  // namespace detail

/// Coefficients a_n(t1) obtained by integrating from (t0, a0); t1 may lie
/// before t0. No basis growth; the caller fixes K = a0.size().
inline std::vector<cplx> integrate_coefficients(const WellModel& model, double t0, std::span<const cplx> a0, double t1,
                                                const SolverConfig& cfg, ode::Stats* stats = nullptr) {
  cfg.validate();
  if (!(t0 >= 0.0) || !(t1 >= 0.0)) throw PreconditionError("solver: times must be non-negative");
  detail::GalerkinSystem sys(model, a0.size(), t0);
  ode::Dopri5 solver([&sys](double t, const ode::Vec& y, ode::Vec& dy) { sys.rhs(t, y, dy); },
                     {cfg.rtol, cfg.atol, cfg.max_step});
  auto res = solver.integrate(t0, sys.from_coefficients(a0), t1, {});
  if (stats) *stats = res.stats;
  return sys.to_coefficients(t1, res.y_final);
}

/// Evolves an eigenbasis state to each output time (non-decreasing, all >= the
/// initial time). Static walls take the phase-only route.
inline SpectralRun evolve(const WaveState& initial, std::span<const double> output_times, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (initial.basis() != Basis::InstantaneousEigen)
    throw PreconditionError("evolve: initial state must be in the instantaneous eigenbasis");
  const WellModel& model = initial.model();
  const double t0 = initial.time();
  for (std::size_t i = 0; i < output_times.size(); ++i) {
    if (!(output_times[i] >= t0)) throw PreconditionError("evolve: output times must not precede the initial time");
    if (i > 0 && output_times[i] < output_times[i - 1])
      throw PreconditionError("evolve: output times must be non-decreasing");
  }

  SpectralRun run;
  const auto c0 = initial.coefficients();

  if (model.wall().is_static()) {
    run.K = c0.size();
    for (double t : output_times) {
      std::vector<cplx> a(c0.begin(), c0.end());
      for (std::size_t n = 0; n < a.size(); ++n) {
        a[n] *= std::polar(1.0, -model.energy(static_cast<int>(n + 1), t0) * (t - t0) / model.hbar());
      }
      run.states.push_back(WaveState::with_tolerance(model, t, Basis::InstantaneousEigen, std::move(a),
                                                     std::max(kNormTolerance, cfg.norm_alarm)));
    }
    return run;
  }

  std::size_t K = cfg.K > 0 ? std::max(cfg.K, c0.size()) : detail::auto_truncation(model, output_times, c0.size());
  if (K > cfg.max_K) throw NumericalAlarm("truncation_exhausted", "evolve: initial truncation exceeds max_K");
  const double t_end = output_times.empty() ? t0 : output_times.back();

  while (true) {
    std::vector<cplx> a0(K, 0.0);
    std::copy(c0.begin(), c0.end(), a0.begin());
    detail::GalerkinSystem sys(model, K, t0);
    const double n0 = sys.norm2(sys.from_coefficients(a0));
    double drift = 0.0, leak = std::norm(a0.back());
    bool leaked = leak > cfg.leak_threshold;
    double drift_t = t0;

    ode::Dopri5 solver([&sys](double t, const ode::Vec& y, ode::Vec& dy) { sys.rhs(t, y, dy); },
                       {cfg.rtol, cfg.atol, cfg.max_step});
    auto observer = [&](double t, const ode::Vec& y) {
      const double d = std::abs(sys.norm2(y) - n0);
      if (d > drift) {
        drift = d;
        drift_t = t;
      }
      leak = std::max(leak, std::norm(y[K - 1]));
      if (leak > cfg.leak_threshold) leaked = true;
      return !(leaked && cfg.auto_grow) && drift <= cfg.norm_alarm;
    };
    auto res = leaked && cfg.auto_grow ? ode::Outcome{}
                                       : solver.integrate(t0, sys.from_coefficients(a0), t_end, output_times, observer);

    if (drift > cfg.norm_alarm) {
      throw NumericalAlarm("norm_drift", "evolve: norm drift " + std::to_string(drift) + " at t = " +
                                             std::to_string(drift_t) + " exceeds the alarm threshold");
    }
    if (leaked) {
      if (!cfg.auto_grow) {
        throw NumericalAlarm("basis_leak", "evolve: boundary coefficient exceeds the leak threshold");
      }
      if (K >= cfg.max_K) {
        throw NumericalAlarm("truncation_exhausted", "evolve: leak threshold not met at max_K");
      }
      K = std::min(cfg.max_K, static_cast<std::size_t>(std::ceil(static_cast<double>(K) * cfg.growth)));
      continue;
    }

    run.K = K;
    run.max_norm_drift = drift;
    run.max_leak = leak;
    run.stats = res.stats;
    for (std::size_t i = 0; i < output_times.size(); ++i) {
      run.states.push_back(WaveState::with_tolerance(model, output_times[i], Basis::InstantaneousEigen,
                                                     sys.to_coefficients(output_times[i], res.outputs[i]),
                                                     std::max(kNormTolerance, cfg.norm_alarm)));
    }
    return run;
  }
}

}  // namespace mwell
