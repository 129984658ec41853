#pragma once

// Weak values with position postselection, the finite-difference position
// estimator of the weak momentum, and a Monte Carlo model of the ensemble
// signaling device: N cavities, each with a weak pointer coupling at t_w and
// a position postselection at t_f.
//
// Pointer model (first order in g): a pointer prepared as a Gaussian of
// position spread s reads g Re A^w + N(0, s^2) on the position channel; its
// momentum channel reads g Im A^w / (2 s^2) + N(0, 1/(4 s^2)) (hbar = 1).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "mwell/analytic.hpp"
#include "mwell/errors.hpp"
#include "mwell/evolution.hpp"
#include "mwell/model.hpp"
#include "mwell/observables.hpp"
#include "mwell/synthesis.hpp"

namespace mwell {

// ---------------------------------------------------------------------------
// Weak values
// ---------------------------------------------------------------------------

/// <x|A|psi> for an operator given in the position representation.
using LocalAction = std::function<cplx(const SeriesView&, const WellModel&, double)>;

namespace ops {

inline cplx identity(const SeriesView& s, const WellModel&, double x) { return s.psi(x); }

inline cplx position(const SeriesView& s, const WellModel&, double x) { return x * s.psi(x); }

/// -i hbar d/dx psi, with the derivative taken on the series.
inline cplx momentum(const SeriesView& s, const WellModel& m, double x) {
  const Jet j = s.jet(x);
  const cplx dpsi = s.chirp_factor(x) * (cplx(0.0, 2.0 * s.chirp() * x) * j.chi + j.dchi);
  return cplx(0.0, -m.hbar()) * dpsi;
}

}  // namespace ops

/// A^w = <x_f|A|psi> / <x_f|psi>.
inline cplx weak_value_generic(const LocalAction& A, const WaveState& pre, double x_f) {
  const SeriesView s(pre);
  const StateProbe probe(pre);
  if (probe.guarded(probe.density(x_f))) throw NodeGuardError("weak value: postselection overlap vanishes");
  return A(s, pre.model(), x_f) / s.psi(x_f);
}

/// A^w for A given by its matrix in the basis of `pre` (row-major K x K):
/// <x_f|A|psi> = sum_k (A c)_k basis_k(x_f).
inline cplx weak_value_generic(std::span<const cplx> matrix, const WaveState& pre, double x_f) {
  const std::size_t K = pre.size();
  if (matrix.size() != K * K) throw PreconditionError("weak value: matrix size does not match the state");
  const auto c = pre.coefficients();
  std::vector<cplx> Ac(K);
  for (std::size_t k = 0; k < K; ++k) {
    cplx s;
    for (std::size_t j = 0; j < K; ++j) s += matrix[k * K + j] * c[j];
    Ac[k] = s;
  }
  const WaveState image = WaveState::with_tolerance(pre.model(), pre.time(), pre.basis(), std::move(Ac), 1e300);
  const SeriesView num(image);
  const SeriesView den(pre);
  const StateProbe probe(pre);
  if (probe.guarded(probe.density(x_f))) throw NodeGuardError("weak value: postselection overlap vanishes");
  return num.psi(x_f) / den.psi(x_f);
}

// ---------------------------------------------------------------------------
// Position estimator
// ---------------------------------------------------------------------------

struct EstimatorOptions {
  /// Terms kept in the expansion of X psi(t_w); X couples every mode to a
  /// k^-3 tail, so this is much larger than the state's own truncation.
  std::size_t expansion_terms = 100000;
};

/// m (x_f - X^w) / (t_f - t_w) with
/// X^w = <x_f|U(t_f, t_w) X|psi(t_w)> / <x_f|psi(t_f)>, U exact.
/// Supported for linear walls (moving basis) and static walls (eigenbasis).
inline cplx position_estimator(const StateEvolution& evo, double x_f, double t_w, double t_f,
                               const EstimatorOptions& opt = {}) {
  if (!(t_f > t_w)) throw PreconditionError("position_estimator: t_f must exceed t_w");
  const WellModel& model = evo.model();
  const bool linear = model.wall().is_linear();
  if (!linear && !model.wall().is_static())
    throw PreconditionError("position_estimator: exact propagation needs a linear or static wall");

  const WaveState sw = evo.state_at(t_w);
  const WaveState sf = evo.state_at(t_f);
  if ((linear && sw.basis() != Basis::Moving) || (!linear && sw.basis() != Basis::InstantaneousEigen))
    throw PreconditionError("position_estimator: evolution backend does not match the wall law");
  const StateProbe probe_f(sf);
  if (probe_f.guarded(probe_f.density(x_f))) throw NodeGuardError("position_estimator: node at x_f");

  const auto b = sw.coefficients();
  const std::size_t Kb = b.size();
  const std::size_t K = std::max(opt.expansion_terms, Kb);
  const double Lw = sw.length();

  // Coefficients of X psi(t_w) in the basis at t_w. In the moving basis the
  // chirps cancel and only the dynamical phases remain:
  // <psi_k|X|psi_j> = e^{i(theta_k - theta_j)} X_kj. The phase e^{i theta_k(t_w)}
  // is merged with the propagator below.
  std::vector<cplx> bj(Kb);
  for (std::size_t j = 0; j < Kb; ++j)
    bj[j] = linear ? std::polar(1.0, -moving_phase(model, static_cast<int>(j + 1), t_w)) * b[j] : b[j];
  std::vector<cplx> xb(K);
  for (std::size_t k = 0; k < K; ++k) {
    cplx s;
    for (std::size_t j = 0; j < Kb; ++j) {
      const double X = position_matrix_element(static_cast<int>(k + 1), static_cast<int>(j + 1), Lw);
      if (X != 0.0) s += X * bj[j];
    }
    xb[k] = s;
  }

  // Propagate to t_f and evaluate at x_f. Per-mode phase: k^2 * rate.
  const double Lf = sf.length();
  const double amp = std::sqrt(2.0 / Lf);
  double rate = 0.0;
  if (linear) {
    rate = moving_phase(model, 1, t_f) - moving_phase(model, 1, t_w);
  } else {
    rate = model.energy(1, t_w) * (t_f - t_w) / model.hbar();
  }
  cplx acc;
  for_each_mode(x_f, Lf, K, [&](std::size_t k, double sn, double) {
    const double kk = static_cast<double>(k);
    acc += xb[k - 1] * std::polar(1.0, -rate * kk * kk) * sn;
  });
  cplx numerator = amp * acc;
  if (linear) {
    const double alpha = model.mass() * model.wall().speed() / (2.0 * model.hbar() * Lf);
    numerator *= std::polar(1.0, alpha * x_f * x_f);
  }
  const cplx Xw = numerator / SeriesView(sf).psi(x_f);
  return model.mass() * (x_f - Xw) / (t_f - t_w);
}

// ---------------------------------------------------------------------------
// Protocol
// ---------------------------------------------------------------------------

struct PointerModel {
  /// Effective coupling, integral of g(t).
  double g = 1.0;
  /// Position spread of the pointer.
  double s = 1.0;
  /// Largest allowed g |A^w| / s.
  double weakness_bound = 0.1;

  void validate() const {
    if (!(g > 0.0) || !(s > 0.0)) throw PreconditionError("pointer: g and s must be positive");
    if (!(weakness_bound > 0.0)) throw PreconditionError("pointer: weakness bound must be positive");
  }
  double momentum_spread() const { return 1.0 / (2.0 * s); }
};

struct PostselectionWindow {
  double x_f = 0.0;
  double half_width = 0.0;

  /// int_{x_f - eps}^{x_f + eps} |psi|^2 dx.
  double probability(const WaveState& state) const {
    const double L = state.length();
    if (!(half_width > 0.0) || !(x_f - half_width > 0.0) || !(x_f + half_width < L))
      throw PreconditionError("postselection window must lie strictly inside (0, L(t_f))");
    const SeriesView s(state);
    constexpr int panels = 16;
    const double a = x_f - half_width;
    const double h = 2.0 * half_width / panels;
    double p = 0.0;
    for (int i = 0; i < panels; ++i) {
      p += boost::math::quadrature::gauss<double, 20>::integrate(
          [&](double x) { return std::norm(s.chi(x)); }, a + i * h, a + (i + 1) * h);
    }
    return p;
  }
};

/// What Bob's device sees for one value of Alice's bit.
struct ProtocolChannel {
  double p_ps = 0.0;
  cplx weak_momentum;
};

struct ProtocolDesign {
  PointerModel pointer;
  PostselectionWindow window;
  double t_w = 0.0;
  double t_f = 0.0;
  /// (L0 - x_f) / c.
  double t_signal = 0.0;
  /// Index 0: walls at rest, index 1: walls in motion.
  ProtocolChannel channel[2];

  double threshold() const { return 0.5 * (channel[0].weak_momentum.real() + channel[1].weak_momentum.real()); }
};

/// Builds the two channels and checks the timing and weakness conditions.
inline ProtocolDesign design_protocol(const StateEvolution& resting, const StateEvolution& moving,
                                      const PointerModel& pointer, const PostselectionWindow& window, double t_w,
                                      double t_f) {
  pointer.validate();
  const WellModel& mm = moving.model();
  if (!(t_w >= 0.0) || !(t_f > t_w)) throw PreconditionError("protocol: need 0 <= t_w < t_f");
  const double L0 = mm.L0();
  if (resting.model().L0() != L0) throw PreconditionError("protocol: both cavities must start with the same L0");
  ProtocolDesign d;
  d.pointer = pointer;
  d.window = window;
  d.t_w = t_w;
  d.t_f = t_f;
  d.t_signal = light_cone(window.x_f, 0.0, mm).t_signal;
  if (!(t_f < d.t_signal) || !(t_f < L0 / mm.light_speed()))
    throw PreconditionError("protocol: Bob's postselection must precede the light-cone time (L0 - x_f)/c");
  const StateEvolution* evo[2] = {&resting, &moving};
  for (int b = 0; b < 2; ++b) {
    d.channel[b].weak_momentum = weak_momentum(evo[b]->state_at(t_w), window.x_f);
    d.channel[b].p_ps = window.probability(evo[b]->state_at(t_f));
    if (pointer.g * std::abs(d.channel[b].weak_momentum) > pointer.weakness_bound * pointer.s)
      throw PreconditionError("protocol: weakness bound g |P^w| / s violated");
    if (!(d.channel[b].p_ps > 0.0)) throw PreconditionError("protocol: zero postselection probability");
  }
  return d;
}

// Deterministic stream keying. Engines are std::mt19937_64 seeded through
// std::seed_seq, both fully specified by the standard; draws use Boost.Random
// distributions, whose algorithms do not vary between platforms.
namespace detail {

enum class Stream : std::uint32_t { Count = 1, Reading = 2, Momentum = 3 };

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t run, std::uint32_t bit, Stream stream,
                                   std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                    bit, static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}

inline constexpr std::size_t kChunk = 1 << 16;

inline void check_weakness(const PointerModel& pointer, const ProtocolChannel& ch) {
  pointer.validate();
  if (pointer.g * std::abs(ch.weak_momentum) > pointer.weakness_bound * pointer.s)
    throw PreconditionError("cavity: weakness bound g |P^w| / s violated");
}

}  // namespace detail

struct CavityRecord {
  bool postselected = false;
  std::optional<double> reading;
  std::optional<double> momentum_reading;
};

/// One cavity, from an explicit engine.
template <class Engine>
CavityRecord simulate_cavity(const PointerModel& pointer, const ProtocolChannel& ch, Engine& eng) {
  detail::check_weakness(pointer, ch);
  CavityRecord r;
  const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  r.postselected = u < ch.p_ps;
  if (r.postselected) {
    boost::random::normal_distribution<double> pos(pointer.g * ch.weak_momentum.real(), pointer.s);
    const double ps = pointer.momentum_spread();
    boost::random::normal_distribution<double> mom(pointer.g * ch.weak_momentum.imag() * 2.0 * ps * ps, ps);
    r.reading = pos(eng);
    r.momentum_reading = mom(eng);
  }
  return r;
}

struct ProtocolRun {
  int bit = 0;
  std::uint64_t N = 0;
  std::uint64_t seed = 0;
  std::uint64_t run_id = 0;
  std::uint64_t postselected = 0;
  /// Postselected position readings (kept only on request).
  std::vector<double> readings;
  double reading_mean = 0.0;
  double momentum_mean = 0.0;
  /// Estimate of Re P^w: mean reading / g.
  double estimate = 0.0;
  /// Estimate of Im P^w from the momentum channel.
  double im_estimate = 0.0;
  int decision = 0;
  bool error = false;
  /// Acquisition time of every datum (weak coupling at t_w, readout at t_f).
  double t_weak = 0.0;
  double t_acquire = 0.0;
  double t_signal = 0.0;
  bool before_light_cone = false;
};

struct RunOptions {
  std::uint64_t run_id = 0;
  bool keep_readings = false;
  unsigned threads = 1;
};

namespace detail {

struct ChunkSums {
  double pos = 0.0;
  double mom = 0.0;
};

/// Sums of n_ps pointer readings, drawn in fixed chunks so that the result
/// does not depend on the thread count.
inline std::vector<ChunkSums> pointer_sums(const ProtocolDesign& d, int bit, std::uint64_t n_ps, std::uint64_t seed,
                                           std::uint64_t run_id, unsigned threads, std::vector<double>* keep) {
  const ProtocolChannel& ch = d.channel[bit];
  const std::size_t chunks = static_cast<std::size_t>((n_ps + kChunk - 1) / kChunk);
  std::vector<ChunkSums> sums(chunks);
  if (keep) keep->assign(static_cast<std::size_t>(n_ps), 0.0);
  const double ps = d.pointer.momentum_spread();
  auto work = [&](std::size_t c) {
    const std::uint64_t begin = c * kChunk;
    const std::uint64_t end = std::min<std::uint64_t>(n_ps, begin + kChunk);
    auto e_pos = make_engine(seed, run_id, static_cast<std::uint32_t>(bit), Stream::Reading, c);
    auto e_mom = make_engine(seed, run_id, static_cast<std::uint32_t>(bit), Stream::Momentum, c);
    boost::random::normal_distribution<double> pos(d.pointer.g * ch.weak_momentum.real(), d.pointer.s);
    boost::random::normal_distribution<double> mom(d.pointer.g * ch.weak_momentum.imag() * 2.0 * ps * ps, ps);
    ChunkSums s;
    for (std::uint64_t i = begin; i < end; ++i) {
      const double r = pos(e_pos);
      if (keep) (*keep)[static_cast<std::size_t>(i)] = r;
      s.pos += r;
      s.mom += mom(e_mom);
    }
    sums[c] = s;
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(chunks)));
  if (nt <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) work(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < nt; ++t) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) work(c);
      });
    }
  }
  return sums;
}

inline void finish_run(const ProtocolDesign& d, ProtocolRun& run, const std::vector<ChunkSums>& sums) {
  if (run.postselected == 0) {
    throw NumericalAlarm("no_postselection", "protocol: no cavity passed postselection; increase N");
  }
  double sp = 0.0, sm = 0.0;
  for (const auto& s : sums) {
    sp += s.pos;
    sm += s.mom;
  }
  const double n = static_cast<double>(run.postselected);
  run.reading_mean = sp / n;
  run.momentum_mean = sm / n;
  run.estimate = run.reading_mean / d.pointer.g;
  const double ps = d.pointer.momentum_spread();
  run.im_estimate = run.momentum_mean / (d.pointer.g * 2.0 * ps * ps);
  const double p0 = d.channel[0].weak_momentum.real(), p1 = d.channel[1].weak_momentum.real();
  const double thr = d.threshold();
  const bool above = run.estimate > thr;
  run.decision = (p1 > p0) == above ? 1 : 0;
  run.error = run.decision != run.bit;
}

}  // namespace detail

/// One ensemble experiment: N cavities, Binomial(N, p_ps) postselections.
inline ProtocolRun run_protocol(const ProtocolDesign& d, int bit, std::uint64_t N, std::uint64_t seed,
                                const RunOptions& opt = {}) {
  if (bit != 0 && bit != 1) throw PreconditionError("protocol: bit must be 0 or 1");
  detail::check_weakness(d.pointer, d.channel[bit]);
  if (N < 1) throw PreconditionError("protocol: N must be >= 1");
  ProtocolRun run;
  run.bit = bit;
  run.N = N;
  run.seed = seed;
  run.run_id = opt.run_id;
  run.t_weak = d.t_w;
  run.t_acquire = d.t_f;
  run.t_signal = d.t_signal;
  run.before_light_cone = d.t_f < d.t_signal;
  auto eng = detail::make_engine(seed, opt.run_id, static_cast<std::uint32_t>(bit), detail::Stream::Count, 0);
  boost::random::binomial_distribution<std::int64_t, double> count(static_cast<std::int64_t>(N), d.channel[bit].p_ps);
  run.postselected = static_cast<std::uint64_t>(count(eng));
  const auto sums = detail::pointer_sums(d, bit, run.postselected, seed, opt.run_id, opt.threads,
                                         opt.keep_readings ? &run.readings : nullptr);
  detail::finish_run(d, run, sums);
  return run;
}

/// Same experiment conditioned on exactly n_ps postselected cavities.
inline ProtocolRun run_postselected(const ProtocolDesign& d, int bit, std::uint64_t n_ps, std::uint64_t seed,
                                    const RunOptions& opt = {}) {
  if (bit != 0 && bit != 1) throw PreconditionError("protocol: bit must be 0 or 1");
  detail::check_weakness(d.pointer, d.channel[bit]);
  ProtocolRun run;
  run.bit = bit;
  run.N = n_ps;
  run.seed = seed;
  run.run_id = opt.run_id;
  run.t_weak = d.t_w;
  run.t_acquire = d.t_f;
  run.t_signal = d.t_signal;
  run.before_light_cone = d.t_f < d.t_signal;
  run.postselected = n_ps;
  const auto sums = detail::pointer_sums(d, bit, n_ps, seed, opt.run_id, opt.threads,
                                         opt.keep_readings ? &run.readings : nullptr);
  detail::finish_run(d, run, sums);
  return run;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// One-sided Clopper-Pearson upper bound on a binomial rate.
inline double rate_upper_bound(std::uint64_t errors, std::uint64_t trials, double confidence = 0.95) {
  if (trials == 0) return 1.0;
  if (errors >= trials) return 1.0;
  return boost::math::ibeta_inv(static_cast<double>(errors + 1), static_cast<double>(trials - errors), confidence);
}

struct ErrorRate {
  std::uint64_t N = 0;
  std::uint64_t trials = 0;
  std::uint64_t errors[2] = {0, 0};
  double rate() const { return static_cast<double>(errors[0] + errors[1]) / static_cast<double>(trials); }
  double upper(double confidence = 0.95) const { return rate_upper_bound(errors[0] + errors[1], trials, confidence); }
};

/// Bit error rate at ensemble size N from `runs_per_bit` experiments per bit.
/// Runs without any postselection count as errors.
inline ErrorRate bit_error_rate(const ProtocolDesign& d, std::uint64_t N, std::size_t runs_per_bit, std::uint64_t seed,
                                std::uint64_t run_offset = 0, unsigned threads = 1) {
  ErrorRate er;
  er.N = N;
  er.trials = 2 * runs_per_bit;
  for (int bit = 0; bit < 2; ++bit) {
    for (std::size_t r = 0; r < runs_per_bit; ++r) {
      try {
        const auto run = run_protocol(d, bit, N, seed, {run_offset + r, false, threads});
        er.errors[bit] += run.error ? 1 : 0;
      } catch (const NumericalAlarm& a) {
        if (a.kind() != "no_postselection") throw;
        ++er.errors[bit];
      }
    }
  }
  return er;
}

struct Calibration {
  std::uint64_t N_star = 0;
  double target = 0.0;
  ErrorRate at_N_star;
  std::vector<ErrorRate> history;
};

struct CalibrationOptions {
  double target = 0.01;
  std::size_t runs_per_bit = 400;
  /// Stop bisecting once N_hi / N_lo falls below this ratio.
  double resolution = 1.1;
  std::uint64_t max_N = 1ULL << 50;
  unsigned threads = 1;
};

/// Smallest N (to the given resolution) whose error-rate upper bound is below
/// the target: geometric doubling, then bisection in log N.
inline Calibration calibrate_ensemble_size(const ProtocolDesign& d, std::uint64_t seed,
                                           const CalibrationOptions& opt = {}) {
  Calibration cal;
  cal.target = opt.target;
  std::uint64_t batch = 0;
  auto passes = [&](std::uint64_t N) {
    const auto er = bit_error_rate(d, N, opt.runs_per_bit, seed, (batch++) * opt.runs_per_bit, opt.threads);
    cal.history.push_back(er);
    return er;
  };
  const double p_min = std::min(d.channel[0].p_ps, d.channel[1].p_ps);
  std::uint64_t lo = 0;
  std::uint64_t hi = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(10.0 / p_min)));
  ErrorRate best;
  while (true) {
    const auto er = passes(hi);
    if (er.upper() < opt.target) {
      best = er;
      break;
    }
    lo = hi;
    if (hi > opt.max_N / 2) throw NumericalAlarm("calibration_failed", "calibration: target not reached below max_N");
    hi *= 2;
  }
  while (lo > 0 && static_cast<double>(hi) / static_cast<double>(lo) > opt.resolution) {
    const auto mid = static_cast<std::uint64_t>(std::llround(std::sqrt(static_cast<double>(lo) * static_cast<double>(hi))));
    if (mid <= lo || mid >= hi) break;
    const auto er = passes(mid);
    if (er.upper() < opt.target) {
      hi = mid;
      best = er;
    } else {
      lo = mid;
    }
  }
  cal.N_star = hi;
  cal.at_N_star = best;
  return cal;
}

struct ConvergencePoint {
  std::uint64_t n_postselected = 0;
  double rms_error = 0.0;
};

struct ConvergenceCurve {
  std::vector<ConvergencePoint> points;
  /// Least-squares slope of log rms_error against log n_postselected.
  double slope = 0.0;
};

/// RMS deviation of the Re P^w estimate from its exact value versus the
/// number of postselected cavities.
inline ConvergenceCurve estimator_convergence(const ProtocolDesign& d, int bit, std::span<const std::uint64_t> n_ps,
                                              std::size_t repetitions, std::uint64_t seed, unsigned threads = 1) {
  if (n_ps.size() < 2 || repetitions < 2) throw PreconditionError("convergence: need >= 2 sizes and repetitions");
  ConvergenceCurve c;
  const double exact = d.channel[bit].weak_momentum.real();
  std::uint64_t run_id = 0;
  for (auto n : n_ps) {
    double s2 = 0.0;
    for (std::size_t r = 0; r < repetitions; ++r) {
      const auto run = run_postselected(d, bit, n, seed, {run_id++, false, threads});
      s2 += (run.estimate - exact) * (run.estimate - exact);
    }
    c.points.push_back({n, std::sqrt(s2 / static_cast<double>(repetitions))});
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(c.points.size());
  for (const auto& p : c.points) {
    const double x = std::log(static_cast<double>(p.n_postselected)), y = std::log(p.rms_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  c.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return c;
}

}  // namespace mwell
