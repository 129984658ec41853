#pragma once

// Density, current, weak momentum and quantum potential from the sine-series
// jet of a state, plus light-cone tags, Delta j and truncation tail reports.
//
// With psi = exp(i alpha x^2) chi:
//   rho      = |chi|^2
//   j        = (hbar/m) Im(psi^* psi') = (hbar/m) (2 alpha x |chi|^2 + Im(conj(chi) chi'))
//   Re P^w   = m j / rho = hbar (2 alpha x + Im(chi'/chi))
//   Im P^w   = -hbar rho' / (2 rho) = -hbar Re(chi'/chi)
//   Q        = -(hbar^2/2m) |chi|'' / |chi| = -(hbar^2/2m) (Re(chi''/chi) + Im(chi'/chi)^2)

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mwell/analytic.hpp"
#include "mwell/errors.hpp"
#include "mwell/evolution.hpp"
#include "mwell/model.hpp"
#include "mwell/synthesis.hpp"

namespace mwell {

// ---------------------------------------------------------------------------
// Jet-level formulas
// ---------------------------------------------------------------------------

inline double jet_density(const Jet& j) { return std::norm(j.chi); }

inline double jet_current(const Jet& j, double alpha, const WellModel& model) {
  return model.hbar() / model.mass() *
         (2.0 * alpha * j.x * std::norm(j.chi) + (std::conj(j.chi) * j.dchi).imag());
}

/// Requires chi != 0.
inline cplx jet_weak_momentum(const Jet& j, double alpha, const WellModel& model) {
  const cplx r = j.dchi / j.chi;
  const double hb = model.hbar();
  return {hb * (2.0 * alpha * j.x + r.imag()), -hb * r.real()};
}

/// Requires chi != 0.
inline double jet_quantum_potential(const Jet& j, const WellModel& model) {
  const cplx r1 = j.dchi / j.chi;
  const cplx r2 = j.d2chi / j.chi;
  const double hb = model.hbar();
  return -(hb * hb / (2.0 * model.mass())) * (r2.real() + r1.imag() * r1.imag());
}

// ---------------------------------------------------------------------------
// Pointwise probe with node guard
// ---------------------------------------------------------------------------

/// Pointwise observables of one state. Quotients by rho are refused where
/// rho < kNodeGuard * max rho; the maximum is estimated on a uniform sample.
class StateProbe {
 public:
  explicit StateProbe(const WaveState& state) : model_(state.model()), series_(state) {}

  const WellModel& model() const noexcept { return model_; }
  const SeriesView& series() const noexcept { return series_; }
  double time() const noexcept { return series_.time(); }

  Jet jet(double x) const { return series_.jet(x); }
  double density(double x) const { return std::norm(series_.chi(x)); }
  double current(double x) const { return jet_current(series_.jet(x), series_.chirp(), model_); }

  double reference_density() const {
    std::call_once(cache_->once, [this] {
      const std::size_t K = series_.amplitudes().size();
      const std::size_t n = std::clamp<std::size_t>(4 * K + 1, 257, 4097);
      const double L = series_.length();
      double mx = 0.0;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        mx = std::max(mx, std::norm(series_.chi(L * static_cast<double>(i) / static_cast<double>(n - 1))));
      }
      cache_->rho_max = mx;
    });
    return cache_->rho_max;
  }

  bool guarded(double rho) const { return !(rho >= kNodeGuard * reference_density()) || rho == 0.0; }

  cplx weak_momentum(double x) const {
    const Jet j = checked_jet(x);
    return jet_weak_momentum(j, series_.chirp(), model_);
  }

  /// v = j / rho; shares its definition with Re P^w / m.
  double hydrodynamic_velocity(double x) const { return weak_momentum(x).real() / model_.mass(); }

  double quantum_potential(double x) const { return jet_quantum_potential(checked_jet(x), model_); }

 private:
  Jet checked_jet(double x) const {
    Jet j = series_.jet(x);
    if (guarded(std::norm(j.chi))) {
      throw NodeGuardError("density below the node guard at x = " + std::to_string(x));
    }
    return j;
  }

  struct Cache {
    std::once_flag once;
    double rho_max = 0.0;
  };

  WellModel model_;
  SeriesView series_;
  std::shared_ptr<Cache> cache_ = std::make_shared<Cache>();
};

inline cplx weak_momentum(const WaveState& state, double x) { return StateProbe(state).weak_momentum(x); }

inline double hydrodynamic_velocity(const WaveState& state, double x) {
  return StateProbe(state).hydrodynamic_velocity(x);
}

// ---------------------------------------------------------------------------
// Grid fields
// ---------------------------------------------------------------------------

struct ObservableField {
  double t = 0.0;
  std::vector<double> x;
  std::vector<double> rho;
  std::vector<double> j;
  /// Empty where the node guard trips.
  std::vector<std::optional<double>> v;
  std::vector<std::optional<double>> re_pw;
  std::vector<std::optional<double>> im_pw;
  std::vector<std::optional<double>> Q;

  std::size_t size() const noexcept { return x.size(); }
};

inline std::vector<double> density(const WaveState& state, const SpatialGrid& grid) {
  check_grid_matches(state, grid);
  const SeriesView s(state);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) out[i] = std::norm(s.chi(grid[i]));
  return out;
}

inline std::vector<double> current_density(const WaveState& state, const SpatialGrid& grid) {
  check_grid_matches(state, grid);
  const SeriesView s(state);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = jet_current(s.jet(grid[i]), s.chirp(), state.model());
  return out;
}

/// All fields on a grid; the node-guard reference is the grid maximum of rho.
inline ObservableField observable_field(const WaveState& state, const SpatialGrid& grid) {
  check_grid_matches(state, grid);
  const SeriesView s(state);
  const WellModel& model = state.model();
  ObservableField f;
  f.t = state.time();
  const std::size_t n = grid.size();
  f.x.assign(grid.points().begin(), grid.points().end());
  f.rho.resize(n);
  f.j.resize(n);
  f.v.resize(n);
  f.re_pw.resize(n);
  f.im_pw.resize(n);
  f.Q.resize(n);
  std::vector<Jet> jets(n);
  double rho_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    jets[i] = s.jet(grid[i]);
    f.rho[i] = jet_density(jets[i]);
    f.j[i] = jet_current(jets[i], s.chirp(), model);
    rho_max = std::max(rho_max, f.rho[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (f.rho[i] == 0.0 || f.rho[i] < kNodeGuard * rho_max) continue;
    const cplx pw = jet_weak_momentum(jets[i], s.chirp(), model);
    f.re_pw[i] = pw.real();
    f.im_pw[i] = pw.imag();
    f.v[i] = pw.real() / model.mass();
    f.Q[i] = jet_quantum_potential(jets[i], model);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Light cone
// ---------------------------------------------------------------------------

struct LightConeTag {
  /// (L0 - x) / c.
  double t_signal = 0.0;
  /// t >= t_signal (closed at the boundary).
  bool inside = false;
};

inline LightConeTag light_cone(double x, double t, const WellModel& model) {
  if (!(x >= 0.0 && x < model.L0())) throw PreconditionError("light_cone: x must lie in [0, L0)");
  LightConeTag tag;
  tag.t_signal = (model.L0() - x) / model.light_speed();
  tag.inside = t >= tag.t_signal;
  return tag;
}

// ---------------------------------------------------------------------------
// Delta j
// ---------------------------------------------------------------------------

/// j(x, eps) - j(x, 0).
inline double delta_j(const StateEvolution& evo, double x, double eps) {
  if (!(eps > 0.0)) throw PreconditionError("delta_j: eps must be positive");
  const double t0 = evo.initial_time();
  const StateProbe p0(evo.state_at(t0));
  const StateProbe p1(evo.state_at(t0 + eps));
  return p1.current(x) - p0.current(x);
}

/// Value at h = 0 of the polynomial through (h_i, f_i) (Neville).
inline double richardson_limit(std::span<const double> h, std::span<const double> f) {
  if (h.size() != f.size() || h.empty()) throw PreconditionError("richardson_limit: need matching non-empty inputs");
  std::vector<double> p(f.begin(), f.end());
  const std::size_t n = p.size();
  for (std::size_t m = 1; m < n; ++m) {
    for (std::size_t i = 0; i + m < n; ++i) {
      const double d = h[i] - h[i + m];
      if (d == 0.0) throw PreconditionError("richardson_limit: step sizes must be distinct");
      p[i] = (h[i] * p[i + 1] - h[i + m] * p[i]) / d;
    }
  }
  return p[0];
}

/// Small-eps slope of Delta j for psi_n near x = 0: -8 pi^2 n^2 q^2 x^3 / L0^5
/// (atomic units, unit mass).
inline double delta_j_slope_psi(int n, double x, const WellModel& model) {
  const double q = model.wall().speed();
  const double L0 = model.L0();
  const double pi2 = std::numbers::pi * std::numbers::pi;
  return -8.0 * pi2 * n * n * q * q * x * x * x / std::pow(L0, 5);
}

// ---------------------------------------------------------------------------
// Tail report
// ---------------------------------------------------------------------------

struct TailReport {
  double t = 0.0;
  double threshold = 0.0;
  /// Smallest cutoff with discarded norm below the threshold.
  std::size_t k_cut = 0;
  double discarded = 0.0;
  /// Inner truncation of the double projection (0 for t = 0).
  std::size_t inner_terms = 0;
  double inner_discarded = 0.0;
  double velocity = 0.0;
  double velocity_over_c = 0.0;
  bool double_projection = false;
};

struct TailOptions {
  std::size_t max_terms = 20000;
  /// Inner sum converged to threshold * inner_fraction.
  double inner_fraction = 1e-2;
};

namespace detail {

inline std::size_t first_cut(std::span<const cplx> coeffs, double total, double threshold, double* discarded) {
  double kept = 0.0;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    kept += std::norm(coeffs[k]);
    if (total - kept < threshold) {
      *discarded = total - kept;
      return k + 1;
    }
  }
  return 0;
}

}  // namespace detail

/// For t = 0: minimal k_cut with 1 - sum_{k<=k_cut} |b_k|^2 < threshold,
/// b_k = sum_n c_n d_kn(0). For t > 0 the moving-basis state is projected back
/// on the instantaneous eigenbasis and the cut is taken there.
inline TailReport tail_report(const WaveState& initial, double t, double threshold, const TailOptions& opt = {}) {
  const WellModel& model = initial.model();
  detail::require_linear(model, "tail_report");
  if (!(threshold > 0.0 && threshold < 1.0)) throw PreconditionError("tail_report: threshold must lie in (0, 1)");
  if (!(t >= 0.0)) throw PreconditionError("tail_report: negative time");
  if (initial.basis() != Basis::InstantaneousEigen || initial.time() != 0.0)
    throw PreconditionError("tail_report: initial state must be an eigenbasis state at t = 0");

  TailReport rep;
  rep.t = t;
  rep.threshold = threshold;
  const double total = initial.norm2();
  const auto b = moving_coefficients(initial.coefficients(), model, opt.max_terms);

  if (t == 0.0) {
    rep.k_cut = detail::first_cut(b, total, threshold, &rep.discarded);
  } else {
    rep.double_projection = true;
    const std::size_t inner = detail::first_cut(b, total, threshold * opt.inner_fraction, &rep.inner_discarded);
    if (inner == 0) throw NumericalAlarm("truncation_unreachable", "tail_report: inner sum not converged");
    rep.inner_terms = inner;
    const WaveState moving = WaveState::with_tolerance(model, t, Basis::Moving,
                                                       std::vector<cplx>(b.begin(), b.begin() + inner), 1e-6);
    const auto a = project_to_eigenbasis(moving, opt.max_terms);
    rep.k_cut = detail::first_cut(a, total, threshold, &rep.discarded);
  }
  if (rep.k_cut == 0) throw NumericalAlarm("truncation_unreachable", "tail_report: cut exceeds the hard cap");
  rep.velocity = eigen_velocity(static_cast<int>(rep.k_cut), t, model);
  rep.velocity_over_c = rep.velocity / model.light_speed();
  return rep;
}

/// j(x, t) from the moving-basis expansion of an eigenbasis initial state
/// truncated at each cutoff: shows how the current converges with the tail.
inline std::vector<double> current_vs_truncation(const WaveState& initial, double x, double t,
                                                 std::span<const std::size_t> cutoffs) {
  detail::require_linear(initial.model(), "current_vs_truncation");
  std::size_t kmax = 0;
  for (auto k : cutoffs) kmax = std::max(kmax, k);
  if (kmax == 0) throw PreconditionError("current_vs_truncation: empty cutoff list");
  const auto b = moving_coefficients(initial.coefficients(), initial.model(), kmax);
  std::vector<double> out;
  out.reserve(cutoffs.size());
  for (auto k : cutoffs) {
    if (k == 0) throw PreconditionError("current_vs_truncation: cutoff must be >= 1");
    const WaveState s = WaveState::with_tolerance(initial.model(), t, Basis::Moving,
                                                  std::vector<cplx>(b.begin(), b.begin() + k), 1.0);
    out.push_back(StateProbe(s).current(x));
  }
  return out;
}

}  // namespace mwell
