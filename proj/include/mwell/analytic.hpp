#pragma once

// Closed-form objects of the moving-wall well: instantaneous eigenstates phi_n,
// the exact linear-wall solutions psi_n, their overlaps d_kn and the expansion
// based exact evolution.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mwell/complex_erf.hpp"
#include "mwell/errors.hpp"
#include "mwell/model.hpp"
#include "mwell/synthesis.hpp"

namespace mwell {

namespace detail {

inline void check_inside(double x, double L) {
  if (!(x >= 0.0 && x <= L)) throw PreconditionError("position outside the well");
}

inline void require_linear(const WellModel& model, const char* what) {
  if (!model.wall().is_linear()) {
    throw PreconditionError(std::string(what) + ": closed form requires a linearly expanding wall (q > 0)");
  }
}

}  // namespace detail

/// phi_n(x,t) = sqrt(2/L(t)) sin(n pi x / L(t)).
inline cplx phi(int n, double x, double t, const WellModel& model) {
  if (n < 1) throw PreconditionError("phi: n must be >= 1");
  const double L = model.length(t);
  detail::check_inside(x, L);
  if (x == 0.0 || x == L) return 0.0;
  return std::sqrt(2.0 / L) * std::sin(n * std::numbers::pi * x / L);
}

/// Exact solution for L(t) = L0 + q t:
///   psi_n = sqrt(2/L) exp(-i (pi^2 hbar^2 n^2 t - L0 m^2 q x^2) / (2 hbar m L0 L)) sin(n pi x / L).
inline cplx psi(int n, double x, double t, const WellModel& model) {
  if (n < 1) throw PreconditionError("psi: n must be >= 1");
  detail::require_linear(model, "psi");
  const double L = model.length(t);
  detail::check_inside(x, L);
  if (x == 0.0 || x == L) return 0.0;
  const double m = model.mass(), hb = model.hbar(), q = model.wall().speed();
  const double phase = -moving_phase(model, n, t) + m * q * x * x / (2.0 * hb * L);
  return std::sqrt(2.0 / L) * std::polar(1.0, phase) * std::sin(n * std::numbers::pi * x / L);
}

/// v(n,t) = hbar pi n / (m L(t)), speed carried by an instantaneous eigenstate.
inline double eigen_velocity(int n, double t, const WellModel& model) {
  if (n < 1) throw PreconditionError("eigen_velocity: n must be >= 1");
  return model.hbar() * std::numbers::pi * n / (model.mass() * model.length(t));
}

/// Index at which eigen_velocity equals the wall speed, M / (pi hbar).
inline double velocity_matched_index(double t, const WellModel& model) {
  return model.overlap_scale(t) / (std::numbers::pi * model.hbar());
}

/// <phi_k | X | phi_j> on [0, L].
inline double position_matrix_element(int k, int j, double L) {
  if (k == j) return 0.5 * L;
  if ((k + j) % 2 == 0) return 0.0;
  const double kk = k, jj = j;
  const double d = kk * kk - jj * jj;
  return -8.0 * kk * jj * L / (std::numbers::pi * std::numbers::pi * d * d);
}

// ---------------------------------------------------------------------------
// Overlaps d_kn(t) = <psi_k(t) | phi_n(t)>
// ---------------------------------------------------------------------------
//
// The closed form is
//
//   d_kn = P e^{i theta_k} [ Q(k-n) B(k-n) - Q(k+n) B(k+n) ],
//   P = e^{-i pi/4} sqrt(hbar pi) / (2 sqrt(2M)),   Q(s) = exp(i pi^2 hbar s^2 / (2M)),
//   B(s) = erf(w (pi hbar s + M)/sigma) + erf(w (M - pi hbar s)/sigma),
//
// with w = e^{i pi/4}, sigma = sqrt(2 hbar M), M = m q L(t). For pi hbar s > M the
// two error functions approach +1 and -1, so R(s) = Q(s) B(s) is formed from
// erfc x exp(z^2) directly; there Q(s) exp(-z^2) collapses to
// (-1)^s exp(-i M / 2 hbar) and no phase of size s^2 is ever evaluated.

class OverlapTable {
 public:
  /// Supports 1 <= k <= kmax, 1 <= n <= nmax.
  OverlapTable(const WellModel& model, double t, std::size_t kmax, std::size_t nmax)
      : t_(t), kmax_(kmax), nmax_(nmax) {
    detail::require_linear(model, "overlap");
    if (kmax < 1 || nmax < 1) throw PreconditionError("overlap: need k, n >= 1");
    const double hb = model.hbar();
    M_ = model.overlap_scale(t);
    const double sigma = std::sqrt(2.0 * hb * M_);
    const cplx w = std::polar(1.0, 0.25 * std::numbers::pi);
    prefactor_ = std::polar(1.0, -0.25 * std::numbers::pi) * std::sqrt(hb * std::numbers::pi) /
                 (2.0 * std::sqrt(2.0 * M_));

    const std::size_t smax = kmax + nmax;
    R_.resize(smax + 1);
    const cplx half_phase = std::polar(1.0, -M_ / (2.0 * hb));
    for (std::size_t s = 0; s <= smax; ++s) {
      const double ps = std::numbers::pi * hb * static_cast<double>(s);
      const cplx u = w * ((ps + M_) / sigma);
      const cplx v = w * ((ps - M_) / sigma);
      if (ps >= M_) {
        const double sign = (s % 2 == 0) ? 1.0 : -1.0;
        R_[s] = sign * half_phase * (scaled_erfc(v) - scaled_erfc(u));
      } else {
        const double qph = ps * ps / (2.0 * hb * M_);
        R_[s] = std::polar(1.0, qph) * (2.0 - special::erfc(-v) - special::erfc(u));
      }
    }

    row_phase_.resize(kmax);
    for (std::size_t k = 1; k <= kmax; ++k) {
      row_phase_[k - 1] = std::polar(1.0, moving_phase(model, static_cast<int>(k), t));
    }
  }

  double time() const noexcept { return t_; }
  /// M = m q L(t).
  double scale() const noexcept { return M_; }
  std::size_t kmax() const noexcept { return kmax_; }
  std::size_t nmax() const noexcept { return nmax_; }

  cplx operator()(std::size_t k, std::size_t n) const {
    const std::size_t diff = k > n ? k - n : n - k;
    return prefactor_ * row_phase_[k - 1] * (R_[diff] - R_[k + n]);
  }

 private:
  // exp(z^2) erfc(z) for z on the ray arg z = pi/4 (|exp(z^2)| = 1 there).
  static cplx scaled_erfc(cplx z) {
    if (std::abs(z) <= special::kSeriesRadius) {
      return std::exp(z * z) * special::erfc(z);
    }
    const cplx s(z.imag(), z.real());
    return std::conj(special::detail::faddeeva_fraction(s));
  }

  double t_;
  std::size_t kmax_, nmax_;
  double M_ = 0.0;
  cplx prefactor_;
  std::vector<cplx> R_;
  std::vector<cplx> row_phase_;
};

/// Single overlap d_kn(t) = int_0^L psi_k^* phi_n dx, closed form.
inline cplx overlap_dkn(int k, int n, double t, const WellModel& model) {
  if (k < 1 || n < 1) throw PreconditionError("overlap: need k, n >= 1");
  const OverlapTable table(model, t, static_cast<std::size_t>(k), static_cast<std::size_t>(n));
  return table(static_cast<std::size_t>(k), static_cast<std::size_t>(n));
}

/// Dense block of d_kn(t), 1 <= k <= K, 1 <= n <= N, stored row-major.
class OverlapMatrix {
 public:
  OverlapMatrix(const WellModel& model, double t, std::size_t K, std::size_t N)
      : K_(K), N_(N), data_(K * N) {
    const OverlapTable table(model, t, K, N);
    M_ = table.scale();
    t_ = t;
    for (std::size_t k = 1; k <= K; ++k)
      for (std::size_t n = 1; n <= N; ++n) data_[(k - 1) * N + (n - 1)] = table(k, n);
  }

  std::size_t rows() const noexcept { return K_; }
  std::size_t cols() const noexcept { return N_; }
  double time() const noexcept { return t_; }
  double scale() const noexcept { return M_; }
  cplx operator()(std::size_t k, std::size_t n) const { return data_[(k - 1) * N_ + (n - 1)]; }

  /// sum_k |d_kn|^2 for column n.
  double column_norm2(std::size_t n) const {
    double s = 0.0;
    for (std::size_t k = 1; k <= K_; ++k) s += std::norm((*this)(k, n));
    return s;
  }
  /// sum_k conj(d_km) d_kn.
  cplx column_inner(std::size_t m, std::size_t n) const {
    cplx s;
    for (std::size_t k = 1; k <= K_; ++k) s += std::conj((*this)(k, m)) * (*this)(k, n);
    return s;
  }

 private:
  std::size_t K_, N_;
  double M_ = 0.0, t_ = 0.0;
  std::vector<cplx> data_;
};

// ---------------------------------------------------------------------------
// Exact evolution
// ---------------------------------------------------------------------------

struct ExactEvolveOptions {
  /// Largest discarded norm 1 - sum_k |b_k|^2 allowed.
  double tolerance = 1e-12;
  std::size_t max_terms = 40000;
  /// Rule of thumb for the first truncation: about 7 M / (pi hbar) terms.
  double initial_factor = 7.0;
};

/// Default truncation for overlap-based expansions: ceil(C M / (pi hbar)).
inline std::size_t default_truncation(const WellModel& model, double t, double factor = 7.0) {
  return static_cast<std::size_t>(std::ceil(factor * velocity_matched_index(t, model)));
}

/// Moving-basis coefficients b_k = <psi_k(0)|psi(0)> = sum_n c_n d_kn(0) for
/// k = 1..K. With d_kn defined with psi_k^* inside the integral no further
/// conjugation enters.
inline std::vector<cplx> moving_coefficients(std::span<const cplx> c, const WellModel& model, std::size_t K) {
  const OverlapTable table(model, 0.0, K, c.size());
  std::vector<cplx> b(K);
  for (std::size_t k = 1; k <= K; ++k) {
    cplx s;
    for (std::size_t n = 1; n <= c.size(); ++n) {
      if (c[n - 1] != cplx(0.0)) s += c[n - 1] * table(k, n);
    }
    b[k - 1] = s;
  }
  return b;
}

/// Evolves a linear-wall state given in the instantaneous eigenbasis at t = 0
/// to time t; the result is in the moving basis (constant coefficients).
/// States already in the moving basis are simply re-timed.
inline WaveState exact_evolve(const WaveState& initial, double t, const ExactEvolveOptions& opt = {}) {
  const WellModel& model = initial.model();
  detail::require_linear(model, "exact_evolve");
  if (!(t >= 0.0)) throw PreconditionError("exact_evolve: negative time");
  if (initial.basis() == Basis::Moving) {
    return WaveState(model, t, Basis::Moving, {initial.coefficients().begin(), initial.coefficients().end()});
  }
  if (initial.time() != 0.0) throw PreconditionError("exact_evolve: eigenbasis input must be given at t = 0");

  const auto c = initial.coefficients();
  const double total = initial.norm2();
  std::size_t K = std::max<std::size_t>(default_truncation(model, 0.0, opt.initial_factor), 2 * c.size());
  K = std::max<std::size_t>(K, 16);
  while (true) {
    K = std::min(K, opt.max_terms);
    auto b = moving_coefficients(c, model, K);
    double kept = 0.0;
    for (const auto& v : b) kept += std::norm(v);
    const double discarded = total - kept;
    if (discarded < opt.tolerance) {
      // Trim to the smallest K that still meets the tolerance.
      double tail = discarded;
      std::size_t keep = K;
      while (keep > 1 && tail + std::norm(b[keep - 1]) < opt.tolerance) {
        tail += std::norm(b[keep - 1]);
        --keep;
      }
      b.resize(keep);
      return WaveState::with_tolerance(model, t, Basis::Moving, std::move(b),
                                       std::max(kNormTolerance, opt.tolerance));
    }
    if (K == opt.max_terms) {
      throw NumericalAlarm("truncation_unreachable",
                           "exact_evolve: tolerance not reached within the maximum number of terms");
    }
    K = K + K / 2;
  }
}

/// Coefficients a_n(t) = <phi_n(t)|psi(t)> = sum_k b_k conj(d_kn(t)) of a
/// moving-basis state, n = 1..N.
inline std::vector<cplx> project_to_eigenbasis(const WaveState& moving, std::size_t N) {
  if (moving.basis() != Basis::Moving) throw PreconditionError("project_to_eigenbasis: state must be in the moving basis");
  const auto b = moving.coefficients();
  const OverlapTable table(moving.model(), moving.time(), b.size(), N);
  std::vector<cplx> a(N);
  for (std::size_t n = 1; n <= N; ++n) {
    cplx s;
    for (std::size_t k = 1; k <= b.size(); ++k) s += b[k - 1] * std::conj(table(k, n));
    a[n - 1] = s;
  }
  return a;
}

/// <phi_m(t)|psi_n(t)> = conj(d_nm(t)) for m = 1..K: the instantaneous
/// eigenbasis coefficients of the exact solution psi_n.
inline std::vector<cplx> eigen_coefficients_of_psi(int n, double t, const WellModel& model, std::size_t K) {
  const OverlapTable table(model, t, static_cast<std::size_t>(n), K);
  std::vector<cplx> a(K);
  for (std::size_t m = 1; m <= K; ++m) a[m - 1] = std::conj(table(static_cast<std::size_t>(n), m));
  return a;
}

/// psi_n as a moving-basis state (single unit coefficient).
inline WaveState moving_basis_state(int n, double t, const WellModel& model) {
  detail::require_linear(model, "moving_basis_state");
  if (n < 1) throw PreconditionError("moving_basis_state: n must be >= 1");
  std::vector<cplx> c(static_cast<std::size_t>(n));
  c.back() = 1.0;
  return WaveState(model, t, Basis::Moving, std::move(c));
}

/// phi_n as an instantaneous-eigenbasis state.
inline WaveState eigen_state(int n, double t, const WellModel& model) {
  if (n < 1) throw PreconditionError("eigen_state: n must be >= 1");
  std::vector<cplx> c(static_cast<std::size_t>(n));
  c.back() = 1.0;
  return WaveState(model, t, Basis::InstantaneousEigen, std::move(c));
}

}  // namespace mwell
