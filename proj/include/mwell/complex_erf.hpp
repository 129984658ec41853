#pragma once

// Error function of complex argument.
//
// Two regimes, after reduction to the first quadrant with
//   erf(-z) = -erf(z),  erf(conj z) = conj erf(z):
//
//   |z| <= kSeriesRadius   Maclaurin series
//                            erf z = 2/sqrt(pi) sum (-1)^n z^(2n+1) / (n! (2n+1))
//                          summed in binary128. The largest term grows like
//                          exp(|z|^2), so 113 bits leave ~1e-16 after the
//                          cancellation at the edge of the disc.
//   |z| >  kSeriesRadius   erfc z = exp(-z^2) w(iz) with the Faddeeva function
//                          w evaluated by the Laplace continued fraction
//                            w(s) = (i/sqrt(pi)) / (s - (1/2)/(s - 1/(s - (3/2)/(s - ...))))
//                          truncated at a fixed depth. The depth stays small
//                          enough that the implied Gauss-Hermite nodes sit
//                          well inside |s| so the fraction is also usable on
//                          the real axis.
//
// erfc is exposed separately so differences of error functions with large
// arguments can be formed without subtracting numbers close to 1. Inside the
// disc, where |erfc z| << 1 (Re z^2 > kLentzThreshold), 1 - erf z would cancel;
// there the same continued fraction is evaluated to convergence instead.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

#include "mwell/errors.hpp"

namespace mwell::special {

inline constexpr double kSeriesRadius = 6.5;
inline constexpr int kFractionDepth = 20;
inline constexpr double kLentzThreshold = 4.0;

namespace detail {

#if defined(__SIZEOF_FLOAT128__) && !defined(__clang__)
using wide_real = __float128;
#else
using wide_real = long double;
#endif

// First-quadrant Maclaurin sum. Caller guarantees |z| <= kSeriesRadius.
inline std::complex<double> erf_series(std::complex<double> z) {
  const wide_real zr = z.real(), zi = z.imag();
  // -z^2
  const wide_real mr = -(zr * zr - zi * zi);
  const wide_real mi = -(2 * zr * zi);

  wide_real tr = zr, ti = zi;  // z^(2n+1) (-1)^n / n!
  wide_real sr = zr, si = zi;
  const double mag2 = std::norm(z);
  for (int n = 1; n < 400; ++n) {
    const wide_real nr = tr * mr - ti * mi;
    const wide_real ni = tr * mi + ti * mr;
    tr = nr / n;
    ti = ni / n;
    const wide_real cr = tr / (2 * n + 1);
    const wide_real ci = ti / (2 * n + 1);
    sr += cr;
    si += ci;
    if (n > mag2) {
      const double term = static_cast<double>(cr * cr + ci * ci);
      const double sum = static_cast<double>(sr * sr + si * si);
      if (term <= 1e-64 * sum) break;
    }
  }
  constexpr double two_over_sqrt_pi = 2.0 * std::numbers::inv_sqrtpi;
  return {two_over_sqrt_pi * static_cast<double>(sr),
          two_over_sqrt_pi * static_cast<double>(si)};
}

// Faddeeva w(s) for Im s >= 0 and |s| > kSeriesRadius.
inline std::complex<double> faddeeva_fraction(std::complex<double> s) {
  std::complex<double> t = s;
  for (int k = kFractionDepth; k >= 1; --k) t = s - (0.5 * k) / t;
  return std::complex<double>(0.0, std::numbers::inv_sqrtpi) / t;
}

// erfc z = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))),
// modified Lentz. Converges for Re z > 0; used only where Re z^2 > kLentzThreshold.
inline std::complex<double> erfc_lentz(std::complex<double> z) {
  constexpr double tiny = 1e-300;
  std::complex<double> f = z, C = z, D = 0.0;
  for (int k = 1; k < 5000; ++k) {
    const double a = 0.5 * k;
    D = z + a * D;
    C = z + a / C;
    if (D == 0.0) D = tiny;
    if (C == 0.0) C = tiny;
    D = 1.0 / D;
    const std::complex<double> delta = C * D;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-z * z) * std::numbers::inv_sqrtpi / f;
}

// exp(-z^2), refusing to saturate.
inline std::complex<double> gaussian_factor(std::complex<double> z) {
  const std::complex<double> e = -z * z;
  if (e.real() > std::log(std::numeric_limits<double>::max()) - 1.0) {
    throw NumericalAlarm("erf_overflow",
                         "complex_erf: exp(-z^2) overflows for this argument");
  }
  return std::exp(e);
}

// erfc for a first-quadrant argument outside the series disc:
// erfc z = exp(-z^2) w(iz) and w(-conj s) = conj w(s).
inline std::complex<double> erfc_fraction_q1(std::complex<double> z) {
  const std::complex<double> s(z.imag(), z.real());
  return gaussian_factor(z) * std::conj(faddeeva_fraction(s));
}

}  // namespace detail

/// Error function of complex argument.
inline std::complex<double> erf(std::complex<double> z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw PreconditionError("complex_erf: argument is not finite");
  }
  const bool flip_re = z.real() < 0.0;
  const bool flip_im = z.imag() < 0.0;
  const std::complex<double> q(std::abs(z.real()), std::abs(z.imag()));

  std::complex<double> w;
  if (q.real() == 0.0 && q.imag() == 0.0) {
    w = 0.0;
  } else if (std::abs(q) <= kSeriesRadius) {
    w = detail::erf_series(q);
  } else {
    w = 1.0 - detail::erfc_fraction_q1(q);
  }
  if (q.real() == 0.0) w.real(0.0);  // erf(iy) is purely imaginary

  if (flip_im) w = std::conj(w);   // erf(conj q) = conj erf(q)
  if (flip_re) w = -std::conj(w);  // erf(-conj u) = -conj erf(u)
  return w;
}

/// Complementary error function erfc z = 1 - erf z, accurate in relative
/// terms for Re z > 0 and large |z|.
inline std::complex<double> erfc(std::complex<double> z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
    throw PreconditionError("complex_erf: argument is not finite");
  }
  if (z.real() < 0.0) return 2.0 - erfc(-z);
  const bool flip_im = z.imag() < 0.0;
  const std::complex<double> q(z.real(), std::abs(z.imag()));
  std::complex<double> r;
  if (std::abs(q) <= kSeriesRadius) {
    const double re_sq = q.real() * q.real() - q.imag() * q.imag();
    r = re_sq > kLentzThreshold ? detail::erfc_lentz(q) : 1.0 - detail::erf_series(q);
  } else {
    r = detail::erfc_fraction_q1(q);
  }
  return flip_im ? std::conj(r) : r;
}

}  // namespace mwell::special
