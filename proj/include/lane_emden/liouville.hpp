#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lane_emden/error.hpp"
#include "lane_emden/geometry.hpp"

namespace lane_emden {

/// U(s) = -2 log(1 + s^2/8), the radial Liouville bubble with -Delta U = e^U and total mass 8 pi.
inline double liouville_U(double s) { return -2.0 * std::log1p(s * s / 8.0); }
inline double eval_U(Point x) { return liouville_U(norm(x)); }

/// e^U written without the logarithm.
inline double liouville_density(double s) {
  const double q = 1.0 + s * s / 8.0;
  return 1.0 / (q * q);
}

struct MassIntegrals {
  double mass = 0.0;        // int e^U
  double log_moment = 0.0;  // int log|z| e^U
};

namespace detail {

/// Adaptive Gauss-Kronrod over [a, b] split at the bubble scale so no panel straddles the peak.
template <class F>
double radial_integral(F&& f, double a, double b, double tol) {
  double total = 0.0;
  const double breaks[] = {a, std::sqrt(8.0), 10.0, 100.0, 1e3, 1e4, 1e5, b};
  double lo = a;
  for (double x : breaks) {
    if (x <= lo) continue;
    const double hi = std::min(x, b);
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, tol);
    lo = hi;
    if (lo >= b) break;
  }
  return total;
}

}  // namespace detail

/// int_{|z| <= R} e^U by quadrature, no tail.
inline double liouville_mass_within(double R, double tol = 1e-12) {
  require(R >= 0.0, ErrorCode::InvalidArgument, "radius must be non-negative");
  if (R == 0.0) return 0.0;
  return 2.0 * std::numbers::pi *
         detail::radial_integral([](double s) { return s * liouville_density(s); }, 0.0, R, tol);
}

/// Radial quadrature to R_max plus the closed-form tails
///   int_{|z|>R} e^U = 8 pi/(1+T),  int_{|z|>R} log|z| e^U = 8 pi log R/(1+T) + 4 pi log(1 + 1/T),  T = R^2/8.
inline MassIntegrals mass_integrals(double R_max = 100.0, double tol = 1e-10) {
  require(R_max >= 100.0, ErrorCode::InvalidArgument, "R_max must be at least 100");
  require(tol > 0.0 && tol <= 1e-8, ErrorCode::InvalidArgument, "tol must lie in (0, 1e-8]");
  const double pi = std::numbers::pi;
  const double T = R_max * R_max / 8.0;
  const double q = 1e-3 * tol;
  MassIntegrals out;
  out.mass = liouville_mass_within(R_max, q) + 8.0 * pi / (1.0 + T);
  const double inner = detail::radial_integral(
      [](double s) { return s > 0.0 ? s * std::log(s) * liouville_density(s) : 0.0; }, 0.0, R_max, q);
  out.log_moment = 2.0 * pi * inner + 8.0 * pi * std::log(R_max) / (1.0 + T) + 4.0 * pi * std::log1p(1.0 / T);
  return out;
}

}  // namespace lane_emden
