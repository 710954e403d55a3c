#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "lane_emden/error.hpp"

namespace lane_emden {

/// Radial solution of v'' + v'/r + v^p = 0, v(0) = 1, v'(0) = 0, integrated in
/// t = log r together with the two energy integrals
///   I_grad = int (dv/dt)^2 dt = int v'^2 r dr,  I_pow = int e^{2t} v^{p+1} dt = int v^{p+1} r dr.
/// The unit-disk solution is u(rho) = M v(r0 rho) with M = r0^{2/(p-1)}.
class RadialSolution {
 public:
  double p = 0.0;
  double r0 = 0.0;      // first zero of v
  double t0 = 0.0;      // log r0
  double height = std::numeric_limits<double>::quiet_NaN();        // M(p), p > 1
  double energy = std::numeric_limits<double>::quiet_NaN();        // p int |grad u|^2 on the unit disk
  double energy_power = std::numeric_limits<double>::quiet_NaN();  // p int u^{p+1}
  std::size_t steps = 0;

  /// eps_p = [p M^{p-1}]^{-1/2} = 1/(r0 sqrt p).
  double eps() const { return 1.0 / (r0 * std::sqrt(p)); }
  double energy_mismatch() const { return std::abs(energy - energy_power) / energy; }

  /// Normalized profile; 0 beyond r0.
  double v(double r) const {
    if (r <= 0.0) return 1.0;
    if (r >= r0) return 0.0;
    const double t = std::log(r);
    if (t <= knots_.front().t) return series(r);
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t, [](double x, const Knot& k) { return x < k.t; });
    if (it == knots_.end()) return knots_.back().v;
    const Knot& b = *it;
    const Knot& a = *(it - 1);
    return quintic_hermite(a, b, t);
  }

  /// Solution on the unit disk as a function of |x|.
  double unit_disk_value(double rho) const { return height * v(r0 * rho); }

  /// w_p(s) = p (u(eps s) - M)/M = p (v(s/sqrt p) - 1).
  double rescaled(double s) const {
    const double r = s / std::sqrt(p);
    if (r <= 0.0) return 0.0;
    if (std::log(r) <= knots_.front().t) return p * series_deficit(r);
    return p * (v(r) - 1.0);
  }

 private:
  struct Knot {
    double t, v, vt, vtt;
  };
  std::vector<Knot> knots_;

  double series_deficit(double r) const {
    const double r2 = r * r;
    return r2 * (-0.25 + r2 * (p / 64.0 - r2 * p * (3.0 * p - 2.0) / 2304.0));
  }
  double series(double r) const { return 1.0 + series_deficit(r); }

  static double quintic_hermite(const Knot& a, const Knot& b, double t) {
    const double h = b.t - a.t;
    const double s = (t - a.t) / h, s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double h00 = 1 - 10 * s3 + 15 * s4 - 6 * s5, h01 = 1 - h00;
    const double h10 = s - 6 * s3 + 8 * s4 - 3 * s5, h11 = -4 * s3 + 7 * s4 - 3 * s5;
    const double h20 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5), h21 = 0.5 * (s3 - 2 * s4 + s5);
    return h00 * a.v + h01 * b.v + h * (h10 * a.vt + h11 * b.vt) + h * h * (h20 * a.vtt + h21 * b.vtt);
  }

  friend RadialSolution shoot(double, double);
};

/// Integrates to the first zero of v with relative accuracy tol on r0.
inline RadialSolution shoot(double p, double tol = 1e-10) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 4>;
  require(p >= 1.0, ErrorCode::InvalidArgument, "shoot needs p >= 1");
  require(tol > 0.0 && tol <= 1e-8, ErrorCode::InvalidArgument, "shoot needs 0 < tol <= 1e-8");

  auto source = [p](double t, double v) { return v > 0.0 ? std::exp(2.0 * t + p * std::log(v)) : 0.0; };
  auto rhs = [&](const State& y, State& dy, double t) {
    const double f = source(t, y[0]);
    dy[0] = y[1];
    dy[1] = -f;
    dy[2] = y[1] * y[1];
    dy[3] = f * std::max(y[0], 0.0);
  };

  RadialSolution sol;
  sol.p = p;
  const double rs = 1e-4 / std::sqrt(p);
  const double ts = std::log(rs), rs2 = rs * rs;
  State y{sol.series(rs), rs2 * (-0.5 + rs2 * (p / 16.0 - rs2 * p * (3.0 * p - 2.0) / 384.0)), rs2 * rs2 / 16.0,
          rs2 / 2.0 - (p + 1.0) * rs2 * rs2 / 16.0};
  auto knot = [&](double t, const State& s) { return RadialSolution::Knot{t, s[0], s[1], -source(t, s[0])}; };
  sol.knots_.push_back(knot(ts, y));

  // The budget is split evenly between stepping and root location, each with a
  // safety factor since step errors accumulate over a few hundred steps.
  const double step_tol = 0.5e-2 * tol;
  auto stepper = odeint::make_dense_output(1e-2 * step_tol, step_tol, odeint::runge_kutta_dopri5<State>());
  stepper.initialize(y, ts, 1e-3);
  const double t_cap = std::max(p, 1.0);
  for (;;) {
    const auto [ta, tb] = stepper.do_step(rhs);
    ++sol.steps;
    const State& yb = stepper.current_state();
    if (yb[0] <= 0.0) {
      double lo = ta, hi = tb;
      State ym;
      while (hi - lo > step_tol) {
        const double mid = 0.5 * (lo + hi);
        stepper.calc_state(mid, ym);
        (ym[0] > 0.0 ? lo : hi) = mid;
      }
      sol.t0 = 0.5 * (lo + hi);
      stepper.calc_state(sol.t0, ym);
      ym[0] = 0.0;
      sol.knots_.push_back(knot(sol.t0, ym));
      y = ym;
      break;
    }
    sol.knots_.push_back(knot(tb, yb));
    if (tb > t_cap) fail(ErrorCode::NoZeroFound, "profile stays positive up to the radius cap e^p");
  }

  sol.r0 = std::exp(sol.t0);
  if (p > 1.0) {
    sol.height = std::exp(2.0 * sol.t0 / (p - 1.0));
    const double scale = 2.0 * std::numbers::pi * p * sol.height * sol.height;
    sol.energy = scale * y[2];
    sol.energy_power = scale * y[3];
  }
  return sol;
}

struct DiskQuantities {
  double height = 0.0;  // |u_p|_inf on the unit disk
  double energy = 0.0;  // p int |grad u_p|^2
};

inline DiskQuantities disk_quantities(double p) {
  require(p > 1.0, ErrorCode::InvalidArgument, "disk_quantities needs p > 1");
  const RadialSolution s = shoot(p);
  return {s.height, s.energy};
}

inline std::vector<double> rescaled_profile(double p, const std::vector<double>& radii) {
  const RadialSolution s = shoot(p);
  std::vector<double> w;
  w.reserve(radii.size());
  for (double r : radii) {
    require(r >= 0.0, ErrorCode::InvalidArgument, "radii must be non-negative");
    w.push_back(s.rescaled(r));
  }
  return w;
}

/// CSV table p,M,E,r0 for the given exponents.
inline void write_oracle_table(std::ostream& os, const std::vector<double>& ps) {
  os << "p,M,E,r0\n";
  char line[128];
  for (double p : ps) {
    const RadialSolution s = shoot(p);
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g\n", p, s.height, s.energy, s.r0);
    os << line;
  }
}

}  // namespace lane_emden
