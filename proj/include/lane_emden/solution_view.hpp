#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lane_emden/field.hpp"
#include "lane_emden/green_function.hpp"
#include "lane_emden/laplacian.hpp"
#include "lane_emden/radial_oracle.hpp"

namespace lane_emden {

struct FieldSample {
  Point x;
  double u;
};

/// Integrals of the rescaled density rho(z) = (u(y + eps z)/u(y))^p over |z| <= r/eps.
struct BallMoments {
  double mass = 0.0;        // int rho
  double log_moment = 0.0;  // int log|z| rho
  double regular = 0.0;     // int H(y, y + eps z) rho
  double error = 0.0;       // quadrature error estimate on mass, relative
};

/// A solution u_p seen through point values and quadratures, so diagnostics can
/// run on grid fields and on the exact radial solution alike.
class SolutionView {
 public:
  virtual ~SolutionView() = default;

  virtual const DomainSpec& domain() const = 0;
  virtual double p() const = 0;
  virtual double value(Point x) const = 0;
  virtual double max_value() const = 0;
  /// Grid spacing, 0 for exact solutions.
  virtual double resolution() const = 0;
  /// p int |grad u|^2 and p int u^{p+1}.
  virtual double energy() const = 0;
  virtual double energy_power() const = 0;
  /// Interior points carrying stored values (grid nodes or an oracle lattice).
  virtual std::vector<FieldSample> samples() const = 0;

  virtual BallMoments ball_moments(Point y, double height, double log_eps, double r,
                                   const GreenEvaluator& g) const = 0;
  /// int over Omega minus B_r(y) of G(y, x) u(x)^p dx.
  virtual double outer_green_integral(Point y, double r, const GreenEvaluator& g) const = 0;
};

/// Bilinear interpolation and dual-cell node sums over a solved field.
class GridSolutionView final : public SolutionView {
 public:
  GridSolutionView(Field u, double p) : u_(std::move(u)), p_(p), lap_(u_.grid_ptr()) {
    require(p > 1.0, ErrorCode::InvalidArgument, "p must exceed 1");
    const Grid& g = u_.grid();
    const double h2 = g.spacing() * g.spacing();
    weights_.resize(u_.size());
    for (std::size_t k = 0; k < u_.size(); ++k) {
      const auto& th = g.arms(k);
      weights_[k] = h2 * 0.5 * (th[east] + th[west]) * 0.5 * (th[north] + th[south]);
    }
  }

  const Field& field() const { return u_; }
  const std::vector<double>& weights() const { return weights_; }

  const DomainSpec& domain() const override { return u_.grid().domain(); }
  double p() const override { return p_; }
  double value(Point x) const override { return u_.interpolate(x); }
  double max_value() const override { return u_.max_value(); }
  double resolution() const override { return u_.grid().spacing(); }
  double energy() const override { return p_ * lap_.gradient_energy(u_); }
  double energy_power() const override {
    double s = 0.0;
    for (std::size_t k = 0; k < u_.size(); ++k)
      if (u_[k] > 0.0) s += weights_[k] * std::exp((p_ + 1.0) * std::log(u_[k]));
    return p_ * s;
  }
  std::vector<FieldSample> samples() const override {
    std::vector<FieldSample> out(u_.size());
    for (std::size_t k = 0; k < u_.size(); ++k) out[k] = {u_.grid().position(k), u_[k]};
    return out;
  }

  BallMoments ball_moments(Point y, double height, double log_eps, double r,
                           const GreenEvaluator& g) const override {
    const Grid& grid = u_.grid();
    const double h = grid.spacing(), tiny = 1e-9 * grid.domain().diameter();
    BallMoments m;
    const double log_h = std::log(height);
    for (std::size_t k = 0; k < u_.size(); ++k) {
      const Point x = grid.position(k);
      const double d = distance(x, y);
      if (d > r || u_[k] <= 0.0) continue;
      const double rho_dz = std::exp(p_ * (std::log(u_[k]) - log_h) + std::log(weights_[k]) - 2.0 * log_eps);
      // The node cell holding y carries the cell average of log|x - y|.
      const double log_d = d < 0.5 * h ? std::log(h) + cell_log_average : std::log(d);
      m.mass += rho_dz;
      m.log_moment += (log_d - log_eps) * rho_dz;
      m.regular += (d < tiny ? g.robin(y) : g.regular_part(y, x)) * rho_dz;
    }
    return m;
  }

  double outer_green_integral(Point y, double r, const GreenEvaluator& g) const override {
    const Grid& grid = u_.grid();
    double s = 0.0;
    for (std::size_t k = 0; k < u_.size(); ++k) {
      const Point x = grid.position(k);
      if (distance(x, y) <= r || u_[k] <= 0.0) continue;
      s += g.green(x, y) * weights_[k] * std::exp(p_ * std::log(u_[k]));
    }
    return s;
  }

  // Mean of log|x| over the unit square centred at the origin.
  static constexpr double cell_log_average = -1.0611754268825244;

 private:
  Field u_;
  double p_;
  DiscreteLaplacian lap_;
  std::vector<double> weights_;
};

struct ExactDiskOptions {
  int lattice_radii = 400;
  int lattice_angles = 16;
  int quadrature_angles = 16;
  double tolerance = 1e-10;
};

/// The radial solution on a disk of radius R: u(x) = R^{-2/(p-1)} M v(r0 |x - c|/R).
class ExactDiskSolution final : public SolutionView {
 public:
  ExactDiskSolution(DomainSpec spec, RadialSolution s, ExactDiskOptions opt = {})
      : spec_(std::move(spec)), s_(std::move(s)), opt_(opt) {
    require(spec_.is<Disk>(), ErrorCode::InvalidArgument, "exact solution needs a disk");
    require(s_.p > 1.0, ErrorCode::InvalidArgument, "p must exceed 1");
    const Disk& d = spec_.as<Disk>();
    c_ = d.center;
    R_ = d.radius;
    scale_ = std::pow(R_, -2.0 / (s_.p - 1.0));
  }
  ExactDiskSolution(const DomainSpec& spec, double p, ExactDiskOptions opt = {})
      : ExactDiskSolution(spec, shoot(p), opt) {}

  const RadialSolution& radial() const { return s_; }
  Point center() const { return c_; }
  double height() const { return scale_ * s_.height; }

  const DomainSpec& domain() const override { return spec_; }
  double p() const override { return s_.p; }
  double value(Point x) const override {
    const double rho = distance(x, c_);
    return rho >= R_ ? 0.0 : scale_ * s_.height * s_.v(s_.r0 * rho / R_);
  }
  double max_value() const override { return height(); }
  double resolution() const override { return 0.0; }
  double energy() const override { return scale_ * scale_ * s_.energy; }
  double energy_power() const override { return scale_ * scale_ * s_.energy_power; }

  std::vector<FieldSample> samples() const override {
    std::vector<FieldSample> out;
    out.reserve(static_cast<std::size_t>(opt_.lattice_radii) * opt_.lattice_angles + 1);
    out.push_back({c_, height()});
    for (int i = 1; i < opt_.lattice_radii; ++i) {
      const double rho = R_ * i / opt_.lattice_radii;
      for (int j = 0; j < opt_.lattice_angles; ++j) {
        const double t = 2.0 * std::numbers::pi * j / opt_.lattice_angles;
        const Point x = c_ + Point{rho * std::cos(t), rho * std::sin(t)};
        out.push_back({x, value(x)});
      }
    }
    return out;
  }

  /// In the variable t = r0 |x - c|/R the rescaled coordinate is |z| = sqrt(p) t
  /// and rho(z) = v(t)^p, so every moment is 2 pi p int f(t) v(t)^p t dt.
  BallMoments ball_moments(Point y, double height_y, double log_eps, double r,
                           const GreenEvaluator& g) const override {
    require_center(y);
    (void)height_y;
    (void)log_eps;
    const double p = s_.p, sp = std::sqrt(p);
    const double to_x = R_ / s_.r0;
    BallMoments m;
    double err = 0.0;
    const double two_pi_p = 2.0 * std::numbers::pi * p;
    m.mass = two_pi_p * integrate([&](double t) { return t * density(t); }, 0.0, s_.r0 * r / R_, sp, &err);
    m.error = two_pi_p * err / m.mass;
    m.log_moment = two_pi_p * integrate(
                                  [&](double t) { return t > 0.0 ? std::log(sp * t) * t * density(t) : 0.0; }, 0.0,
                                  s_.r0 * r / R_, sp);
    if (exact_center_green(g)) {
      m.regular = std::log(R_) / (2.0 * std::numbers::pi) * m.mass;
      return m;
    }
    m.regular = two_pi_p * integrate(
                               [&](double t) {
                                 if (t <= 0.0) return 0.0;
                                 return angular_mean(t * to_x, [&](Point x) { return g.regular_part(y, x); }) * t *
                                        density(t);
                               },
                               0.0, s_.r0 * r / R_, sp);
    return m;
  }

  /// dx = (R/r0)^2 2 pi t dt and u^p = scale^p M^p v^p with M^{p-1} = r0^2.
  double outer_green_integral(Point y, double r, const GreenEvaluator& g) const override {
    require_center(y);
    const double p = s_.p, to_x = R_ / s_.r0;
    const double factor = 2.0 * std::numbers::pi * std::pow(scale_, p) * s_.height * R_ * R_;
    const auto integrand = [&](double t) {
      const double rho = t * to_x;
      if (rho >= R_) return 0.0;
      const double gbar = exact_center_green(g) ? -std::log(rho / R_) / (2.0 * std::numbers::pi)
                                                : angular_mean(rho, [&](Point x) { return g.green(x, y); });
      return gbar * t * density(t);
    };
    return factor * integrate(integrand, s_.r0 * r / R_, s_.r0, std::sqrt(p));
  }

 private:
  DomainSpec spec_;
  RadialSolution s_;
  ExactDiskOptions opt_;
  Point c_;
  double R_ = 1.0, scale_ = 1.0;

  double density(double t) const {
    const double v = s_.v(t);
    return v > 0.0 ? std::exp(s_.p * std::log(v)) : 0.0;
  }

  void require_center(Point y) const {
    require(distance(y, c_) <= 1e-12 * R_, ErrorCode::InvalidArgument,
            "exact disk quadratures are centred at the disk centre");
  }

  // From the centre of the same disk, G(x, c) = -log(|x - c|/R)/2 pi and H(c, .) = log R/2 pi.
  bool exact_center_green(const GreenEvaluator& g) const {
    return g.backend() == GreenBackend::disk_exact && g.domain().is<Disk>() &&
           distance(g.domain().as<Disk>().center, c_) == 0.0 && g.domain().as<Disk>().radius == R_;
  }

  template <class F>
  double angular_mean(double rho, F&& f) const {
    double s = 0.0;
    for (int j = 0; j < opt_.quadrature_angles; ++j) {
      const double t = 2.0 * std::numbers::pi * (j + 0.5) / opt_.quadrature_angles;
      s += f(c_ + Point{rho * std::cos(t), rho * std::sin(t)});
    }
    return s / opt_.quadrature_angles;
  }

  /// Panels at the bubble scale 1/sqrt(p) times powers of sqrt(10), then geometric to b.
  template <class F>
  double integrate(F&& f, double a, double b, double sqrt_p, double* error = nullptr) const {
    std::vector<double> breaks{a};
    for (double x = 0.1 / sqrt_p; x < b; x *= std::sqrt(10.0))
      if (x > a) breaks.push_back(x);
    breaks.push_back(b);
    double total = 0.0, err_total = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
      double err = 0.0;
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, breaks[i], breaks[i + 1], 12,
                                                                             opt_.tolerance, &err);
      err_total += err;
    }
    if (error) *error = err_total;
    return total;
  }
};

}  // namespace lane_emden
