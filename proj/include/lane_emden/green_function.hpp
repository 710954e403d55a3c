#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lane_emden/error.hpp"
#include "lane_emden/geometry.hpp"

namespace lane_emden {

enum class GreenBackend { disk_exact, rectangle_images, collocation };

inline std::string to_string(GreenBackend b) {
  switch (b) {
    case GreenBackend::disk_exact: return "disk_exact";
    case GreenBackend::rectangle_images: return "rectangle_images";
    case GreenBackend::collocation: return "collocation";
  }
  return "unknown";
}

/// H(., y) for one fixed source, for repeated evaluation at many x.
class GreenSource {
 public:
  virtual ~GreenSource() = default;
  virtual double regular(Point x) const = 0;
  virtual Vec2 grad_regular(Point x) const = 0;

  Point position() const { return y_; }
  double green(Point x) const { return -std::log(distance(x, y_)) / (2.0 * std::numbers::pi) + regular(x); }

 protected:
  explicit GreenSource(Point y) : y_(y) {}
  Point y_;
};

/// Dirichlet Green function of -Delta on a domain,
///   G(x, y) = -log|x - y|/(2 pi) + H(x, y),  G = 0 on the boundary.
class GreenEvaluator {
 public:
  virtual ~GreenEvaluator() = default;

  const DomainSpec& domain() const { return spec_; }
  virtual GreenBackend backend() const = 0;
  /// Sup of the boundary residual of H; zero for closed forms up to rounding.
  virtual double accuracy() const = 0;

  double green(Point x, Point y) const {
    check_pair(x, y);
    return -std::log(distance(x, y)) / (2.0 * std::numbers::pi) + H(x, y);
  }
  double regular_part(Point x, Point y) const {
    check_inside(x);
    check_inside(y);
    return H(x, y);
  }
  double robin(Point x) const {
    check_inside(x);
    return H(x, x);
  }
  Vec2 grad_x_green(Point x, Point y) const {
    check_pair(x, y);
    const Vec2 d = x - y;
    return -d / (2.0 * std::numbers::pi * norm2(d)) + grad_x_H(x, y);
  }
  Vec2 grad_x_regular(Point x, Point y) const {
    check_inside(x);
    check_inside(y);
    return grad_x_H(x, y);
  }
  /// Gradient of x -> H(x, x); equals 2 grad_x H(x, x) when H is symmetric.
  Vec2 grad_robin(Point x) const {
    check_inside(x);
    return grad_x_H(x, x) + grad_y_H(x, x);
  }

  virtual std::shared_ptr<const GreenSource> source(Point y) const {
    check_inside(y);
    return std::make_shared<Generic>(*this, y);
  }

 protected:
  explicit GreenEvaluator(DomainSpec spec) : spec_(std::move(spec)) {}

  virtual double H(Point x, Point y) const = 0;
  virtual Vec2 grad_x_H(Point x, Point y) const = 0;
  virtual Vec2 grad_y_H(Point x, Point y) const = 0;

  void check_inside(Point x) const {
    require(spec_.signed_distance(x) < 0.0, ErrorCode::PointOutside, "point is not inside the domain");
  }
  void check_pair(Point x, Point y) const {
    check_inside(x);
    check_inside(y);
    require(distance(x, y) > 1e-14 * spec_.diameter(), ErrorCode::CoincidentPoints, "x and y coincide");
  }

  DomainSpec spec_;

 private:
  class Generic : public GreenSource {
   public:
    Generic(const GreenEvaluator& g, Point y) : GreenSource(y), g_(g) {}
    double regular(Point x) const override { return g_.H(x, y_); }
    Vec2 grad_regular(Point x) const override { return g_.grad_x_H(x, y_); }

   private:
    const GreenEvaluator& g_;
  };
};

/// Disk of radius R: H(x, y) = (1/4pi) log((|x|^2|y|^2 - 2R^2 x.y + R^4)/R^2) in centred coordinates,
/// the image-charge formula (1/2pi) log(|x - y*||y|/R) without the division by |y|.
class DiskGreen final : public GreenEvaluator {
 public:
  explicit DiskGreen(const DomainSpec& spec) : GreenEvaluator(spec) {
    require(spec.is<Disk>(), ErrorCode::InvalidArgument, "disk backend needs a disk");
    c_ = spec.as<Disk>().center;
    r2_ = spec.as<Disk>().radius * spec.as<Disk>().radius;
  }
  GreenBackend backend() const override { return GreenBackend::disk_exact; }
  double accuracy() const override { return 0.0; }

 protected:
  // |x|^2|y|^2 - 2R^2 x.y + R^4 = (R^2 - x.y)^2 + (x cross y)^2, without cancellation near the boundary.
  double q(Point x, Point y) const {
    const double a = r2_ - dot(x, y), b = cross(x, y);
    return a * a + b * b;
  }
  double H(Point x, Point y) const override {
    x = x - c_;
    y = y - c_;
    return std::log(q(x, y) / r2_) / (4.0 * std::numbers::pi);
  }
  Vec2 grad_x_H(Point x, Point y) const override {
    x = x - c_;
    y = y - c_;
    return (2.0 * norm2(y) * x - 2.0 * r2_ * y) / (4.0 * std::numbers::pi * q(x, y));
  }
  Vec2 grad_y_H(Point x, Point y) const override { return grad_x_H(y, x); }

 private:
  Point c_;
  double r2_ = 1.0;
};

struct RectangleGreenOptions {
  int max_order = 60;        // image shells |m| <= max_order
  double shell_tol = 1e-12;  // stop once a whole shell contributes less than this
};

/// Rectangle by the closed-form strip Green function across the short side
/// and reflected images along the long side:
///   S(x, y) = (1/4pi)[L(x1 - y1, x2 + y2) - L(x1 - y1, x2 - y2)],
///   L(X, Y) = log(2 sinh^2(aX) + 2 sin^2(aY)), a = pi/(2b),
///   G = sum_m [S(x, (y1 + 2ma, y2)) - S(x, (-y1 + 2ma, y2))].
/// The strip terms decay like exp(-2 pi |m| a/b), so a few shells suffice.
class RectangleGreen final : public GreenEvaluator {
 public:
  explicit RectangleGreen(const DomainSpec& spec, RectangleGreenOptions opt = {})
      : GreenEvaluator(spec), opt_(opt) {
    require(spec.is<Rectangle>(), ErrorCode::InvalidArgument, "image backend needs a rectangle");
    const auto& r = spec.as<Rectangle>();
    origin_ = r.corner_min;
    const double w = r.corner_max.x - r.corner_min.x, h = r.corner_max.y - r.corner_min.y;
    swap_ = h > w;
    a_ = swap_ ? h : w;
    b_ = swap_ ? w : h;
    alpha_ = std::numbers::pi / (2.0 * b_);
  }
  GreenBackend backend() const override { return GreenBackend::rectangle_images; }
  double accuracy() const override { return opt_.shell_tol; }

 protected:
  double H(Point x, Point y) const override { return sum(local(x), local(y)).value; }
  Vec2 grad_x_H(Point x, Point y) const override { return global(sum(local(x), local(y)).gx); }
  Vec2 grad_y_H(Point x, Point y) const override { return global(sum(local(x), local(y)).gy); }

 private:
  struct Terms {
    double value = 0.0;
    Vec2 gx, gy;
  };

  Point local(Point x) const {
    const Point d = x - origin_;
    return swap_ ? Point{d.y, d.x} : d;
  }
  Vec2 global(Vec2 g) const { return swap_ ? Vec2{g.y, g.x} : g; }

  // sinh(z)/z - 1, sin(z)/z - 1 and the derivatives of sinh(z)/z, sin(z)/z, accurate near 0.
  static double shc_m1(double z) {
    const double z2 = z * z;
    if (std::abs(z) < 0.1) return z2 / 6.0 * (1.0 + z2 / 20.0 * (1.0 + z2 / 42.0 * (1.0 + z2 / 72.0)));
    return std::sinh(z) / z - 1.0;
  }
  static double sc_m1(double z) {
    const double z2 = z * z;
    if (std::abs(z) < 0.1) return -z2 / 6.0 * (1.0 - z2 / 20.0 * (1.0 - z2 / 42.0 * (1.0 - z2 / 72.0)));
    return std::sin(z) / z - 1.0;
  }
  static double shc_d(double z) {
    const double z2 = z * z;
    if (std::abs(z) < 0.1) return z / 3.0 * (1.0 + z2 / 10.0 * (1.0 + z2 / 28.0 * (1.0 + z2 / 54.0)));
    return (z * std::cosh(z) - std::sinh(z)) / z2;
  }
  static double sc_d(double z) {
    const double z2 = z * z;
    if (std::abs(z) < 0.1) return -z / 3.0 * (1.0 - z2 / 10.0 * (1.0 - z2 / 28.0 * (1.0 - z2 / 54.0)));
    return (z * std::cos(z) - std::sin(z)) / z2;
  }

  /// L(X, Y) - log(X^2 + Y^2), smooth through X = Y = 0, and its gradient.
  void singular_pair(double X, double Y, double& f, Vec2& g) const {
    const double zx = alpha_ * X, zy = alpha_ * Y;
    const double am1 = shc_m1(zx) * (shc_m1(zx) + 2.0), bm1 = sc_m1(zy) * (sc_m1(zy) + 2.0);
    const double A = 1.0 + am1, B = 1.0 + bm1;
    const double X2 = X * X, Y2 = Y * Y, rho2 = X2 + Y2;
    if (rho2 == 0.0) {
      f = std::log(2.0 * alpha_ * alpha_);
      g = {0.0, 0.0};
      return;
    }
    const double Q = X2 * A + Y2 * B;
    f = std::log(2.0 * alpha_ * alpha_) + std::log(Q / rho2);
    const double AX = 2.0 * alpha_ * (1.0 + shc_m1(zx)) * shc_d(zx);
    const double BY = 2.0 * alpha_ * (1.0 + sc_m1(zy)) * sc_d(zy);
    const double amb = am1 - bm1;
    g = {2.0 * X * Y2 * amb / (Q * rho2) + X2 * AX / Q, -2.0 * Y * X2 * amb / (Q * rho2) + Y2 * BY / Q};
  }

  static double dterm(double z2x, double z2y) { return std::cosh(z2x) - std::cos(z2y); }

  /// sigma/(4pi)[L(X, Yp) - L(X, Ym)] and its gradient in (X, Yp, Ym).
  void image_pair(double X, double Yp, double Ym, double& v, double& dX, double& dYp, double& dYm) const {
    const double zx = 2.0 * alpha_ * X;
    if (std::abs(zx) > 300.0) {
      v = dX = dYp = dYm = 0.0;
      return;
    }
    const double dp = dterm(zx, 2.0 * alpha_ * Yp), dm = dterm(zx, 2.0 * alpha_ * Ym);
    v = std::log1p((std::cos(2.0 * alpha_ * Ym) - std::cos(2.0 * alpha_ * Yp)) / dm);
    const double s = 2.0 * alpha_ * std::sinh(zx);
    dX = s * (dm - dp) / (dp * dm);
    dYp = 2.0 * alpha_ * std::sin(2.0 * alpha_ * Yp) / dp;
    dYm = -2.0 * alpha_ * std::sin(2.0 * alpha_ * Ym) / dm;
  }

  Terms sum(Point x, Point y) const {
    const double inv = 1.0 / (4.0 * std::numbers::pi);
    const double Yp = x.y + y.y, Ym = x.y - y.y;
    Terms t;
    // m = 0, sigma = +1: the pair containing the singularity.
    {
      const double X = x.x - y.x;
      double f;
      Vec2 gf;
      singular_pair(X, Ym, f, gf);
      const double zx = 2.0 * alpha_ * X, dp = dterm(zx, 2.0 * alpha_ * Yp);
      const double lp = std::log(dp);
      const Vec2 glp{2.0 * alpha_ * std::sinh(zx) / dp, 2.0 * alpha_ * std::sin(2.0 * alpha_ * Yp) / dp};
      t.value = inv * (lp - f);
      // d/dx: X' = 1, Yp' = 1, Ym' = 1; d/dy: X' = -1, Yp' = 1, Ym' = -1.
      t.gx = inv * Vec2{glp.x - gf.x, glp.y - gf.y};
      t.gy = inv * Vec2{-glp.x + gf.x, glp.y + gf.y};
    }
    auto add = [&](int m, double sigma) {
      const double X = x.x - sigma * y.x - 2.0 * m * a_;
      double v, dX, dYp, dYm;
      image_pair(X, Yp, Ym, v, dX, dYp, dYm);
      const double c = sigma * inv;
      t.value += c * v;
      t.gx += c * Vec2{dX, dYp + dYm};
      t.gy += c * Vec2{-sigma * dX, dYp - dYm};
      return std::abs(c * v);
    };
    add(0, -1.0);
    for (int m = 1; m <= opt_.max_order; ++m) {
      const double shell = add(m, 1.0) + add(m, -1.0) + add(-m, 1.0) + add(-m, -1.0);
      if (shell < opt_.shell_tol) break;
    }
    return t;
  }

  RectangleGreenOptions opt_;
  Point origin_;
  bool swap_ = false;
  double a_ = 1.0, b_ = 1.0, alpha_ = 1.0;
};

struct CollocationOptions {
  std::size_t outer_charges = 128;
  std::size_t inner_charges = 96;
  std::size_t points_per_charge = 4;
  double offset_fraction = 0.15;  // charge offset as a fraction of the diameter
  double svd_cutoff = 1e-12;      // relative singular-value truncation
};

/// Method of fundamental solutions for the corrector: H(., y) is the harmonic
/// function with boundary values log|x - y|/(2pi), expanded in
/// log|x - xi_j|/(2pi) over charges xi_j outside the domain plus a constant.
/// A truncated-SVD pseudo-inverse maps boundary data to coefficients.
class CollocationGreen final : public GreenEvaluator {
 public:
  explicit CollocationGreen(const DomainSpec& spec, CollocationOptions opt = {}) : GreenEvaluator(spec), opt_(opt) {
    const double diam = spec.diameter();
    const auto charge_curves = spec.sample_boundary(opt.outer_charges, opt.inner_charges);
    const auto colloc_curves =
        spec.sample_boundary(opt.outer_charges * opt.points_per_charge, opt.inner_charges * opt.points_per_charge);
    for (const auto& c : charge_curves) {
      const double off = std::min(opt.offset_fraction * diam, c.max_offset);
      for (std::size_t i = 0; i < c.points.size(); ++i) {
        const Point xi = c.points[i] + off * c.normals[i];
        // Normals are discontinuous at polygon corners; drop charges that land near or inside the domain.
        if (spec.signed_distance(xi) > 0.5 * off) charges_.push_back(xi);
      }
    }
    for (const auto& c : colloc_curves) colloc_.insert(colloc_.end(), c.points.begin(), c.points.end());

    const auto m = static_cast<Eigen::Index>(colloc_.size()), n = static_cast<Eigen::Index>(charges_.size());
    Eigen::MatrixXd phi(m, n + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) phi(i, j) = kernel(colloc_[i], charges_[j]);
      phi(i, n) = 1.0;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k)
      if (s[k] > opt.svd_cutoff * s[0]) inv[k] = 1.0 / s[k];
    pinv_ = (svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose()).cast<long double>();
    accuracy_ = estimate_accuracy();
  }

  GreenBackend backend() const override { return GreenBackend::collocation; }
  double accuracy() const override { return accuracy_; }
  /// Sources closer than this to the boundary are outside the accuracy estimate.
  double valid_depth() const { return 0.1 * spec_.min_feature(); }
  const std::vector<Point>& charges() const { return charges_; }
  const std::vector<Point>& collocation_points() const { return colloc_; }

  std::shared_ptr<const GreenSource> source(Point y) const override {
    check_inside(y);
    return std::make_shared<Source>(*this, y);
  }

 protected:
  double H(Point x, Point y) const override { return Source(*this, y, false).regular(x); }
  Vec2 grad_x_H(Point x, Point y) const override { return Source(*this, y, false).grad_regular(x); }
  Vec2 grad_y_H(Point x, Point y) const override {
    const Source s(*this, y, true);
    return {s.eval(s.dc1, x), s.eval(s.dc2, x)};
  }

 private:
  static double kernel(Point x, Point xi) { return std::log(distance(x, xi)) / (2.0 * std::numbers::pi); }

  // Weights and sums in extended precision: in double the pseudo-inverse
  // leaves ~1e-9 of rounding noise in H as a function of y.
  using ExtVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

  class Source final : public GreenSource {
   public:
    Source(const CollocationGreen& g, Point y, bool with_y_derivative = false) : GreenSource(y), g_(g) {
      const auto m = static_cast<Eigen::Index>(g.colloc_.size());
      ExtVector data(m), d1, d2;
      if (with_y_derivative) {
        d1.resize(m);
        d2.resize(m);
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        const long double dx = static_cast<long double>(g.colloc_[i].x) - y.x;
        const long double dy = static_cast<long double>(g.colloc_[i].y) - y.y;
        const long double r2 = dx * dx + dy * dy;
        data[i] = std::log(r2) / (4.0L * std::numbers::pi_v<long double>);
        if (with_y_derivative) {
          const long double s = -1.0L / (2.0L * std::numbers::pi_v<long double> * r2);
          d1[i] = s * dx;
          d2[i] = s * dy;
        }
      }
      c = g.pinv_ * data;
      if (with_y_derivative) {
        dc1 = g.pinv_ * d1;
        dc2 = g.pinv_ * d2;
      }
    }

    double regular(Point x) const override { return eval(c, x); }
    Vec2 grad_regular(Point x) const override {
      long double gx = 0.0L, gy = 0.0L;
      const std::size_t n = g_.charges_.size();
      for (std::size_t j = 0; j < n; ++j) {
        const long double dx = static_cast<long double>(x.x) - g_.charges_[j].x;
        const long double dy = static_cast<long double>(x.y) - g_.charges_[j].y;
        const long double w = c[static_cast<Eigen::Index>(j)] / (dx * dx + dy * dy);
        gx += w * dx;
        gy += w * dy;
      }
      const long double k = 2.0L * std::numbers::pi_v<long double>;
      return {static_cast<double>(gx / k), static_cast<double>(gy / k)};
    }

    double eval(const ExtVector& coef, Point x) const {
      const std::size_t n = g_.charges_.size();
      long double v = 0.0L;
      for (std::size_t j = 0; j < n; ++j) {
        const long double dx = static_cast<long double>(x.x) - g_.charges_[j].x;
        const long double dy = static_cast<long double>(x.y) - g_.charges_[j].y;
        v += coef[static_cast<Eigen::Index>(j)] * std::log(dx * dx + dy * dy);
      }
      return static_cast<double>(v / (4.0L * std::numbers::pi_v<long double>) + coef[static_cast<Eigen::Index>(n)]);
    }

    ExtVector c, dc1, dc2;

   private:
    const CollocationGreen& g_;
  };

  /// Boundary residual sup of H(., y) - log|. - y|/(2pi) over probe sources at
  /// least valid_depth() inside, on boundary points between the collocation points.
  /// By the maximum principle this bounds the corrector error for those sources.
  double estimate_accuracy() const {
    const double depth = valid_depth();
    std::vector<Point> probes;
    for (const auto& curve : spec_.sample_boundary(24, 24))
      for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const Point y = curve.points[i] - depth * curve.normals[i];
        if (spec_.signed_distance(y) <= -0.99 * depth) probes.push_back(y);
      }
    const BoundingBox box = spec_.bounding_box();
    for (int i = 1; i < 6; ++i)
      for (int j = 1; j < 6; ++j) {
        const Point y{box.min.x + (box.max.x - box.min.x) * i / 6.0, box.min.y + (box.max.y - box.min.y) * j / 6.0};
        if (spec_.signed_distance(y) < -depth) probes.push_back(y);
      }
    std::vector<Point> check;
    for (const auto& curve : spec_.sample_boundary(opt_.outer_charges * 2 * opt_.points_per_charge,
                                                   opt_.inner_charges * 2 * opt_.points_per_charge))
      check.insert(check.end(), curve.points.begin(), curve.points.end());
    const auto m = static_cast<Eigen::Index>(check.size()), n = static_cast<Eigen::Index>(charges_.size());
    Eigen::MatrixXd phi(m, n + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) phi(i, j) = kernel(check[i], charges_[j]);
      phi(i, n) = 1.0;
    }
    double worst = 0.0;
    for (Point y : probes) {
      const Source s(*this, y);
      const Eigen::VectorXd h = phi * s.c.cast<double>();
      for (Eigen::Index i = 0; i < m; ++i) worst = std::max(worst, std::abs(h[i] - kernel(check[i], y)));
    }
    return worst;
  }

  CollocationOptions opt_;
  std::vector<Point> charges_, colloc_;
  Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> pinv_;
  double accuracy_ = 0.0;
};

struct GreenOptions {
  bool force_collocation = false;
  RectangleGreenOptions rectangle;
  CollocationOptions collocation;
};

/// Closed form on disks, images on rectangles, collocation elsewhere.
inline std::shared_ptr<const GreenEvaluator> make_green_evaluator(const DomainSpec& spec, GreenOptions opt = {}) {
  if (!opt.force_collocation) {
    if (spec.is<Disk>()) return std::make_shared<DiskGreen>(spec);
    if (spec.is<Rectangle>()) return std::make_shared<RectangleGreen>(spec, opt.rectangle);
  }
  return std::make_shared<CollocationGreen>(spec, opt.collocation);
}

}  // namespace lane_emden
