#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include <boost/random/sobol.hpp>
#include <json.hpp>

#include "lane_emden/error.hpp"
#include "lane_emden/green_function.hpp"
#include "lane_emden/parallel.hpp"

namespace lane_emden {

/// Candidate concentration set with its weights.
struct Configuration {
  std::vector<Point> points;
  std::vector<double> weights;
  double residual_norm = std::numeric_limits<double>::quiet_NaN();  // max_i |r_i|
  double green_accuracy = 0.0;

  std::size_t k() const { return points.size(); }
};

inline double default_weight() { return std::sqrt(std::exp(1.0)); }

inline void validate(const Configuration& c, const DomainSpec& spec) {
  require(!c.points.empty(), ErrorCode::InvalidArgument, "configuration needs at least one point");
  require(c.weights.size() == c.points.size(), ErrorCode::InvalidArgument, "one weight per point");
  for (double m : c.weights) require(m > 0.0 && std::isfinite(m), ErrorCode::InvalidArgument, "weights must be positive");
  for (Point x : c.points) require(spec.signed_distance(x) < 0.0, ErrorCode::PointOutside, "configuration point outside");
  const double sep = 1e-8 * spec.diameter();
  for (std::size_t i = 0; i < c.k(); ++i)
    for (std::size_t j = i + 1; j < c.k(); ++j)
      require(distance(c.points[i], c.points[j]) > sep, ErrorCode::CoincidentPoints, "configuration points coincide");
}

inline Configuration make_configuration(const DomainSpec& spec, std::vector<Point> points, std::vector<double> weights = {}) {
  Configuration c;
  if (weights.empty()) weights.assign(points.size(), default_weight());
  c.points = std::move(points);
  c.weights = std::move(weights);
  validate(c, spec);
  return c;
}

namespace detail {

using SourceList = std::vector<std::shared_ptr<const GreenSource>>;

inline SourceList make_sources(const std::vector<Point>& x, const GreenEvaluator& g) {
  SourceList src;
  src.reserve(x.size());
  for (Point y : x) src.push_back(g.source(y));
  return src;
}

/// r_i = m_i grad_x H(x_i, x_i) + sum_{l != i} m_l grad_x G(x_i, x_l), with src[l]
/// the cached corrector of x_l. The sum runs over the terms sorted by value, so
/// permuting the points permutes the residuals bit for bit.
inline std::vector<Vec2> residual_from_sources(const std::vector<Point>& x, const std::vector<double>& m,
                                               const SourceList& src) {
  const std::size_t k = x.size();
  std::vector<Vec2> r(k);
  std::vector<Vec2> terms;
  for (std::size_t i = 0; i < k; ++i) {
    terms.clear();
    terms.push_back(m[i] * src[i]->grad_regular(x[i]));
    for (std::size_t l = 0; l < k; ++l) {
      if (l == i) continue;
      const Vec2 d = x[i] - x[l];
      terms.push_back(m[l] * (src[l]->grad_regular(x[i]) - d / (2.0 * std::numbers::pi * norm2(d))));
    }
    std::sort(terms.begin(), terms.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    for (Vec2 t : terms) r[i] += t;
  }
  return r;
}

inline std::vector<Vec2> residual_unchecked(const std::vector<Point>& x, const std::vector<double>& m,
                                            const GreenEvaluator& g) {
  return residual_from_sources(x, m, make_sources(x, g));
}

inline double max_norm(const std::vector<Vec2>& r) {
  double v = 0.0;
  for (Vec2 ri : r) v = std::max(v, norm(ri));
  return v;
}

/// Smallest sum of point distances over all matchings of a to b (exhaustive up to k = 6, greedy beyond).
inline double assignment_distance(const std::vector<Point>& a, const std::vector<Point>& b) {
  const std::size_t k = a.size();
  if (k != b.size()) return std::numeric_limits<double>::infinity();
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  if (k > 6) {
    double total = 0.0;
    std::vector<bool> used(k, false);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j)
        if (!used[j] && distance(a[i], b[j]) < bd) bd = distance(a[i], b[best = j]);
      used[best] = true;
      total += bd;
    }
    return total;
  }
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += distance(a[i], b[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// Assignment distance minimised also over rotations about `center` that map
/// some point of b onto the ray of some point of a.
inline double rotation_assignment_distance(const std::vector<Point>& a, const std::vector<Point>& b, Point center) {
  double best = assignment_distance(a, b);
  for (Point pa : a)
    for (Point pb : b) {
      const Vec2 da = pa - center, db = pb - center;
      const double angle = std::atan2(da.y, da.x) - std::atan2(db.y, db.x);
      std::vector<Point> rb;
      rb.reserve(b.size());
      for (Point q : b) rb.push_back(center + rotate(q - center, angle));
      best = std::min(best, assignment_distance(a, rb));
    }
  return best;
}

}  // namespace detail

/// Per-point residual of the location system for the configuration's weights.
inline std::vector<Vec2> system_residual(const Configuration& c, const GreenEvaluator& g) {
  validate(c, g.domain());
  return detail::residual_unchecked(c.points, c.weights, g);
}

struct LocationSolveOptions {
  std::size_t starts = 0;        // 0: 64 k
  std::vector<double> weights;   // empty: all sqrt(e)
  double fd_step = 1e-6;         // fraction of the diameter
  double tolerance = 1e-8;       // max residual norm times the diameter
  double boundary_guard = 1e-3;  // fraction of the diameter; iterates within twice this are discarded
  double dedup_tolerance = 1e-6; // fraction of the diameter
  int max_iterations = 80;
  unsigned jobs = 1;
  bool modulo_rotation = true;   // disks and annuli: identify rotated copies
  std::uint64_t seed = 0;        // offset into the Sobol sequence, in blocks of 4096 draws
};

namespace detail {

class LocationNewton {
 public:
  LocationNewton(const GreenEvaluator& g, const std::vector<double>& m, const LocationSolveOptions& opt)
      : g_(g), m_(m), opt_(opt), diam_(g.domain().diameter()) {}

  bool admissible(const std::vector<Point>& x) const {
    const double guard = 2.0 * opt_.boundary_guard * diam_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (g_.domain().signed_distance(x[i]) > -guard) return false;
      for (std::size_t j = i + 1; j < x.size(); ++j)
        if (distance(x[i], x[j]) < guard) return false;
    }
    return true;
  }

  static Eigen::VectorXd stack(const std::vector<Vec2>& r) {
    Eigen::VectorXd v(2 * static_cast<Eigen::Index>(r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      v[2 * static_cast<Eigen::Index>(i)] = r[i].x;
      v[2 * static_cast<Eigen::Index>(i) + 1] = r[i].y;
    }
    return v;
  }

  std::optional<std::vector<Point>> run(std::vector<Point> x) const {
    const auto n = 2 * static_cast<Eigen::Index>(x.size());
    const double tol = opt_.tolerance / diam_, step = opt_.fd_step * diam_;
    const double max_move = 0.1 * g_.domain().min_feature();
    SourceList src = make_sources(x, g_);
    Eigen::VectorXd r = stack(residual_from_sources(x, m_, src));
    std::vector<double> history;
    for (int it = 0; it < opt_.max_iterations; ++it) {
      if (pointwise_max(r) <= tol) return x;
      // Abandon starts whose merit stagnates.
      history.push_back(r.norm());
      if (history.size() > 8 && history.back() > 0.9 * history[history.size() - 7]) return std::nullopt;
      Eigen::MatrixXd jac(n, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        const std::size_t i = static_cast<std::size_t>(c / 2);
        auto xp = x, xm = x;
        coord(xp, c) += step;
        coord(xm, c) -= step;
        if (!admissible(xp) || !admissible(xm)) return std::nullopt;
        auto sp = src, sm = src;
        sp[i] = g_.source(xp[i]);
        sm[i] = g_.source(xm[i]);
        jac.col(c) = (stack(residual_from_sources(xp, m_, sp)) - stack(residual_from_sources(xm, m_, sm))) / (2.0 * step);
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac, Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd.setThreshold(1e-10);
      Eigen::VectorXd dx = -svd.solve(r);
      double longest = 0.0;
      for (Eigen::Index i = 0; i < n; i += 2) longest = std::max(longest, std::hypot(dx[i], dx[i + 1]));
      if (longest > max_move) dx *= max_move / longest;
      const double r0 = r.norm();
      bool accepted = false;
      for (double lambda = 1.0; lambda > 1e-6; lambda *= 0.5) {
        auto xt = x;
        for (Eigen::Index c = 0; c < n; ++c) coord(xt, c) += lambda * dx[c];
        if (!admissible(xt)) continue;
        SourceList st = make_sources(xt, g_);
        const Eigen::VectorXd rt = stack(residual_from_sources(xt, m_, st));
        if (rt.norm() < (1.0 - 1e-4 * lambda) * r0) {
          x = std::move(xt);
          src = std::move(st);
          r = rt;
          accepted = true;
          break;
        }
      }
      if (!accepted) return pointwise_max(r) <= tol ? std::optional(x) : std::nullopt;
    }
    return pointwise_max(r) <= tol ? std::optional(x) : std::nullopt;
  }

 private:
  static double& coord(std::vector<Point>& x, Eigen::Index c) {
    Point& p = x[static_cast<std::size_t>(c / 2)];
    return c % 2 == 0 ? p.x : p.y;
  }
  static double pointwise_max(const Eigen::VectorXd& r) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < r.size(); i += 2) v = std::max(v, std::hypot(r[i], r[i + 1]));
    return v;
  }

  const GreenEvaluator& g_;
  const std::vector<double>& m_;
  const LocationSolveOptions& opt_;
  double diam_;
};

/// Quasi-random starts: consecutive Sobol points in the bounding box, kept when
/// well inside and separated from the points already chosen for this start.
inline std::vector<std::vector<Point>> location_starts(std::size_t k, std::size_t starts, const DomainSpec& spec,
                                                       std::uint64_t seed = 0) {
  boost::random::sobol gen(2);
  gen.discard(4096 * seed);
  const BoundingBox box = spec.bounding_box();
  const double scale = 1.0 / (static_cast<double>(gen.max()) + 1.0);
  const double depth = 0.05 * spec.min_feature(), sep = 0.05 * spec.diameter();
  std::vector<std::vector<Point>> out;
  out.reserve(starts);
  std::size_t draws = 0;
  while (out.size() < starts) {
    std::vector<Point> cfg;
    while (cfg.size() < k) {
      require(++draws < 1000 * (starts * k + 10), ErrorCode::InvalidArgument, "cannot place separated start points");
      const double u = static_cast<double>(gen()) * scale, v = static_cast<double>(gen()) * scale;
      const Point x{box.min.x + u * (box.max.x - box.min.x), box.min.y + v * (box.max.y - box.min.y)};
      if (spec.signed_distance(x) > -depth) continue;
      if (std::any_of(cfg.begin(), cfg.end(), [&](Point q) { return distance(q, x) < sep; })) continue;
      cfg.push_back(x);
    }
    out.push_back(std::move(cfg));
  }
  return out;
}

}  // namespace detail

/// All distinct solutions of the location system found by damped Newton from
/// quasi-random starts, in order of the first start that reached them.
inline std::vector<Configuration> solve_system(std::size_t k, const GreenEvaluator& g, LocationSolveOptions opt = {}) {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be at least 1");
  if (opt.starts == 0) opt.starts = 64 * k;
  if (opt.weights.empty()) opt.weights.assign(k, default_weight());
  require(opt.weights.size() == k, ErrorCode::InvalidArgument, "one weight per point");
  for (double m : opt.weights) require(m > 0.0, ErrorCode::InvalidArgument, "weights must be positive");
  require(opt.fd_step > 0.0 && opt.tolerance > 0.0 && opt.max_iterations > 0, ErrorCode::InvalidArgument,
          "bad solver settings");

  const DomainSpec& spec = g.domain();
  const auto starts = detail::location_starts(k, opt.starts, spec, opt.seed);
  const detail::LocationNewton newton(g, opt.weights, opt);
  std::vector<std::optional<std::vector<Point>>> found(starts.size());
  parallel_for(starts.size(), opt.jobs, [&](std::size_t i) { found[i] = newton.run(starts[i]); });

  const double diam = spec.diameter();
  const auto center = opt.modulo_rotation ? spec.rotation_center() : std::nullopt;
  std::vector<Configuration> out;
  for (auto& f : found) {
    if (!f) continue;
    const bool seen = std::any_of(out.begin(), out.end(), [&](const Configuration& c) {
      const double d = center ? detail::rotation_assignment_distance(c.points, *f, *center)
                              : detail::assignment_distance(c.points, *f);
      return d <= opt.dedup_tolerance * diam * static_cast<double>(k);
    });
    if (seen) continue;
    Configuration c;
    c.points = std::move(*f);
    c.weights = opt.weights;
    c.residual_norm = detail::max_norm(detail::residual_unchecked(c.points, c.weights, g));
    c.green_accuracy = g.accuracy();
    out.push_back(std::move(c));
  }
  if (out.empty()) fail(ErrorCode::NoSolutionFound, "no start converged to a solution of the location system");
  return out;
}

inline nlohmann::json to_json(const Configuration& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (Point x : c.points) pts.push_back({x.x, x.y});
  return {{"k", c.k()},
          {"points", pts},
          {"weights", c.weights},
          {"residual_norm", c.residual_norm},
          {"green_backend_accuracy", c.green_accuracy}};
}

}  // namespace lane_emden
