#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lane_emden/error.hpp"

namespace lane_emden {

struct Point {
  double x = 0.0;
  double y = 0.0;

  constexpr Point& operator+=(Point o) { x += o.x; y += o.y; return *this; }
  constexpr Point& operator-=(Point o) { x -= o.x; y -= o.y; return *this; }
  constexpr Point& operator*=(double s) { x *= s; y *= s; return *this; }
  friend constexpr Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Point operator-(Point a) { return {-a.x, -a.y}; }
  friend constexpr Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend constexpr Point operator*(Point a, double s) { return {s * a.x, s * a.y}; }
  friend constexpr Point operator/(Point a, double s) { return {a.x / s, a.y / s}; }
  friend constexpr bool operator==(Point a, Point b) = default;
};

/// Gradients share the representation of points.
using Vec2 = Point;

constexpr double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
constexpr double norm2(Point a) { return dot(a, a); }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

inline Point rotate(Point a, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

struct Disk {
  Point center;
  double radius = 1.0;
};

struct Annulus {
  Point center;
  double r_inner = 0.5;
  double r_outer = 1.0;
};

struct Rectangle {
  Point corner_min;
  Point corner_max{1.0, 1.0};
};

/// Vertices in counter-clockwise order, no repeated closing vertex.
struct Polygon {
  std::vector<Point> vertices;
};

struct BoundingBox {
  Point min;
  Point max;
};

/// A sampled closed boundary curve: points with the outward normal of Omega.
struct BoundarySample {
  std::vector<Point> points;
  std::vector<Vec2> normals;
  bool is_hole = false;
  /// Largest admissible offset along the normal before the copy degenerates.
  double max_offset = 0.0;
};

namespace detail {

inline double point_segment_distance(Point x, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = norm2(ab);
  double t = len2 > 0.0 ? dot(x - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(x, a + t * ab);
}

inline bool segments_intersect(Point a, Point b, Point c, Point d) {
  auto orient = [](Point p, Point q, Point r) { return cross(q - p, r - p); };
  const double d1 = orient(c, d, a), d2 = orient(c, d, b);
  const double d3 = orient(a, b, c), d4 = orient(a, b, d);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

inline int winding_number(const std::vector<Point>& v, Point x) {
  int wn = 0;
  const std::size_t n = v.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = v[i], b = v[(i + 1) % n];
    if (a.y <= x.y) {
      if (b.y > x.y && cross(b - a, x - a) > 0) ++wn;
    } else {
      if (b.y <= x.y && cross(b - a, x - a) < 0) --wn;
    }
  }
  return wn;
}

inline BoundarySample circle_sample(Point c, double r, std::size_t n, bool hole, double max_offset) {
  BoundarySample s;
  s.is_hole = hole;
  s.max_offset = max_offset;
  s.points.reserve(n);
  s.normals.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const Point dir{std::cos(t), std::sin(t)};
    s.points.push_back(c + r * dir);
    s.normals.push_back(hole ? -dir : dir);
  }
  return s;
}

inline BoundarySample polyline_sample(const std::vector<Point>& v, std::size_t n, double max_offset) {
  double perimeter = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) perimeter += distance(v[i], v[(i + 1) % v.size()]);
  BoundarySample s;
  s.max_offset = max_offset;
  const double ds = perimeter / static_cast<double>(n);
  double along = 0.5 * ds;
  std::size_t edge = 0;
  double edge_start = 0.0;
  for (std::size_t i = 0; i < n; ++i, along += ds) {
    while (edge + 1 < v.size() &&
           along > edge_start + distance(v[edge], v[(edge + 1) % v.size()])) {
      edge_start += distance(v[edge], v[(edge + 1) % v.size()]);
      ++edge;
    }
    const Point a = v[edge], b = v[(edge + 1) % v.size()];
    const double len = distance(a, b);
    const double t = std::clamp((along - edge_start) / len, 0.0, 1.0);
    s.points.push_back(a + t * (b - a));
    // Counter-clockwise orientation puts the outward normal on the right.
    s.normals.push_back(Point{(b - a).y, -(b - a).x} / len);
  }
  return s;
}

}  // namespace detail

/// Geometry of the planar domain. Construction validates the invariants of
/// each variant; afterwards the object is immutable.
class DomainSpec {
 public:
  using Shape = std::variant<Disk, Annulus, Rectangle, Polygon>;

  explicit DomainSpec(Shape shape) : shape_(std::move(shape)) { validate(); }

  static DomainSpec disk(Point center, double radius) { return DomainSpec(Disk{center, radius}); }
  static DomainSpec annulus(Point center, double r_inner, double r_outer) {
    return DomainSpec(Annulus{center, r_inner, r_outer});
  }
  static DomainSpec rectangle(Point corner_min, Point corner_max) {
    return DomainSpec(Rectangle{corner_min, corner_max});
  }
  static DomainSpec polygon(std::vector<Point> vertices) { return DomainSpec(Polygon{std::move(vertices)}); }

  const Shape& shape() const { return shape_; }

  template <class T>
  bool is() const { return std::holds_alternative<T>(shape_); }

  template <class T>
  const T& as() const { return std::get<T>(shape_); }

  std::string kind() const {
    return std::visit(
        [](const auto& s) -> std::string {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) return "disk";
          else if constexpr (std::is_same_v<S, Annulus>) return "annulus";
          else if constexpr (std::is_same_v<S, Rectangle>) return "rectangle";
          else return "polygon";
        },
        shape_);
  }

  /// Negative inside, positive outside; magnitude is the Euclidean distance to the boundary.
  double signed_distance(Point x) const {
    return std::visit(
        [x](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            return distance(x, s.center) - s.radius;
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const double r = distance(x, s.center);
            return std::max(s.r_inner - r, r - s.r_outer);
          } else if constexpr (std::is_same_v<S, Rectangle>) {
            const Point c = 0.5 * (s.corner_min + s.corner_max);
            const Point half = 0.5 * (s.corner_max - s.corner_min);
            const double qx = std::abs(x.x - c.x) - half.x;
            const double qy = std::abs(x.y - c.y) - half.y;
            const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
            return outside + std::min(std::max(qx, qy), 0.0);
          } else {
            double d = std::numeric_limits<double>::infinity();
            const auto& v = s.vertices;
            for (std::size_t i = 0; i < v.size(); ++i)
              d = std::min(d, detail::point_segment_distance(x, v[i], v[(i + 1) % v.size()]));
            return detail::winding_number(v, x) != 0 ? -d : d;
          }
        },
        shape_);
  }

  bool contains(Point x) const { return signed_distance(x) < 0.0; }

  BoundingBox bounding_box() const {
    return std::visit(
        [](const auto& s) -> BoundingBox {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            return {s.center - Point{s.radius, s.radius}, s.center + Point{s.radius, s.radius}};
          } else if constexpr (std::is_same_v<S, Annulus>) {
            return {s.center - Point{s.r_outer, s.r_outer}, s.center + Point{s.r_outer, s.r_outer}};
          } else if constexpr (std::is_same_v<S, Rectangle>) {
            return {s.corner_min, s.corner_max};
          } else {
            BoundingBox b{s.vertices.front(), s.vertices.front()};
            for (Point p : s.vertices) {
              b.min = {std::min(b.min.x, p.x), std::min(b.min.y, p.y)};
              b.max = {std::max(b.max.x, p.x), std::max(b.max.y, p.y)};
            }
            return b;
          }
        },
        shape_);
  }

  double diameter() const {
    return std::visit(
        [](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) return 2.0 * s.radius;
          else if constexpr (std::is_same_v<S, Annulus>) return 2.0 * s.r_outer;
          else if constexpr (std::is_same_v<S, Rectangle>) return distance(s.corner_min, s.corner_max);
          else {
            double d = 0.0;
            for (Point a : s.vertices)
              for (Point b : s.vertices) d = std::max(d, distance(a, b));
            return d;
          }
        },
        shape_);
  }

  /// Smallest length the grid has to resolve: radius, gap width or shortest edge.
  double min_feature() const {
    return std::visit(
        [](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) return s.radius;
          else if constexpr (std::is_same_v<S, Annulus>) return s.r_outer - s.r_inner;
          else if constexpr (std::is_same_v<S, Rectangle>) {
            return std::min(s.corner_max.x - s.corner_min.x, s.corner_max.y - s.corner_min.y);
          } else {
            double e = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < s.vertices.size(); ++i)
              e = std::min(e, distance(s.vertices[i], s.vertices[(i + 1) % s.vertices.size()]));
            return e;
          }
        },
        shape_);
  }

  /// Center of rotational symmetry, if the domain has one (disk, annulus).
  std::optional<Point> rotation_center() const {
    if (const auto* d = std::get_if<Disk>(&shape_)) return d->center;
    if (const auto* a = std::get_if<Annulus>(&shape_)) return a->center;
    return std::nullopt;
  }

  /// Boundary components: the outer curve with `n_outer` points, holes with `n_inner`.
  std::vector<BoundarySample> sample_boundary(std::size_t n_outer, std::size_t n_inner = 0) const {
    return std::visit(
        [&](const auto& s) -> std::vector<BoundarySample> {
          using S = std::decay_t<decltype(s)>;
          const double inf = std::numeric_limits<double>::infinity();
          if constexpr (std::is_same_v<S, Disk>) {
            return {detail::circle_sample(s.center, s.radius, n_outer, false, inf)};
          } else if constexpr (std::is_same_v<S, Annulus>) {
            const std::size_t ni = n_inner ? n_inner : std::max<std::size_t>(16, n_outer / 2);
            return {detail::circle_sample(s.center, s.r_outer, n_outer, false, inf),
                    detail::circle_sample(s.center, s.r_inner, ni, true, s.r_inner / 3.0)};
          } else if constexpr (std::is_same_v<S, Rectangle>) {
            const std::vector<Point> v{s.corner_min,
                                       {s.corner_max.x, s.corner_min.y},
                                       s.corner_max,
                                       {s.corner_min.x, s.corner_max.y}};
            return {detail::polyline_sample(v, n_outer, inf)};
          } else {
            return {detail::polyline_sample(s.vertices, n_outer, inf)};
          }
        },
        shape_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            require(s.radius > 0.0, ErrorCode::InvalidArgument, "disk radius must be positive");
          } else if constexpr (std::is_same_v<S, Annulus>) {
            require(s.r_inner > 0.0 && s.r_inner < s.r_outer, ErrorCode::InvalidArgument,
                    "annulus needs 0 < r_inner < r_outer");
          } else if constexpr (std::is_same_v<S, Rectangle>) {
            require(s.corner_min.x < s.corner_max.x && s.corner_min.y < s.corner_max.y,
                    ErrorCode::InvalidArgument, "rectangle needs corner_min < corner_max");
          } else {
            const auto& v = s.vertices;
            require(v.size() >= 3, ErrorCode::InvalidArgument, "polygon needs at least 3 vertices");
            double area2 = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) area2 += cross(v[i], v[(i + 1) % v.size()]);
            require(area2 > 0.0, ErrorCode::InvalidArgument, "polygon must be counter-clockwise");
            const std::size_t n = v.size();
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t j = i + 1; j < n; ++j) {
                if (j == i + 1 || (i == 0 && j == n - 1)) continue;
                require(!detail::segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]),
                        ErrorCode::InvalidArgument, "polygon must be simple");
              }
          }
        },
        shape_);
  }

  Shape shape_;
};

}  // namespace lane_emden
