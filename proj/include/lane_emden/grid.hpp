#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>
#include <vector>

#include "lane_emden/error.hpp"
#include "lane_emden/geometry.hpp"

namespace lane_emden {

enum class NodeKind : std::uint8_t { exterior, interior, boundary_adjacent };

/// Arm directions of the five-point stencil.
enum Direction : int { east = 0, west = 1, north = 2, south = 3 };

struct GridOptions {
  int min_nodes_across = 16;
};

/// Uniform Cartesian grid restricted to a domain. Unknowns are the interior
/// and boundary-adjacent nodes; every other node carries the Dirichlet value 0.
class Grid {
 public:
  static constexpr double boundary_snap = 1e-9;   // |d| < snap*h counts as on the boundary
  static constexpr double bisection_tol = 1e-12;  // arm fraction accuracy, in units of h

  const DomainSpec& domain() const { return spec_; }
  double spacing() const { return h_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t node_count() const { return kind_.size(); }
  std::size_t unknown_count() const { return unknown_node_.size(); }

  std::size_t node_id(int i, int j) const { return static_cast<std::size_t>(j) * nx_ + i; }
  Point node_position(int i, int j) const {
    return {anchor_.x + (i0_ + i) * h_, anchor_.y + (j0_ + j) * h_};
  }
  int node_i(std::size_t id) const { return static_cast<int>(id % nx_); }
  int node_j(std::size_t id) const { return static_cast<int>(id / nx_); }

  NodeKind kind(int i, int j) const { return kind_[node_id(i, j)]; }
  /// Unknown index of node (i, j), or -1 when the node is not an unknown.
  int unknown_at(int i, int j) const {
    if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return -1;
    return unknown_index_[node_id(i, j)];
  }

  std::size_t unknown_node(std::size_t k) const { return unknown_node_[k]; }
  Point position(std::size_t k) const {
    const std::size_t id = unknown_node_[k];
    return node_position(node_i(id), node_j(id));
  }
  /// Cut fractions (E, W, N, S) of unknown k; 1 when the arm reaches a grid node.
  const std::array<double, 4>& arms(std::size_t k) const { return arms_[k]; }
  /// Neighbor unknown indices (E, W, N, S), -1 where the arm is cut by the boundary.
  const std::array<int, 4>& neighbors(std::size_t k) const { return neighbors_[k]; }
  NodeKind unknown_kind(std::size_t k) const { return kind_[unknown_node_[k]]; }

  std::size_t count(NodeKind k) const {
    std::size_t n = 0;
    for (NodeKind x : kind_) n += (x == k);
    return n;
  }

  /// Fractional lattice coordinates of a physical point.
  Point lattice_coordinates(Point x) const {
    return {(x.x - anchor_.x) / h_ - i0_, (x.y - anchor_.y) / h_ - j0_};
  }

  friend std::shared_ptr<const Grid> build_grid(const DomainSpec&, double, GridOptions);

 private:
  Grid(DomainSpec spec, double h) : spec_(std::move(spec)), h_(h) {}

  DomainSpec spec_;
  double h_;
  Point anchor_;
  int i0_ = 0, j0_ = 0;
  int nx_ = 0, ny_ = 0;
  std::vector<NodeKind> kind_;
  std::vector<int> unknown_index_;
  std::vector<std::size_t> unknown_node_;
  std::vector<std::array<double, 4>> arms_;
  std::vector<std::array<int, 4>> neighbors_;
};

using GridPtr = std::shared_ptr<const Grid>;

namespace detail {

inline Point grid_anchor(const DomainSpec& spec) {
  if (auto c = spec.rotation_center()) return *c;
  if (spec.is<Rectangle>()) return spec.as<Rectangle>().corner_min;
  return spec.bounding_box().min;
}

/// Fraction t in (0, 1] where the segment from an inside node towards `to`
/// leaves the domain.
inline double cut_fraction(const DomainSpec& spec, Point from, Point to) {
  double lo = 0.0, hi = 1.0;
  while ((hi - lo) > Grid::bisection_tol) {
    const double mid = 0.5 * (lo + hi);
    if (spec.signed_distance(from + mid * (to - from)) < 0.0) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Builds the grid of spacing h over the domain and classifies every node.
inline GridPtr build_grid(const DomainSpec& spec, double h, GridOptions options = {}) {
  require(h > 0.0, ErrorCode::InvalidArgument, "grid spacing must be positive");
  const double nodes_across = spec.min_feature() / h;
  require(nodes_across >= options.min_nodes_across, ErrorCode::FeatureTooSmall,
          "only " + std::to_string(nodes_across) + " nodes across the smallest feature");

  std::shared_ptr<Grid> g(new Grid(spec, h));
  g->anchor_ = detail::grid_anchor(spec);
  const BoundingBox box = spec.bounding_box();
  g->i0_ = static_cast<int>(std::floor((box.min.x - g->anchor_.x) / h)) - 1;
  g->j0_ = static_cast<int>(std::floor((box.min.y - g->anchor_.y) / h)) - 1;
  const int i1 = static_cast<int>(std::ceil((box.max.x - g->anchor_.x) / h)) + 1;
  const int j1 = static_cast<int>(std::ceil((box.max.y - g->anchor_.y) / h)) + 1;
  g->nx_ = i1 - g->i0_ + 1;
  g->ny_ = j1 - g->j0_ + 1;

  const std::size_t n = static_cast<std::size_t>(g->nx_) * g->ny_;
  std::vector<double> sd(n);
  for (int j = 0; j < g->ny_; ++j)
    for (int i = 0; i < g->nx_; ++i) sd[g->node_id(i, j)] = spec.signed_distance(g->node_position(i, j));
  auto inside = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= g->nx_ || j >= g->ny_) return false;
    return sd[g->node_id(i, j)] < -Grid::boundary_snap * h;
  };

  g->kind_.assign(n, NodeKind::exterior);
  g->unknown_index_.assign(n, -1);
  constexpr std::array<std::array<int, 2>, 4> step{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  for (int j = 0; j < g->ny_; ++j)
    for (int i = 0; i < g->nx_; ++i) {
      if (!inside(i, j)) continue;
      const std::size_t id = g->node_id(i, j);
      g->unknown_index_[id] = static_cast<int>(g->unknown_node_.size());
      g->unknown_node_.push_back(id);
    }

  g->arms_.resize(g->unknown_node_.size());
  g->neighbors_.resize(g->unknown_node_.size());
  for (std::size_t k = 0; k < g->unknown_node_.size(); ++k) {
    const std::size_t id = g->unknown_node_[k];
    const int i = g->node_i(id), j = g->node_j(id);
    bool cut = false;
    for (int d = 0; d < 4; ++d) {
      const int ni = i + step[d][0], nj = j + step[d][1];
      if (inside(ni, nj)) {
        g->arms_[k][d] = 1.0;
        g->neighbors_[k][d] = g->unknown_index_[g->node_id(ni, nj)];
        continue;
      }
      cut = true;
      g->neighbors_[k][d] = -1;
      const bool on_boundary = std::abs(sd[g->node_id(ni, nj)]) < Grid::boundary_snap * h;
      g->arms_[k][d] = on_boundary ? 1.0
                                   : detail::cut_fraction(spec, g->node_position(i, j),
                                                          g->node_position(ni, nj));
    }
    g->kind_[id] = cut ? NodeKind::boundary_adjacent : NodeKind::interior;
  }

  require(!g->unknown_node_.empty(), ErrorCode::DisconnectedInterior, "grid has no interior nodes");
  std::vector<char> seen(g->unknown_node_.size(), 0);
  std::queue<std::size_t> frontier;
  frontier.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t k = frontier.front();
    frontier.pop();
    for (int nb : g->neighbors_[k])
      if (nb >= 0 && !seen[nb]) {
        seen[nb] = 1;
        ++reached;
        frontier.push(static_cast<std::size_t>(nb));
      }
  }
  require(reached == g->unknown_node_.size(), ErrorCode::DisconnectedInterior,
          "interior nodes form more than one component");
  return g;
}

}  // namespace lane_emden
