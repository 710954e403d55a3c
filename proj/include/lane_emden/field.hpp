#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "lane_emden/grid.hpp"

namespace lane_emden {

/// Nodal values on the unknowns of a grid; the boundary value is implied 0.
class Field {
 public:
  Field() = default;
  explicit Field(GridPtr grid) : grid_(std::move(grid)), values_(Eigen::VectorXd::Zero(grid_->unknown_count())) {}
  Field(GridPtr grid, Eigen::VectorXd values) : grid_(std::move(grid)), values_(std::move(values)) {
    require(static_cast<std::size_t>(values_.size()) == grid_->unknown_count(), ErrorCode::InvalidArgument,
            "field size does not match the grid");
  }

  template <class F>
  static Field sample(GridPtr grid, F&& f) {
    Field out(grid);
    for (std::size_t k = 0; k < grid->unknown_count(); ++k) out.values_[k] = f(grid->position(k));
    return out;
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }

  /// Nodal value including the implied zero on non-unknown nodes.
  double node_value(int i, int j) const {
    const int k = grid_->unknown_at(i, j);
    return k < 0 ? 0.0 : values_[k];
  }

  double max_value() const { return values_.size() ? values_.maxCoeff() : 0.0; }
  double min_value() const { return values_.size() ? values_.minCoeff() : 0.0; }
  double max_abs() const { return values_.size() ? values_.cwiseAbs().maxCoeff() : 0.0; }
  bool all_finite() const { return values_.allFinite(); }

  /// Bilinear interpolation of the nodal values (exterior nodes contribute 0).
  double interpolate(Point x) const {
    const Point q = grid_->lattice_coordinates(x);
    const double fi = std::floor(q.x), fj = std::floor(q.y);
    const int i = static_cast<int>(fi), j = static_cast<int>(fj);
    const double s = q.x - fi, t = q.y - fj;
    return (1 - s) * (1 - t) * node_value(i, j) + s * (1 - t) * node_value(i + 1, j) +
           (1 - s) * t * node_value(i, j + 1) + s * t * node_value(i + 1, j + 1);
  }

 private:
  GridPtr grid_;
  Eigen::VectorXd values_;
};

inline double max_abs_difference(const Field& a, const Field& b) {
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

}  // namespace lane_emden
