#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "lane_emden/field.hpp"

namespace lane_emden {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Five-point -Delta_h with Shortley-Weller unequal arms at boundary-adjacent
/// nodes and homogeneous Dirichlet data at the cut points. Kept as the sum of
/// its x and y parts so the summation-by-parts pairing can weight each
/// direction with its own dual-cell width.
class DiscreteLaplacian {
 public:
  explicit DiscreteLaplacian(GridPtr grid) : grid_(std::move(grid)) {
    const std::size_t n = grid_->unknown_count();
    const double inv_h2 = 1.0 / (grid_->spacing() * grid_->spacing());
    std::vector<Eigen::Triplet<double>> tx, ty;
    tx.reserve(3 * n);
    ty.reserve(3 * n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& th = grid_->arms(k);
      const auto& nb = grid_->neighbors(k);
      const int row = static_cast<int>(k);
      auto add_axis = [&](std::vector<Eigen::Triplet<double>>& t, int plus, int minus) {
        const double tp = th[plus], tm = th[minus];
        t.emplace_back(row, row, 2.0 * inv_h2 / (tp * tm));
        if (nb[plus] >= 0) t.emplace_back(row, nb[plus], -2.0 * inv_h2 / (tp * (tp + tm)));
        if (nb[minus] >= 0) t.emplace_back(row, nb[minus], -2.0 * inv_h2 / (tm * (tp + tm)));
      };
      add_axis(tx, east, west);
      add_axis(ty, north, south);
    }
    ax_.resize(static_cast<int>(n), static_cast<int>(n));
    ay_.resize(static_cast<int>(n), static_cast<int>(n));
    ax_.setFromTriplets(tx.begin(), tx.end());
    ay_.setFromTriplets(ty.begin(), ty.end());
    matrix_ = ax_ + ay_;
    matrix_.makeCompressed();
  }

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const SparseMatrix& matrix() const { return matrix_; }

  Field apply(const Field& u) const { return Field(grid_, matrix_ * u.values()); }

  /// Sum over grid edges of (difference)^2 / arm fraction: the discrete integral of |grad u|^2.
  double gradient_energy(const Field& u) const {
    double e = 0.0;
    for (std::size_t k = 0; k < grid_->unknown_count(); ++k) {
      const auto& th = grid_->arms(k);
      const auto& nb = grid_->neighbors(k);
      const double uk = u[k];
      for (int d = 0; d < 4; ++d) {
        if (nb[d] < 0) {
          e += uk * uk / th[d];
        } else if (d == east || d == north) {
          const double diff = uk - u[static_cast<std::size_t>(nb[d])];
          e += diff * diff;
        }
      }
    }
    return e;
  }

  /// <u, -Delta_h u> with directional dual-cell weights h^2 (theta_+ + theta_-)/2.
  double sbp_pairing(const Field& u) const {
    const Eigen::VectorXd lx = ax_ * u.values();
    const Eigen::VectorXd ly = ay_ * u.values();
    const double h2 = grid_->spacing() * grid_->spacing();
    double s = 0.0;
    for (std::size_t k = 0; k < grid_->unknown_count(); ++k) {
      const auto& th = grid_->arms(k);
      s += u[k] * h2 * (0.5 * (th[east] + th[west]) * lx[k] + 0.5 * (th[north] + th[south]) * ly[k]);
    }
    return s;
  }

 private:
  GridPtr grid_;
  SparseMatrix ax_, ay_, matrix_;
};

inline Field apply_laplacian(const DiscreteLaplacian& lap, const Field& u) { return lap.apply(u); }

}  // namespace lane_emden
