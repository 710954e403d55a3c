#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "lane_emden/field.hpp"
#include "lane_emden/laplacian.hpp"

namespace lane_emden {

struct NewtonSettings {
  double tolerance = 1e-10;  // max-norm residual, relative to max(1, |u^p|_inf)
  int max_iterations = 40;
  double backtrack = 0.5;
  double min_step = 1e-4;
  double linear_tolerance = 1e-10;

  void validate() const {
    require(tolerance > 0.0, ErrorCode::InvalidArgument, "Newton tolerance must be positive");
    require(max_iterations >= 1, ErrorCode::InvalidArgument, "Newton needs at least one iteration");
    require(backtrack > 0.0 && backtrack < 1.0, ErrorCode::InvalidArgument, "backtracking factor must lie in (0,1)");
    require(linear_tolerance > 0.0, ErrorCode::InvalidArgument, "linear tolerance must be positive");
  }
};

/// (u_+)^p evaluated in log space; zero for u <= 0.
inline double positive_power(double u, double p) { return u > 0.0 ? std::exp(p * std::log(u)) : 0.0; }

inline Eigen::VectorXd positive_power(const Eigen::VectorXd& u, double p) {
  return u.unaryExpr([p](double v) { return positive_power(v, p); });
}

/// -Delta_h u - (u_+)^p.
inline Field residual(const DiscreteLaplacian& lap, const Field& u, double p) {
  require(p > 1.0, ErrorCode::InvalidArgument, "exponent must exceed 1");
  return Field(u.grid_ptr(), lap.matrix() * u.values() - positive_power(u.values(), p));
}

struct NewtonResult {
  Field u;
  int iterations = 0;
  double residual = 0.0;       // max-norm of the final residual
  int lu_fallbacks = 0;        // linear solves that fell back to sparse LU
};

namespace detail {

inline double residual_scale(const Eigen::VectorXd& u, double p) {
  double m = 0.0;
  for (double v : u) m = std::max(m, positive_power(v, p));
  return std::max(1.0, m);
}

/// LDLT factors of the symmetric part of the Jacobian, used as a preconditioner.
struct SymmetricPartPreconditioner {
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>* factor = nullptr;
  template <class M>
  SymmetricPartPreconditioner& analyzePattern(const M&) { return *this; }
  template <class M>
  SymmetricPartPreconditioner& factorize(const M&) { return *this; }
  template <class M>
  SymmetricPartPreconditioner& compute(const M&) { return *this; }
  template <class R>
  Eigen::VectorXd solve(const R& b) const { return factor->solve(b); }
  Eigen::ComputationInfo info() const { return Eigen::Success; }
};

/// Jacobians -Delta_h - diag(d) share one sparsity pattern. BiCGSTAB runs with
/// the exact factorization of the symmetric part, which differs from the
/// Jacobian only in the Shortley-Weller rows; sparse LU is the fallback.
class JacobianSolver {
 public:
  explicit JacobianSolver(const SparseMatrix& a) {
    const Eigen::SparseMatrix<double> c(a);
    sym_ = 0.5 * (Eigen::SparseMatrix<double>(c.transpose()) + c);
    base_diag_ = sym_.diagonal();
    sym_diag_.resize(sym_.rows());
    for (int r = 0; r < sym_.rows(); ++r) sym_diag_[r] = &sym_.coeffRef(r, r);
    ldlt_.analyzePattern(sym_);
  }

  Eigen::VectorXd solve(const SparseMatrix& j, const Eigen::VectorXd& b, const Eigen::VectorXd& shift, double tol,
                        int& fallbacks) {
    for (int r = 0; r < sym_.rows(); ++r) *sym_diag_[r] = base_diag_[r] - shift[r];
    ldlt_.factorize(sym_);
    if (ldlt_.info() == Eigen::Success) {
      Eigen::BiCGSTAB<SparseMatrix, SymmetricPartPreconditioner> krylov;
      krylov.preconditioner().factor = &ldlt_;
      krylov.setTolerance(tol);
      krylov.setMaxIterations(100);
      krylov.compute(j);
      Eigen::VectorXd x = krylov.solve(b);
      if (krylov.info() == Eigen::Success && x.allFinite() && (j * x - b).norm() <= tol * b.norm()) return x;
    }
    ++fallbacks;
    const Eigen::SparseMatrix<double> c(j);
    if (!lu_) {
      lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      lu_->analyzePattern(c);
    }
    lu_->factorize(c);
    if (lu_->info() != Eigen::Success) fail(ErrorCode::NewtonStalled, "Jacobian is singular");
    Eigen::VectorXd x = lu_->solve(b);
    x += lu_->solve(b - c * x);
    if (!x.allFinite() || (c * x - b).norm() > tol * b.norm())
      fail(ErrorCode::NewtonStalled, "linear solve missed the relative tolerance");
    return x;
  }

 private:
  Eigen::SparseMatrix<double> sym_;
  Eigen::VectorXd base_diag_;
  std::vector<double*> sym_diag_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

}  // namespace detail

/// Damped Newton for -Delta_h u = (u_+)^p with backtracking on the residual 2-norm.
inline NewtonResult newton_solve(const DiscreteLaplacian& lap, const Field& u0, double p,
                                 const NewtonSettings& s = {}) {
  s.validate();
  require(p > 1.0, ErrorCode::InvalidArgument, "exponent must exceed 1");
  require(u0.all_finite(), ErrorCode::InvalidArgument, "initial guess must be finite");

  const SparseMatrix& a = lap.matrix();
  const int n = static_cast<int>(a.rows());
  std::vector<double*> diag(n);
  SparseMatrix jac = a;
  for (int r = 0; r < n; ++r) diag[r] = &jac.coeffRef(r, r);
  const Eigen::VectorXd a_diag = a.diagonal();
  Eigen::VectorXd shift(n);
  detail::JacobianSolver linear(a);

  NewtonResult out{u0, 0, 0.0, 0};
  Eigen::VectorXd u = u0.values();
  Eigen::VectorXd res = a * u - positive_power(u, p);
  for (;;) {
    out.residual = res.cwiseAbs().maxCoeff();
    if (out.residual <= s.tolerance * detail::residual_scale(u, p)) break;
    if (out.iterations >= s.max_iterations)
      fail(ErrorCode::NewtonStalled, "no convergence in " + std::to_string(s.max_iterations) +
                                         " iterations (residual " + std::to_string(out.residual) + ")");
    for (int r = 0; r < n; ++r) {
      shift[r] = p * positive_power(u[r], p - 1.0);
      *diag[r] = a_diag[r] - shift[r];
    }
    const Eigen::VectorXd step = linear.solve(jac, -res, shift, s.linear_tolerance, out.lu_fallbacks);

    const double base = res.norm();
    double lambda = 1.0;
    bool accepted = false;
    while (lambda >= s.min_step) {
      Eigen::VectorXd trial = u + lambda * step;
      Eigen::VectorXd trial_res = a * trial - positive_power(trial, p);
      if (trial_res.allFinite() && trial_res.norm() < (1.0 - 1e-4 * lambda) * base) {
        u = std::move(trial);
        res = std::move(trial_res);
        accepted = true;
        break;
      }
      lambda *= s.backtrack;
    }
    ++out.iterations;
    if (!accepted) fail(ErrorCode::NewtonStalled, "line search fell below the minimum step");
  }

  if (u.cwiseAbs().maxCoeff() < 1e-8) fail(ErrorCode::ConvergedToZero, "Newton converged to the trivial solution");
  out.u = Field(u0.grid_ptr(), std::move(u));
  return out;
}

inline NewtonResult newton_solve(const Field& u0, double p, const NewtonSettings& s = {}) {
  return newton_solve(DiscreteLaplacian(u0.grid_ptr()), u0, p, s);
}

struct Eigenpair {
  double lambda = 0.0;
  Field phi;  // max-norm 1, positive
  int iterations = 0;
};

/// First Dirichlet eigenpair of -Delta_h by inverse iteration.
inline Eigenpair first_eigenpair(const DiscreteLaplacian& lap, int max_iterations = 500) {
  Eigen::SparseMatrix<double> col(lap.matrix());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(col);
  require(lu.info() == Eigen::Success, ErrorCode::EigSolveFailed, "Laplacian factorization failed");
  Eigen::VectorXd phi = Eigen::VectorXd::Ones(lap.matrix().rows());
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd next = lu.solve(phi);
    const double scale = next.cwiseAbs().maxCoeff();
    require(scale > 0.0 && std::isfinite(scale), ErrorCode::EigSolveFailed, "inverse iteration broke down");
    next /= scale;
    if (next.sum() < 0) next = -next;
    const double lambda = 1.0 / scale;
    phi = std::move(next);
    const double eig_res = (lap.matrix() * phi - lambda * phi).cwiseAbs().maxCoeff() / lambda;
    if (eig_res < 1e-8) {
      // Rayleigh-type refinement of the eigenvalue from the converged vector.
      const Eigen::VectorXd aphi = lap.matrix() * phi;
      return {aphi.dot(phi) / phi.dot(phi), Field(lap.grid_ptr(), std::move(phi)), it};
    }
  }
  fail(ErrorCode::EigSolveFailed, "inverse iteration did not reach eigenresidual 1e-8");
}

/// alpha*phi_1 with alpha = lambda_1^(1/(p0-1)).
inline Field initial_guess(const DiscreteLaplacian& lap, double p0) {
  require(p0 > 1.0 && p0 <= 5.0, ErrorCode::InvalidArgument, "initial_guess needs 1 < p0 <= 5");
  const Eigenpair e = first_eigenpair(lap);
  const double alpha = std::pow(e.lambda, 1.0 / (p0 - 1.0));
  return Field(lap.grid_ptr(), alpha * e.phi.values());
}

/// Sum of truncated bubbles m(1 + U((x - x_i)/eps)/p)_+ with m = sqrt(e) and
/// eps = [p m^(p-1)]^(-1/2). When eps < h the centres move to the nearest node.
inline Field multi_bubble_guess(const GridPtr& grid, double p, const std::vector<Point>& centers) {
  require(p >= 10.0, ErrorCode::InvalidArgument, "multi_bubble_guess needs p >= 10");
  require(!centers.empty(), ErrorCode::InvalidArgument, "need at least one center");
  const double h = grid->spacing();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    require(grid->domain().signed_distance(centers[i]) < -2.0 * h, ErrorCode::CenterOutside,
            "bubble center closer than 2h to the boundary");
    for (std::size_t j = 0; j < i; ++j)
      require(!(centers[i] == centers[j]), ErrorCode::InvalidArgument, "bubble centers must be distinct");
  }
  const double m = std::exp(0.5);
  const double log_eps = -0.5 * (std::log(p) + (p - 1.0) * std::log(m));
  // A bubble narrower than the grid would miss every node: centre it on the nearest one.
  std::vector<Point> placed = centers;
  if (log_eps < std::log(h))
    for (Point& c : placed) {
      const Point q = grid->lattice_coordinates(c);
      const int i = static_cast<int>(std::lround(q.x)), j = static_cast<int>(std::lround(q.y));
      if (grid->unknown_at(i, j) >= 0) c = grid->node_position(i, j);
    }
  return Field::sample(grid, [&](Point x) {
    double v = 0.0;
    for (Point c : placed) {
      // U(z) = -2 log(1 + |z|^2/8) with |z|^2 = |x-c|^2 / eps^2, kept in log form.
      const double log_r2 = std::log(std::max(norm2(x - c), 1e-300)) - 2.0 * log_eps;
      const double log_term = log_r2 - std::log(8.0);
      const double bubble = -2.0 * (log_term > 30.0 ? log_term : std::log1p(std::exp(log_term)));
      v += m * std::max(0.0, 1.0 + bubble / p);
    }
    return v;
  });
}

/// Newton from multi_bubble_guess; when that stalls, solves on the grid of
/// spacing 2h (recursively, up to `coarse_levels` times) and interpolates.
inline Field bubble_start(const GridPtr& grid, double p, const std::vector<Point>& centers,
                          const NewtonSettings& s = {}, int coarse_levels = 2) {
  NewtonSettings loose = s;
  loose.max_iterations = std::max(s.max_iterations, 100);
  const DiscreteLaplacian lap(grid);
  try {
    return newton_solve(lap, multi_bubble_guess(grid, p, centers), p, loose).u;
  } catch (const Error& e) {
    if (coarse_levels <= 0 || e.code() != ErrorCode::NewtonStalled) throw;
    GridPtr coarse;
    try {
      coarse = build_grid(grid->domain(), 2.0 * grid->spacing());
      multi_bubble_guess(coarse, p, centers);
    } catch (const Error&) {
      throw e;
    }
    const Field uc = bubble_start(coarse, p, centers, s, coarse_levels - 1);
    return newton_solve(lap, Field::sample(grid, [&](Point x) { return uc.interpolate(x); }), p, loose).u;
  }
}

struct ContinuationStep {
  double p = 0.0;
  Field u;
  int iterations = 0;
  double residual = 0.0;
  double wall_time = 0.0;  // seconds
  bool reseeded = false;   // solved from a fresh bubble guess after the branch stalled
};

enum class RunStatus { completed, stalled };

struct ContinuationRun {
  std::string domain;
  std::string initial_guess;
  std::vector<ContinuationStep> steps;
  RunStatus status = RunStatus::completed;
  std::string stall_reason;

  std::vector<double> p_values() const {
    std::vector<double> ps;
    for (const auto& s : steps) ps.push_back(s.p);
    return ps;
  }
};

struct ContinuationOptions {
  double initial_step = 0.5;
  double min_step = 1e-3;
  int fast_iterations = 4;           // step doubles after success within this many iterations
  std::vector<double> milestones;    // p values that must be hit exactly
  bool reseed = true;                // on a stall at p >= 10, restart from bubbles at the current maxima
};

namespace detail {

inline ContinuationStep timed_solve(const DiscreteLaplacian& lap, const Field& guess, double p,
                                    const NewtonSettings& s) {
  const auto t0 = std::chrono::steady_clock::now();
  NewtonResult r = newton_solve(lap, guess, p, s);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {p, std::move(r.u), r.iterations, r.residual, dt};
}

/// Strict-ish local maxima of u (ties allowed) above half the maximum, greedily
/// separated by a tenth of the domain diameter.
inline std::vector<Point> dominant_maxima(const Field& u) {
  const Grid& g = u.grid();
  std::vector<std::size_t> cand;
  const double top = u.max_value();
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] < 0.5 * top) continue;
    bool is_max = true;
    for (int nb : g.neighbors(k))
      if (nb >= 0 && u[static_cast<std::size_t>(nb)] > u[k]) is_max = false;
    if (is_max) cand.push_back(k);
  }
  std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return u[a] > u[b]; });
  const double sep = 0.1 * g.domain().diameter();
  std::vector<Point> out;
  for (std::size_t k : cand) {
    const Point x = g.position(k);
    if (std::all_of(out.begin(), out.end(), [&](Point y) { return distance(x, y) > sep; })) out.push_back(x);
  }
  return out;
}

/// Fresh Newton solves from bubbles at the maxima of `prev`, at increasing jumps in p.
inline std::optional<ContinuationStep> reseed(const DiscreteLaplacian& lap, const Field& prev, double p_prev,
                                              double p_cap, const NewtonSettings& s) {
  const std::vector<Point> centers = dominant_maxima(prev);
  NewtonSettings loose = s;
  loose.max_iterations = std::max(s.max_iterations, 100);
  for (double jump : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double p = std::min(p_prev + jump, p_cap);
    if (p < 10.0) continue;
    try {
      ContinuationStep step = timed_solve(lap, multi_bubble_guess(lap.grid_ptr(), p, centers), p, loose);
      step.reseeded = true;
      return step;
    } catch (const Error&) {
    }
    if (p >= p_cap) break;
  }
  return std::nullopt;
}

}  // namespace detail

/// Follows the branch from `start` (a guess at p_start) to p_end reusing the
/// previous solution as the guess. A failure at p_start propagates; later
/// failures halve the step. A repeated floor hit either reseeds from bubble
/// guesses (options.reseed) or marks the run stalled.
inline ContinuationRun continue_in_p(const DiscreteLaplacian& lap, const Field& start, std::string guess_label,
                                     double p_start, double p_end, const NewtonSettings& s = {},
                                     ContinuationOptions options = {}) {
  require(p_start > 1.0 && p_start <= p_end, ErrorCode::InvalidArgument, "need 1 < p_start <= p_end");
  ContinuationRun run;
  run.domain = lap.grid().domain().kind();
  run.initial_guess = std::move(guess_label);
  run.steps.push_back(detail::timed_solve(lap, start, p_start, s));

  std::vector<double> stops = options.milestones;
  stops.push_back(p_end);
  std::sort(stops.begin(), stops.end());

  double dp = options.initial_step;
  int floor_hits = 0;
  while (run.steps.back().p < p_end) {
    const double p_prev = run.steps.back().p;
    double target = p_prev + dp;
    for (double m : stops)
      if (m > p_prev) {
        target = std::min(target, m);
        break;
      }
    try {
      ContinuationStep next = detail::timed_solve(lap, run.steps.back().u, target, s);
      if (next.iterations <= options.fast_iterations) dp *= 2.0;
      floor_hits = 0;
      run.steps.push_back(std::move(next));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NewtonStalled && e.code() != ErrorCode::ConvergedToZero) throw;
      dp = 0.5 * (target - p_prev);
      if (dp < options.min_step) {
        if (++floor_hits >= 2) {
          double cap = p_end;
          for (double m : stops)
            if (m > p_prev) {
              cap = m;
              break;
            }
          if (options.reseed) {
            if (auto step = detail::reseed(lap, run.steps.back().u, p_prev, cap, s)) {
              run.steps.push_back(std::move(*step));
              floor_hits = 0;
              dp = options.initial_step;
              continue;
            }
          }
          run.status = RunStatus::stalled;
          run.stall_reason = std::string("ContinuationStalled at p=") + std::to_string(p_prev) + ": " + e.what();
          break;
        }
        dp = options.min_step;
      }
    }
  }
  return run;
}

/// Continuation started from the scaled first eigenfunction at p_start.
inline ContinuationRun continue_in_p(const DiscreteLaplacian& lap, double p_start, double p_end,
                                     const NewtonSettings& s = {}, ContinuationOptions options = {}) {
  return continue_in_p(lap, initial_guess(lap, std::min(p_start, 5.0)), "eigenfunction", p_start, p_end, s,
                       std::move(options));
}

}  // namespace lane_emden
