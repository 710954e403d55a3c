#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lane_emden/concentration.hpp"
#include "lane_emden/liouville.hpp"
#include "lane_emden/solution_view.hpp"

namespace lane_emden {

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

/// log eps = -((p-1) log u(y) + log p)/2.
inline double log_epsilon(double p, double height) { return -0.5 * (std::log(p) + (p - 1.0) * std::log(height)); }

struct Peak {
  Point location;
  double height = 0.0;
  double log_eps = 0.0;
  double eps = 0.0;
};

struct PeakSet {
  std::vector<Peak> peaks;
  double cluster_radius = 0.0;

  std::size_t size() const { return peaks.size(); }
  std::vector<Point> locations() const {
    std::vector<Point> out;
    for (const auto& pk : peaks) out.push_back(pk.location);
    return out;
  }
};

inline Peak make_peak(Point y, double height, double p) {
  const double le = log_epsilon(p, height);
  return {y, height, le, std::exp(le)};
}

inline double default_cluster_radius(const Grid& g) {
  return std::max(5.0 * g.spacing(), 0.05 * g.domain().diameter());
}

namespace detail {

/// Stationary point of the least-squares quadratic through the 3x3 block around
/// node (i, j), in lattice units; nullopt when the fit is not a strict maximum.
inline std::optional<Point> quadratic_peak_offset(const Field& u, int i, int j) {
  Eigen::Matrix<double, 9, 6> a;
  Eigen::Matrix<double, 9, 1> b;
  int row = 0;
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di, ++row) {
      a.row(row) << 1.0, di, dj, di * di, di * dj, dj * dj;
      b[row] = u.node_value(i + di, j + dj);
    }
  const Eigen::Matrix<double, 6, 1> c = a.colPivHouseholderQr().solve(b);
  Eigen::Matrix2d hess;
  hess << 2 * c[3], c[4], c[4], 2 * c[5];
  if (!(hess(0, 0) < 0.0 && hess.determinant() > 0.0)) return std::nullopt;
  const Eigen::Vector2d s = hess.inverse() * -Eigen::Vector2d(c[1], c[2]);
  return Point{s[0], s[1]};
}

}  // namespace detail

/// Strict local maxima (8-neighbourhood) above the floor, greedily kept by
/// descending height when farther than 2 cluster_radius from every kept peak,
/// then refined by a 3x3 quadratic fit with the shift limited to h/2. The stored
/// height is the interpolated value at the refined location.
inline PeakSet detect_peaks(const Field& u, double p, double height_floor = 1.0, double cluster_radius = 0.0) {
  const Grid& g = u.grid();
  const double h = g.spacing();
  if (cluster_radius <= 0.0) cluster_radius = default_cluster_radius(g);
  require(height_floor > 0.0, ErrorCode::InvalidArgument, "height floor must be positive");
  require(cluster_radius > 4.0 * h, ErrorCode::InvalidArgument, "cluster radius must exceed 4h");
  require(p > 1.0, ErrorCode::InvalidArgument, "p must exceed 1");

  std::vector<std::size_t> cand;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (!(u[k] > height_floor)) continue;
    const std::size_t id = g.unknown_node(k);
    const int i = g.node_i(id), j = g.node_j(id);
    bool strict = true;
    for (int dj = -1; dj <= 1 && strict; ++dj)
      for (int di = -1; di <= 1; ++di)
        if ((di || dj) && u.node_value(i + di, j + dj) >= u[k]) {
          strict = false;
          break;
        }
    if (strict) cand.push_back(k);
  }
  if (cand.empty()) fail(ErrorCode::NoPeaks, "no strict local maximum above the height floor");
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return u[a] > u[b]; });

  PeakSet out;
  out.cluster_radius = cluster_radius;
  for (std::size_t k : cand) {
    const Point x = g.position(k);
    const bool far = std::all_of(out.peaks.begin(), out.peaks.end(),
                                 [&](const Peak& pk) { return distance(pk.location, x) > 2.0 * cluster_radius; });
    if (!far) continue;
    const std::size_t id = g.unknown_node(k);
    Point y = x;
    double height = u[k];
    if (auto s = detail::quadratic_peak_offset(u, g.node_i(id), g.node_j(id)); s && norm(*s) <= 0.5) {
      y = x + h * *s;
      height = u.interpolate(y);
    }
    out.peaks.push_back(make_peak(y, height, p));
  }
  return out;
}

/// Peaks of a view: grid fields go through detect_peaks; the exact disk solution
/// has its single maximum at the centre.
inline PeakSet find_peaks(const SolutionView& view, double height_floor = 1.0, double cluster_radius = 0.0) {
  if (const auto* gv = dynamic_cast<const GridSolutionView*>(&view))
    return detect_peaks(gv->field(), view.p(), height_floor, cluster_radius);
  if (const auto* ex = dynamic_cast<const ExactDiskSolution*>(&view)) {
    if (!(ex->height() > height_floor)) fail(ErrorCode::NoPeaks, "maximum below the height floor");
    PeakSet out;
    out.cluster_radius = cluster_radius > 0.0 ? cluster_radius : 0.05 * view.domain().diameter();
    out.peaks.push_back(make_peak(ex->center(), ex->height(), view.p()));
    return out;
  }
  fail(ErrorCode::InvalidArgument, "unsupported solution view");
}

struct EnergyCheck {
  double energy = 0.0;       // p int |grad u|^2
  double ratio = 0.0;        // energy/(8 pi e)
  double cross_check = 0.0;  // |energy - p int u^{p+1}|/energy
};

inline double quantum() { return 8.0 * std::numbers::pi * std::numbers::e; }

inline EnergyCheck energy_check(const SolutionView& view) {
  EnergyCheck c;
  c.energy = view.energy();
  c.ratio = c.energy / quantum();
  c.cross_check = std::abs(c.energy - view.energy_power()) / c.energy;
  return c;
}

/// w(z) = p (u(y + eps z)/u(y) - 1).
inline double rescaled_value(const SolutionView& view, const Peak& pk, Point z) {
  return view.p() * (view.value(pk.location + pk.eps * z) / pk.height - 1.0);
}

struct ProfileOptions {
  int radii = 40;
  int angles = 16;
};

/// Per peak, sup over |z| <= R of |w(z) - U(z)|.
inline std::vector<double> profile_check(const SolutionView& view, const PeakSet& peaks, double R_compare,
                                         ProfileOptions opt = {}) {
  require(R_compare > 0.0, ErrorCode::InvalidArgument, "comparison radius must be positive");
  const double h = view.resolution();
  std::vector<double> out;
  for (const auto& pk : peaks.peaks) {
    if (R_compare * pk.eps < 4.0 * h)
      fail(ErrorCode::PeakUnresolved, "R eps = " + std::to_string(R_compare * pk.eps) + " below 4h");
    double sup = 0.0;
    for (int i = 0; i <= opt.radii; ++i) {
      const double s = R_compare * i / opt.radii;
      for (int j = 0; j < (i ? opt.angles : 1); ++j) {
        const double t = 2.0 * std::numbers::pi * j / opt.angles;
        const Point z{s * std::cos(t), s * std::sin(t)};
        sup = std::max(sup, std::abs(rescaled_value(view, pk, z) - liouville_U(s)));
      }
    }
    out.push_back(sup);
  }
  return out;
}

struct OffPeak {
  double sqrtp_sup = 0.0;
  double green_sup = 0.0;
  std::size_t count = 0;
};

/// Sups over stored samples outside the union of B_delta(y_i) of sqrt(p) u and
/// |p u - 8 pi sqrt(e) sum_i G(., y_i)|.
inline OffPeak off_peak_checks(const SolutionView& view, const PeakSet& peaks, double delta, const GreenEvaluator& g) {
  const double h = view.resolution();
  require(delta >= 5.0 * h, ErrorCode::InvalidArgument, "delta must be at least 5h");
  for (std::size_t i = 0; i < peaks.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      require(distance(peaks.peaks[i].location, peaks.peaks[j].location) > 2.0 * delta, ErrorCode::BallOverlap,
              "peak balls of radius delta overlap");
  const double p = view.p(), coef = 8.0 * std::numbers::pi * std::sqrt(std::numbers::e);
  OffPeak out;
  for (const auto& s : view.samples()) {
    bool off = true;
    for (const auto& pk : peaks.peaks)
      if (distance(s.x, pk.location) < delta) off = false;
    if (!off || !g.domain().contains(s.x)) continue;
    double sum = 0.0;
    for (const auto& pk : peaks.peaks) sum += g.green(s.x, pk.location);
    out.sqrtp_sup = std::max(out.sqrtp_sup, std::sqrt(p) * std::abs(s.u));
    out.green_sup = std::max(out.green_sup, std::abs(p * s.u - coef * sum));
    ++out.count;
  }
  if (out.count == 0) fail(ErrorCode::EmptyTestSet, "no sample lies outside the peak balls");
  return out;
}

/// 0.25 times the distance to the nearest other peak, capped by half the distance to the boundary.
inline double default_ball_radius(const DomainSpec& spec, const PeakSet& peaks, std::size_t j) {
  const Point y = peaks.peaks.at(j).location;
  double r = 0.5 * -spec.signed_distance(y);
  for (std::size_t l = 0; l < peaks.size(); ++l)
    if (l != j) r = std::min(r, 0.25 * distance(y, peaks.peaks[l].location));
  return r;
}

struct BoundOptions {
  double gamma = 1.0;
  double R_gamma = 2.0;
  int radii = 200;
  int angles = 16;
  double outer_radius = 0.0;  // r in |z| <= r/eps; 0 selects default_ball_radius
};

struct BoundCheck {
  double c_tilde = nan_value;  // min C with w <= (4 - gamma) log(1/|z|) + C
  double c_gamma = nan_value;  // min C with (1 + w/p)^p <= C |z|^{-(4 - gamma)}
  bool power_at_most_one = true;  // (1 + w/p)^p <= 1 wherever w <= 0
  bool w_above_minus_p = true;    // u > 0 on the sampled ball
  double z_min = 0.0, z_max = 0.0;
};

namespace detail {

template <class F>
void annulus_samples(const Peak& pk, double z_min, double z_max, int radii, int angles, F&& f) {
  const double a = std::log(z_min), b = std::log(z_max);
  for (int i = 0; i <= radii; ++i) {
    const double s = std::exp(a + (b - a) * i / radii);
    for (int j = 0; j < angles; ++j) {
      const double t = 2.0 * std::numbers::pi * (j + 0.5 * (i % 2)) / angles;
      f(s, Point{s * std::cos(t), s * std::sin(t)});
    }
  }
  (void)pk;
}

inline std::pair<double, double> bound_annulus(const SolutionView& view, const PeakSet& peaks, std::size_t j,
                                               const BoundOptions& opt) {
  const Peak& pk = peaks.peaks[j];
  const double r = opt.outer_radius > 0.0 ? opt.outer_radius : default_ball_radius(view.domain(), peaks, j);
  const double z_max = r / pk.eps;
  const double h = view.resolution();
  if (opt.R_gamma * pk.eps < h || !(z_max > opt.R_gamma))
    fail(ErrorCode::AnnulusUnresolved, "annulus R_gamma <= |z| <= r/eps not resolvable on the grid");
  return {opt.R_gamma, z_max};
}

/// log (1 + w/p)^p = p log(u(x)/u(y)); -inf where u <= 0.
inline double log_power(double u, double height, double p) {
  return u > 0.0 ? p * std::log(u / height) : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

inline std::vector<BoundCheck> bound_checks(const SolutionView& view, const PeakSet& peaks, BoundOptions opt = {}) {
  require(opt.gamma > 0.0 && opt.gamma < 2.0, ErrorCode::InvalidArgument, "gamma must lie in (0, 2)");
  require(opt.R_gamma > 1.0, ErrorCode::InvalidArgument, "R_gamma must exceed 1");
  const double p = view.p(), k = 4.0 - opt.gamma;
  std::vector<BoundCheck> out;
  for (std::size_t j = 0; j < peaks.size(); ++j) {
    const Peak& pk = peaks.peaks[j];
    const auto [z_min, z_max] = detail::bound_annulus(view, peaks, j, opt);
    BoundCheck c;
    c.z_min = z_min;
    c.z_max = z_max;
    double ct = -std::numeric_limits<double>::infinity(), lc = ct;
    detail::annulus_samples(pk, z_min, z_max, opt.radii, opt.angles, [&](double s, Point z) {
      const double u = view.value(pk.location + pk.eps * z);
      const double w = p * (u / pk.height - 1.0);
      if (!(u > 0.0)) c.w_above_minus_p = false;
      ct = std::max(ct, w + k * std::log(s));
      lc = std::max(lc, detail::log_power(u, pk.height, p) + k * std::log(s));
      if (w <= 0.0) {
        const double base = 1.0 + w / p;
        if (base > 0.0 && std::pow(base, p) > 1.0) c.power_at_most_one = false;
      }
    });
    // The ball interior |z| < R_gamma also enters the uniform bound check.
    detail::annulus_samples(pk, 1e-3 * z_min, z_min, 40, opt.angles, [&](double, Point z) {
      const double u = view.value(pk.location + pk.eps * z);
      const double w = p * (u / pk.height - 1.0);
      if (!(u > 0.0)) c.w_above_minus_p = false;
      if (w <= 0.0 && std::pow(std::max(0.0, 1.0 + w / p), p) > 1.0) c.power_at_most_one = false;
    });
    c.c_tilde = ct;
    c.c_gamma = std::exp(lc);
    out.push_back(c);
  }
  return out;
}

/// min over the sampled annulus of (4 - gamma) log(1/|z|) + c_tilde - w: nonnegative when c_tilde still bounds w.
inline double bound_margin(const SolutionView& view, const PeakSet& peaks, std::size_t j, double c_tilde,
                           double z_max, BoundOptions opt = {}) {
  const Peak& pk = peaks.peaks.at(j);
  const auto [z_min, own_max] = detail::bound_annulus(view, peaks, j, opt);
  const double zm = std::min(z_max, own_max), p = view.p(), k = 4.0 - opt.gamma;
  require(zm > z_min, ErrorCode::AnnulusUnresolved, "no common annulus");
  double margin = std::numeric_limits<double>::infinity();
  detail::annulus_samples(pk, z_min, zm, opt.radii, opt.angles, [&](double s, Point z) {
    const double w = p * (view.value(pk.location + pk.eps * z) / pk.height - 1.0);
    margin = std::min(margin, -k * std::log(s) + c_tilde - w);
  });
  return margin;
}

struct Decomposition {
  double A = nan_value, B = nan_value, C = nan_value;
  double tail = nan_value;
  double mass = nan_value;   // int (1 + w/p)^p over |z| <= r/eps
  double m_est = nan_value;
  double r = nan_value;
  double identity_residual = nan_value;  // |u(y) - (A + B + C + tail)|/u(y)
  double log_eps_identity = nan_value;   // |log eps + ((p-1)/2) log u(y) + log(p)/2|
};

/// Green representation at y_j split over B_r(y_j) in rescaled variables
///   A = (u(y)/p) int H(y, y + eps z) rho,  B = -(u(y)/2 pi p) int log|z| rho,  C = -(u(y) log eps/2 pi p) int rho,
/// plus the complement integral. With A, B and the tail dropped, u(y) = C and log eps
/// expanded gives log m = (4 pi p/Mass - log p)/(p - 1), which is m_est.
inline Decomposition decomposition_check(const SolutionView& view, const PeakSet& peaks, std::size_t j,
                                         const GreenEvaluator& g, double r = 0.0) {
  const Peak& pk = peaks.peaks.at(j);
  const Point y = pk.location;
  const DomainSpec& spec = view.domain();
  if (r <= 0.0) r = default_ball_radius(spec, peaks, j);
  require(spec.signed_distance(y) + r < 0.0, ErrorCode::BallOverlap, "B_r(y) leaves the domain");
  for (std::size_t l = 0; l < peaks.size(); ++l)
    require(l == j || distance(y, peaks.peaks[l].location) > 2.0 * r, ErrorCode::BallOverlap,
            "B_r(y) meets another peak ball");
  const double h = view.resolution();
  if (h > 0.0 && pk.eps < h)
    fail(ErrorCode::QuadratureUnresolved, "bubble scale eps = " + std::to_string(pk.eps) + " below h");

  const double p = view.p(), u = pk.height, two_pi = 2.0 * std::numbers::pi;
  const BallMoments m = view.ball_moments(y, u, pk.log_eps, r, g);
  if (!(m.error <= 1e-6)) fail(ErrorCode::QuadratureUnresolved, "ball quadrature error above 1e-6");
  Decomposition d;
  d.r = r;
  d.mass = m.mass;
  d.A = u / p * m.regular;
  d.B = -u / (two_pi * p) * m.log_moment;
  d.C = -u * pk.log_eps / (two_pi * p) * m.mass;
  d.tail = view.outer_green_integral(y, r, g);
  d.identity_residual = std::abs(u - (d.A + d.B + d.C + d.tail)) / u;
  d.log_eps_identity = std::abs(pk.log_eps + 0.5 * (p - 1.0) * std::log(u) + 0.5 * std::log(p));
  d.m_est = std::exp((4.0 * std::numbers::pi * p / m.mass - std::log(p)) / (p - 1.0));
  return d;
}

struct Extrapolation {
  double limit = 0.0;
  double rms = 0.0;
  double condition = 0.0;
};

/// Least-squares fit of value = a + b log(p)/p + c/p; returns a.
inline Extrapolation extrapolate(const std::vector<std::pair<double, double>>& samples) {
  require(samples.size() >= 4, ErrorCode::InvalidArgument, "extrapolation needs at least 4 samples");
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(n, 3);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = samples[static_cast<std::size_t>(i)].first;
    require(p > 0.0 && std::isfinite(samples[static_cast<std::size_t>(i)].second), ErrorCode::InvalidArgument,
            "samples need p > 0 and finite values");
    for (Eigen::Index j = 0; j < i; ++j)
      require(samples[static_cast<std::size_t>(j)].first != p, ErrorCode::InvalidArgument, "p values must differ");
    a.row(i) << 1.0, std::log(p) / p, 1.0 / p;
    b[i] = samples[static_cast<std::size_t>(i)].second;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  Extrapolation out;
  out.condition = sv[2] > 0.0 ? sv[0] / sv[2] : std::numeric_limits<double>::infinity();
  if (!(out.condition <= 1e12)) fail(ErrorCode::IllConditionedFit, "condition estimate above 1e12");
  const Eigen::VectorXd c = svd.solve(b);
  out.limit = c[0];
  out.rms = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(n));
  return out;
}

struct DiagnosticsOptions {
  double height_floor = 1.0;
  double cluster_radius = 0.0;  // 0: default_cluster_radius
  double R_compare = 5.0;
  double delta = 0.0;           // 0: 0.3 diameter
  BoundOptions bounds;
  bool off_peak = true, profile = true, bound = true, decomposition = true, system = true;
};

struct DiagnosticsReport {
  double p = 0.0;
  int k = 0;
  PeakSet peaks;
  EnergyCheck energy;
  double max_value = 0.0;
  std::optional<OffPeak> off_peak;
  std::vector<double> profile_errors;
  std::vector<BoundCheck> bounds;
  std::vector<Decomposition> decomposition;
  double system_residual = nan_value;
  std::vector<std::string> unresolved;  // error records of checks that could not run
};

/// Max-norm of the location system at the detected peaks with weights = heights.
inline double peak_system_residual(const PeakSet& peaks, const GreenEvaluator& g) {
  std::vector<double> m;
  for (const auto& pk : peaks.peaks) m.push_back(pk.height);
  const Configuration c = make_configuration(g.domain(), peaks.locations(), m);
  double worst = 0.0;
  for (Vec2 r : system_residual(c, g)) worst = std::max(worst, norm(r));
  return worst;
}

/// Every check on one solution. Guards that fail (unresolved peaks, empty test
/// sets) are recorded rather than thrown; NoPeaks propagates.
inline DiagnosticsReport diagnose(const SolutionView& view, const GreenEvaluator& g, DiagnosticsOptions opt = {}) {
  DiagnosticsReport rep;
  rep.p = view.p();
  rep.peaks = find_peaks(view, opt.height_floor, opt.cluster_radius);
  rep.k = static_cast<int>(rep.peaks.size());
  rep.energy = energy_check(view);
  rep.max_value = view.max_value();
  auto guarded = [&](const char* what, auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      rep.unresolved.push_back(std::string(what) + ": " + e.what());
    }
  };
  const double delta = opt.delta > 0.0 ? opt.delta : 0.3 * view.domain().diameter();
  if (opt.off_peak) guarded("off_peak", [&] { rep.off_peak = off_peak_checks(view, rep.peaks, delta, g); });
  if (opt.profile) guarded("profile", [&] { rep.profile_errors = profile_check(view, rep.peaks, opt.R_compare); });
  if (opt.bound) guarded("bounds", [&] { rep.bounds = bound_checks(view, rep.peaks, opt.bounds); });
  if (opt.decomposition)
    for (std::size_t j = 0; j < rep.peaks.size(); ++j)
      guarded("decomposition", [&] { rep.decomposition.push_back(decomposition_check(view, rep.peaks, j, g)); });
  if (opt.system) guarded("system", [&] { rep.system_residual = peak_system_residual(rep.peaks, g); });
  return rep;
}

inline nlohmann::json to_json(const PeakSet& s) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const auto& pk : s.peaks)
    peaks.push_back({{"location", {pk.location.x, pk.location.y}}, {"height", pk.height}, {"eps", pk.eps},
                     {"log_eps", pk.log_eps}});
  return {{"cluster_radius", s.cluster_radius}, {"peaks", peaks}};
}

inline nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["p"] = r.p;
  j["k"] = r.k;
  j["peaks"] = to_json(r.peaks);
  j["energy"] = r.energy.energy;
  j["energy_ratio"] = r.energy.ratio;
  j["energy_cross_check"] = r.energy.cross_check;
  j["max_value"] = r.max_value;
  if (r.off_peak) {
    j["sqrtp_sup_off_peak"] = r.off_peak->sqrtp_sup;
    j["green_sup_off_peak"] = r.off_peak->green_sup;
  } else {
    j["sqrtp_sup_off_peak"] = nullptr;
    j["green_sup_off_peak"] = nullptr;
  }
  j["profile_errors"] = r.profile_errors;
  nlohmann::json bounds = nlohmann::json::array();
  for (const auto& b : r.bounds)
    bounds.push_back({{"c_tilde", b.c_tilde},
                      {"c_gamma", b.c_gamma},
                      {"power_at_most_one", b.power_at_most_one},
                      {"w_above_minus_p", b.w_above_minus_p}});
  j["bounds"] = bounds;
  nlohmann::json dec = nlohmann::json::array();
  for (const auto& d : r.decomposition)
    dec.push_back({{"A", d.A},
                   {"B", d.B},
                   {"C", d.C},
                   {"tail", d.tail},
                   {"mass", d.mass},
                   {"m_est", d.m_est},
                   {"r", d.r},
                   {"identity_residual", d.identity_residual}});
  j["decomposition"] = dec;
  j["system_residual"] = std::isfinite(r.system_residual) ? nlohmann::json(r.system_residual) : nlohmann::json();
  j["unresolved"] = r.unresolved;
  return j;
}

}  // namespace lane_emden
