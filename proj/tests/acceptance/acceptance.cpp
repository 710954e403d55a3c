// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lane_emden/concentration.hpp"
#include "lane_emden/diagnostics.hpp"
#include "lane_emden/elliptic_solver.hpp"
#include "lane_emden/liouville.hpp"
#include "lane_emden/radial_oracle.hpp"

using namespace lane_emden;

namespace {

constexpr double pi = std::numbers::pi;
const double sqrt_e = std::exp(0.5);
const double quantum = 8.0 * pi * std::numbers::e;
const DomainSpec unit_disk = DomainSpec::disk({0, 0}, 1);
const DomainSpec annulus = DomainSpec::annulus({0, 0}, 0.3, 1);
constexpr double grid_h = 2.0 / 256;
const std::vector<double> oracle_ps{50, 100, 200, 400};

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

class Clock {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

std::string list(const std::vector<double>& v, const char* f = "%.6g") {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + fmt(f, x);
  return "[" + s + "]";
}

const ExactDiskSolution& exact(double p) {
  static std::map<double, std::unique_ptr<ExactDiskSolution>> cache;
  auto& e = cache[p];
  if (!e) e = std::make_unique<ExactDiskSolution>(unit_disk, p);
  return *e;
}

const GreenEvaluator& disk_green() {
  static const auto g = make_green_evaluator(unit_disk);
  return *g;
}

const GreenEvaluator& annulus_green() {
  static const auto g = make_green_evaluator(annulus);
  return *g;
}

struct GridRun {
  std::shared_ptr<DiscreteLaplacian> lap;
  ContinuationRun run;
  double seconds = 0.0;

  const ContinuationStep& at(double p) const {
    for (const auto& s : run.steps)
      if (s.p == p) return s;
    fail(ErrorCode::InvalidArgument, fmt("p = %g was not reached", p));
  }
};

/// Eigenfunction continuation on the unit disk at h = 2/256 through p = 50, 100.
const GridRun& disk_run() {
  static std::optional<GridRun> r;
  if (!r) {
    Clock c;
    r.emplace();
    r->lap = std::make_shared<DiscreteLaplacian>(build_grid(unit_disk, grid_h));
    ContinuationOptions o;
    o.milestones = {50, 100};
    r->run = continue_in_p(*r->lap, 2.0, 100.0, {}, o);
    r->seconds = c.seconds();
  }
  return *r;
}

/// Two-bubble start on the annulus at p = 20, continued through p = 100, 150.
const GridRun& annulus_run() {
  static std::optional<GridRun> r;
  if (!r) {
    Clock c;
    r.emplace();
    const auto grid = build_grid(annulus, grid_h);
    r->lap = std::make_shared<DiscreteLaplacian>(grid);
    ContinuationOptions o;
    o.milestones = {100, 150};
    r->run = continue_in_p(*r->lap, bubble_start(grid, 20.0, {{0.63, 0}, {-0.63, 0}}), "bubbles", 20.0, 150.0, {}, o);
    r->seconds = c.seconds();
  }
  return *r;
}

double antipodal_radial_residual(const GreenEvaluator& g, double rho) {
  return system_residual(make_configuration(g.domain(), {{rho, 0}, {-rho, 0}}), g)[0].x;
}

double bisect_antipodal_root(const GreenEvaluator& g, double lo, double hi) {
  double flo = antipodal_radial_residual(g, lo);
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi), fm = antipodal_radial_residual(g, mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::string grid_status(const Field& u, double p, const GreenEvaluator& g) {
  const DiagnosticsReport rep = diagnose(GridSolutionView(u, p), g);
  if (rep.unresolved.empty()) return "grid resolved";
  std::string s;
  for (const auto& m : rep.unresolved) s += (s.empty() ? "" : "; ") + m.substr(0, m.find(':'));
  return fmt("grid h=2/256 p=%g unresolved: ", p) + s;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome liouville_mass() {
  Clock c;
  const MassIntegrals m = mass_integrals();
  const double mass_err = std::abs(m.mass - 8 * pi) / (8 * pi);
  const double log_err = std::abs(m.log_moment - 12 * pi * std::log(2.0));
  const double t = c.seconds();
  return {mass_err <= 1e-8 && log_err <= 1e-6 && t < 1.0,
          fmt("mass rel err %.2e, log-moment err %.2e, %.3f s", mass_err, log_err, t)};
}

Outcome linf_limit() {
  Clock c;
  std::vector<double> M;
  std::vector<std::pair<double, double>> samples;
  for (double p : oracle_ps) {
    M.push_back(shoot(p).height);
    samples.emplace_back(p, M.back());
  }
  const Extrapolation ex = extrapolate(samples);
  const bool decreasing = strictly_decreasing(M);
  const bool above = std::all_of(M.begin(), M.end(), [](double m) { return m > sqrt_e; });
  const bool limit = std::abs(ex.limit - sqrt_e) <= 0.02;
  const double t = c.seconds();
  return {decreasing && above && limit && t < 10.0,
          fmt("M=%s strictly decreasing %s, all > sqrt(e) %s, limit %.6f (|diff| %.2e <= 0.02 %s), %.1f s",
              list(M, "%.6f").c_str(), decreasing ? "yes" : "NO", above ? "yes" : "NO", ex.limit,
              std::abs(ex.limit - sqrt_e), limit ? "yes" : "NO", t)};
}

Outcome energy_k1() {
  Clock c;
  std::vector<std::pair<double, double>> samples;
  for (double p : oracle_ps) samples.emplace_back(p, shoot(p).energy);
  const Extrapolation ex = extrapolate(samples);
  const double oracle100 = shoot(100).energy;
  const GridRun& d = disk_run();
  const double grid100 = energy_check(GridSolutionView(d.at(100).u, 100)).energy;
  const double rel = std::abs(grid100 - oracle100) / oracle100;
  const double t = c.seconds();
  const bool lim = std::abs(ex.limit - quantum) <= 1.5;
  return {lim && rel <= 0.05 && t < 300.0,
          fmt("oracle E limit %.4f (|diff| %.3f <= 1.5 %s); grid E(100) %.3f vs oracle %.3f, rel %.3f <= 0.05 %s; "
              "%.1f s",
              ex.limit, std::abs(ex.limit - quantum), lim ? "yes" : "NO", grid100, oracle100, rel,
              rel <= 0.05 ? "yes" : "NO", t)};
}

Outcome energy_k2() {
  Clock c;
  const GridRun& a = annulus_run();
  const Field& u = a.at(100).u;
  const std::size_t peaks = detect_peaks(u, 100).size();
  const double ratio = energy_check(GridSolutionView(u, 100)).ratio;
  const double disk_grid = energy_check(GridSolutionView(disk_run().at(100).u, 100)).ratio;
  const double disk_oracle = shoot(100).energy / quantum;
  const double corrected = ratio / disk_grid;
  const double t = c.seconds() + disk_run().seconds;
  const bool ok = peaks == 2 && std::abs(corrected - 2.0) <= 0.1 && t < 600.0;
  return {ok, fmt("%zu peaks, E/(8 pi e) %.4f; / disk grid factor %.4f = %.4f (|diff| %.3f <= 0.1 %s); "
                  "/ disk oracle factor %.4f = %.4f; %.1f s",
                  peaks, ratio, disk_grid, corrected, std::abs(corrected - 2.0),
                  std::abs(corrected - 2.0) <= 0.1 ? "yes" : "NO", disk_oracle, ratio / disk_oracle, t)};
}

Outcome profile() {
  std::vector<double> err;
  for (double p : {100.0, 200.0}) err.push_back(profile_check(exact(p), find_peaks(exact(p)), 5.0)[0]);
  const bool ok = err[1] < err[0] && err[1] < 0.1;
  return {ok, fmt("oracle sup |w - U| on |z|<=5: %s; %s", list(err, "%.3e").c_str(),
                  grid_status(disk_run().at(100).u, 100, disk_green()).c_str())};
}

Outcome off_peak() {
  std::vector<double> sup, green;
  for (double p : {50.0, 100.0, 200.0}) {
    const OffPeak o = off_peak_checks(exact(p), find_peaks(exact(p)), 0.3, disk_green());
    sup.push_back(o.sqrtp_sup);
    green.push_back(o.green_sup);
  }
  const OffPeak grid = off_peak_checks(GridSolutionView(disk_run().at(100).u, 100),
                                       detect_peaks(disk_run().at(100).u, 100), 0.3, disk_green());
  const bool ok = strictly_decreasing(sup) && green[2] <= 0.5;
  return {ok, fmt("oracle sqrt(p) sup %s, green sup at 200 %.4f <= 0.5; grid h=2/256 p=100: sqrt(p) sup %.3f, "
                  "green sup %.3f",
                  list(sup, "%.4f").c_str(), green[2], grid.sqrtp_sup, grid.green_sup)};
}

Outcome location_system() {
  std::vector<std::string> notes;
  bool ok = true;
  LocationSolveOptions opt;
  opt.jobs = jobs();

  const auto d1 = solve_system(1, disk_green(), opt);
  const bool centre = d1.size() == 1 && norm(d1[0].points[0]) <= 1e-8;
  ok &= centre;
  notes.push_back(fmt("disk k=1 %zu root(s), |x| %.1e", d1.size(), d1.empty() ? nan_value : norm(d1[0].points[0])));

  bool none = false;
  try {
    solve_system(2, disk_green(), opt);
  } catch (const Error& e) {
    none = e.code() == ErrorCode::NoSolutionFound;
  }
  double worst = -1e300;
  for (int i = 1; i < 10000; ++i) worst = std::max(worst, antipodal_radial_residual(disk_green(), 1e-4 * i));
  ok &= none && worst < 0.0;
  notes.push_back(fmt("disk k=2 NoSolutionFound %s, max radial residual on (0,1) %.3e < 0", none ? "yes" : "NO", worst));

  const double rho = bisect_antipodal_root(annulus_green(), 0.35, 0.95);
  const auto a2 = solve_system(2, annulus_green(), opt);
  double best = 1e300;
  for (const auto& c : a2)
    if (norm(c.points[0] + c.points[1]) < 1e-6)
      best = std::min(best, std::max(std::abs(norm(c.points[0]) - rho), std::abs(norm(c.points[1]) - rho)));
  ok &= best <= 1e-6;
  notes.push_back(fmt("annulus k=2 rho* %.8f, solver |diff| %.1e", rho, best));

  const PeakSet peaks = detect_peaks(annulus_run().at(150).u, 150);
  const double dist = peaks.size() == 2
                          ? detail::rotation_assignment_distance(peaks.locations(), {{rho, 0}, {-rho, 0}}, {0, 0})
                          : nan_value;
  ok &= peaks.size() == 2 && dist <= 3 * grid_h;
  notes.push_back(fmt("PDE p=150 %zu peaks, distance %.4f = %.2f h", peaks.size(), dist, dist / grid_h));

  std::string s;
  for (const auto& n : notes) s += (s.empty() ? "" : "; ") + n;
  return {ok, s};
}

Outcome decomposition() {
  std::vector<double> A, B, mass, ident;
  std::vector<std::pair<double, double>> m;
  for (double p : oracle_ps) {
    const Decomposition d = decomposition_check(exact(p), find_peaks(exact(p)), 0, disk_green());
    m.emplace_back(p, d.m_est);
    if (p == 400) continue;
    A.push_back(std::abs(d.A));
    B.push_back(std::abs(d.B));
    mass.push_back(d.mass);
    ident.push_back(d.log_eps_identity);
  }
  const Extrapolation ex = extrapolate(m);
  const bool a_ok = A[1] <= A[0] && A[2] <= A[1];
  const bool b_ok = strictly_decreasing(B);
  const bool mass_ok = strictly_increasing(mass) && mass[2] < 8 * pi && mass[2] >= 0.9 * 8 * pi;
  const double worst_ident = *std::max_element(ident.begin(), ident.end());
  const bool m_ok = std::abs(ex.limit - sqrt_e) <= 0.05;
  return {a_ok && b_ok && mass_ok && worst_ident <= 1e-12 && m_ok,
          fmt("|A| %s, |B| %s, Mass %s, log eps identity %.1e, m_est limit %.5f; %s", list(A, "%.2e").c_str(),
              list(B, "%.4f").c_str(), list(mass, "%.4f").c_str(), worst_ident, ex.limit,
              grid_status(disk_run().at(100).u, 100, disk_green()).c_str())};
}

bool accepted(const DiscreteLaplacian& lap, const Field& u, double p, std::string& why) {
  const NewtonSettings ns;
  const double scale = std::max(1.0, positive_power(u.max_value(), p));
  if (!(residual(lap, u, p).max_abs() <= ns.tolerance * scale)) why = fmt("residual at p=%g", p);
  else if (!(u.min_value() >= 0.0) || !u.all_finite()) why = fmt("positivity at p=%g", p);
  else {
    const PeakSet s = detect_peaks(u, p);
    for (const Peak& pk : s.peaks) {
      const Peak again = make_peak(pk.location, pk.height, p);
      const double direct = 1.0 / std::sqrt(p * std::pow(pk.height, p - 1.0));
      if (again.eps != pk.eps || again.log_eps != pk.log_eps || std::abs(pk.eps - direct) > 1e-12 * direct)
        why = fmt("eps at p=%g", p);
    }
  }
  return why.empty();
}

Outcome numerics() {
  std::vector<std::string> notes;
  bool ok = true;

  const RadialSolution s10 = shoot(10.0);
  std::vector<double> trunc, err;
  for (int n : {128, 256, 512}) {
    const auto g = build_grid(unit_disk, 2.0 / n);
    const DiscreteLaplacian lap(g);
    const Field o = Field::sample(g, [&](Point x) { return s10.unit_disk_value(norm(x)); });
    trunc.push_back(residual(lap, o, 10.0).max_abs());
    const NewtonResult r = newton_solve(lap, o, 10.0);
    std::string why;
    ok &= accepted(lap, r.u, 10.0, why);
    double e = 0.0;
    for (std::size_t k = 0; k < o.size(); ++k) e = std::max(e, std::abs(r.u[k] - o[k]));
    err.push_back(e);
  }
  std::vector<double> tr, er;
  for (std::size_t i = 1; i < err.size(); ++i) {
    tr.push_back(trunc[i - 1] / trunc[i]);
    er.push_back(err[i - 1] / err[i]);
  }
  for (double r : tr) ok &= r >= 3.0 && r <= 5.0;
  for (double r : er) ok &= r >= 3.0 && r <= 5.0;
  notes.push_back("Laplacian ratios " + list(tr, "%.3f") + ", solver ratios " + list(er, "%.3f"));

  double fd = 0.0;
  const double step = 1e-5;
  for (const DomainSpec& spec : {unit_disk, DomainSpec::rectangle({0, 0}, {2, 1}), annulus}) {
    const auto g = make_green_evaluator(spec);
    std::mt19937_64 rng(11);
    std::vector<Point> pts;
    const double margin = 0.1 * spec.min_feature();
    const double D = spec.diameter();
    std::uniform_real_distribution<double> U(-D, D);
    while (pts.size() < 60) {
      const Point x{U(rng), U(rng)};
      if (spec.signed_distance(x) < -margin) pts.push_back(x);
    }
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const Point x = pts[i], y = pts[i - 1];
      const Vec2 dx{step, 0}, dy{0, step};
      const Vec2 gg = g->grad_x_green(x, y), gr = g->grad_robin(x);
      fd = std::max({fd, std::abs(gg.x - (g->green(x + dx, y) - g->green(x - dx, y)) / (2 * step)),
                     std::abs(gg.y - (g->green(x + dy, y) - g->green(x - dy, y)) / (2 * step)),
                     std::abs(gr.x - (g->robin(x + dx) - g->robin(x - dx)) / (2 * step)),
                     std::abs(gr.y - (g->robin(x + dy) - g->robin(x - dy)) / (2 * step))});
    }
  }
  ok &= fd <= 1e-6;
  notes.push_back(fmt("Green gradient vs FD %.1e", fd));

  std::size_t checked = 0;
  std::string why;
  for (const GridRun* r : {&disk_run(), &annulus_run()})
    for (const auto& st : r->run.steps) {
      if (!accepted(*r->lap, st.u, st.p, why)) break;
      ++checked;
    }
  ok &= why.empty();
  notes.push_back(fmt("invariants on %zu accepted fields%s", checked, why.empty() ? "" : (": failed " + why).c_str()));

  std::string s;
  for (const auto& n : notes) s += (s.empty() ? "" : "; ") + n;
  return {ok, s};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Liouville mass", liouville_mass},     {"L-infinity limit", linf_limit},
      {"energy quantization k=1", energy_k1}, {"energy quantization k=2", energy_k2},
      {"profile convergence", profile},       {"off-peak decay", off_peak},
      {"location system", location_system},   {"proof decomposition", decomposition},
      {"numerical properties", numerics}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures ? 1 : 0;
}
