#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "lane_emden/concentration.hpp"
#include "lane_emden/diagnostics.hpp"
#include "lane_emden/elliptic_solver.hpp"
#include "lane_emden/io.hpp"
#include "lane_emden/parallel.hpp"

namespace lane_emden {

inline constexpr const char* tool_version = "0.1.0";

using nlohmann::json;

enum class InitialGuess { eigenfunction, bubbles, oracle };

struct RunConfig {
  std::string name;
  DomainSpec domain = DomainSpec::disk({0, 0}, 1);
  double h = 0.0;
  double p_start = 0.0, p_end = 0.0;
  std::vector<double> report_p;
  InitialGuess guess = InitialGuess::eigenfunction;
  std::vector<Point> bubble_centers;
  DiagnosticsOptions diagnostics;
  std::vector<int> concentration_k;
  std::string output_dir;
  std::uint64_t seed = 0;
  // sweep only
  std::vector<double> sweep_h, sweep_p;
  bool oracle_only = false;
  json source;  // the document as read
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& where, const std::string& what) {
  fail(ErrorCode::ConfigInvalid, where + ": " + what);
}

inline void allowed_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) config_error(where, "expected an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      config_error(where, "unknown key '" + k + "'");
  }
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) config_error(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) config_error(where, "expected a finite number");
  return v;
}

inline double required_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) config_error(where, std::string("missing '") + key + "'");
  return number(j.at(key), where + "." + key);
}

inline Point point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) config_error(where, "expected [x, y]");
  return {number(j[0], where + "[0]"), number(j[1], where + "[1]")};
}

inline std::vector<double> number_list(const json& j, const std::string& where) {
  if (!j.is_array()) config_error(where, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) config_error(where, "expected true or false");
  return j.get<bool>();
}

inline DomainSpec parse_domain(const json& j) {
  const std::string where = "domain";
  if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) config_error(where, "missing 'type'");
  const std::string type = j.at("type");
  try {
    if (type == "disk") {
      allowed_keys(j, where, {"type", "center", "radius"});
      return DomainSpec::disk(point(j.value("center", json::array({0, 0})), where + ".center"),
                              required_number(j, "radius", where));
    }
    if (type == "annulus") {
      allowed_keys(j, where, {"type", "center", "r_inner", "r_outer"});
      return DomainSpec::annulus(point(j.value("center", json::array({0, 0})), where + ".center"),
                                 required_number(j, "r_inner", where), required_number(j, "r_outer", where));
    }
    if (type == "rectangle") {
      allowed_keys(j, where, {"type", "min", "max"});
      if (!j.contains("min") || !j.contains("max")) config_error(where, "rectangle needs 'min' and 'max'");
      return DomainSpec::rectangle(point(j.at("min"), where + ".min"), point(j.at("max"), where + ".max"));
    }
    if (type == "polygon") {
      allowed_keys(j, where, {"type", "vertices"});
      if (!j.contains("vertices") || !j.at("vertices").is_array()) config_error(where, "polygon needs 'vertices'");
      std::vector<Point> v;
      for (std::size_t i = 0; i < j.at("vertices").size(); ++i)
        v.push_back(point(j.at("vertices")[i], where + ".vertices[" + std::to_string(i) + "]"));
      return DomainSpec::polygon(std::move(v));
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    config_error(where, e.what());
  }
  config_error(where + ".type", "unknown domain type '" + type + "'");
}

inline void parse_diagnostics(const json& j, DiagnosticsOptions& d) {
  const std::string where = "diagnostics";
  allowed_keys(j, where,
               {"off_peak", "profile", "bounds", "decomposition", "system", "height_floor", "R_compare", "delta",
                "gamma"});
  if (j.contains("off_peak")) d.off_peak = boolean(j.at("off_peak"), where + ".off_peak");
  if (j.contains("profile")) d.profile = boolean(j.at("profile"), where + ".profile");
  if (j.contains("bounds")) d.bound = boolean(j.at("bounds"), where + ".bounds");
  if (j.contains("decomposition")) d.decomposition = boolean(j.at("decomposition"), where + ".decomposition");
  if (j.contains("system")) d.system = boolean(j.at("system"), where + ".system");
  if (j.contains("height_floor")) d.height_floor = number(j.at("height_floor"), where + ".height_floor");
  if (j.contains("R_compare")) d.R_compare = number(j.at("R_compare"), where + ".R_compare");
  if (j.contains("delta")) d.delta = number(j.at("delta"), where + ".delta");
  if (j.contains("gamma")) d.bounds.gamma = number(j.at("gamma"), where + ".gamma");
  if (!(d.height_floor > 0.0)) config_error(where + ".height_floor", "must be positive");
  if (!(d.R_compare > 0.0)) config_error(where + ".R_compare", "must be positive");
  if (d.delta < 0.0) config_error(where + ".delta", "must be non-negative");
  if (!(d.bounds.gamma > 0.0 && d.bounds.gamma < 2.0)) config_error(where + ".gamma", "must lie in (0, 2)");
}

}  // namespace detail

/// Validates a run or sweep document against the schema and the preconditions
/// of the operations it drives. Throws ConfigInvalid.
inline RunConfig parse_config(const json& j, bool sweep) {
  using namespace detail;
  allowed_keys(j, "config",
               {"name", "domain", "h", "p_start", "p_end", "report_p", "initial_guess", "diagnostics",
                "concentration_k", "output_dir", "seed", "sweep"});
  RunConfig c;
  c.source = j;
  if (j.contains("name")) {
    if (!j.at("name").is_string() || j.at("name").get<std::string>().empty()) config_error("name", "non-empty string");
    c.name = j.at("name");
  }
  if (!j.contains("domain")) config_error("config", "missing 'domain'");
  c.domain = parse_domain(j.at("domain"));
  if (!j.contains("output_dir") || !j.at("output_dir").is_string() || j.at("output_dir").get<std::string>().empty())
    config_error("output_dir", "non-empty string required");
  c.output_dir = j.at("output_dir");
  if (c.name.empty()) c.name = fs::path(c.output_dir).filename().string();
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_integer() || j.at("seed").get<long long>() < 0)
      config_error("seed", "non-negative integer required");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("diagnostics")) parse_diagnostics(j.at("diagnostics"), c.diagnostics);
  if (j.contains("concentration_k")) {
    const json& k = j.at("concentration_k");
    if (!k.is_array()) config_error("concentration_k", "expected a list of integers");
    for (const auto& v : k) {
      if (!v.is_number_integer() || v.get<int>() < 1 || v.get<int>() > 8)
        config_error("concentration_k", "entries must be integers in [1, 8]");
      c.concentration_k.push_back(v.get<int>());
    }
  }

  if (sweep) {
    if (!j.contains("sweep")) config_error("config", "sweep needs a 'sweep' block");
    const json& s = j.at("sweep");
    allowed_keys(s, "sweep", {"h", "p", "oracle_only"});
    if (s.contains("h")) c.sweep_h = number_list(s.at("h"), "sweep.h");
    if (s.contains("p")) c.sweep_p = number_list(s.at("p"), "sweep.p");
    if (s.contains("oracle_only")) c.oracle_only = boolean(s.at("oracle_only"), "sweep.oracle_only");
    if (c.sweep_h.empty() == c.sweep_p.empty()) config_error("sweep", "exactly one non-empty list of 'h' or 'p'");
    for (double h : c.sweep_h)
      if (!(h > 0.0)) config_error("sweep.h", "entries must be positive");
    for (double p : c.sweep_p)
      if (!(p > 1.0)) config_error("sweep.p", "entries must exceed 1");
    if (std::set<double>(c.sweep_h.begin(), c.sweep_h.end()).size() != c.sweep_h.size() ||
        std::set<double>(c.sweep_p.begin(), c.sweep_p.end()).size() != c.sweep_p.size())
      config_error("sweep", "entries must be distinct");
    if (c.oracle_only) {
      if (c.sweep_p.empty()) config_error("sweep.oracle_only", "needs a p list");
      if (!c.domain.is<Disk>()) config_error("sweep.oracle_only", "the radial oracle needs a disk");
    }
  } else if (j.contains("sweep")) {
    config_error("sweep", "only valid for the sweep command");
  }

  const bool grid_runs = !(sweep && c.oracle_only);
  if (grid_runs) {
    if (!sweep || c.sweep_h.empty()) c.h = required_number(j, "h", "config");
    c.p_start = required_number(j, "p_start", "config");
    if (!(c.p_start > 1.0)) config_error("p_start", "must exceed 1");
    if (j.contains("p_end")) c.p_end = number(j.at("p_end"), "p_end");
    else if (sweep && !c.sweep_p.empty()) c.p_end = *std::max_element(c.sweep_p.begin(), c.sweep_p.end());
    else config_error("config", "missing 'p_end'");
    if (!(c.p_end >= c.p_start)) config_error("p_end", "must be at least p_start");
    if (j.contains("report_p")) c.report_p = number_list(j.at("report_p"), "report_p");
    if (sweep && !c.sweep_p.empty()) c.report_p = c.sweep_p;
    if (c.report_p.empty()) c.report_p = {c.p_end};
    std::sort(c.report_p.begin(), c.report_p.end());
    c.report_p.erase(std::unique(c.report_p.begin(), c.report_p.end()), c.report_p.end());
    for (double p : c.report_p)
      if (p < c.p_start || p > c.p_end) config_error("report_p", "entries must lie in [p_start, p_end]");

    if (j.contains("initial_guess")) {
      const json& g = j.at("initial_guess");
      allowed_keys(g, "initial_guess", {"type", "centers"});
      const std::string type = g.value("type", "");
      if (type == "bubbles") {
        c.guess = InitialGuess::bubbles;
        if (!g.contains("centers") || !g.at("centers").is_array() || g.at("centers").empty())
          config_error("initial_guess.centers", "non-empty list of points required");
        for (std::size_t i = 0; i < g.at("centers").size(); ++i)
          c.bubble_centers.push_back(point(g.at("centers")[i], "initial_guess.centers[" + std::to_string(i) + "]"));
        if (c.p_start < 10.0) config_error("initial_guess", "bubble guesses need p_start >= 10");
      } else if (type == "oracle") {
        c.guess = InitialGuess::oracle;
        if (!c.domain.is<Disk>()) config_error("initial_guess", "the radial oracle guess needs a disk");
      } else if (type != "eigenfunction") {
        config_error("initial_guess.type", "'eigenfunction', 'bubbles' or 'oracle'");
      }
    }
    if (c.guess == InitialGuess::eigenfunction && c.p_start > 5.0)
      config_error("p_start", "the eigenfunction guess needs p_start <= 5");

    std::vector<double> hs = c.sweep_h.empty() ? std::vector<double>{c.h} : c.sweep_h;
    for (double h : hs) {
      if (!(h > 0.0)) config_error("h", "must be positive");
      try {
        const auto grid = build_grid(c.domain, h);
        for (Point x : c.bubble_centers)
          require(c.domain.signed_distance(x) < -2.0 * h, ErrorCode::CenterOutside, "bubble centre too close to the boundary");
      } catch (const Error& e) {
        config_error("h", e.what());
      }
      if (c.diagnostics.delta > 0.0 && c.diagnostics.delta < 5.0 * h)
        config_error("diagnostics.delta", "must be at least 5h");
    }
  }
  return c;
}

struct SummaryRow {
  std::string domain;
  double h = 0.0, p = 0.0;
  std::string status;
  double newton_iterations = nan_value, residual = nan_value;
  double max_value = nan_value, energy = nan_value, energy_ratio = nan_value, energy_cross_check = nan_value;
  double k = nan_value;
  double sqrtp_sup = nan_value, green_sup = nan_value, profile_error = nan_value;
  double mass = nan_value, m_est = nan_value, system_residual = nan_value;
};

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{
      "domain", "h", "p", "status", "newton_iterations", "residual", "max_value", "energy", "energy_ratio",
      "energy_cross_check", "k", "sqrtp_sup", "green_sup", "profile_error", "mass", "m_est", "system_residual"};
  return cols;
}

inline void write_summary(const fs::path& path, std::vector<SummaryRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    if (a.domain != b.domain) return a.domain < b.domain;
    if (a.h != b.h) return a.h < b.h;
    return a.p < b.p;
  });
  std::vector<std::vector<CsvCell>> cells;
  for (const auto& r : rows)
    cells.push_back({r.domain, r.h, r.p, r.status, r.newton_iterations, r.residual, r.max_value, r.energy,
                     r.energy_ratio, r.energy_cross_check, r.k, r.sqrtp_sup, r.green_sup, r.profile_error, r.mass,
                     r.m_est, r.system_residual});
  write_csv(path, summary_columns(), cells);
}

inline void fill_from_report(SummaryRow& row, const DiagnosticsReport& r) {
  row.k = r.k;
  row.max_value = r.max_value;
  row.energy = r.energy.energy;
  row.energy_ratio = r.energy.ratio;
  row.energy_cross_check = r.energy.cross_check;
  if (r.off_peak) {
    row.sqrtp_sup = r.off_peak->sqrtp_sup;
    row.green_sup = r.off_peak->green_sup;
  }
  if (!r.profile_errors.empty()) row.profile_error = *std::max_element(r.profile_errors.begin(), r.profile_errors.end());
  if (!r.decomposition.empty()) {
    row.mass = row.m_est = 0.0;
    for (const auto& d : r.decomposition) {
      row.mass += d.mass / static_cast<double>(r.decomposition.size());
      row.m_est += d.m_est / static_cast<double>(r.decomposition.size());
    }
  }
  row.system_residual = r.system_residual;
}

struct RunnerOptions {
  unsigned jobs = 1;
  std::string log_level = "info";
  std::optional<fs::path> output_root;  // defaults to $LANE_EMDEN_OUTPUT_ROOT, then the working directory
};

inline std::shared_ptr<spdlog::logger> runner_log() {
  static std::mutex m;
  std::lock_guard lock(m);
  if (auto l = spdlog::get("lane_emden")) return l;
  auto l = spdlog::stderr_logger_mt("lane_emden");
  l->set_pattern("[%l] %v");
  return l;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline json error_record(ErrorCode code, const std::string& message) {
  return {{"code", std::string(to_string(code))}, {"message", message}};
}

/// Output files written for one run directory; paths relative to it.
class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}
  const fs::path& root() const { return root_; }

  fs::path add(const fs::path& rel) {
    std::lock_guard lock(m_);
    files_.insert(rel.generic_string());
    return root_ / rel;
  }
  std::vector<std::string> files() const {
    std::lock_guard lock(m_);
    return {files_.begin(), files_.end()};
  }

 private:
  fs::path root_;
  mutable std::mutex m_;
  std::set<std::string> files_;
};

struct EntryResult {
  std::vector<SummaryRow> rows;
  std::map<double, Field> report_fields;
  std::vector<DiagnosticsReport> reports;
  json timings = json::array();
  json concentration = json::array();
  std::optional<json> error;
  bool stalled = false;
};

namespace detail {

inline void remove_previous_outputs(const fs::path& root) {
  std::error_code ec;
  for (const char* name : {"fields", "diagnostics", "entries"}) fs::remove_all(root / name, ec);
  for (const char* name : {"summary.csv", "convergence.csv", "extrapolation.json", "manifest.json"})
    fs::remove(root / name, ec);
}

inline std::vector<Configuration> locate(int k, const GreenEvaluator& g, const RunConfig& cfg, unsigned jobs) {
  LocationSolveOptions opt;
  opt.seed = cfg.seed;
  opt.jobs = jobs;
  return solve_system(static_cast<std::size_t>(k), g, opt);
}

}  // namespace detail

/// One continuation at spacing h with diagnostics at the report exponents.
inline EntryResult run_entry(const RunConfig& cfg, double h, const GreenEvaluator* green, Artifacts& out,
                             const fs::path& rel, unsigned jobs) {
  auto log = runner_log();
  EntryResult res;
  const auto grid = build_grid(cfg.domain, h);
  DiscreteLaplacian lap(grid);
  ContinuationOptions co;
  co.milestones = cfg.report_p;
  log->info("{} h={} unknowns={} p {} -> {}", cfg.domain.kind(), label(h), grid->unknown_count(), label(cfg.p_start),
            label(cfg.p_end));
  ContinuationRun run;
  if (cfg.guess == InitialGuess::bubbles) {
    run = continue_in_p(lap, bubble_start(grid, cfg.p_start, cfg.bubble_centers), "bubbles", cfg.p_start,
                        cfg.p_end, {}, co);
  } else if (cfg.guess == InitialGuess::oracle) {
    const ExactDiskSolution exact(cfg.domain, cfg.p_start);
    run = continue_in_p(lap, Field::sample(grid, [&](Point x) { return exact.value(x); }), "oracle", cfg.p_start,
                        cfg.p_end, {}, co);
  } else {
    run = continue_in_p(lap, cfg.p_start, cfg.p_end, {}, co);
  }
  res.stalled = run.status == RunStatus::stalled;
  if (res.stalled) res.error = error_record(ErrorCode::ContinuationStalled, run.stall_reason);

  for (const auto& st : run.steps) {
    SummaryRow row;
    row.domain = cfg.domain.kind();
    row.h = h;
    row.p = st.p;
    row.status = st.reseeded ? "reseeded" : "accepted";
    row.newton_iterations = st.iterations;
    row.residual = st.residual;
    res.timings.push_back({{"h", h}, {"p", st.p}, {"seconds", st.wall_time}});
    const bool report = std::binary_search(cfg.report_p.begin(), cfg.report_p.end(), st.p);
    log->debug("p={} iterations={} residual={:.3e}", label(st.p), st.iterations, st.residual);
    if (!report) {
      const GridSolutionView v(st.u, st.p);
      row.max_value = v.max_value();
      const EnergyCheck e = energy_check(v);
      row.energy = e.energy;
      row.energy_ratio = e.ratio;
      row.energy_cross_check = e.cross_check;
      try {
        row.k = static_cast<double>(find_peaks(v, cfg.diagnostics.height_floor).size());
      } catch (const Error&) {
        row.k = 0;
      }
      res.rows.push_back(row);
      continue;
    }
    const std::string tag = "p" + label(st.p);
    write_field_csv(out.add(rel / "fields" / ("u_" + tag + ".csv")), st.u);
    write_pgm(out.add(rel / "fields" / ("u_" + tag + ".pgm")), field_heatmap(st.u));
    const GridSolutionView v(st.u, st.p);
    try {
      DiagnosticsReport rep = diagnose(v, *green, cfg.diagnostics);
      fill_from_report(row, rep);
      json j = to_json(rep);
      j["h"] = h;
      j["domain"] = cfg.domain.kind();
      j["newton_iterations"] = st.iterations;
      j["residual"] = st.residual;
      write_json(out.add(rel / "diagnostics" / ("report_" + tag + ".json")), j);
      res.reports.push_back(std::move(rep));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPeaks) throw;
      row.k = 0;
      write_json(out.add(rel / "diagnostics" / ("report_" + tag + ".json")),
                 {{"p", st.p}, {"h", h}, {"error", error_record(e.code(), e.what())}});
    }
    res.rows.push_back(row);
    res.report_fields.emplace(st.p, st.u);
  }

  for (int k : cfg.concentration_k) {
    json cj{{"k", k}};
    try {
      const auto sols = detail::locate(k, *green, cfg, jobs);
      cj["status"] = "solved";
      json list = json::array();
      for (const auto& s : sols) list.push_back(to_json(s));
      cj["configurations"] = list;
      json matches = json::array();
      const auto center = cfg.domain.rotation_center();
      for (const auto& rep : res.reports) {
        if (rep.k != k) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : sols)
          best = std::min(best, center ? detail::rotation_assignment_distance(rep.peaks.locations(), s.points, *center)
                                       : detail::assignment_distance(rep.peaks.locations(), s.points));
        matches.push_back({{"p", rep.p}, {"distance", best}, {"distance_over_h", best / h}});
      }
      cj["peak_match"] = matches;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSolutionFound) throw;
      cj["status"] = "NoSolutionFound";
      cj["error"] = error_record(e.code(), e.what());
    }
    write_json(out.add(rel / "diagnostics" / ("concentration_k" + std::to_string(k) + ".json")), cj);
    res.concentration.push_back(cj);
  }
  return res;
}

inline fs::path resolve_output(const RunConfig& cfg, const RunnerOptions& opt) {
  fs::path dir(cfg.output_dir);
  if (dir.is_absolute()) return dir;
  if (opt.output_root) return *opt.output_root / dir;
  if (const char* env = std::getenv("LANE_EMDEN_OUTPUT_ROOT"); env && *env) return fs::path(env) / dir;
  return dir;
}

inline json versions() {
  return {{"lane_emden", tool_version},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"compiler", __VERSION__}};
}

namespace detail {

inline std::vector<SummaryRow> extrapolation_rows(const std::vector<SummaryRow>& rows, json& block) {
  std::map<std::string, std::map<std::string, std::vector<std::pair<double, double>>>> by_domain;
  for (const auto& r : rows) {
    if (!std::isfinite(r.p)) continue;
    auto& q = by_domain[r.domain + "|" + format_number(r.h)];
    for (auto [name, v] : {std::pair<const char*, double>{"max_value", r.max_value}, {"energy", r.energy},
                           {"mass", r.mass}, {"m_est", r.m_est}})
      if (std::isfinite(v)) q[name].emplace_back(r.p, v);
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, q] : by_domain) {
    SummaryRow row;
    row.domain = key.substr(0, key.find('|'));
    row.h = std::stod(key.substr(key.find('|') + 1));
    row.p = std::numeric_limits<double>::infinity();
    row.status = "extrapolated";
    json jq;
    for (const auto& [name, samples] : q) {
      try {
        const Extrapolation e = extrapolate(samples);
        jq[name] = {{"limit", e.limit}, {"rms", e.rms}, {"condition", e.condition}, {"samples", samples.size()}};
        if (name == "max_value") row.max_value = e.limit;
        if (name == "energy") {
          row.energy = e.limit;
          row.energy_ratio = e.limit / quantum();
        }
        if (name == "mass") row.mass = e.limit;
        if (name == "m_est") row.m_est = e.limit;
      } catch (const Error& e) {
        jq[name] = {{"error", error_record(e.code(), e.what())}};
      }
    }
    block.push_back({{"domain", row.domain}, {"h", row.h}, {"quantities", jq}});
    out.push_back(row);
  }
  return out;
}

inline int finish(const fs::path& root, Artifacts& out, json manifest, std::vector<SummaryRow> rows,
                  const std::optional<json>& error, bool stalled) {
  write_summary(out.add("summary.csv"), std::move(rows));
  manifest["status"] = error ? (stalled ? "stalled" : "failed") : "completed";
  manifest["error"] = error ? *error : json();
  manifest["files"] = out.files();
  write_json(root / "manifest.json", manifest);
  return error ? 1 : 0;
}

}  // namespace detail

/// `run`: one continuation with reports, concentration solves and a manifest.
inline int run_config(const RunConfig& cfg, const RunnerOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = resolve_output(cfg, opt);
  detail::remove_previous_outputs(root);
  fs::create_directories(root);
  Artifacts out(root);
  json manifest{{"tool", "lane_emden"}, {"command", "run"}, {"config", cfg.source}, {"versions", versions()},
                {"seed", cfg.seed}};
  EntryResult res;
  try {
    const auto green = make_green_evaluator(cfg.domain);
    res = run_entry(cfg, cfg.h, green.get(), out, "", opt.jobs);
  } catch (const Error& e) {
    runner_log()->error("{}", e.what());
    res.error = error_record(e.code(), e.what());
  }
  manifest["timings"] = {{"steps", res.timings},
                         {"total_seconds",
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  manifest["concentration"] = res.concentration;
  return detail::finish(root, out, manifest, res.rows, res.error, res.stalled);
}

/// `sweep`: independent entries over an h list or a p list, merged in sorted order.
inline int sweep_config(const RunConfig& cfg, const RunnerOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto log = runner_log();
  const fs::path root = resolve_output(cfg, opt);
  detail::remove_previous_outputs(root);
  fs::create_directories(root);
  Artifacts out(root);
  json manifest{{"tool", "lane_emden"}, {"command", "sweep"}, {"config", cfg.source}, {"versions", versions()},
                {"seed", cfg.seed}};
  std::vector<SummaryRow> rows;
  std::optional<json> error;
  bool stalled = false;
  json timings = json::array();

  try {
    const auto green = make_green_evaluator(cfg.domain);
    if (cfg.oracle_only) {
      std::vector<SummaryRow> per(cfg.sweep_p.size());
      std::vector<json> reports(cfg.sweep_p.size());
      parallel_for(cfg.sweep_p.size(), opt.jobs, [&](std::size_t i) {
        const double p = cfg.sweep_p[i];
        const auto t = std::chrono::steady_clock::now();
        const ExactDiskSolution s(cfg.domain, p);
        const DiagnosticsReport rep = diagnose(s, *green, cfg.diagnostics);
        SummaryRow& row = per[i];
        row.domain = cfg.domain.kind();
        row.h = 0.0;
        row.p = p;
        row.status = "oracle";
        fill_from_report(row, rep);
        reports[i] = to_json(rep);
        reports[i]["h"] = 0.0;
        reports[i]["radial"] = {{"r0", s.radial().r0}, {"height", s.radial().height}, {"energy", s.radial().energy}};
        reports[i]["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
      });
      for (std::size_t i = 0; i < per.size(); ++i) {
        log->info("oracle p={} M={:.8f} E={:.6f}", label(per[i].p), per[i].max_value, per[i].energy);
        timings.push_back({{"p", per[i].p}, {"seconds", reports[i]["seconds"]}});
        reports[i].erase("seconds");
        write_json(out.add(fs::path("diagnostics") / ("oracle_p" + label(per[i].p) + ".json")), reports[i]);
        rows.push_back(per[i]);
      }
    } else if (!cfg.sweep_p.empty()) {
      EntryResult res = run_entry(cfg, cfg.h, green.get(), out, "", opt.jobs);
      rows = std::move(res.rows);
      timings = res.timings;
      error = res.error;
      stalled = res.stalled;
    } else {
      std::vector<double> hs = cfg.sweep_h;
      std::sort(hs.begin(), hs.end(), std::greater<>());
      std::vector<EntryResult> results(hs.size());
      std::vector<std::optional<json>> errors(hs.size());
      parallel_for(hs.size(), opt.jobs, [&](std::size_t i) {
        try {
          results[i] = run_entry(cfg, hs[i], green.get(), out, fs::path("entries") / ("h" + label(hs[i])), 1);
        } catch (const Error& e) {
          errors[i] = error_record(e.code(), e.what());
        }
      });
      for (std::size_t i = 0; i < hs.size(); ++i) {
        for (auto& r : results[i].rows) rows.push_back(r);
        for (auto& t : results[i].timings) timings.push_back(t);
        if (!error && errors[i]) error = errors[i];
        if (!error && results[i].error) {
          error = results[i].error;
          stalled = results[i].stalled;
        }
      }
      if (cfg.domain.is<Disk>()) {
        // Max nodal error against the radial solution, and ratios under refinement.
        std::vector<std::vector<CsvCell>> table;
        json conv = json::array();
        for (double p : cfg.report_p) {
          const ExactDiskSolution exact(cfg.domain, p);
          double prev = nan_value;
          for (std::size_t i = 0; i < hs.size(); ++i) {
            auto it = results[i].report_fields.find(p);
            if (it == results[i].report_fields.end()) continue;
            const Field& u = it->second;
            double err = 0.0;
            for (std::size_t k = 0; k < u.size(); ++k)
              err = std::max(err, std::abs(u[k] - exact.value(u.grid().position(k))));
            const double ratio = prev / err;
            table.push_back({p, hs[i], err, ratio});
            conv.push_back({{"p", p}, {"h", hs[i]}, {"error", err}, {"ratio", std::isfinite(ratio) ? json(ratio) : json()}});
            log->info("convergence p={} h={} error={:.4e} ratio={:.3f}", label(p), label(hs[i]), err, ratio);
            prev = err;
          }
        }
        write_csv(out.add("convergence.csv"), {"p", "h", "error", "ratio"}, table);
        manifest["convergence"] = conv;
      }
    }
    if (!cfg.sweep_p.empty()) {
      json block = json::array();
      for (auto& r : detail::extrapolation_rows(rows, block)) rows.push_back(r);
      write_json(out.add("extrapolation.json"), block);
    }
  } catch (const Error& e) {
    log->error("{}", e.what());
    error = error_record(e.code(), e.what());
  }
  manifest["timings"] = {{"steps", timings},
                         {"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  return detail::finish(root, out, manifest, rows, error, stalled);
}

}  // namespace lane_emden
