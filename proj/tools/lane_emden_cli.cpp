// Batch front end: lane_emden_cli {run,sweep} <config.json> [--jobs N] [--log info|debug]
#include <iostream>

#include <CLI11.hpp>

#include "lane_emden/runner.hpp"

using namespace lane_emden;

namespace {

int schema_failure(const Error& e) {
  std::cerr << json{{"error", error_record(e.code(), e.what())}}.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lane-Emden concentration experiments"};
  app.require_subcommand(1);
  RunnerOptions opt;
  std::string config;
  app.add_option("--jobs", opt.jobs, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--log", opt.log_level, "log level")->check(CLI::IsMember({"info", "debug"}));
  auto* run = app.add_subcommand("run", "continuation run with reports");
  run->add_option("config", config, "run config (JSON)")->required();
  auto* sweep = app.add_subcommand("sweep", "h-list or p-list sweep");
  sweep->add_option("config", config, "sweep config (JSON)")->required();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  runner_log()->set_level(opt.log_level == "debug" ? spdlog::level::debug : spdlog::level::info);

  const bool is_sweep = sweep->parsed();
  RunConfig cfg;
  try {
    cfg = parse_config(read_json(config), is_sweep);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::IoError) return schema_failure(e);
    throw;
  }
  try {
    return is_sweep ? sweep_config(cfg, opt) : run_config(cfg, opt);
  } catch (const Error& e) {
    std::cerr << json{{"error", error_record(e.code(), e.what())}}.dump() << '\n';
    return 1;
  }
}
