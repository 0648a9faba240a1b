#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "twistreg/campaign.hpp"
#include "twistreg/errors.hpp"

using namespace twistreg;

namespace {

constexpr const char* kOutEnv = "TWISTREG_OUT";

void list_tasks() {
  for (const TaskDef& d : task_catalog()) {
    std::cout << d.type << "  " << d.summary << "\n";
    for (const auto& [k, v] : d.defaults) std::cout << "    " << k << " = " << v << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twistreg: verification campaigns for the twisted-coordinate regularity argument"};
  std::string out;
  std::uint64_t seed = 0;
  bool verbose = false, list = false;
  app.add_flag("--list-tasks", list, "List task types and their parameters");
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  auto* run = app.add_subcommand("run", "Run the tasks of a config file");
  std::string config;
  run->add_option("config", config, "INI config")->required();
  auto* out_opt = app.add_option("--out", out, "Output directory (overrides $TWISTREG_OUT and the config)");
  auto* seed_opt = app.add_option("--seed", seed, "Seed (overrides the config)");
  run->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto log = spdlog::stderr_color_mt("twistreg");
  log->set_pattern("[%l] %v");
  log->set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  if (list) {
    list_tasks();
    return 0;
  }
  if (!*run) {
    std::cerr << app.help();
    return 2;
  }

  Campaign c;
  try {
    c = load_campaign(config);
  } catch (const Error& e) {
    log->error("{}", e.what());
    return 2;
  }
  if (const char* env = std::getenv(kOutEnv); env && *env) c.out_dir = env;
  if (*out_opt) c.out_dir = out;
  if (*seed_opt) c.seed = seed;
  log->info("config {} (crc32 {}), {} task(s), seed {}, output {}", config, c.config_hash, c.tasks.size(), c.seed,
            c.out_dir);

  CampaignResult res;
  try {
    res = run_campaign(c, [&](const Report& r, double sec) {
      log->info("{:<20} {:<16} {} ({:.1f} s)", r.id, r.task, r.pass ? "pass" : "FAIL", sec);
      if (!r.error.empty()) log->warn("{}: {}", r.id, r.error);
      for (const Metric& m : r.metrics)
        if (!m.pass || verbose) {
          std::string check = m.cmp == "in"   ? fmt::format("in [{:.6g}, {:.6g}]", m.lo, m.hi)
                              : m.cmp == "==" ? fmt::format("== {:.6g} +- {:.3g}", m.target, m.tolerance)
                                              : fmt::format("{} {:.6g}", m.cmp, m.tolerance);
          log->log(m.pass ? spdlog::level::debug : spdlog::level::warn, "  {} = {:.6g} ({})", m.name, m.value, check);
        }
    });
  } catch (const Error& e) {
    log->error("{}", e.what());
    return e.code() == ErrorCode::ConfigError ? 2 : 1;
  }
  return res.pass ? 0 : 1;
}
