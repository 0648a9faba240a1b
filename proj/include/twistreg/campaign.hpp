#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "twistreg/analyticity.hpp"
#include "twistreg/bump_diffeo.hpp"

namespace twistreg {

constexpr int kSchemaVersion = 1;

// Checked quantity. `cmp` is "<=" or ">=" against `tolerance`, "==" against
// `target` within `tolerance`, or "in" for lo <= value <= hi.
struct Metric {
  std::string name;
  double value = 0.0;
  std::string cmp = "<=";
  double tolerance = 0.0;
  double target = 0.0;
  double lo = 0.0, hi = 0.0;
  bool pass = false;
};
Metric check_le(const std::string& name, double value, double bound);
Metric check_ge(const std::string& name, double value, double bound);
Metric check_eq(const std::string& name, double value, double expected, double tolerance = 0.0);
Metric check_in(const std::string& name, double value, double lo, double hi);

struct Report {
  std::string id;
  std::string task;
  bool pass = false;
  std::string error;  // set when the task threw
  std::vector<Metric> metrics;
  std::map<std::string, std::string> provenance;
  std::map<std::string, std::string> grids;
  std::vector<std::string> artifacts;  // relative to the output directory
  std::string data;  // unchecked diagnostics, JSON object text
  std::string json() const;
};

struct TaskSpec {
  std::string id;
  std::string type;
  std::map<std::string, std::string> params;  // defaults overlaid with the config

  std::string str(const std::string& key) const;
  double num(const std::string& key) const;
  int integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> list(const std::string& key) const;
};

struct TaskDef {
  std::string type;
  std::string summary;
  std::vector<std::pair<std::string, std::string>> defaults;
};
const std::vector<TaskDef>& task_catalog();

struct Campaign {
  std::vector<TaskSpec> tasks;
  std::string out_dir = "twistreg_out";
  std::uint64_t seed = 1;
  std::string config_hash;  // CRC-32 of the config bytes, hex
};

// INI text: an optional [campaign] section (seed, out) and one section per
// task; the section name is the task id and `task` its type (default: the
// section name). Throws ConfigError.
Campaign parse_campaign(const std::string& text);
Campaign load_campaign(const std::string& path);
TaskSpec make_task(const std::string& id, const std::string& type, const std::map<std::string, std::string>& params = {});

Report run_task(const TaskSpec& task, const std::string& out_dir, std::uint64_t seed,
                const std::string& config_hash = "");

struct CampaignResult {
  std::vector<Report> reports;
  std::vector<std::pair<std::string, double>> seconds;
  bool pass = true;
};
// Runs tasks in order, writes <out>/<id>.json per task and <out>/timings.json.
// `on_done` is called after each report is written.
CampaignResult run_campaign(const Campaign& c,
                            const std::function<void(const Report&, double seconds)>& on_done = {});

// Growth curve of a derivative table: order, log_sup, fitted, where fitted
// is (n + 1) log A + s log n! from the verdict. Orders with zero sup are omitted.
void write_growth_csv(const DerivativeTable& t, const Verdict& v, const std::string& path);

// Shared studies, also used by the acceptance driver.
struct UnitarityStudy {
  std::vector<double> h;
  std::vector<double> drift;  // max over base points of | ||U v|| - ||v|| | / ||v||
  std::vector<double> round_trip;
};
UnitarityStudy unitarity_study(const std::vector<double>& h, int base_points, std::uint64_t seed);

struct BumpSpec {
  std::vector<double> center{0.0, 0.0, 0.0};
  double inner = 1.0;
  double outer = 3.0;
  std::vector<std::vector<double>> nuclei{{5.0, 0.0, 0.0}};
  int fibers = 2;
};
struct DiffeoStudy {
  double omega_radius = 0.0;
  double round_trip = 0.0;       // max of |f(x, g(x, t)) - t| and |g(x, f(x, s)) - s|
  double max_contraction = 0.0;
  double C0 = 0.0;
  double identity_defect = 0.0;  // max |f(x, x0) - x| + |f(x, s) - s| off supp tau
};
DiffeoStudy diffeo_study(const BumpSpec& b, int x_samples, int y_samples, int t_samples, std::uint64_t seed);

struct ConjugationStudy {
  std::vector<double> h;
  std::vector<std::vector<double>> relative;  // [field][grid]
  double min_order = 0.0;  // min over fields and refinements of log2 of successive ratios
  double max_relative = 0.0;  // max over fields of the coarse-grid error
};
ConjugationStudy conjugation_study(const std::vector<double>& h, int fields, std::uint64_t seed);

}  // namespace twistreg
