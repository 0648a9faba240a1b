#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "twistreg/campaign.hpp"
#include "twistreg/errors.hpp"
#include "twistreg/symbol_calculus.hpp"

using namespace twistreg;
using Catch::Approx;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "twistreg_test_campaign" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> r;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) r.push_back(c);
    rows.push_back(r);
  }
  return rows;
}

ErrorCode code_of(const std::string& text) {
  try {
    parse_campaign(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("config parsing keeps order, defaults and overrides") {
  std::string text =
      "[campaign]\nseed = 42\nout = somewhere\n\n"
      "[second]\ntask = verify-bounds\ndim = 3\n\n"
      "[check-unitarity]\ngrids = 0.2,0.1\n";
  Campaign c = parse_campaign(text);
  REQUIRE(c.seed == 42);
  REQUIRE(c.out_dir == "somewhere");
  REQUIRE(c.tasks.size() == 2);
  REQUIRE(c.tasks[0].id == "second");
  REQUIRE(c.tasks[0].type == "verify-bounds");
  REQUIRE(c.tasks[0].integer("dim") == 3);
  REQUIRE(c.tasks[0].integer("alpha_max") == 12);
  REQUIRE(c.tasks[1].type == "check-unitarity");
  REQUIRE(c.tasks[1].list("grids") == std::vector<double>{0.2, 0.1});
  REQUIRE(c.config_hash.size() == 8);
  REQUIRE(parse_campaign(text).config_hash == c.config_hash);
  REQUIRE(parse_campaign(text + "\n").config_hash != c.config_hash);
}

TEST_CASE("malformed configs are config errors") {
  REQUIRE(code_of("[x]\ntask = no-such-task\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[verify-bounds]\ntypo = 1\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[verify-bounds]\ndim = three\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[verify-bounds]\ndim = 1.5\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[verify-bounds]\nstability = yes\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[check-unitarity]\ngrids = 0.1,x\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("seed = 3\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[campaign]\nseed = -3\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[campaign]\ncolour = red\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[a]\ntask = verify-bounds\n[a]\ntask = verify-bounds\n") == ErrorCode::ConfigError);
  REQUIRE(code_of("[broken\n") == ErrorCode::ConfigError);
  REQUIRE_THROWS_AS(load_campaign("/nonexistent/config.ini"), Error);
  REQUIRE(parse_campaign("[build-twist]\nnuclei = 5,0,0;0,6,0\n").tasks.size() == 1);
  REQUIRE(parse_campaign("[build-twist]\nnuclei =\n").tasks.size() == 1);
}

TEST_CASE("metric checks") {
  REQUIRE(check_le("a", 1.0, 1.0).pass);
  REQUIRE_FALSE(check_le("a", 1.0 + 1e-15, 1.0).pass);
  REQUIRE(check_ge("a", 3.0, 3.0).pass);
  REQUIRE_FALSE(check_ge("a", std::nan(""), 3.0).pass);
  REQUIRE(check_eq("a", 1.05, 1.0, 0.1).pass);
  REQUIRE_FALSE(check_eq("a", 1.2, 1.0, 0.1).pass);
  REQUIRE(check_in("a", -1.2, -1.2, -0.8).pass);
  REQUIRE_FALSE(check_in("a", -0.7, -1.2, -0.8).pass);
}

TEST_CASE("empty task list passes without reports") {
  fs::path out = scratch("empty");
  Campaign c = parse_campaign("[campaign]\nseed = 3\n");
  c.out_dir = out.string();
  CampaignResult r = run_campaign(c);
  REQUIRE(r.pass);
  REQUIRE(r.reports.empty());
  REQUIRE(fs::is_empty(out));
}

TEST_CASE("verify-bounds d = 1 passes with K = 1") {
  fs::path out = scratch("bounds");
  Report r = run_task(make_task("b", "verify-bounds", {{"dim", "1"}, {"alpha_max", "10"}}), out.string(), 1);
  REQUIRE(r.pass);
  json j = json::parse(r.json());
  REQUIRE(j["schema_version"] == 1);
  REQUIRE(j["status"] == "pass");
  REQUIRE(j["data"]["K_min"].get<double>() == Approx(1.0).epsilon(1e-12));
  for (const auto& m : j["metrics"]) {
    REQUIRE(m.contains("check"));
    REQUIRE((m.contains("tolerance") || (m.contains("lo") && m.contains("hi"))));
  }
  REQUIRE(j["provenance"]["seed"] == "1");
  REQUIRE(j["provenance"]["param.alpha_max"] == "10");
  for (const auto& a : j["artifacts"]) REQUIRE(fs::exists(out / a.get<std::string>()));
}

TEST_CASE("a throwing task fails softly and later tasks still run") {
  fs::path out = scratch("failsoft");
  Campaign c = parse_campaign(
      "[bad]\ntask = build-twist\nnuclei = 2,0,0\nconjugation = false\n"
      "[good]\ntask = verify-bounds\nalpha_max = 6\n");
  c.out_dir = out.string();
  CampaignResult r = run_campaign(c);
  REQUIRE_FALSE(r.pass);
  REQUIRE(r.reports.size() == 2);
  REQUIRE_FALSE(r.reports[0].pass);
  REQUIRE(r.reports[0].error.find("NucleusInsideSupport") != std::string::npos);
  REQUIRE(r.reports[1].pass);
  REQUIRE(fs::exists(out / "bad.json"));
  REQUIRE(fs::exists(out / "good.json"));
  REQUIRE(fs::exists(out / "timings.json"));
  REQUIRE(json::parse(slurp(out / "bad.json"))["status"] == "fail");
}

TEST_CASE("a failed check fails the task") {
  fs::path out = scratch("failcheck");
  Report r = run_task(make_task("u", "check-unitarity", {{"grids", "0.1,0.05"}, {"drift_tol", "1e-12"}}),
                      out.string(), 1);
  REQUIRE_FALSE(r.pass);
  REQUIRE(r.error.empty());
}

TEST_CASE("unknown full-theorem model is a config error") {
  fs::path out = scratch("model");
  REQUIRE_THROWS_AS(run_task(make_task("f", "full-theorem", {{"model", "helium"}}), out.string(), 1), Error);
}

TEST_CASE("reports are byte-identical across runs with a fixed seed") {
  std::string text =
      "[campaign]\nseed = 5\n"
      "[unitarity]\ntask = check-unitarity\ngrids = 0.1,0.05\nbase_points = 2\n"
      "[twist]\ntask = build-twist\nt_samples = 10\nconj_grids = 0.1,0.05\nconj_fields = 2\n"
      "[toy]\ntask = solve-toy\nZ = 1\nn_points = 1000\npsi_tol = 1e-2\nfiber_grids = 0.1,0.05\n";
  std::vector<std::string> ids = {"unitarity", "twist", "toy"};
  Campaign c = parse_campaign(text);
  fs::path a = scratch("det_a"), b = scratch("det_b"), other = scratch("det_c");
  c.out_dir = a.string();
  REQUIRE(run_campaign(c).pass);
  c.out_dir = b.string();
  run_campaign(c);
  for (const auto& id : ids) REQUIRE(slurp(a / (id + ".json")) == slurp(b / (id + ".json")));
  c.seed = 6;
  c.out_dir = other.string();
  run_campaign(c);
  REQUIRE(slurp(other / "twist.json") != slurp(b / "twist.json"));
}

TEST_CASE("growth CSV schema") {
  fs::path out = scratch("growth");
  DerivativeTable empty;
  write_growth_csv(empty, Verdict{}, (out / "empty.csv").string());
  REQUIRE(slurp(out / "empty.csv") == "order,log_sup,fitted\n");

  std::vector<double> M;
  for (int n = 0; n <= 10; ++n) M.push_back(std::pow(0.7, n + 1) * std::tgamma(n + 1.0));
  DerivativeTable t = table_from_orders(M);
  Verdict v = classify(t);
  REQUIRE(v.cls == GrowthClass::Analytic);
  write_growth_csv(t, v, (out / "g.csv").string());
  auto rows = read_csv(out / "g.csv");
  REQUIRE(rows.size() == 12);
  REQUIRE(rows[0] == std::vector<std::string>{"order", "log_sup", "fitted"});
  for (int n = 0; n <= 10; ++n) {
    REQUIRE(std::stoi(rows[n + 1][0]) == n);
    REQUIRE(std::stod(rows[n + 1][1]) == Approx(std::log(M[n])).epsilon(1e-14));
    double fit = (n + 1) * std::log(v.A) + std::lgamma(n + 1.0);
    REQUIRE(std::stod(rows[n + 1][2]) == Approx(fit).epsilon(1e-14));
    REQUIRE(std::stod(rows[n + 1][2]) >= std::stod(rows[n + 1][1]) - 1e-12);
  }
}

TEST_CASE("decay CSV slope column equals the reported slope") {
  fs::path out = scratch("decay");
  Report r =
      run_task(make_task("p", "parametrix", {{"nx", "64"}, {"ny", "230"}, {"lambdas", "2,4"}}), out.string(), 1);
  REQUIRE(r.error.empty());
  auto rows = read_csv(out / "p_decay.csv");
  REQUIRE(rows[0][3] == "slope");
  REQUIRE(rows.size() == 3);
  double reported = r.metrics[0].value;
  std::vector<double> lam, ratio;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(std::abs(std::stod(rows[i][3]) - reported) <= 1e-12);
    lam.push_back(std::stod(rows[i][0]));
    ratio.push_back(std::stod(rows[i][1]));
  }
  REQUIRE(std::abs(loglog_slope(lam, ratio) - reported) <= 1e-12 * std::abs(reported));
}

TEST_CASE("full-theorem on hydrogen certifies the shell and rejects the nucleus") {
  fs::path out = scratch("theorem");
  Report r = run_task(make_task("h", "full-theorem", {{"model", "hydrogen"}, {"max_order", "24"}}), out.string(), 1);
  REQUIRE(r.pass);
  json j = json::parse(r.json());
  REQUIRE(j["data"]["shell_verdict"]["class"] == "analytic");
  REQUIRE(j["data"]["nucleus_verdict"]["class"] == "non_analytic");
  REQUIRE(fs::exists(out / "h_shell_growth.csv"));
}

TEST_CASE("shared studies") {
  UnitarityStudy u = unitarity_study({0.1, 0.05}, 3, 2);
  REQUIRE(u.drift[0] < 1e-4);
  REQUIRE(u.drift[1] < u.drift[0] / 3.0);
  DiffeoStudy d = diffeo_study(BumpSpec{}, 4, 30, 30, 2);
  REQUIRE(d.round_trip <= 1e-10);
  REQUIRE(d.max_contraction <= 0.5);
  REQUIRE(d.C0 <= 2.0);
  REQUIRE(d.identity_defect == 0.0);
  ConjugationStudy s = conjugation_study({0.1, 0.05}, 2, 2);
  REQUIRE(s.relative.size() == 2);
  REQUIRE(s.min_order > 1.7);
}
