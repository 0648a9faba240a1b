#include "twistreg/campaign.hpp"

#include <algorithm>
#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <random>
#include <sstream>

#include "twistreg/conj_operator.hpp"
#include "twistreg/coulomb_bounds.hpp"
#include "twistreg/errors.hpp"
#include "twistreg/symbol_calculus.hpp"
#include "twistreg/toy_density.hpp"
#include "twistreg/twist_transport.hpp"

namespace twistreg {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

Metric check_le(const std::string& name, double value, double bound) {
  Metric m{name, value, "<="};
  m.tolerance = bound;
  m.pass = value <= bound;
  return m;
}
Metric check_ge(const std::string& name, double value, double bound) {
  Metric m{name, value, ">="};
  m.tolerance = bound;
  m.pass = value >= bound;
  return m;
}
Metric check_eq(const std::string& name, double value, double expected, double tolerance) {
  Metric m{name, value, "=="};
  m.target = expected;
  m.tolerance = tolerance;
  m.pass = std::abs(value - expected) <= tolerance;
  return m;
}
Metric check_in(const std::string& name, double value, double lo, double hi) {
  Metric m{name, value, "in"};
  m.lo = lo;
  m.hi = hi;
  m.pass = lo <= value && value <= hi;
  return m;
}

std::string Report::json() const {
  twistreg::json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = id;
  j["task"] = task;
  j["status"] = pass ? "pass" : "fail";
  if (!error.empty()) j["error"] = error;
  twistreg::json ms = twistreg::json::array();
  for (const Metric& m : metrics) {
    twistreg::json e;
    e["name"] = m.name;
    e["value"] = m.value;
    e["check"] = m.cmp;
    if (m.cmp == "in") {
      e["lo"] = m.lo;
      e["hi"] = m.hi;
    } else {
      if (m.cmp == "==") e["target"] = m.target;
      e["tolerance"] = m.tolerance;
    }
    e["pass"] = m.pass;
    ms.push_back(e);
  }
  j["metrics"] = ms;
  j["provenance"] = provenance;
  j["grids"] = grids;
  j["artifacts"] = artifacts;
  j["data"] = data.empty() ? twistreg::json::object() : twistreg::json::parse(data);
  return j.dump(2) + "\n";
}

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::ConfigError, what); }

std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& s, double& out) {
  std::string t = trim(s);
  if (t.empty()) return false;
  std::istringstream is(t);
  is.imbue(std::locale::classic());
  is >> out;
  return !is.fail() && is.eof();
}

bool parse_list(const std::string& s, std::vector<double>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v;
    if (!parse_double(item, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

bool is_bool(const std::string& s) { return s == "true" || s == "false"; }

bool is_int(const std::string& s) {
  std::string t = trim(s);
  if (t.empty()) return false;
  std::size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
  if (i == t.size()) return false;
  for (; i < t.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(t[i]))) return false;
  return true;
}

// The value of a config key must have the kind of its default.
void validate_kind(const std::string& task, const std::string& key, const std::string& def, const std::string& v) {
  std::vector<double> tmp;
  double d;
  bool ok;
  if (is_bool(def)) ok = is_bool(v);
  else if (is_int(def)) ok = is_int(v);
  else if (parse_double(def, d)) ok = parse_double(v, d);
  else if (key == "nuclei") {
    std::string w = v;
    std::replace(w.begin(), w.end(), ';', ',');
    ok = trim(w).empty() || parse_list(w, tmp);
  }
  else if (def.find(',') != std::string::npos && parse_list(def, tmp)) ok = parse_list(v, tmp);
  else ok = true;
  if (!ok) config_error(task + "." + key + ": bad value '" + v + "'");
}

std::vector<std::vector<double>> parse_points(const std::string& s) {
  std::vector<std::vector<double>> pts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (trim(item).empty()) continue;
    std::vector<double> p;
    if (!parse_list(item, p)) config_error("bad point list '" + s + "'");
    pts.push_back(p);
  }
  return pts;
}

Point to_point(const std::vector<double>& v) {
  Point p(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) p[static_cast<int>(i)] = v[i];
  return p;
}

std::string hex_crc(const std::string& text) {
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc.checksum();
  return os.str();
}

}  // namespace

const std::vector<TaskDef>& task_catalog() {
  static const std::vector<TaskDef> cat = {
      {"verify-bounds",
       "factorial bounds for derivatives of |y|^{-1} on the unit sphere",
       {{"dim", "1"}, {"alpha_max", "12"}, {"samples", "10000"}, {"stability", "true"}, {"stability_tol", "0.02"}}},
      {"build-twist",
       "bump, diffeomorphism and conjugated operator: round trips, C0, contraction, conjugation error",
       {{"center", "0,0,0"},
        {"inner", "1.0"},
        {"outer", "3.0"},
        {"nuclei", "5,0,0"},
        {"fibers", "2"},
        {"x_samples", "6"},
        {"y_samples", "60"},
        {"t_samples", "200"},
        {"round_trip_tol", "1e-10"},
        {"C0_max", "2.0"},
        {"contraction_max", "0.5"},
        {"conjugation", "true"},
        {"conj_grids", "0.05,0.025,0.0125"},
        {"conj_fields", "10"},
        {"conj_min_order", "1.7"}}},
      {"check-unitarity",
       "norm drift of the half-density pullback under refinement",
       {{"grids", "0.1,0.05,0.025"}, {"base_points", "5"}, {"drift_tol", "1e-4"}, {"min_order", "1.7"}}},
      {"parametrix",
       "order gain of the parametrix residual on oscillating probes",
       {{"nx", "250"},
        {"ny", "900"},
        {"lambdas", "4,8,16,32"},
        {"slope", "-1.0"},
        {"slope_tol", "0.2"},
        {"slope_q1", "-2.0"},
        {"slope_q1_tol", "0.3"}}},
      {"solve-toy",
       "radial hydrogen and the fiber model: energies, closed-form errors, twisted residual",
       {{"Z", "1,2"},
        {"r_max", "30.0"},
        {"n_points", "6000"},
        {"energy_tol", "0.01"},
        {"psi_tol", "1e-3"},
        {"virial_tol", "0.02"},
        {"fiber", "true"},
        {"fiber_grids", "0.05,0.025"},
        {"a", "0.4"},
        {"eigen_tol", "1e-8"},
        {"residual_factor", "3.0"}}},
      {"certify-density",
       "derivative-growth classification of the hydrogen density and the mollifier",
       {{"Z", "1.0"},
        {"r0", "1.0"},
        {"r1", "2.0"},
        {"max_order", "30"},
        {"directions", "2000"},
        {"s_max", "1.1"},
        {"crosscheck_tol", "1e-3"},
        {"mollifier", "true"},
        {"mollifier_order", "16"},
        {"gevrey_lo", "1.6"},
        {"gevrey_hi", "2.4"}}},
      {"full-theorem",
       "solve, twist and certify: hydrogen density or the fiber-model induction",
       {{"model", "hydrogen"},
        {"Z", "1.0"},
        {"max_order", "30"},
        {"s_max", "1.1"},
        {"fiber_grids", "0.05,0.025"},
        {"ledger_tol", "0.1"},
        {"apriori_samples", "50"},
        {"apriori_tol", "0.2"},
        {"residual_factor", "3.0"}}},
  };
  return cat;
}

std::string TaskSpec::str(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) config_error(id + ": missing key " + key);
  return it->second;
}
double TaskSpec::num(const std::string& key) const {
  double v;
  if (!parse_double(str(key), v)) config_error(id + "." + key + ": not a number");
  return v;
}
int TaskSpec::integer(const std::string& key) const {
  std::string s = str(key);
  if (!is_int(s)) config_error(id + "." + key + ": not an integer");
  return std::stoi(trim(s));
}
bool TaskSpec::flag(const std::string& key) const {
  std::string s = str(key);
  if (!is_bool(s)) config_error(id + "." + key + ": not a boolean");
  return s == "true";
}
std::vector<double> TaskSpec::list(const std::string& key) const {
  std::vector<double> v;
  if (!parse_list(str(key), v)) config_error(id + "." + key + ": not a number list");
  return v;
}

TaskSpec make_task(const std::string& id, const std::string& type, const std::map<std::string, std::string>& params) {
  const TaskDef* def = nullptr;
  for (const TaskDef& d : task_catalog())
    if (d.type == type) def = &d;
  if (!def) config_error("unknown task type '" + type + "'");
  TaskSpec t{id, type, {}};
  for (const auto& [k, v] : def->defaults) t.params[k] = v;
  for (const auto& [k, v] : params) {
    auto it = t.params.find(k);
    if (it == t.params.end()) config_error(id + ": unknown key '" + k + "'");
    validate_kind(id, k, it->second, v);
    it->second = trim(v);
  }
  return t;
}

Campaign parse_campaign(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    config_error(e.what());
  }
  Campaign c;
  c.config_hash = hex_crc(text);
  for (const auto& [name, sec] : tree) {
    if (sec.empty()) config_error("key '" + name + "' outside a section");
    if (name == "campaign") {
      for (const auto& [k, v] : sec) {
        std::string s = trim(v.data());
        if (k == "seed") {
          if (!is_int(s) || s[0] == '-') config_error("campaign.seed: not a non-negative integer");
          c.seed = std::stoull(s);
        } else if (k == "out") {
          c.out_dir = s;
        } else {
          config_error("campaign: unknown key '" + k + "'");
        }
      }
      continue;
    }
    std::string type = name;
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : sec) {
      if (k == "task") type = trim(v.data());
      else params[k] = v.data();
    }
    c.tasks.push_back(make_task(name, type, params));
  }
  return c;
}

Campaign load_campaign(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) config_error("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_campaign(ss.str());
}

void write_growth_csv(const DerivativeTable& t, const Verdict& v, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  os << std::setprecision(17) << "order,log_sup,fitted\n";
  if (t.entries.empty()) return;
  std::vector<double> M = t.order_max();
  const double s = v.cls == GrowthClass::Analytic ? 1.0 : v.s;
  const bool line = std::isfinite(v.A) && v.A > 0.0 && std::isfinite(s);
  for (std::size_t n = 0; n < M.size(); ++n) {
    if (!(M[n] > 0.0)) continue;
    os << n << ',' << std::log(M[n]) << ',';
    if (line) os << (n + 1.0) * std::log(v.A) + s * std::lgamma(n + 1.0);
    else os << "nan";
    os << '\n';
  }
}

// Studies --------------------------------------------------------------------

UnitarityStudy unitarity_study(const std::vector<double>& hs, int base_points, std::uint64_t seed) {
  UnitarityStudy st;
  st.h = hs;
  BumpFunction b = make_bump(to_point({0.0, 0.0}), 0.5, 2.5, {});
  Diffeomorphism d = make_diffeomorphism(b, to_point({0.0, 0.0}));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Point> xs;
  for (int k = 0; k < base_points; ++k) {
    double r = 0.9 * d.omega_radius() * std::sqrt(U(rng)), a = 2.0 * M_PI * U(rng);
    xs.push_back(to_point({r * std::cos(a), r * std::sin(a)}));
  }
  for (double h : hs) {
    int n = static_cast<int>(std::lround(7.0 / h)) + 1;
    TwistFrame fr = make_frame(ClusterDiffeo(d, 1), GridDesc({n, n}, {h, h}, {-3.5, -3.5}));
    GridFunction th(fr.fiber_grid);
    int idx[2];
    for (std::size_t k = 0; k < th.size(); ++k) {
      fr.fiber_grid.unflat(k, idx);
      double y0 = fr.fiber_grid.coord(0, idx[0]) - 0.7, y1 = fr.fiber_grid.coord(1, idx[1]) + 0.4;
      th[k] = std::exp(-(y0 * y0 + y1 * y1) / 0.8) * (1.0 + 0.3 * std::sin(2.0 * y0));
    }
    double drift = 0.0, trip = 0.0;
    for (const Point& x : xs) {
      GridFunction out = apply_U(fr, x, th);
      drift = std::max(drift, std::abs(out.l2_norm() - th.l2_norm()) / th.l2_norm());
      GridFunction back = apply_U(fr, x, out, true);
      double e = 0.0;
      for (std::size_t k = 0; k < th.size(); ++k) e += (back[k] - th[k]) * (back[k] - th[k]);
      trip = std::max(trip, std::sqrt(e * th.grid.cell_volume()) / th.l2_norm());
    }
    st.drift.push_back(drift);
    st.round_trip.push_back(trip);
  }
  return st;
}

DiffeoStudy diffeo_study(const BumpSpec& spec, int x_samples, int y_samples, int t_samples, std::uint64_t seed) {
  const int d = static_cast<int>(spec.center.size());
  std::vector<Point> nuclei;
  for (const auto& n : spec.nuclei) {
    if (static_cast<int>(n.size()) != d) throw Error(ErrorCode::InvalidArgument, "nucleus dimension mismatch");
    nuclei.push_back(to_point(n));
  }
  Point c = to_point(spec.center);
  BumpFunction b = make_bump(c, spec.inner, spec.outer, nuclei);
  Diffeomorphism D = make_diffeomorphism(b, c);
  DiffeoStudy st;
  st.omega_radius = D.omega_radius();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double box = spec.outer + 0.5;
  auto in_omega = [&] {
    Point v(d);
    for (int i = 0; i < d; ++i) v[i] = N(rng);
    double r = 0.95 * st.omega_radius * std::pow(U(rng), 1.0 / d);
    return Point(c + r * v / v.norm());
  };
  auto in_box = [&](double half) {
    Point v(d);
    for (int i = 0; i < d; ++i) v[i] = c[i] + half * (2.0 * U(rng) - 1.0);
    return v;
  };
  std::vector<Point> xs = {c};
  for (int k = 0; k < x_samples; ++k) xs.push_back(in_omega());
  for (const Point& x : xs) {
    st.identity_defect = std::max(st.identity_defect, (D.f(x, c) - x).norm());
    Point far = c;
    far[0] += spec.outer + 0.25;
    st.identity_defect = std::max(st.identity_defect, (D.f(x, far) - far).norm());
    for (int k = 0; k < t_samples; ++k) {
      Point t = in_box(box);
      InverseResult r = D.invert_g(x, t);
      st.round_trip = std::max(st.round_trip, (D.f(x, r.s) - t).norm());
      st.round_trip = std::max(st.round_trip, (D.g(x, D.f(x, t)) - t).norm());
      st.max_contraction = std::max(st.max_contraction, r.max_contraction);
    }
  }
  ClusterDiffeo cl(D, spec.fibers);
  std::vector<Eigen::VectorXd> ys;
  for (int k = 0; k < y_samples; ++k) {
    Eigen::VectorXd y(cl.fiber_dim());
    for (int f = 0; f < spec.fibers; ++f) y.segment(f * d, d) = in_box(spec.outer + 0.2);
    ys.push_back(y);
  }
  st.C0 = lipschitz_constants(cl, xs, ys).C0;
  return st;
}

ConjugationStudy conjugation_study(const std::vector<double>& hs, int fields, std::uint64_t seed) {
  ConjugationStudy st;
  st.h = hs;
  FiberModel m;
  m.y_min = 0.0;
  m.y_max = 6.0;
  struct Field {
    double xw, yc, k, a, b;
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<Field> fs;
  for (int i = 0; i < fields; ++i)
    fs.push_back({0.3 + 0.15 * U(rng), 2.0 + 2.0 * U(rng), 2.0 + 2.0 * U(rng), U(rng) - 0.5, U(rng) - 0.5});
  st.relative.assign(fields, {});
  for (double h : hs) {
    TwistFrame fr = m.frame(h);
    int mx = static_cast<int>(std::lround(0.5 / h));
    GridDesc g({2 * mx + 1, fr.fiber_grid.shape[0]}, {h, h}, {m.x0 - mx * h, fr.fiber_grid.origin[0]});
    OperatorAssembly p0 = assemble_P0(fr, g);
    for (int i = 0; i < fields; ++i) {
      const Field& F = fs[i];
      GridFunction v(g);
      int idx[2];
      for (std::size_t k = 0; k < v.size(); ++k) {
        g.unflat(k, idx);
        double x = g.coord(0, idx[0]) - m.x0, y = g.coord(1, idx[1]);
        double q = x * x / (F.xw * F.xw);
        double ex = q < 1.0 ? std::exp(-1.0 / (1.0 - q)) : 0.0;
        v[k] = ex * std::exp(-F.k * (y - F.yc) * (y - F.yc)) * (1.0 + F.a * x + F.b * std::sin(y));
      }
      st.relative[i].push_back(conjugation_error(fr, p0, v).relative());
    }
  }
  st.min_order = INFINITY;
  for (const auto& r : st.relative) {
    st.max_relative = std::max(st.max_relative, r.front());
    for (std::size_t j = 0; j + 1 < r.size(); ++j) st.min_order = std::min(st.min_order, std::log2(r[j] / r[j + 1]));
  }
  return st;
}

// Tasks ----------------------------------------------------------------------

namespace {

struct Ctx {
  const TaskSpec& t;
  fs::path out;
  std::uint64_t seed;
  Report& rep;
  json data;

  void add(const Metric& m) { rep.metrics.push_back(m); }
  std::string artifact(const std::string& suffix) {
    std::string name = t.id + "_" + suffix;
    rep.artifacts.push_back(name);
    return (out / name).string();
  }
};

// Short form for metric names and tags.
std::string tag_num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string list_str(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

void verify_bounds(Ctx& c) {
  int dim = c.t.integer("dim"), amax = c.t.integer("alpha_max"), n = c.t.integer("samples");
  DerivativeBoundReport r = verify_factorial_bound(dim, amax, n);
  r.write_csv(c.artifact("bounds.csv"));
  c.rep.grids["sphere"] = std::to_string(r.samples) + " samples in dimension " + std::to_string(dim);
  c.add(check_le("violations", r.violations, 0));
  c.add(check_le("K_min", r.K_min, r.reference));
  if (dim == 1) c.add(check_le("unit_violations", r.unit_violations, 0));
  c.data["K_min"] = r.K_min;
  c.data["reference"] = r.reference;
  c.data["rows"] = r.rows.size();
  if (dim > 1 && c.t.flag("stability")) {
    DerivativeBoundReport r2 = verify_factorial_bound(dim, amax, 2 * n);
    c.add(check_le("K_min_doubling_change", std::abs(r2.K_min - r.K_min) / r.K_min, c.t.num("stability_tol")));
    c.data["K_min_doubled"] = r2.K_min;
  }
}

void build_twist(Ctx& c) {
  BumpSpec b;
  b.center = c.t.list("center");
  b.inner = c.t.num("inner");
  b.outer = c.t.num("outer");
  b.nuclei = parse_points(c.t.str("nuclei"));
  b.fibers = c.t.integer("fibers");
  DiffeoStudy d = diffeo_study(b, c.t.integer("x_samples"), c.t.integer("y_samples"), c.t.integer("t_samples"), c.seed);
  c.add(check_le("round_trip", d.round_trip, c.t.num("round_trip_tol")));
  c.add(check_le("identity_defect", d.identity_defect, 1e-14));
  c.add(check_le("C0", d.C0, c.t.num("C0_max")));
  c.add(check_le("max_contraction", d.max_contraction, c.t.num("contraction_max")));
  c.data["omega_radius"] = d.omega_radius;
  if (c.t.flag("conjugation")) {
    std::vector<double> hs = c.t.list("conj_grids");
    ConjugationStudy s = conjugation_study(hs, c.t.integer("conj_fields"), c.seed);
    c.rep.grids["conjugation"] = "h = " + list_str(hs) + " on the fiber-model frame";
    c.add(check_ge("conjugation_min_order", s.min_order, c.t.num("conj_min_order")));
    json rel = json::array();
    for (const auto& r : s.relative) rel.push_back(r);
    c.data["conjugation_relative"] = rel;
    std::ofstream os(c.artifact("conjugation.csv"));
    os << std::setprecision(17) << "field,h,relative_error\n";
    for (std::size_t i = 0; i < s.relative.size(); ++i)
      for (std::size_t j = 0; j < hs.size(); ++j) os << i << ',' << hs[j] << ',' << s.relative[i][j] << '\n';
  }
}

void check_unitarity(Ctx& c) {
  std::vector<double> hs = c.t.list("grids");
  UnitarityStudy s = unitarity_study(hs, c.t.integer("base_points"), c.seed);
  c.rep.grids["fiber"] = "planar square [-3.5, 3.5]^2, h = " + list_str(hs);
  c.add(check_le("drift_baseline", s.drift.front(), c.t.num("drift_tol")));
  for (std::size_t j = 0; j + 1 < hs.size(); ++j)
    c.add(check_ge("drift_order_" + std::to_string(j + 1), std::log2(s.drift[j] / s.drift[j + 1]) / std::log2(hs[j] / hs[j + 1]),
                   c.t.num("min_order")));
  c.data["drift"] = s.drift;
  c.data["round_trip"] = s.round_trip;
  std::ofstream os(c.artifact("drift.csv"));
  os << std::setprecision(17) << "h,drift,round_trip\n";
  for (std::size_t j = 0; j < hs.size(); ++j) os << hs[j] << ',' << s.drift[j] << ',' << s.round_trip[j] << '\n';
}

void parametrix(Ctx& c) {
  ParametrixModel m;
  m.nx = c.t.integer("nx");
  m.ny = c.t.integer("ny");
  m.probe.seed = c.seed;
  ParametrixSetup s = build_parametrix_setup(m);
  c.rep.grids["torus"] = s.quantizer.grid().describe();
  DecayTable d = residual_gain(s.q, s.p0_tilde, c.t.list("lambdas"), m.probe);
  d.write_csv(c.artifact("decay.csv"));
  double sl = c.t.num("slope"), st = c.t.num("slope_tol"), sq = c.t.num("slope_q1"), sqt = c.t.num("slope_q1_tol");
  c.add(check_in("slope", d.slope, sl - st, sl + st));
  c.add(check_in("slope_q1", d.slope_q1, sq - sqt, sq + sqt));
  c.data["ellipticity_margin"] = s.margin;
  c.data["ratio"] = d.ratio;
  c.data["ratio_q1"] = d.ratio_q1;
  c.data["constant_ratio"] = d.constant_ratio;
}

void solve_toy(Ctx& c) {
  std::vector<double> Zs = c.t.list("Z");
  std::vector<double> E;
  const double rmax = c.t.num("r_max");
  const int np = c.t.integer("n_points");
  c.rep.grids["radial"] = "r in (0, " + list_str({rmax}) + "), " + std::to_string(np) + " interior nodes";
  for (double Z : Zs) {
    Eigenpair p = solve_radial_hydrogen(Z, rmax, np);
    HydrogenCheck h = check_hydrogen(p, Z);
    std::string tag = "Z" + tag_num(Z);
    c.add(check_le(tag + "_energy_error", h.energy_error, c.t.num("energy_tol")));
    c.add(check_le(tag + "_psi_error", h.psi_error, c.t.num("psi_tol")));
    c.add(check_le(tag + "_virial", std::abs(h.kinetic + p.E) / std::abs(p.E), c.t.num("virial_tol")));
    E.push_back(p.E);
    c.data[tag + "_E"] = p.E;
    GridFunction rho = compute_density(p);
    std::ofstream os(c.artifact(tag + "_density.csv"));
    os << std::setprecision(17) << "r,rho,rho_exact\n";
    for (std::size_t j = 0; j < rho.size(); j += 10) {
      double r = rho.grid.coord(0, static_cast<int>(j));
      os << r << ',' << rho[j] << ',' << Z * Z * Z / (8.0 * M_PI) * std::exp(-Z * r) << '\n';
    }
  }
  for (std::size_t i = 1; i < Zs.size(); ++i) {
    double expect = Zs[i] * Zs[i] / (Zs[0] * Zs[0]);
    c.add(check_le("energy_scaling_" + std::to_string(i), std::abs(E[i] / E[0] - expect) / expect,
                   2.0 * c.t.num("energy_tol")));
  }
  if (!c.t.flag("fiber")) return;
  FiberModel m;
  m.a = c.t.num("a");
  EigenSolveOptions opt;
  opt.tol = c.t.num("eigen_tol");
  opt.seed = c.seed;
  std::vector<double> hs = c.t.list("fiber_grids");
  std::vector<TwistedResidual> res;
  for (double h : hs) {
    FiberSolution s = solve_fiber_model(m, h, opt);
    std::string tag = "fiber_h" + tag_num(h);
    c.rep.grids[tag] = s.pair.psi.grid.describe();
    c.add(check_le(tag + "_eigen_residual", s.pair.residual, opt.tol));
    GridFunction rho = compute_density(s);
    double mass = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) mass += rho[i] * h;
    c.add(check_eq(tag + "_mass", mass, 1.0, 1e-10));
    TwistedResidual r = twisted_equation_residual(s);
    c.add(check_eq(tag + "_x0_discrepancy", r.x0_discrepancy, 0.0, 0.0));
    c.add(check_le(tag + "_norm_discrepancy", r.norm_discrepancy, h * h));
    res.push_back(r);
    c.data[tag + "_E"] = s.pair.E;
    c.data[tag + "_twisted_residual"] = r.residual;
    std::ofstream os(c.artifact(tag + "_density.csv"));
    os << std::setprecision(17) << "x,rho\n";
    for (std::size_t i = 0; i < rho.size(); ++i) os << rho.grid.coord(0, static_cast<int>(i)) << ',' << rho[i] << '\n';
  }
  for (std::size_t j = 0; j + 1 < res.size(); ++j)
    c.add(check_ge("twisted_residual_factor_" + std::to_string(j + 1), res[j].residual / res[j + 1].residual,
                   c.t.num("residual_factor")));
}

json verdict_json(const Verdict& v) { return json::parse(v.json()); }

void certify_hydrogen_into(Ctx& c, double Z, int max_order, int directions, double r0, double r1, double s_max,
                           double crosscheck_tol) {
  HydrogenCertifyOptions o;
  o.Z = Z;
  o.max_order = max_order;
  o.directions = directions;
  o.r0 = r0;
  o.r1 = r1;
  HydrogenCertificate h = certify_hydrogen(o);
  c.rep.grids["shell"] = h.shell.K;
  c.rep.grids["nucleus"] = h.nucleus.K;
  c.add(check_eq("shell_analytic", h.shell_verdict.cls == GrowthClass::Analytic, 1.0));
  c.add(check_le("shell_s", h.shell_verdict.s, s_max));
  c.add(check_le("radial_crosscheck", h.radial_crosscheck, crosscheck_tol));
  c.add(check_eq("nucleus_non_analytic", h.nucleus_verdict.cls == GrowthClass::NonAnalytic, 1.0));
  c.data["hydrogen_energy_error"] = h.solve.energy_error;
  c.data["shell_verdict"] = verdict_json(h.shell_verdict);
  c.data["nucleus_verdict"] = verdict_json(h.nucleus_verdict);
  c.data["nucleus_truncation"] = to_string(h.nucleus.truncation);
  h.shell.write_csv(c.artifact("shell_table.csv"));
  write_growth_csv(h.shell, h.shell_verdict, c.artifact("shell_growth.csv"));
  h.nucleus.write_csv(c.artifact("nucleus_table.csv"));
  write_growth_csv(h.nucleus, h.nucleus_verdict, c.artifact("nucleus_growth.csv"));
}

void certify_density(Ctx& c) {
  certify_hydrogen_into(c, c.t.num("Z"), c.t.integer("max_order"), c.t.integer("directions"), c.t.num("r0"),
                        c.t.num("r1"), c.t.num("s_max"), c.t.num("crosscheck_tol"));
  if (!c.t.flag("mollifier")) return;
  MollifierCertificate m = certify_mollifier(FiberModel{}, c.t.integer("mollifier_order"));
  c.rep.grids["mollifier"] = m.table.K;
  double lo = c.t.num("gevrey_lo"), hi = c.t.num("gevrey_hi");
  c.add(check_eq("mollifier_gevrey", m.verdict.cls == GrowthClass::Gevrey, 1.0));
  c.add(check_in("mollifier_s", m.verdict.s, lo, hi));
  c.data["mollifier_verdict"] = verdict_json(m.verdict);
  m.table.write_csv(c.artifact("mollifier_table.csv"));
  write_growth_csv(m.table, m.verdict, c.artifact("mollifier_growth.csv"));
}

void full_theorem(Ctx& c) {
  std::string model = c.t.str("model");
  if (model == "hydrogen") {
    certify_hydrogen_into(c, c.t.num("Z"), c.t.integer("max_order"), 2000, 1.0, 2.0, c.t.num("s_max"), 1e-3);
    return;
  }
  if (model != "fiber") config_error(c.t.id + ".model: expected hydrogen or fiber");
  FiberModel m;
  EigenSolveOptions opt;
  opt.seed = c.seed;
  std::vector<double> hs = c.t.list("fiber_grids");
  std::vector<double> B, C, res;
  for (double h : hs) {
    FiberSolution s = solve_fiber_model(m, h, opt);
    std::string tag = "h" + tag_num(h);
    c.rep.grids[tag] = s.pair.psi.grid.describe();
    res.push_back(twisted_equation_residual(s).residual);
    InductionLedger L = induction_ledger_check(s);
    L.write_csv(c.artifact(tag + "_ledger.csv"));
    c.add(check_eq(tag + "_B_finite", std::isfinite(L.B) ? 1.0 : 0.0, 1.0));
    c.add(check_eq(tag + "_recipe_met", L.recipe_met ? 1.0 : 0.0, 1.0));
    B.push_back(L.B);
    c.data[tag + "_ledger"] = {{"B", L.B},       {"B0", L.B0},   {"Cp", L.Cp},
                               {"Ca", L.Ca},     {"D", L.D},     {"recipe", L.recipe},
                               {"binding_j", L.binding.j},       {"binding_r", L.binding.r},
                               {"binding_alpha", L.binding.alpha}, {"binding_eps", L.binding.eps}};
    AprioriEstimate a = apriori_estimate(m, h, s.pair.E, c.t.integer("apriori_samples"), c.seed);
    C.push_back(a.C);
    c.data[tag + "_apriori_C"] = a.C;
  }
  for (std::size_t j = 0; j + 1 < hs.size(); ++j) {
    std::string k = std::to_string(j + 1);
    c.add(check_le("B_refinement_change_" + k, std::abs(B[j + 1] - B[j]) / B[j], c.t.num("ledger_tol")));
    c.add(check_le("apriori_C_refinement_change_" + k, std::abs(C[j + 1] - C[j]) / C[j], c.t.num("apriori_tol")));
    c.add(check_ge("twisted_residual_factor_" + k, res[j] / res[j + 1], c.t.num("residual_factor")));
  }
}

}  // namespace

Report run_task(const TaskSpec& task, const std::string& out_dir, std::uint64_t seed, const std::string& config_hash) {
  Report rep;
  rep.id = task.id;
  rep.task = task.type;
  rep.provenance["config_hash"] = config_hash;
  rep.provenance["seed"] = std::to_string(seed);
  for (const auto& [k, v] : task.params) rep.provenance["param." + k] = v;
  fs::create_directories(out_dir);
  Ctx c{task, fs::path(out_dir), seed, rep, json::object()};
  try {
    if (task.type == "verify-bounds") verify_bounds(c);
    else if (task.type == "build-twist") build_twist(c);
    else if (task.type == "check-unitarity") check_unitarity(c);
    else if (task.type == "parametrix") parametrix(c);
    else if (task.type == "solve-toy") solve_toy(c);
    else if (task.type == "certify-density") certify_density(c);
    else if (task.type == "full-theorem") full_theorem(c);
    else config_error("unknown task type '" + task.type + "'");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    rep.error = e.what();
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  rep.data = c.data.dump();
  rep.pass = rep.error.empty() && !rep.metrics.empty();
  for (const Metric& m : rep.metrics) rep.pass = rep.pass && m.pass;
  return rep;
}

CampaignResult run_campaign(const Campaign& camp, const std::function<void(const Report&, double)>& on_done) {
  CampaignResult res;
  fs::create_directories(camp.out_dir);
  json timings = json::object();
  for (const TaskSpec& t : camp.tasks) {
    auto t0 = std::chrono::steady_clock::now();
    Report r = run_task(t, camp.out_dir, camp.seed, camp.config_hash);
    double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    {
      std::ofstream os(fs::path(camp.out_dir) / (t.id + ".json"), std::ios::binary);
      if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write report for " + t.id);
      os << r.json();
    }
    timings[t.id] = sec;
    res.pass = res.pass && r.pass;
    res.seconds.emplace_back(t.id, sec);
    if (on_done) on_done(r, sec);
    res.reports.push_back(std::move(r));
  }
  if (!camp.tasks.empty()) {
    std::ofstream os(fs::path(camp.out_dir) / "timings.json", std::ios::binary);
    os << timings.dump(2) << "\n";
  }
  return res;
}

}  // namespace twistreg
