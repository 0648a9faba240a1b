#include "twistreg/analyticity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "twistreg/conj_operator.hpp"
#include "twistreg/errors.hpp"
#include "twistreg/mollifier.hpp"
#include "twistreg/twist_transport.hpp"

namespace twistreg {

namespace {

double log_factorial(int n) { return std::lgamma(n + 1.0); }

double log_multi_factorial(const MultiIndex& a) {
  double s = 0.0;
  for (int v : a) s += log_factorial(v);
  return s;
}

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return std::round(b);
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "null";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Tensor-product central difference of D^alpha u at p with step h.
double central_difference(const SampledFunction& u, const std::vector<double>& p, const MultiIndex& alpha,
                          double h) {
  const int d = u.dim;
  std::vector<int> j(d, 0);
  std::vector<double> q(d);
  double total = 0.0;
  int order = 0;
  for (int a = 0; a < d; ++a) order += alpha[a];
  for (;;) {
    double w = 1.0;  // integer weight, exact
    for (int a = 0; a < d; ++a) {
      int k = alpha[a];
      q[a] = p[a] + (0.5 * k - j[a]) * h;
      w *= ((j[a] % 2) ? -1.0 : 1.0) * binomial(k, j[a]);
    }
    total += w * u.value(q.data());
    int a = 0;
    while (a < d && ++j[a] > alpha[a]) j[a++] = 0;
    if (a == d) break;
  }
  return total / std::pow(h, order);
}

// sup over the orbit of K: entry for alpha becomes the max over permutations of alpha.
void symmetrize(std::vector<DerivativeEntry>& entries) {
  std::map<MultiIndex, double> sup;
  for (const auto& e : entries) sup[e.alpha] = e.sup;
  for (auto& e : entries) {
    MultiIndex a = e.alpha;
    std::sort(a.begin(), a.end());
    do {
      auto it = sup.find(a);
      if (it != sup.end()) e.sup = std::max(e.sup, it->second);
    } while (std::next_permutation(a.begin(), a.end()));
  }
}

}  // namespace

CompactSet segment_set(double a, double b, int n, double margin) {
  if (n < 2 || !(b > a)) throw Error(ErrorCode::InvalidArgument, "segment needs b > a and n >= 2");
  CompactSet K;
  std::ostringstream s;
  s << "[" << a << ", " << b << "]";
  K.descriptor = s.str();
  for (int i = 0; i < n; ++i) K.points.push_back({a + (b - a) * i / (n - 1)});
  K.margin = margin;
  return K;
}

CompactSet shell_set(int dim, double r0, double r1, int n_dir, int n_r, double margin) {
  if (!(r1 >= r0 && r0 > 0.0) || n_r < 1) throw Error(ErrorCode::InvalidArgument, "shell needs 0 < r0 <= r1");
  CompactSet K;
  std::ostringstream s;
  s << "{" << r0 << " <= |x| <= " << r1 << "} in R^" << dim;
  K.descriptor = s.str();
  auto dirs = sphere_samples(dim, n_dir);
  for (int a = 0; a < dim; ++a)
    for (double sg : {-1.0, 1.0}) {
      std::vector<double> e(dim, 0.0);
      e[a] = sg;
      dirs.push_back(e);
    }
  for (int k = 0; k < n_r; ++k) {
    double r = n_r == 1 ? r0 : r0 + (r1 - r0) * k / (n_r - 1);
    for (const auto& u : dirs) {
      std::vector<double> p(dim);
      for (int a = 0; a < dim; ++a) p[a] = r * u[a];
      K.points.push_back(p);
    }
  }
  K.margin = margin;
  return K;
}

CompactSet octant_shell_set(int dim, double r0, double r1, int n_dir, int n_r, double margin) {
  CompactSet full = shell_set(dim, r0, r1, n_dir, 1, margin);
  std::vector<std::vector<double>> dirs;
  for (const auto& p : full.points) {
    bool in = p[dim - 1] >= 0.0;
    for (int a = 0; a + 1 < dim; ++a) in = in && p[a] >= p[a + 1];
    if (in) dirs.push_back(p);
  }
  // Corners of the fundamental domain: (1,0,..), (1,1,0,..)/sqrt2, ...
  for (int k = 1; k <= dim; ++k) {
    std::vector<double> e(dim, 0.0);
    for (int a = 0; a < k; ++a) e[a] = 1.0 / std::sqrt(static_cast<double>(k));
    dirs.push_back(e);
  }
  CompactSet K;
  std::ostringstream s;
  s << "{" << r0 << " <= |x| <= " << r1 << "} in R^" << dim << " (octant)";
  K.descriptor = s.str();
  for (int k = 0; k < n_r; ++k) {
    double r = n_r == 1 ? r0 : r0 + (r1 - r0) * k / (n_r - 1);
    for (const auto& u : dirs) {
      std::vector<double> p(dim);
      for (int a = 0; a < dim; ++a) p[a] = r * u[a] / r0;
      K.points.push_back(p);
    }
  }
  K.margin = margin;
  K.octant = true;
  return K;
}

CompactSet ball_set(int dim, double r, double step, double margin) {
  if (!(r > 0.0 && step > 0.0)) throw Error(ErrorCode::InvalidArgument, "ball needs r > 0 and step > 0");
  CompactSet K;
  std::ostringstream s;
  s << "{|x| <= " << r << "} in R^" << dim;
  K.descriptor = s.str();
  int m = static_cast<int>(std::floor(r / step + 1e-9));
  std::vector<int> i(dim, -m);
  for (;;) {
    double r2 = 0.0;
    std::vector<double> p(dim);
    for (int a = 0; a < dim; ++a) {
      p[a] = i[a] * step;
      r2 += p[a] * p[a];
    }
    if (r2 <= r * r * (1.0 + 1e-12)) K.points.push_back(p);
    int a = 0;
    while (a < dim && ++i[a] > m) i[a++] = -m;
    if (a == dim) break;
  }
  K.margin = margin;
  return K;
}

std::string to_string(Truncation t) {
  switch (t) {
    case Truncation::None: return "none";
    case Truncation::Noise: return "noise";
    case Truncation::Divergence: return "divergence";
  }
  return "unknown";
}

std::vector<double> DerivativeTable::order_max() const {
  std::vector<double> M(max_order + 1, 0.0);
  for (const auto& e : entries)
    if (e.order <= max_order) M[e.order] = std::max(M[e.order], e.sup);
  return M;
}

void DerivativeTable::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  f << "alpha,order,sup\n" << std::setprecision(17);
  for (const auto& e : entries) {
    for (std::size_t a = 0; a < e.alpha.size(); ++a) f << (a ? "." : "") << e.alpha[a];
    f << "," << e.order << "," << e.sup << "\n";
  }
}

DerivativeTable derivative_table(const SampledFunction& u, const CompactSet& K, int max_order,
                                 const DerivativeOptions& opt) {
  if (max_order < 0 || u.dim < 1 || K.points.empty()) throw Error(ErrorCode::InvalidArgument, "empty table request");
  DerivativeTable t;
  t.K = K.descriptor;
  t.dim = u.dim;
  if (opt.exact && u.jet) {
    std::vector<std::vector<MultiIndex>> idx;
    for (int n = 0; n <= max_order; ++n) idx.push_back(multi_indices(u.dim, n));
    std::vector<std::vector<double>> sup(max_order + 1);
    for (int n = 0; n <= max_order; ++n) sup[n].assign(idx[n].size(), 0.0);
    for (const auto& p : K.points) {
      std::vector<Jet> x;
      for (int a = 0; a < u.dim; ++a) x.push_back(Jet::variable(u.dim, max_order, a, p[a]));
      Jet J = u.jet(x);
      for (int n = 0; n <= max_order; ++n)
        for (std::size_t k = 0; k < idx[n].size(); ++k) {
          double v = std::abs(J.derivative(idx[n][k]));
          if (!std::isfinite(v)) throw Error(ErrorCode::SingularPoint, "non-finite derivative on K");
          sup[n][k] = std::max(sup[n][k], v);
        }
    }
    for (int n = 0; n <= max_order; ++n)
      for (std::size_t k = 0; k < idx[n].size(); ++k) t.entries.push_back({idx[n][k], n, sup[n][k]});
    t.max_order = max_order;
    if (K.octant) symmetrize(t.entries);
    return t;
  }
  if (!u.value) throw Error(ErrorCode::InvalidArgument, "function has no evaluator");
  if (K.margin < max_order * opt.step)
    throw Error(ErrorCode::InsufficientMargin, "neighbourhood of K narrower than max_order * step");
  const double h[3] = {opt.step, 0.5 * opt.step, 0.25 * opt.step};
  t.steps.assign(h, h + 3);
  t.max_order = max_order;
  double scale = 0.0;
  for (int n = 0; n <= max_order; ++n) {
    std::vector<DerivativeEntry> row;
    bool reject = false, diverge = true;
    for (const auto& alpha : multi_indices(u.dim, n)) {
      double raw[3] = {0, 0, 0}, s1 = 0.0, s2 = 0.0, gap = 0.0;
      for (const auto& p : K.points) {
        double D[3];
        for (int l = 0; l < 3; ++l) {
          D[l] = central_difference(u, p, alpha, h[l]);
          raw[l] = std::max(raw[l], std::abs(D[l]));
        }
        double R1 = (4.0 * D[1] - D[0]) / 3.0, R2 = (4.0 * D[2] - D[1]) / 3.0;
        s1 = std::max(s1, std::abs(R1));
        s2 = std::max(s2, std::abs(R2));
        gap = std::max(gap, std::abs(R1 - R2));
      }
      if (n == 0) scale = std::max(scale, s2);
      // Rounding level of the finest stencil: sum of |weights| is (2/h)^n.
      double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale * std::pow(2.0 / h[2], n);
      if (gap > floor && gap > opt.agreement * s2) {
        reject = true;
        if (!(raw[1] > opt.divergence_ratio * raw[0] && raw[2] > opt.divergence_ratio * raw[1])) diverge = false;
      }
      row.push_back({alpha, n, s2});
    }
    if (reject) {
      t.truncation = diverge ? Truncation::Divergence : Truncation::Noise;
      t.truncated_at = n;
      t.max_order = n - 1;
      break;
    }
    t.entries.insert(t.entries.end(), row.begin(), row.end());
  }
  if (K.octant) symmetrize(t.entries);
  return t;
}

DerivativeTable table_from_orders(const std::vector<double>& M, const std::string& K) {
  DerivativeTable t;
  t.K = K;
  t.dim = 1;
  t.max_order = static_cast<int>(M.size()) - 1;
  for (std::size_t n = 0; n < M.size(); ++n) t.entries.push_back({{static_cast<int>(n)}, static_cast<int>(n), M[n]});
  return t;
}

GrowthFit fit_growth(const DerivativeTable& t, int delta) {
  if (delta != 0 && delta != 1) throw Error(ErrorCode::InvalidArgument, "delta must be 0 or 1");
  std::vector<double> xs, ys;
  std::vector<bool> seen(t.max_order + 1, false);
  for (const auto& e : t.entries) {
    if (!(e.sup > 0.0) || !std::isfinite(e.sup)) continue;
    double y = std::log(e.sup) - (delta ? log_multi_factorial(e.alpha) : log_factorial(e.order));
    xs.push_back(e.order + 1.0);
    ys.push_back(y);
    if (e.order <= t.max_order) seen[e.order] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 5)
    throw Error(ErrorCode::TableTooShort, "fewer than 5 orders with usable entries");
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += xs[i] * ys[i];
    sxx += xs[i] * xs[i];
  }
  double a = sxy / sxx, r = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) r += (ys[i] - a * xs[i]) * (ys[i] - a * xs[i]);
  return {std::exp(a), std::sqrt(r / xs.size()), static_cast<int>(xs.size())};
}

std::string to_string(GrowthClass c) {
  switch (c) {
    case GrowthClass::Analytic: return "analytic";
    case GrowthClass::Gevrey: return "gevrey";
    case GrowthClass::SmoothUnclassified: return "smooth_unclassified";
    case GrowthClass::NonAnalytic: return "non_analytic";
  }
  return "unknown";
}

std::string Verdict::json() const {
  std::ostringstream o;
  o << "{\"class\": \"" << to_string(cls) << "\", \"A\": " << fmt(A) << ", \"s\": " << fmt(s) << ", \"residual\": "
    << fmt(residual) << ", \"max_order\": " << max_order << ", \"fit_from\": " << fit_from << ", \"s_full\": " << fmt(s_full)
    << "}";
  return o.str();
}

Verdict classify(const DerivativeTable& t, double tol) {
  Verdict v;
  v.max_order = t.max_order;
  if (t.truncation == Truncation::Divergence) {
    v.cls = GrowthClass::NonAnalytic;
    v.A = std::numeric_limits<double>::infinity();
    v.s = v.s_full = std::numeric_limits<double>::infinity();
    v.residual = 0.0;
    return v;
  }
  std::vector<double> M = t.order_max();
  double top = 0.0;
  for (double m : M) top = std::max(top, m);
  auto envelope = [&](double s) {
    double A = kGrowthFloor;
    for (std::size_t n = 0; n < M.size(); ++n)
      if (M[n] > 0.0) A = std::max(A, std::exp((std::log(M[n]) - s * log_factorial(static_cast<int>(n))) / (n + 1.0)));
    return A;
  };
  // Vanishing beyond a finite order (at rounding level relative to the table).
  int last = -1;
  for (std::size_t n = 0; n < M.size(); ++n)
    if (M[n] > 1e-12 * top) last = static_cast<int>(n);
  if (last < static_cast<int>(M.size()) - 1) {
    v.cls = GrowthClass::Analytic;
    v.s = 0.0;
    v.A = envelope(1.0);
    return v;
  }
  const int N = static_cast<int>(M.size()) - 1;
  v.fit_from = std::max(0, std::min(N / 2, N - 4));
  auto fit = [&](int from, double& s, double& res) {
    std::vector<int> ns;
    for (int n = from; n <= N; ++n)
      if (M[n] > 0.0) ns.push_back(n);
    if (ns.size() < 5) return false;
    // log M_n = c + n log A + s log n!
    Eigen::MatrixXd X(ns.size(), 3);
    Eigen::VectorXd Y(ns.size());
    for (std::size_t i = 0; i < ns.size(); ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = ns[i];
      X(i, 2) = log_factorial(ns[i]);
      Y[i] = std::log(M[ns[i]]);
    }
    Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
    s = beta[2];
    res = std::sqrt((X * beta - Y).squaredNorm() / ns.size());
    return true;
  };
  double s = 0.0, r = 0.0, r_full = 0.0;
  if (!fit(v.fit_from, s, r)) {
    v.cls = GrowthClass::SmoothUnclassified;
    v.s = v.s_full = std::numeric_limits<double>::quiet_NaN();
    v.A = envelope(1.0);
    return v;
  }
  fit(0, v.s_full, r_full);
  v.s = s;
  v.residual = r;
  if (s <= 1.0 + tol) v.cls = GrowthClass::Analytic;
  else if (s <= 3.0) v.cls = GrowthClass::Gevrey;
  else v.cls = GrowthClass::SmoothUnclassified;
  v.A = envelope(v.cls == GrowthClass::Analytic ? 1.0 : s);
  return v;
}

SampledFunction hydrogen_density_function(double Z) {
  SampledFunction f;
  f.dim = 3;
  f.name = "hydrogen density";
  const double c = Z * Z * Z / (8.0 * M_PI);
  f.value = [=](const double* x) { return c * std::exp(-Z * std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])); };
  f.jet = [=](const std::vector<Jet>& x) {
    Jet r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    if (r2.value() == 0.0) throw Error(ErrorCode::SingularPoint, "density jet at the nucleus");
    return c * exp(-Z * sqrt(r2));
  };
  return f;
}

SampledFunction bump_function(const BumpFunction& b) {
  SampledFunction f;
  f.dim = b.dim();
  f.name = "bump";
  f.value = [b](const double* x) { return b.eval(x); };
  f.jet = [b](const std::vector<Jet>& x) { return b.value(x); };
  return f;
}

SampledFunction constant_function(int dim, double c) {
  SampledFunction f;
  f.dim = dim;
  f.name = "constant";
  f.value = [c](const double*) { return c; };
  f.jet = [c](const std::vector<Jet>& x) { return Jet(x.front().layout_ptr(), c); };
  return f;
}

HydrogenCertificate certify_hydrogen(const HydrogenCertifyOptions& opt) {
  HydrogenCertificate c;
  c.Z = opt.Z;
  Eigenpair p = solve_radial_hydrogen(opt.Z, opt.r_max, opt.n_points);
  c.solve = check_hydrogen(p, opt.Z);

  SampledFunction rho = hydrogen_density_function(opt.Z);
  c.shell = derivative_table(rho, octant_shell_set(3, opt.r0, opt.r1, opt.directions, opt.radii, opt.r0), opt.max_order);
  c.shell_verdict = classify(c.shell);

  // Radial derivatives of the numerical density against Z^n rho(r0).
  GridFunction dens = compute_density(p);
  const double dr = dens.grid.spacing[0], r_first = dens.grid.origin[0];
  SampledFunction radial;
  radial.dim = 1;
  radial.value = [&dens](const double* r) { return cubic_interpolate(dens, r); };
  const double step = 8.0 * dr;
  int n_nodes = static_cast<int>(std::lround((opt.r1 - opt.r0) / dr)) + 1;
  double start = r_first + std::round((opt.r0 - r_first) / dr) * dr;
  DerivativeTable rt = derivative_table(radial, segment_set(start, start + (n_nodes - 1) * dr, n_nodes, opt.r0), 4,
                                        {false, step});
  const double c0 = opt.Z * opt.Z * opt.Z / (8.0 * M_PI);
  std::vector<double> M = rt.order_max();
  c.radial_crosscheck = rt.max_order < 4 ? std::numeric_limits<double>::infinity() : 0.0;
  for (int n = 0; n <= rt.max_order; ++n) {
    double exact = c0 * std::pow(opt.Z, n) * std::exp(-opt.Z * start);
    c.radial_crosscheck = std::max(c.radial_crosscheck, std::abs(M[n] - exact) / exact);
  }

  DerivativeOptions fd;
  fd.exact = false;
  fd.step = 0.1;
  c.nucleus = derivative_table(rho, ball_set(3, opt.r0, 0.25, opt.r0), 4, fd);
  c.nucleus_verdict = classify(c.nucleus);
  return c;
}

MollifierCertificate certify_mollifier(const FiberModel& m, int max_order) {
  Point c(1), r(1);
  c[0] = m.x0;
  r[0] = m.R;
  BumpFunction b = make_bump(c, m.tau_inner, m.tau_outer, {r});
  double end = m.x0 + m.tau_outer;
  MollifierCertificate out;
  out.table = derivative_table(bump_function(b), segment_set(end - 0.5, end + 0.5, 4001, 0.5), max_order);
  out.verdict = classify(out.table);
  return out;
}

int induction_Ca(int base_dim) {
  int count = 0;
  for (int r = 0; r <= 2; ++r)
    for (int n = 0; r + n < 2; ++n) count += static_cast<int>(multi_indices(base_dim, n).size());
  return 1 + count;
}

std::vector<double> fd_weights(const std::vector<double>& z, int m) {
  // Fornberg's recursion for the weights of derivatives 0..m at 0.
  const int n = static_cast<int>(z.size()) - 1;
  if (n < m) throw Error(ErrorCode::InvalidArgument, "stencil too small for the derivative order");
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0, c4 = z[0];
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0, c5 = c4;
    c4 = z[i];
    for (int j = 0; j < i; ++j) {
      double c3 = z[i] - z[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][m];
  return w;
}

namespace {

// Centred second-order stencil of the n-th derivative: offsets -p..p in units of h.
std::vector<double> centred_stencil(int n, double h, int& p) {
  p = std::max(1, (n + 1) / 2);
  std::vector<double> z;
  for (int k = -p; k <= p; ++k) z.push_back(k);
  std::vector<double> w = fd_weights(z, n);
  for (double& v : w) v /= std::pow(h, n);
  return w;
}

bool inside(double x, double x0, double radius) { return std::abs(x - x0) < radius - 1e-9 * std::max(1.0, radius); }

}  // namespace

NestedNorms nested_norms(const GridFunction& phi, double x0, double half_width, int max_order) {
  const GridDesc& g = phi.grid;
  if (g.dim() != 2) throw Error(ErrorCode::InvalidArgument, "nested norms need a 2D (base, fiber) grid");
  const int nx = g.shape[0], ny = g.shape[1];
  NestedNorms out;
  out.h = g.spacing[0];
  std::vector<int> nodes;
  for (int i = 0; i < nx; ++i)
    if (inside(g.coord(0, i), x0, half_width)) {
      nodes.push_back(i);
      out.x.push_back(g.coord(0, i));
    }
  if (nodes.empty()) throw Error(ErrorCode::InvalidArgument, "Omega' contains no base nodes");
  GridDesc fg({ny}, {g.spacing[1]}, {g.origin[1]});
  out.fiber.assign(max_order + 1, std::vector<std::vector<double>>(3, std::vector<double>(nodes.size(), 0.0)));
  for (int n = 0; n <= max_order; ++n) {
    int p = 0;
    std::vector<double> w = n == 0 ? std::vector<double>{1.0} : centred_stencil(n, out.h, p);
    if (n == 0) p = 0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      int i = nodes[q];
      if (i - p < 0 || i + p >= nx) throw Error(ErrorCode::InsufficientMargin, "difference stencil leaves the grid");
      GridFunction slice(fg);
      for (int k = -p; k <= p; ++k)
        for (int j = 0; j < ny; ++j) slice[j] += w[k + p] * phi[static_cast<std::size_t>(i + k) * ny + j];
      for (int r = 0; r <= 2; ++r) out.fiber[n][r][q] = slice.sobolev_norm(r);
    }
  }
  return out;
}

double nested_norm(const NestedNorms& n, double x0, double half_width, double e, int order, int r) {
  double s = 0.0;
  for (std::size_t q = 0; q < n.x.size(); ++q)
    if (inside(n.x[q], x0, half_width - e)) s += n.h * n.fiber[order][r][q] * n.fiber[order][r][q];
  return std::sqrt(s);
}

double coefficient_constant(const FiberModel& m, double h, double E, double half_width, int max_order) {
  TwistFrame fr = m.frame(h);
  MolecularSystem sys = m.system();
  GridDesc g = m.grid(h);
  const GridDesc& fg = fr.fiber_grid;
  const int ny = fg.shape[0];
  std::vector<double> xs;
  for (int i = 0; i < g.shape[0]; ++i)
    if (inside(g.coord(0, i), m.x0, half_width)) xs.push_back(g.coord(0, i));
  // S[n][q] = sum_beta ||d_x^n a_beta(x_q)||
  std::vector<std::vector<double>> S(max_order + 1, std::vector<double>(xs.size(), 0.0));
  for (std::size_t q = 0; q < xs.size(); ++q) {
    Point x(1);
    x[0] = xs[q];
    std::vector<double> sAxx(max_order + 1, 0.0), sAxy(max_order + 1, 0.0), sAyy(max_order + 1, 0.0),
        sBx(max_order + 1, 0.0), sBy(max_order + 1, 0.0), sC(max_order + 1, 0.0), w2(max_order + 1, 0.0);
    for (int j = 0; j < ny; ++j) {
      double y = fg.coord(0, j);
      P0CoefficientJets c = p0_coefficient_jets(fr, x, &y, max_order);
      Jet W = twisted_potential_jet(fr, sys, x, &y, max_order);
      for (int n = 0; n <= max_order; ++n) {
        std::vector<int> a = {n, 0};
        sAxx[n] = std::max(sAxx[n], std::abs(c.A[0].derivative(a)));
        sAxy[n] = std::max(sAxy[n], std::abs(c.A[1].derivative(a)));
        sAyy[n] = std::max(sAyy[n], std::abs(c.A[3].derivative(a)));
        sBx[n] = std::max(sBx[n], std::abs(c.B[0].derivative(a)));
        sBy[n] = std::max(sBy[n], std::abs(c.B[1].derivative(a)));
        sC[n] = std::max(sC[n], std::abs(c.C.derivative(a)));
        double dw = W.derivative(n);
        w2[n] += fg.spacing[0] * dw * dw;
      }
    }
    Jet xv = Jet::variable(1, max_order, 0, xs[q]);
    Jet V0(xv.layout_ptr(), sys.E0);
    for (const auto& nuc : sys.nuclei) {
      Jet d = xv - nuc.R[0];
      if (d.value() < 0.0) d = -d;
      V0 -= nuc.Z * pow(d, -sys.a);
    }
    for (int n = 0; n <= max_order; ++n)
      S[n][q] = sAxx[n] + 2.0 * sAxy[n] + sBx[n] + sAyy[n] + sBy[n] + sC[n] + std::abs(V0.derivative(n)) +
                std::sqrt(w2[n]) + (n == 0 ? std::abs(E) : 0.0);
  }
  double Cp = 0.0;
  const int ne = 200;
  for (int n = 0; n <= max_order; ++n)
    for (int k = 0; k < ne; ++k) {
      double e = half_width * k / ne;
      double sup = 0.0;
      for (std::size_t q = 0; q < xs.size(); ++q)
        if (inside(xs[q], m.x0, half_width - e)) sup = std::max(sup, S[n][q]);
      if (sup == 0.0) continue;
      double lhs = std::pow(e, n) * sup;
      if (lhs > 0.0) Cp = std::max(Cp, std::exp((std::log(lhs) - log_factorial(n)) / (n + 1.0)));
    }
  return Cp;
}

InductionLedger induction_ledger_check(const FiberSolution& s, InductionLedger L) {
  const double w = L.omega_half_width, x0 = s.model.x0;
  L.D = 2.0 * w;
  GridFunction phi = twisted_fiber_function(s);
  NestedNorms nn = nested_norms(phi, x0, w, L.max_order);
  L.B = 0.0;
  L.B0 = 0.0;
  L.rows.clear();
  for (int r = 0; r <= 2; ++r)
    for (int n = 0; n <= L.max_order; ++n) {
      const int m = r + n;
      for (int j = std::max(0, m - 1); j <= m + L.extra_j; ++j) {
        LedgerRow row{j, r, n, 0.0, 0.0};
        for (int k = 1; k <= L.eps_samples; ++k) {
          double e = L.D * k / L.eps_samples;
          if (j > 0 && j * e >= w) break;
          double N = nested_norm(nn, x0, w, j * e, n, r);
          if (N == 0.0) continue;
          double b = std::exp((m * std::log(e) + std::log(N)) / (m + 1.0));
          if (b > row.bound) {
            row.bound = b;
            row.eps = e;
          }
        }
        L.rows.push_back(row);
        if (row.bound > L.B) {
          L.B = row.bound;
          L.binding = row;
        }
        if (j <= 1) L.B0 = std::max(L.B0, row.bound);
      }
    }
  L.Cp = coefficient_constant(s.model, s.h, s.pair.E, w, L.max_order);
  L.Ca = induction_Ca(1);
  L.recipe = std::max({L.B0, 2.0 * L.Cp * std::sqrt(1.0 + L.D * L.D), L.Ca});
  L.recipe_met = L.B <= L.recipe;
  return L;
}

void InductionLedger::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  f << "j,r,alpha,eps,bound\n" << std::setprecision(17);
  for (const auto& row : rows) f << row.j << "," << row.r << "," << row.alpha << "," << row.eps << "," << row.bound << "\n";
}

AprioriEstimate apriori_estimate(const FiberModel& m, double h, double E, int samples, std::uint64_t seed,
                                 double half_width) {
  TwistFrame fr = m.frame(h);
  GridDesc full = m.grid(h);
  const double rho = m.omega_radius();
  int lo = -1, hi = -1;
  for (int i = 0; i < full.shape[0]; ++i)
    if (std::abs(full.coord(0, i) - m.x0) <= rho * (1.0 + 1e-12)) {
      if (lo < 0) lo = i;
      hi = i;
    }
  const int nx = hi - lo + 1, ny = full.shape[1];
  GridDesc g({nx, ny}, full.spacing, {full.coord(0, lo), full.origin[1]});
  OperatorAssembly P = assemble_P0(fr, g);
  P.add_potential(fiber_model_potential(fr, m.system(), g, E));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double ylo = g.coord(1, 0), yhi = g.coord(1, ny - 1);
  AprioriEstimate out;
  out.h = h;
  out.samples = samples;
  auto window = [](double t) { return std::abs(t) < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0; };
  for (int sidx = 0; sidx < samples; ++sidx) {
    double wx = half_width * (0.5 + 0.5 * U(rng));
    double cx = m.x0 + (half_width - wx) * (2.0 * U(rng) - 1.0);
    double wy = (yhi - ylo) * (0.15 + 0.3 * U(rng));
    double cy = ylo + wy + (yhi - ylo - 2.0 * wy) * U(rng);
    double f[3], g2[3], th[3], c[3];
    for (int k = 0; k < 3; ++k) {
      f[k] = 6.0 * U(rng) - 3.0;
      g2[k] = 6.0 * U(rng) - 3.0;
      th[k] = 2.0 * M_PI * U(rng);
      c[k] = 2.0 * U(rng) - 1.0;
    }
    GridFunction v(g);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        double x = g.coord(0, i), y = g.coord(1, j);
        double osc = 1.0;
        for (int k = 0; k < 3; ++k) osc += c[k] * std::cos(f[k] * x + g2[k] * y + th[k]);
        v[static_cast<std::size_t>(i) * ny + j] = window((x - cx) / wx) * window((y - cy) / wy) * osc;
      }
    double rhs = P.apply(v).l2_norm() + v.l2_norm();
    NestedNorms nn = nested_norms(v, m.x0, half_width + 2.0 * h, 2);
    double worst = 0.0;
    for (int n = 0; n <= 2; ++n)
      for (int r = 0; r + n <= 2; ++r) worst = std::max(worst, nested_norm(nn, m.x0, half_width + 2.0 * h, 0.0, n, r));
    out.per_sample.push_back(worst / rhs);
    out.C = std::max(out.C, worst / rhs);
  }
  return out;
}

}  // namespace twistreg
