#include "twistreg/coulomb_bounds.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <fstream>
#include <iomanip>

#include "twistreg/errors.hpp"
#include "twistreg/mollifier.hpp"

namespace twistreg {

namespace {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw Error(ErrorCode::InvalidArgument, "coefficient overflow");
  return r;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw Error(ErrorCode::InvalidArgument, "coefficient overflow");
  return r;
}

void add_term(std::map<MultiIndex, std::int64_t>& p, const MultiIndex& m, std::int64_t c) {
  if (c == 0) return;
  auto& slot = p[m];
  slot = checked_add(slot, c);
  if (slot == 0) p.erase(m);
}

// Q = r^2 d_i P - (2k + 1) y_i P
CoulombPolynomial differentiate(const CoulombPolynomial& P, int i) {
  CoulombPolynomial Q;
  Q.dim = P.dim;
  Q.degree = P.degree + 1;
  const std::int64_t k2 = 2 * P.degree + 1;
  for (const auto& [m, c] : P.coeffs) {
    if (m[i] > 0) {
      MultiIndex dm = m;
      std::int64_t dc = checked_mul(c, m[i]);
      dm[i] -= 1;
      for (int l = 0; l < P.dim; ++l) {
        MultiIndex t = dm;
        t[l] += 2;
        add_term(Q.coeffs, t, dc);
      }
    }
    MultiIndex t = m;
    t[i] += 1;
    add_term(Q.coeffs, t, checked_mul(-k2, c));
  }
  return Q;
}

}  // namespace

double CoulombPolynomial::eval(const double* y) const {
  double s = 0.0;
  for (const auto& [m, c] : coeffs) {
    double t = static_cast<double>(c);
    for (int l = 0; l < dim; ++l)
      for (int e = 0; e < m[l]; ++e) t *= y[l];
    s += t;
  }
  return s;
}

CoulombPolynomial coulomb_polynomial(const MultiIndex& alpha) {
  CoulombPolynomial P;
  P.dim = static_cast<int>(alpha.size());
  if (P.dim < 1) throw Error(ErrorCode::InvalidArgument, "empty multi-index");
  P.coeffs[MultiIndex(P.dim, 0)] = 1;
  for (int i = 0; i < P.dim; ++i) {
    if (alpha[i] < 0) throw Error(ErrorCode::InvalidArgument, "negative multi-index entry");
    for (int r = 0; r < alpha[i]; ++r) P = differentiate(P, i);
  }
  return P;
}

double coulomb_derivative(const MultiIndex& alpha, const double* y) {
  double r2 = 0.0;
  for (std::size_t l = 0; l < alpha.size(); ++l) r2 += y[l] * y[l];
  if (r2 == 0.0) throw Error(ErrorCode::SingularPoint, "|y|^{-1} is singular at the origin");
  CoulombPolynomial P = coulomb_polynomial(alpha);
  return P.eval(y) / std::pow(std::sqrt(r2), 2 * P.degree + 1);
}

std::vector<MultiIndex> multi_indices(int dim, int n) {
  std::vector<MultiIndex> out;
  MultiIndex a(dim, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == dim - 1) {
      a[pos] = left;
      out.push_back(a);
      return;
    }
    for (int v = left; v >= 0; --v) {
      a[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, n);
  return out;
}

double multi_factorial(const MultiIndex& alpha) {
  double f = 1.0;
  for (int a : alpha)
    for (int k = 2; k <= a; ++k) f *= k;
  return f;
}

std::vector<std::vector<double>> sphere_samples(int dim, int n) {
  std::vector<std::vector<double>> pts;
  if (dim == 1) {
    pts = {{1.0}, {-1.0}};
    return pts;
  }
  if (dim == 2) {
    for (int k = 0; k < n; ++k) {
      double t = 2.0 * M_PI * (k + 0.5) / n;
      pts.push_back({std::cos(t), std::sin(t)});
    }
  } else if (dim == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < n; ++k) {
      double z = 1.0 - 2.0 * (k + 0.5) / n;
      double r = std::sqrt(1.0 - z * z);
      double phi = golden * k;
      pts.push_back({r * std::cos(phi), r * std::sin(phi), z});
    }
  } else {
    throw Error(ErrorCode::InvalidArgument, "sphere samples need dimension 1, 2 or 3");
  }
  for (int l = 0; l < dim; ++l)
    for (double s : {1.0, -1.0}) {
      std::vector<double> e(dim, 0.0);
      e[l] = s;
      pts.push_back(e);
    }
  return pts;
}

void DerivativeBoundReport::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  os << "alpha,order,sup,bound,ratio\n" << std::setprecision(17);
  for (const auto& r : rows) {
    std::string a;
    int n = 0;
    for (std::size_t l = 0; l < r.alpha.size(); ++l) {
      a += (l ? "-" : "") + std::to_string(r.alpha[l]);
      n += r.alpha[l];
    }
    os << a << ',' << n << ',' << r.sup << ',' << r.bound << ',' << r.ratio << '\n';
  }
}

DerivativeBoundReport verify_factorial_bound(int dim, int alpha_max, int n_samples) {
  if (dim < 1 || dim > 3) throw Error(ErrorCode::InvalidArgument, "dimension must be 1, 2 or 3");
  DerivativeBoundReport rep;
  rep.dim = dim;
  rep.alpha_max = alpha_max;
  rep.reference = 4.0 * std::sqrt(static_cast<double>(dim));
  auto pts = sphere_samples(dim, n_samples);
  rep.samples = pts.size();
  for (int n = 0; n <= alpha_max; ++n)
    for (const auto& alpha : multi_indices(dim, n)) {
      CoulombPolynomial P = coulomb_polynomial(alpha);
      BoundRow row;
      row.alpha = alpha;
      for (const auto& p : pts) row.sup = std::max(row.sup, std::abs(P.eval(p.data())));
      double fact = multi_factorial(alpha);
      row.bound = std::pow(rep.reference, n + 1) * fact;
      row.ratio = row.sup / row.bound;
      row.k_alpha = std::pow(row.sup / fact, 1.0 / (n + 1));
      rep.K_min = std::max(rep.K_min, row.k_alpha);
      if (row.sup > row.bound) ++rep.violations;
      if (row.sup > fact * (1.0 + 1e-12)) ++rep.unit_violations;
      rep.rows.push_back(row);
    }
  if (rep.violations > 0) throw Error(ErrorCode::BoundViolated, "factorial bound violated");
  return rep;
}

namespace {

struct Integrand {
  const RadialTrial* t;
  bool numerator;
};

double integrand(double r, void* p) {
  auto* in = static_cast<Integrand*>(p);
  if (in->numerator) {
    double f = in->t->f(r);
    return f * f;  // |t|^{-2} f^2 times the r^2 volume factor
  }
  double df = in->t->df(r);
  return df * df * r * r;
}

double integrate(const RadialTrial& t, bool numerator) {
  gsl_set_error_handler_off();
  gsl_integration_workspace* w = gsl_integration_workspace_alloc(2000);
  Integrand in{&t, numerator};
  gsl_function F{&integrand, &in};
  double result = 0.0, err = 0.0;
  int status;
  if (t.r_max > 0.0) status = gsl_integration_qags(&F, 0.0, t.r_max, 0.0, 1e-11, 2000, w, &result, &err);
  else status = gsl_integration_qagiu(&F, 0.0, 0.0, 1e-11, 2000, w, &result, &err);
  gsl_integration_workspace_free(w);
  if (status != GSL_SUCCESS && status != GSL_EROUND)
    throw Error(ErrorCode::NotConverged, std::string("quadrature failed: ") + gsl_strerror(status));
  return result;
}

}  // namespace

double hardy_ratio(const RadialTrial& trial) {
  double den = integrate(trial, false);
  if (!(den > 0.0)) throw Error(ErrorCode::ZeroGradient, "trial function has zero gradient");
  return integrate(trial, true) / den;
}

double hardy_ratio(const GridFunction& f) {
  const GridDesc& g = f.grid;
  if (g.dim() != 3) throw Error(ErrorCode::InvalidArgument, "Hardy ratio is three-dimensional");
  double num = 0.0, den = 0.0;
  int idx[3];
  for (std::size_t k = 0; k < f.size(); ++k) {
    g.unflat(k, idx);
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) r2 += g.coord(a, idx[a]) * g.coord(a, idx[a]);
    if (r2 == 0.0) throw Error(ErrorCode::SingularGridPoint, "grid node at the origin");
    num += f[k] * f[k] / r2;
    for (int a = 0; a < 3; ++a) {
      double next = 0.0;
      if (idx[a] + 1 < g.shape[a]) next = f[k + g.stride(a)];
      double d = (next - f[k]) / g.spacing[a];
      den += d * d;
      if (idx[a] == 0) den += (f[k] / g.spacing[a]) * (f[k] / g.spacing[a]);
    }
  }
  if (!(den > 0.0)) throw Error(ErrorCode::ZeroGradient, "grid function has zero gradient");
  return num / den;
}

RadialTrial exponential_trial(double lambda) {
  return {[lambda](double r) { return std::exp(-lambda * r); },
          [lambda](double r) { return -lambda * std::exp(-lambda * r); }, 0.0};
}

RadialTrial near_optimizer_trial(double eps) {
  const double p = -0.5 + eps;
  auto chi = [](double r) { return smooth_step(2.0 - r); };
  auto dchi = [](double r) { return -smooth_step_derivatives(2.0 - r, 1)[1]; };
  return {[=](double r) { return std::pow(r, p) * chi(r); },
          [=](double r) { return p * std::pow(r, p - 1.0) * chi(r) + std::pow(r, p) * dchi(r); }, 2.0};
}

ChainReport lemma_chain_check(const TwistFrame& frame, const std::vector<Point>& x_samples, const double* y,
                              double C0, double K, int alpha_max) {
  const int d = frame.base_dim();
  if (frame.fiber_dim() != d) throw Error(ErrorCode::InvalidArgument, "chain check uses one fiber electron");
  MolecularSystem coulomb;
  coulomb.a = 1.0;
  ChainReport rep;
  rep.C0 = C0;
  rep.K = K;
  double dist = 0.0;
  for (int l = 0; l < d; ++l) dist += (y[l] - frame.base_point()[l]) * (y[l] - frame.base_point()[l]);
  dist = std::sqrt(dist);
  std::vector<Jet> jets;
  for (const auto& x : x_samples) {
    frame.require_in_omega(x);
    jets.push_back(twisted_term_jet(frame, coulomb, TermFamily::BaseFiber, x, y, alpha_max));
  }
  for (int n = 0; n <= alpha_max; ++n)
    for (const auto& alpha : multi_indices(d, n)) {
      ChainRow row;
      row.alpha = alpha;
      for (const auto& j : jets) row.sup = std::max(row.sup, std::abs(j.derivative(alpha)));
      row.bound = C0 * std::pow(C0, 2 * n) * std::pow(K, n + 1) * multi_factorial(alpha) * std::pow(dist, -n - 1);
      rep.max_ratio = std::max(rep.max_ratio, row.sup / row.bound);
      rep.rows.push_back(row);
    }
  return rep;
}

}  // namespace twistreg
