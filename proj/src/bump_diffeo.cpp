#include "twistreg/bump_diffeo.hpp"

#include <cmath>

#include "twistreg/errors.hpp"
#include "twistreg/mollifier.hpp"

namespace twistreg {

namespace {

// S, S', S'' of the smooth step on the open ramp 0 < t < 1.
void step012(double t, double& s0, double& s1, double& s2) {
  double a = 1.0 / (1.0 - t), b = 1.0 / t;
  double v = a - b;
  double p, q;
  if (v >= 0) {
    double e = std::exp(-v);
    p = 1.0 / (1.0 + e);
    q = e / (1.0 + e);
  } else {
    double e = std::exp(v);
    p = e / (1.0 + e);
    q = 1.0 / (1.0 + e);
  }
  double v1 = a * a + b * b;
  double v2 = 2.0 * a * a * a - 2.0 * b * b * b;
  s0 = p;
  s1 = p * q * v1;
  s2 = p * q * (q - p) * v1 * v1 + p * q * v2;
}

double cached_max_slope() {
  static const double m = smooth_step_max_slope().slope;
  return m;
}

}  // namespace

BumpFunction::BumpFunction(Point center, double inner_radius, double outer_radius)
    : center_(std::move(center)), inner_(inner_radius), outer_(outer_radius) {
  if (!(inner_radius > 0.0) || !(outer_radius > inner_radius))
    throw Error(ErrorCode::BadRadii, "need 0 < inner_radius < outer_radius");
  if (center_.size() < 1 || center_.size() > 3) throw Error(ErrorCode::InvalidArgument, "base dimension must be 1, 2 or 3");
}

double BumpFunction::eval(const double* s, double* grad, double* hess) const {
  const int d = dim();
  double diff[3], r2 = 0.0;
  for (int i = 0; i < d; ++i) {
    diff[i] = s[i] - center_[i];
    r2 += diff[i] * diff[i];
  }
  double r = std::sqrt(r2);
  if (grad) std::fill(grad, grad + d, 0.0);
  if (hess) std::fill(hess, hess + d * d, 0.0);
  if (r <= inner_) return 1.0;
  if (r >= outer_) return 0.0;
  const double w = outer_ - inner_;
  const double t = (outer_ - r) / w;
  // Next to an endpoint the step is flat to double precision.
  if (t >= 1.0 - 1.0 / 600.0) return 1.0;
  if (t <= 1.0 / 600.0) return 0.0;
  double s0, s1, s2;
  step012(t, s0, s1, s2);
  if (grad || hess) {
    double g = -s1 / w;        // d tau / dr
    double gp = s2 / (w * w);  // d^2 tau / dr^2
    for (int i = 0; i < d; ++i) {
      double ui = diff[i] / r;
      if (grad) grad[i] = g * ui;
      if (hess)
        for (int j = 0; j < d; ++j) {
          double uj = diff[j] / r;
          hess[i * d + j] = gp * ui * uj + (g / r) * ((i == j ? 1.0 : 0.0) - ui * uj);
        }
    }
  }
  return s0;
}

Point BumpFunction::gradient(const Point& s) const {
  Point g(dim());
  eval(s.data(), g.data());
  return g;
}

Jet BumpFunction::value(const std::vector<Jet>& s) const {
  if (static_cast<int>(s.size()) != dim()) throw Error(ErrorCode::InvalidArgument, "bump jet dimension");
  Jet r2(s[0].layout_ptr(), 0.0);
  for (int i = 0; i < dim(); ++i) {
    Jet di = s[i] - center_[i];
    r2 += di * di;
  }
  double r0 = std::sqrt(r2.value());
  if (r0 <= inner_) return Jet(s[0].layout_ptr(), 1.0);
  if (r0 >= outer_) return Jet(s[0].layout_ptr(), 0.0);
  Jet t = (outer_ - sqrt(r2)) / (outer_ - inner_);
  return smooth_step(t);
}

std::vector<double> BumpFunction::profile_derivatives(double r, int n) const {
  std::vector<double> out(n + 1, 0.0);
  if (r <= inner_) {
    out[0] = 1.0;
    return out;
  }
  if (r >= outer_) return out;
  const double w = outer_ - inner_;
  auto d = smooth_step_derivatives((outer_ - r) / w, n);
  double f = 1.0;
  for (int k = 0; k <= n; ++k) {
    out[k] = d[k] * f;
    f *= -1.0 / w;
  }
  return out;
}

double BumpFunction::max_gradient() const { return cached_max_slope() / (outer_ - inner_); }

BumpFunction make_bump(const Point& center, double inner_radius, double outer_radius,
                       const std::vector<Point>& nuclei) {
  BumpFunction b(center, inner_radius, outer_radius);
  for (const auto& R : nuclei) {
    if (R.size() != center.size()) throw Error(ErrorCode::InvalidArgument, "nucleus dimension");
    if ((R - center).norm() <= outer_radius)
      throw Error(ErrorCode::NucleusInsideSupport, "a nucleus lies within the outer radius of the cutoff");
  }
  return b;
}

Diffeomorphism::Diffeomorphism(BumpFunction bump, Point base_point, double omega_radius)
    : bump_(std::move(bump)), x0_(std::move(base_point)), omega_(omega_radius) {
  if (x0_.size() != bump_.dim()) throw Error(ErrorCode::InvalidArgument, "base point dimension");
  if (!(omega_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "omega radius must be positive");
}

bool Diffeomorphism::in_omega(const Point& x) const { return in_omega(x.data()); }

bool Diffeomorphism::in_omega(const double* x) const {
  double r2 = 0.0;
  for (int i = 0; i < dim(); ++i) r2 += (x[i] - x0_[i]) * (x[i] - x0_[i]);
  return std::sqrt(r2) <= omega_ * (1.0 + 1e-12);
}

void Diffeomorphism::f(const double* x, const double* s, double* out) const {
  double tau = bump_.eval(s);
  for (int i = 0; i < dim(); ++i) out[i] = s[i] + tau * (x[i] - x0_[i]);
}

Point Diffeomorphism::f(const Point& x, const Point& s) const {
  Point out(dim());
  f(x.data(), s.data(), out.data());
  return out;
}

Eigen::MatrixXd Diffeomorphism::ds_f(const Point& x, const Point& s) const {
  Point grad = bump_.gradient(s);
  return Eigen::MatrixXd::Identity(dim(), dim()) + (x - x0_) * grad.transpose();
}

InverseResult Diffeomorphism::invert_g(const Point& x, const Point& t, double tol, int budget) const {
  InverseResult res;
  const int d = dim();
  Point s = t, next(d), ft(d);
  double prev_step = -1.0;
  for (int it = 1; it <= budget; ++it) {
    double tau = bump_.eval(s.data());
    next = t - tau * (x - x0_);
    double step = (next - s).norm();
    res.step_sizes.push_back(step);
    if (prev_step > 1e-13 * (1.0 + t.norm()) && step > 1e-13 * (1.0 + t.norm()))
      res.max_contraction = std::max(res.max_contraction, step / prev_step);
    prev_step = step;
    s = next;
    f(x.data(), s.data(), ft.data());
    res.residual = (ft - t).norm();
    res.iterations = it;
    if (res.residual <= tol) {
      res.s = s;
      return res;
    }
  }
  throw Error(ErrorCode::NoConvergence, "fixed-point inversion exhausted its iteration budget");
}

void Diffeomorphism::g(const double* x, const double* t, double* out, double tol, int budget) const {
  const int d = dim();
  double s[3], fs[3];
  for (int i = 0; i < d; ++i) s[i] = t[i];
  for (int it = 0; it < budget; ++it) {
    double tau = bump_.eval(s);
    for (int i = 0; i < d; ++i) s[i] = t[i] - tau * (x[i] - x0_[i]);
    f(x, s, fs);
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) r2 += (fs[i] - t[i]) * (fs[i] - t[i]);
    if (std::sqrt(r2) <= tol) {
      for (int i = 0; i < d; ++i) out[i] = s[i];
      return;
    }
  }
  throw Error(ErrorCode::NoConvergence, "fixed-point inversion exhausted its iteration budget");
}

Point Diffeomorphism::g(const Point& x, const Point& t) const {
  Point out(dim());
  g(x.data(), t.data(), out.data());
  return out;
}

Eigen::MatrixXd Diffeomorphism::inverse_jacobian(const Point& x, const Point& s) const {
  Point grad = bump_.gradient(s);
  Point u = x - x0_;
  double denom = 1.0 + grad.dot(u);
  return Eigen::MatrixXd::Identity(dim(), dim()) - u * grad.transpose() / denom;
}

Eigen::MatrixXd Diffeomorphism::inverse_jacobian_neumann(const Point& x, const Point& s, int terms) const {
  Point grad = bump_.gradient(s);
  Point u = x - x0_;
  double lam = grad.dot(u);
  // I + (sum_{n>=1} (-lam)^{n-1}) <grad, .> u with the sign of the series term -1.
  double series = 0.0, pw = 1.0;
  for (int n = 1; n <= terms; ++n) {
    series += pw;
    pw *= -lam;
  }
  return Eigen::MatrixXd::Identity(dim(), dim()) - series * u * grad.transpose();
}

OmegaRadius max_omega_radius(const BumpFunction& bump, int samples) {
  OmegaRadius o;
  o.sup_grad_profile = bump.max_gradient();
  double best = 0.0;
  const double a = bump.inner_radius(), b = bump.outer_radius();
  for (int i = 0; i < samples; ++i) {
    double r = a + (b - a) * (i + 0.5) / samples;
    best = std::max(best, std::abs(bump.profile_derivatives(r, 1)[1]));
  }
  o.sup_grad_sampled = best;
  o.radius = 1.0 / (2.0 * std::max(o.sup_grad_profile, o.sup_grad_sampled));
  return o;
}

Diffeomorphism make_diffeomorphism(const BumpFunction& bump, const Point& x0) {
  if (bump.value(x0) != 1.0) throw Error(ErrorCode::InvalidArgument, "tau(x0) must equal 1");
  return Diffeomorphism(bump, x0, max_omega_radius(bump).radius);
}

ClusterDiffeo::ClusterDiffeo(Diffeomorphism diffeo, int n_fibers) : diffeo_(std::move(diffeo)), n_fibers_(n_fibers) {
  if (n_fibers < 1) throw Error(ErrorCode::InvalidArgument, "need at least one fiber coordinate");
}

void ClusterDiffeo::F(const double* x, const double* y, double* out) const {
  const int d = base_dim();
  for (int j = 0; j < n_fibers_; ++j) diffeo_.f(x, y + j * d, out + j * d);
}

void ClusterDiffeo::G(const double* x, const double* y, double* out) const {
  const int d = base_dim();
  for (int j = 0; j < n_fibers_; ++j) diffeo_.g(x, y + j * d, out + j * d);
}

Eigen::VectorXd ClusterDiffeo::F(const Point& x, const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(fiber_dim());
  F(x.data(), y.data(), out.data());
  return out;
}

Eigen::VectorXd ClusterDiffeo::G(const Point& x, const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(fiber_dim());
  G(x.data(), y.data(), out.data());
  return out;
}

LipschitzReport lipschitz_constants(const ClusterDiffeo& c, const std::vector<Point>& x_samples,
                                    const std::vector<Eigen::VectorXd>& y_samples) {
  LipschitzReport rep;
  const int d = c.base_dim(), nf = c.n_fibers();
  const auto& bump = c.diffeo().bump();
  const std::size_t ny = y_samples.size();
  // tau per fiber block; d_x^alpha F for |alpha| = 1 is tau(y_j) e_i, higher orders vanish.
  std::vector<Eigen::VectorXd> taus(ny, Eigen::VectorXd(nf));
  for (std::size_t k = 0; k < ny; ++k) {
    for (int j = 0; j < nf; ++j) taus[k][j] = bump.eval(y_samples[k].data() + j * d);
    rep.dx_bound_max = std::max(rep.dx_bound_max, taus[k].norm());
  }
  for (std::size_t a = 0; a < ny; ++a)
    for (std::size_t b = a + 1; b < ny; ++b) {
      double dy = (y_samples[a] - y_samples[b]).norm();
      if (dy == 0.0) continue;
      rep.dx_lipschitz_max = std::max(rep.dx_lipschitz_max, (taus[a] - taus[b]).norm() / dy);
    }
  std::vector<Eigen::VectorXd> Fy(ny);
  for (const auto& x : x_samples) {
    for (std::size_t k = 0; k < ny; ++k) Fy[k] = c.F(x, y_samples[k]);
    for (std::size_t a = 0; a < ny; ++a)
      for (std::size_t b = a + 1; b < ny; ++b) {
        double dy = (y_samples[a] - y_samples[b]).norm();
        double dF = (Fy[a] - Fy[b]).norm();
        if (dy == 0.0) continue;
        rep.forward_max = std::max(rep.forward_max, dF / dy);
        rep.backward_max = std::max(rep.backward_max, dy / dF);
        ++rep.pairs;
      }
  }
  rep.C0 = std::max({rep.forward_max, rep.backward_max, rep.dx_lipschitz_max, rep.dx_bound_max});
  return rep;
}

}  // namespace twistreg
