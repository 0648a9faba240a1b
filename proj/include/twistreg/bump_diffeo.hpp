#pragma once

#include <Eigen/Dense>
#include <vector>

#include "twistreg/jet.hpp"

namespace twistreg {

using Point = Eigen::VectorXd;

// Radial cutoff: 1 on the inner ball, 0 outside the outer ball, flat-exponential ramp between.
class BumpFunction {
 public:
  BumpFunction() = default;
  BumpFunction(Point center, double inner_radius, double outer_radius);

  int dim() const { return static_cast<int>(center_.size()); }
  const Point& center() const { return center_; }
  double inner_radius() const { return inner_; }
  double outer_radius() const { return outer_; }

  // Value with optional gradient (dim) and row-major Hessian (dim x dim).
  double eval(const double* s, double* grad = nullptr, double* hess = nullptr) const;
  double value(const Point& s) const { return eval(s.data()); }
  Point gradient(const Point& s) const;
  Jet value(const std::vector<Jet>& s) const;
  // Radial profile r -> tau and its r-derivatives up to order n.
  std::vector<double> profile_derivatives(double r, int n) const;
  // sup |grad tau| from the profile analysis: max S' / (outer - inner).
  double max_gradient() const;

 private:
  Point center_;
  double inner_ = 0.0;
  double outer_ = 0.0;
};

BumpFunction make_bump(const Point& center, double inner_radius, double outer_radius,
                       const std::vector<Point>& nuclei);

struct InverseResult {
  Point s;
  int iterations = 0;
  double residual = 0.0;
  std::vector<double> step_sizes;
  // Largest ratio of consecutive step sizes while steps exceed rounding level.
  double max_contraction = 0.0;
};

// f(x, s) = s + tau(s) (x - x0) and its inverse g on Omega = {|x - x0| <= omega_radius}.
class Diffeomorphism {
 public:
  Diffeomorphism() = default;
  Diffeomorphism(BumpFunction bump, Point base_point, double omega_radius);

  const BumpFunction& bump() const { return bump_; }
  const Point& base_point() const { return x0_; }
  double omega_radius() const { return omega_; }
  int dim() const { return bump_.dim(); }
  bool in_omega(const Point& x) const;
  bool in_omega(const double* x) const;

  void f(const double* x, const double* s, double* out) const;
  Point f(const Point& x, const Point& s) const;
  Eigen::MatrixXd ds_f(const Point& x, const Point& s) const;

  InverseResult invert_g(const Point& x, const Point& t, double tol = 1e-12, int budget = 200) const;
  // Throws NoConvergence when the budget is exhausted.
  void g(const double* x, const double* t, double* out, double tol = 1e-12, int budget = 200) const;
  Point g(const Point& x, const Point& t) const;

  // (d_s f)^{-1} in closed form (Sherman-Morrison) and as a truncated Neumann series.
  Eigen::MatrixXd inverse_jacobian(const Point& x, const Point& s) const;
  Eigen::MatrixXd inverse_jacobian_neumann(const Point& x, const Point& s, int terms) const;

 private:
  BumpFunction bump_;
  Point x0_;
  double omega_ = 0.0;
};

struct OmegaRadius {
  double radius;         // 1 / (2 sup|grad tau|)
  double sup_grad_profile;
  double sup_grad_sampled;
};

OmegaRadius max_omega_radius(const BumpFunction& bump, int samples = 20001);
// Requires tau(x0) = 1; Omega radius saturates the 1/2 bound on d_s f - I.
Diffeomorphism make_diffeomorphism(const BumpFunction& bump, const Point& x0);

// F(x, y) = (f(x, y_1), ..., f(x, y_n)) acting on n_fibers blocks of size dim.
class ClusterDiffeo {
 public:
  ClusterDiffeo() = default;
  ClusterDiffeo(Diffeomorphism diffeo, int n_fibers);

  const Diffeomorphism& diffeo() const { return diffeo_; }
  int n_fibers() const { return n_fibers_; }
  int base_dim() const { return diffeo_.dim(); }
  int fiber_dim() const { return n_fibers_ * diffeo_.dim(); }

  void F(const double* x, const double* y, double* out) const;
  void G(const double* x, const double* y, double* out) const;
  Eigen::VectorXd F(const Point& x, const Eigen::VectorXd& y) const;
  Eigen::VectorXd G(const Point& x, const Eigen::VectorXd& y) const;

 private:
  Diffeomorphism diffeo_;
  int n_fibers_ = 1;
};

struct LipschitzReport {
  double C0 = 0.0;
  double forward_max = 0.0;      // max |F(y)-F(y')| / |y-y'|
  double backward_max = 0.0;     // max |y-y'| / |F(y)-F(y')|
  double dx_lipschitz_max = 0.0; // max |d_x F(y) - d_x F(y')| / |y-y'| over first-order alpha
  double dx_bound_max = 0.0;     // max |d_x^alpha F| over |alpha| >= 1
  std::size_t pairs = 0;
};

LipschitzReport lipschitz_constants(const ClusterDiffeo& c, const std::vector<Point>& x_samples,
                                    const std::vector<Eigen::VectorXd>& y_samples);

}  // namespace twistreg
