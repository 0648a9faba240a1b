#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "twistreg/grid.hpp"
#include "twistreg/twist_transport.hpp"

namespace twistreg {

using MultiIndex = std::vector<int>;

// D^alpha |y|^{-1} = P_alpha(y) / |y|^{2|alpha|+1} with P_alpha homogeneous of
// degree |alpha| and exact integer coefficients (overflow is an error).
struct CoulombPolynomial {
  int dim = 0;
  int degree = 0;
  std::map<MultiIndex, std::int64_t> coeffs;

  double eval(const double* y) const;
};

CoulombPolynomial coulomb_polynomial(const MultiIndex& alpha);
// Exact value of D^alpha |y|^{-1}; throws SingularPoint at y = 0.
double coulomb_derivative(const MultiIndex& alpha, const double* y);

// All multi-indices of the given dimension with |alpha| = n, graded lexicographic.
std::vector<MultiIndex> multi_indices(int dim, int n);
double multi_factorial(const MultiIndex& alpha);

// Fibonacci lattice on the unit sphere (d = 3), equispaced circle (d = 2) or
// {-1, 1} (d = 1), plus the positive and negative coordinate axes.
std::vector<std::vector<double>> sphere_samples(int dim, int n);

struct BoundRow {
  MultiIndex alpha;
  double sup = 0.0;      // sup over the unit sphere of |D^alpha |.|^{-1}|
  double bound = 0.0;    // (4 sqrt d)^{|alpha|+1} alpha!
  double ratio = 0.0;    // sup / bound
  double k_alpha = 0.0;  // (sup / alpha!)^{1/(|alpha|+1)}
};

struct DerivativeBoundReport {
  int dim = 0;
  int alpha_max = 0;
  std::size_t samples = 0;
  std::vector<BoundRow> rows;
  double K_min = 0.0;      // max over rows of k_alpha
  double reference = 0.0;  // 4 sqrt d
  int violations = 0;      // rows with sup > bound
  int unit_violations = 0; // rows with sup > alpha! (the K = 1 bound)

  void write_csv(const std::string& path) const;
};

// Throws BoundViolated if any row exceeds the (4 sqrt d)^{|alpha|+1} alpha! bound.
DerivativeBoundReport verify_factorial_bound(int dim, int alpha_max, int n_samples = 10000);

// Radial trial f(r) on [0, r_max] in three dimensions (r_max = 0: unbounded).
struct RadialTrial {
  std::function<double(double)> f;
  std::function<double(double)> df;
  double r_max = 0.0;
};

// int |t|^{-2} f^2 / int |grad f|^2 by adaptive quadrature; throws ZeroGradient.
double hardy_ratio(const RadialTrial& trial);
// Discrete version on a 3D grid: forward differences, zero extension.
double hardy_ratio(const GridFunction& f);

RadialTrial exponential_trial(double lambda = 1.0);
// r^{-1/2 + eps} times a smooth cutoff equal to 1 on [0, 1] and 0 beyond 2.
RadialTrial near_optimizer_trial(double eps);

// sup over x samples of |D_x^alpha| of the twisted base-fiber interaction
// |x - f(x, y)|^{-1} at a fixed fiber point y, against the proof bound
// C1 C0^{2|alpha|} K^{|alpha|+1} alpha! |y - x0|^{-|alpha|-1} with C1 = C0.
struct ChainRow {
  MultiIndex alpha;
  double sup = 0.0;
  double bound = 0.0;
};
struct ChainReport {
  double C0 = 0.0;
  double K = 0.0;
  std::vector<ChainRow> rows;
  double max_ratio = 0.0;
};
ChainReport lemma_chain_check(const TwistFrame& frame, const std::vector<Point>& x_samples, const double* y,
                              double C0, double K, int alpha_max);

}  // namespace twistreg
