#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "twistreg/bump_diffeo.hpp"
#include "twistreg/grid.hpp"
#include "twistreg/jet.hpp"
#include "twistreg/molecular_system.hpp"
#include "twistreg/twist_transport.hpp"

namespace twistreg {

// P0 = U_x(-Lap_x - Lap_y)U_x^{-1} = -sum A_ab d_a d_b + sum B_a d_a + C in the
// joint variables z = (x, y), x first. Jets are in z, of the requested order.
struct P0CoefficientJets {
  int nz = 0;
  std::vector<Jet> A;  // nz x nz, row-major, symmetric
  std::vector<Jet> B;  // nz
  Jet C;
};

P0CoefficientJets p0_coefficient_jets(const TwistFrame& frame, const Point& x, const double* y, int order);

struct P0Coefficients {
  Eigen::MatrixXd A;
  Eigen::VectorXd B;
  double C = 0.0;
};

P0Coefficients p0_coefficients(const TwistFrame& frame, const Point& x, const double* y);
// Coefficients of the elliptic extension with cutoff value chi:
// A_xy -> chi A_xy, A_yy -> chi^2 A_yy + (1 - chi^2) I, B_x -> chi B_x, B_y -> chi^2 B_y, C -> chi^2 C.
P0Coefficients blend(const P0Coefficients& c, int d, double chi);

// p2(x,y; xi,eta) = |xi + J1 eta|^2 + |J3 eta|^2
double principal_symbol(const TwistFrame& frame, const Point& x, const double* y, const Eigen::VectorXd& xi,
                        const Eigen::VectorXd& eta);
// Symmetric matrix M with p2 = (xi,eta)^T M (xi,eta), optionally blended with chi.
Eigen::MatrixXd symbol_matrix(const TwistFrame& frame, const Point& x, const double* y, double chi = 1.0);

// Radial cutoff on the base, centred at x0.
struct Cutoff {
  BumpFunction bump;
  double value(const Point& x) const { return bump.value(x); }
};

// Throws BadCutoff unless chi = 1 at x0 and supp chi lies in Omega.
Cutoff make_cutoff(const TwistFrame& frame, double inner_radius, double outer_radius);
// chi_k has radii (outer, inner) = rho (0.8^k, 0.8^{k+1}); chi_{k+1} chi_k = chi_{k+1}.
std::vector<Cutoff> nested_cutoffs(const TwistFrame& frame, int count, double shrink = 0.8);

// Discrete operator on a 2D grid (axis 0: base x, axis 1: fiber y; base and
// fiber dimension 1). Second-order central differences, zero Dirichlet data.
// The mixed term uses the 7-point skew stencil matching the sign of A_xy, so
// that pure shears of the 5-point Laplacian are reproduced exactly.
struct OperatorAssembly {
  GridDesc grid;
  std::vector<double> Axx, Axy, Ayy, Bx, By, C;
  std::vector<double> chi;  // per x node; empty for P0 itself

  std::size_t size() const { return grid.size(); }
  GridFunction apply(const GridFunction& v) const;
  Eigen::SparseMatrix<double> matrix() const;
  // Adds a multiplication operator (e.g. W + V0 - E) to C.
  void add_potential(const std::vector<double>& V);
  void write_coefficients_csv(const std::string& path) const;
};

// Every x node must lie in Omega.
OperatorAssembly assemble_P0(const TwistFrame& frame, const GridDesc& grid);
// Coefficients computed only where chi > 0; elsewhere -Lap.
OperatorAssembly assemble_P0_tilde(const TwistFrame& frame, const GridDesc& grid, const Cutoff& chi);
OperatorAssembly assemble_P0_tilde(const OperatorAssembly& p0, const TwistFrame& frame, const Cutoff& chi);

// Plain 5-point -Lap on the same grid.
GridFunction apply_laplacian(const GridFunction& v);

struct EllipticityReport {
  double margin = 0.0;
  double window_bound = 0.0;
  Point argmin_x;
  Eigen::VectorXd argmin_y;
  std::size_t samples = 0;
};

// min over samples of lambda_min(symbol matrix), i.e. the exact minimum of p2
// over the unit sphere in (xi, eta). Throws NotElliptic if the margin is <= 0.
EllipticityReport ellipticity_margin(const TwistFrame& frame, const std::vector<Point>& x_samples,
                                     const std::vector<Eigen::VectorXd>& y_samples, const Cutoff* chi = nullptr);
// Lower bound 1 / sigma_max([[1, sqrt(n)], [0, 3/2]])^2 implied by ||d_s f - I|| <= 1/2, |tau| <= 1.
double window_bound(int n_fibers);

// ||(U(-Lap_h)U^{-1} - P0_h) v|| on the grid of p0; frame fiber grid must match axis 1.
struct ConjugationError {
  double error = 0.0;
  double h2_norm = 0.0;
  double relative() const { return error / h2_norm; }
};
ConjugationError conjugation_error(const TwistFrame& frame, const OperatorAssembly& p0, const GridFunction& v);

// Per-node potential (twisted W + V0(x) - E) on the 2D grid; zero on x nodes outside Omega.
std::vector<double> fiber_model_potential(const TwistFrame& frame, const MolecularSystem& system, const GridDesc& grid,
                                          double E);

}  // namespace twistreg
