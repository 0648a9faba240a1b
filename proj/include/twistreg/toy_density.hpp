#pragma once

#include <string>
#include <vector>

#include "twistreg/conj_operator.hpp"
#include "twistreg/eigensolver.hpp"
#include "twistreg/grid.hpp"
#include "twistreg/molecular_system.hpp"
#include "twistreg/twist_transport.hpp"

namespace twistreg {

struct Eigenpair {
  double E = 0.0;
  GridFunction psi;  // unit discrete L2 norm
  int iterations = 0;
  double residual = 0.0;
};

// Ground state of -Lap - Z/|x| in 3D through u = r psi: -u'' - (Z/r) u = E u on
// r_j = j h, j = 1..n, u(0) = u(r_max) = 0. psi holds u with sum u^2 h = 1.
Eigenpair solve_radial_hydrogen(double Z, double r_max, int n_points);

struct HydrogenCheck {
  double energy_error;  // |E + Z^2/4| / (Z^2/4)
  double psi_error;     // relative L2 distance of u from sqrt(Z^3/2) r e^{-Z r/2}
  double kinetic;       // <-Lap> = int u'^2
};
HydrogenCheck check_hydrogen(const Eigenpair& p, double Z);

// Two particles on a line: -d_x^2 - d_y^2 - Z|x-R|^{-a} - Z|y-R|^{-a} + c|x-y|^{-a}
// in the box |x - x0| < x_half_width, y_min < y < y_max with zero boundary data.
// x nodes sit at x0 + i h, y nodes at x0 + (j + 1/2) h, so no node touches x = y
// or the nucleus in either coordinate.
struct FiberModel {
  double a = 0.4;
  double Z = 1.0;
  double R = 0.0;
  double coupling = 1.0;
  double x0 = 3.0;
  double x_half_width = 1.0;
  double y_min = -1.0;
  double y_max = 6.5;
  double tau_inner = 0.5;
  double tau_outer = 2.5;

  MolecularSystem system() const;
  GridDesc grid(double h) const;
  GridDesc fiber_grid(double h) const;
  TwistFrame frame(double h) const;
  double omega_radius() const;
};

struct FiberSolution {
  FiberModel model;
  double h = 0.0;
  Eigenpair pair;  // psi on model.grid(h)
};

// Sparse matrix of the untwisted Hamiltonian on model.grid(h).
Eigen::SparseMatrix<double> fiber_hamiltonian(const FiberModel& m, double h);
FiberSolution solve_fiber_model(const FiberModel& m, double h, const EigenSolveOptions& opt = {});

// x -> psi(x, .) for the x node with index i.
GridFunction fiber_slice(const FiberSolution& s, int i);

// rho(x) = int |psi(x,y)|^2 dy (trapezoidal) on the x nodes.
GridFunction compute_density(const FiberSolution& s);
// rho(r) = u(r)^2 / (4 pi r^2) on the radial nodes.
GridFunction compute_density(const Eigenpair& radial_hydrogen);

// phi(x) = U_x psi(x, .) on the x nodes inside Omega, as a 2D grid function.
GridFunction twisted_fiber_function(const FiberSolution& s);

struct TwistedResidual {
  double h = 0.0;
  double residual = 0.0;        // ||(P0 + W + V0 - E) phi|| / ||phi|| over interior Omega nodes
  double norm_discrepancy = 0.0;  // max_x | ||phi(x)|| - ||psi(x)|| | / max_x ||psi(x)||
  double x0_discrepancy = 0.0;  // max |phi(x0, .) - psi(x0, .)|
  int base_nodes = 0;
};
TwistedResidual twisted_equation_residual(const FiberSolution& s);

}  // namespace twistreg
