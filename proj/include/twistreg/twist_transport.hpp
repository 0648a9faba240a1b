#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "twistreg/bump_diffeo.hpp"
#include "twistreg/grid.hpp"
#include "twistreg/jet.hpp"
#include "twistreg/molecular_system.hpp"

namespace twistreg {

// Fiber coordinates y = (y_1, ..., y_n), each block of the base dimension d,
// sampled on a grid of dimension n * d.
struct TwistFrame {
  ClusterDiffeo cluster;
  GridDesc fiber_grid;

  const Point& base_point() const { return cluster.diffeo().base_point(); }
  const BumpFunction& bump() const { return cluster.diffeo().bump(); }
  int base_dim() const { return cluster.base_dim(); }
  int fiber_dim() const { return cluster.fiber_dim(); }
  void require_in_omega(const Point& x) const;
};

// Checks the grid dimension and that it covers supp tau along every fiber axis.
TwistFrame make_frame(const ClusterDiffeo& cluster, const GridDesc& fiber_grid);

// (U_x theta)(y) = |det d_y F(x,y)|^{1/2} theta(F(x,y)); inverse uses G.
GridFunction apply_U(const TwistFrame& frame, const Point& x, const GridFunction& theta, bool inverse = false);

// Per fiber node, with D_j = I + (x - x0) grad tau(y_j)^T and delta_j = det D_j:
//   U d_x U^{-1} = d_x + J1 d_y + J2,   U d_y U^{-1} = J3 d_y + J4.
// J1 is d x nd, J2 has d entries, J3 is nd x nd, J4 has nd entries.
struct JacobianFactors {
  GridDesc grid;
  int d = 0;
  int nd = 0;
  std::vector<double> J1, J2, J3, J4;  // node-major, row-major blocks

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> j1(std::size_t k) const {
    return {J1.data() + k * d * nd, d, nd};
  }
  Eigen::Map<const Eigen::VectorXd> j2(std::size_t k) const { return {J2.data() + k * d, d}; }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> j3(std::size_t k) const {
    return {J3.data() + k * nd * nd, nd, nd};
  }
  Eigen::Map<const Eigen::VectorXd> j4(std::size_t k) const { return {J4.data() + k * nd, nd}; }
};

struct PointFactors {
  Eigen::MatrixXd J1, J3;
  Eigen::VectorXd J2, J4;
};

PointFactors jacobian_factors_at(const TwistFrame& frame, const Point& x, const double* y);
JacobianFactors jacobian_factors(const TwistFrame& frame, const Point& x);

enum class TermFamily { FiberNucleus, BaseFiber, FiberFiber };
std::string to_string(TermFamily f);

struct PotentialTerm {
  TermFamily family;
  int i = 0;  // fiber index (or first fiber index)
  int k = 0;  // nucleus index or second fiber index
  GridFunction values;
};

// Twisted fiber potential W(x): the electron-electron and fiber-nucleus parts
// of the interaction evaluated at F(x, y).
struct TwistedPotential {
  Point x;
  std::vector<PotentialTerm> terms;
  GridFunction total() const;
};

TwistedPotential twist_potential(const TwistFrame& frame, const MolecularSystem& system, const Point& x);

// Value of one twisted term family (summed over its pairs) at a fixed fiber
// point y, as a jet in x of the given order around x.
Jet twisted_term_jet(const TwistFrame& frame, const MolecularSystem& system, TermFamily family, const Point& x,
                     const double* y, int order);
// Same, summed over all families.
Jet twisted_potential_jet(const TwistFrame& frame, const MolecularSystem& system, const Point& x, const double* y,
                          int order);

}  // namespace twistreg
