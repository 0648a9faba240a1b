#pragma once

#include <Eigen/Dense>
#include <vector>

namespace twistreg {

struct Nucleus {
  Eigen::VectorXd R;
  double Z = 1.0;
};

// N electrons in base dimension d interacting through |.|^{-a}.
struct MolecularSystem {
  int N = 1;
  std::vector<Nucleus> nuclei;
  double E0 = 0.0;
  double a = 1.0;
  double ee_coupling = 1.0;  // scales the electron-electron terms

  int dim() const { return nuclei.empty() ? 0 : static_cast<int>(nuclei.front().R.size()); }
  // sum_{k<l} Z_k Z_l |R_k - R_l|^{-a}
  double nuclear_repulsion() const;
  // Throws InvalidArgument on coincident nuclei or non-positive charges.
  void validate() const;
};

}  // namespace twistreg
