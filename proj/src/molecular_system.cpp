#include "twistreg/molecular_system.hpp"

#include <cmath>

#include "twistreg/errors.hpp"

namespace twistreg {

double MolecularSystem::nuclear_repulsion() const {
  double e = 0.0;
  for (std::size_t k = 0; k < nuclei.size(); ++k)
    for (std::size_t l = k + 1; l < nuclei.size(); ++l)
      e += nuclei[k].Z * nuclei[l].Z * std::pow((nuclei[k].R - nuclei[l].R).norm(), -a);
  return e;
}

void MolecularSystem::validate() const {
  if (N < 1) throw Error(ErrorCode::InvalidArgument, "need at least one electron");
  if (!(a > 0.0)) throw Error(ErrorCode::InvalidArgument, "interaction exponent must be positive");
  for (std::size_t k = 0; k < nuclei.size(); ++k) {
    if (!(nuclei[k].Z > 0.0)) throw Error(ErrorCode::InvalidArgument, "nuclear charges must be positive");
    if (nuclei[k].R.size() != nuclei.front().R.size()) throw Error(ErrorCode::InvalidArgument, "nucleus dimension");
    for (std::size_t l = 0; l < k; ++l)
      if ((nuclei[k].R - nuclei[l].R).norm() == 0.0) throw Error(ErrorCode::InvalidArgument, "coincident nuclei");
  }
}

}  // namespace twistreg
