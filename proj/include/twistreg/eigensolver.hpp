#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>

namespace twistreg {

struct EigenSolveOptions {
  double tol = 1e-8;          // ||H v - lambda v|| / ||v||
  int max_iterations = 500;   // inverse-iteration budget
  int lanczos_steps = 80;
  int polish_iterations = 4;  // extra sweeps once the tolerance is met
  std::uint64_t seed = 1;
};

struct EigenResult {
  double value = 0.0;
  Eigen::VectorXd vector;  // Euclidean unit norm
  double residual = 0.0;
  int iterations = 0;
  double shift = 0.0;
  double ritz_value = 0.0;
  double ritz_residual = 0.0;
};

// Lowest eigenpair of a symmetric sparse matrix: Lanczos (full
// reorthogonalisation) for a Ritz estimate, a shift provably below the lowest
// eigenvalue, sparse Cholesky of H - shift and inverse iteration.
// Throws NotConverged if the residual tolerance is not reached.
EigenResult lowest_eigenpair(const Eigen::SparseMatrix<double>& H, const EigenSolveOptions& opt = {});

}  // namespace twistreg
