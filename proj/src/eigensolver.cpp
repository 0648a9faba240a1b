#include "twistreg/eigensolver.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>
#include <random>

#include "twistreg/errors.hpp"

namespace twistreg {

namespace {

struct Ritz {
  double theta;
  double residual;
  Eigen::VectorXd vector;
};

Ritz lanczos(const Eigen::SparseMatrix<double>& H, int steps, std::uint64_t seed) {
  const Eigen::Index n = H.rows();
  steps = static_cast<int>(std::min<Eigen::Index>(steps, n));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N;
  Eigen::MatrixXd V(n, steps);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.1 * N(rng);
  v.normalize();
  std::vector<double> alpha, beta;
  int m = 0;
  double last_beta = 0.0;
  for (int k = 0; k < steps; ++k) {
    V.col(k) = v;
    ++m;
    Eigen::VectorXd w = H * v;
    alpha.push_back(v.dot(w));
    // Full reorthogonalisation, applied twice.
    for (int pass = 0; pass < 2; ++pass) w -= V.leftCols(k + 1) * (V.leftCols(k + 1).transpose() * w);
    double b = w.norm();
    last_beta = b;
    if (k + 1 == steps || b < 1e-14 * std::abs(alpha.back()) + 1e-300) break;
    beta.push_back(b);
    v = w / b;
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    T(k, k) = alpha[k];
    if (k + 1 < m) T(k, k + 1) = T(k + 1, k) = beta[k];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
  Ritz r;
  r.theta = es.eigenvalues()[0];
  r.residual = std::abs(last_beta * es.eigenvectors()(m - 1, 0));
  r.vector = V.leftCols(m) * es.eigenvectors().col(0);
  return r;
}

}  // namespace

EigenResult lowest_eigenpair(const Eigen::SparseMatrix<double>& H, const EigenSolveOptions& opt) {
  if (H.rows() != H.cols() || H.rows() == 0) throw Error(ErrorCode::InvalidArgument, "matrix must be square");
  EigenResult res;
  Ritz rz = lanczos(H, opt.lanczos_steps, opt.seed);
  res.ritz_value = rz.theta;
  res.ritz_residual = rz.residual;
  // Some eigenvalue lies within the Ritz residual of theta; step further down
  // until H - sigma admits a Cholesky factorisation.
  double gap = rz.residual + 1e-3 * (1.0 + std::abs(rz.theta));
  Eigen::SparseMatrix<double> I(H.rows(), H.cols());
  I.setIdentity();
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
  double sigma = rz.theta - gap;
  llt.analyzePattern(H - sigma * I);
  for (int attempt = 0;; ++attempt) {
    llt.factorize(H - sigma * I);
    if (llt.info() == Eigen::Success) break;
    if (attempt > 40) throw Error(ErrorCode::NotConverged, "no positive definite shift found");
    gap *= 2.0;
    sigma = rz.theta - gap;
  }
  res.shift = sigma;
  Eigen::VectorXd x = rz.vector.normalized();
  auto sweep = [&](int it) {
    x = llt.solve(x);
    x.normalize();
    Eigen::VectorXd Hx = H * x;
    res.value = x.dot(Hx);
    res.residual = (Hx - res.value * x).norm();
    res.iterations = it;
  };
  // A shift ten residuals below the Rayleigh quotient stays below the lowest
  // eigenvalue once the iterate is dominated by its eigenvector; a failed
  // factorisation (shift not below the spectrum) simply keeps the old one.
  auto reshift = [&]() {
    double s2 = res.value - 10.0 * res.residual;
    if (s2 <= res.shift) return false;
    llt.factorize(H - s2 * I);
    if (llt.info() != Eigen::Success) {
      llt.factorize(H - res.shift * I);
      return false;
    }
    res.shift = s2;
    return true;
  };
  int it = 0;
  while (it < opt.max_iterations) {
    sweep(++it);
    if (res.residual <= opt.tol) break;
    if (it % 10 == 0) reshift();
  }
  if (!(res.residual <= opt.tol)) throw Error(ErrorCode::NotConverged, "inverse iteration did not reach tolerance");
  // Polish until the residual stops halving.
  for (int p = 0; p < opt.polish_iterations; ++p) {
    if (!reshift()) break;
    double before = res.residual;
    Eigen::VectorXd keep = x;
    double keep_value = res.value;
    sweep(++it);
    if (!(res.residual < 0.5 * before)) {
      if (res.residual > before) {
        x = keep;
        res.value = keep_value;
        res.residual = before;
      }
      break;
    }
  }
  // Fix the sign so that the largest component is positive.
  Eigen::Index imax;
  x.cwiseAbs().maxCoeff(&imax);
  if (x[imax] < 0) x = -x;
  res.vector = x;
  return res;
}

}  // namespace twistreg
