#include "twistreg/toy_density.hpp"

#include <cmath>

#include "twistreg/errors.hpp"

namespace twistreg {

Eigenpair solve_radial_hydrogen(double Z, double r_max, int n_points) {
  if (!(Z > 0.0)) throw Error(ErrorCode::InvalidArgument, "charge must be positive");
  if (n_points < 500) throw Error(ErrorCode::InvalidArgument, "need at least 500 radial points");
  const double h = r_max / (n_points + 1);
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j < n_points; ++j) {
    double r = (j + 1) * h;
    t.emplace_back(j, j, 2.0 / (h * h) - Z / r);
    if (j > 0) t.emplace_back(j, j - 1, -1.0 / (h * h));
    if (j + 1 < n_points) t.emplace_back(j, j + 1, -1.0 / (h * h));
  }
  Eigen::SparseMatrix<double> H(n_points, n_points);
  H.setFromTriplets(t.begin(), t.end());
  EigenResult er = lowest_eigenpair(H);
  Eigenpair p;
  p.E = er.value;
  p.iterations = er.iterations;
  p.residual = er.residual;
  p.psi = GridFunction(GridDesc({n_points}, {h}, {h}));
  const double s = 1.0 / std::sqrt(h);
  for (int j = 0; j < n_points; ++j) p.psi[j] = er.vector[j] * s;
  return p;
}

HydrogenCheck check_hydrogen(const Eigenpair& p, double Z) {
  HydrogenCheck c;
  const double exact = -Z * Z / 4.0;
  c.energy_error = std::abs(p.E - exact) / std::abs(exact);
  const double h = p.psi.grid.spacing[0];
  const double norm = std::sqrt(Z * Z * Z / 2.0);
  double e2 = 0.0, ref2 = 0.0;
  for (std::size_t j = 0; j < p.psi.size(); ++j) {
    double r = p.psi.grid.coord(0, static_cast<int>(j));
    double u = norm * r * std::exp(-Z * r / 2.0);
    e2 += (p.psi[j] - u) * (p.psi[j] - u) * h;
    ref2 += u * u * h;
  }
  c.psi_error = std::sqrt(e2 / ref2);
  double kin = 0.0;
  const std::size_t n = p.psi.size();
  for (std::size_t j = 0; j <= n; ++j) {
    double left = j == 0 ? 0.0 : p.psi[j - 1];
    double right = j == n ? 0.0 : p.psi[j];
    kin += (right - left) * (right - left) / h;
  }
  c.kinetic = kin;
  return c;
}

MolecularSystem FiberModel::system() const {
  MolecularSystem s;
  s.N = 2;
  s.a = a;
  s.ee_coupling = coupling;
  Eigen::VectorXd r(1);
  r[0] = R;
  s.nuclei.push_back({r, Z});
  s.E0 = 0.0;
  s.validate();
  return s;
}

GridDesc FiberModel::grid(double h) const {
  GridDesc f = fiber_grid(h);
  int m = static_cast<int>(std::lround(x_half_width / h));
  if (m < 2) throw Error(ErrorCode::InvalidArgument, "grid spacing too coarse for the box");
  return GridDesc({2 * m - 1, f.shape[0]}, {h, h}, {x0 - (m - 1) * h, f.origin[0]});
}

GridDesc FiberModel::fiber_grid(double h) const {
  int j0 = static_cast<int>(std::ceil((y_min - x0) / h - 0.5 + 1e-9));
  int j1 = static_cast<int>(std::floor((y_max - x0) / h - 0.5 - 1e-9));
  return GridDesc({j1 - j0 + 1}, {h}, {x0 + (j0 + 0.5) * h});
}

double FiberModel::omega_radius() const { return 0.25 * (tau_outer - tau_inner); }

TwistFrame FiberModel::frame(double h) const {
  Eigen::VectorXd c(1), r(1);
  c[0] = x0;
  r[0] = R;
  BumpFunction b = make_bump(c, tau_inner, tau_outer, {r});
  Diffeomorphism d = make_diffeomorphism(b, c);
  return make_frame(ClusterDiffeo(d, 1), fiber_grid(h));
}

Eigen::SparseMatrix<double> fiber_hamiltonian(const FiberModel& m, double h) {
  if (!(m.a > 0.0 && m.a < 0.5)) throw Error(ErrorCode::InvalidArgument, "fiber model needs 0 < a < 1/2");
  GridDesc g = m.grid(h);
  const int nx = g.shape[0], ny = g.shape[1];
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(g.size() * 5);
  const double w = 1.0 / (h * h);
  auto sing = [&](double dist) {
    if (dist == 0.0) throw Error(ErrorCode::SingularGridPoint, "grid node on a singular line");
    return std::pow(dist, -m.a);
  };
  for (int i = 0; i < nx; ++i) {
    double x = g.coord(0, i);
    for (int j = 0; j < ny; ++j) {
      double y = g.coord(1, j);
      int k = i * ny + j;
      double V = -m.Z * sing(std::abs(x - m.R)) - m.Z * sing(std::abs(y - m.R)) + m.coupling * sing(std::abs(x - y));
      t.emplace_back(k, k, 4.0 * w + V);
      if (i > 0) t.emplace_back(k, k - ny, -w);
      if (i + 1 < nx) t.emplace_back(k, k + ny, -w);
      if (j > 0) t.emplace_back(k, k - 1, -w);
      if (j + 1 < ny) t.emplace_back(k, k + 1, -w);
    }
  }
  Eigen::SparseMatrix<double> H(g.size(), g.size());
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

FiberSolution solve_fiber_model(const FiberModel& m, double h, const EigenSolveOptions& opt) {
  Eigen::SparseMatrix<double> H = fiber_hamiltonian(m, h);
  EigenResult er = lowest_eigenpair(H, opt);
  FiberSolution s;
  s.model = m;
  s.h = h;
  s.pair.E = er.value;
  s.pair.iterations = er.iterations;
  s.pair.residual = er.residual;
  s.pair.psi = GridFunction(m.grid(h));
  for (std::size_t k = 0; k < s.pair.psi.size(); ++k) s.pair.psi[k] = er.vector[static_cast<Eigen::Index>(k)] / h;
  return s;
}

GridFunction fiber_slice(const FiberSolution& s, int i) {
  const GridDesc& g = s.pair.psi.grid;
  const int ny = g.shape[1];
  GridFunction out(GridDesc({ny}, {g.spacing[1]}, {g.origin[1]}));
  std::copy(s.pair.psi.values.begin() + static_cast<std::ptrdiff_t>(i) * ny,
            s.pair.psi.values.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny, out.values.begin());
  return out;
}

GridFunction compute_density(const FiberSolution& s) {
  const GridDesc& g = s.pair.psi.grid;
  const int nx = g.shape[0];
  GridFunction rho(GridDesc({nx}, {g.spacing[0]}, {g.origin[0]}));
  for (int i = 0; i < nx; ++i) {
    GridFunction sl = fiber_slice(s, i);
    double n = sl.l2_norm();
    rho[i] = n * n;
  }
  return rho;
}

GridFunction compute_density(const Eigenpair& p) {
  GridFunction rho(p.psi.grid);
  for (std::size_t j = 0; j < rho.size(); ++j) {
    double r = rho.grid.coord(0, static_cast<int>(j));
    rho[j] = p.psi[j] * p.psi[j] / (4.0 * M_PI * r * r);
  }
  return rho;
}

namespace {

// Index range of x nodes inside Omega.
std::pair<int, int> omega_nodes(const FiberSolution& s) {
  const GridDesc& g = s.pair.psi.grid;
  const double rho = s.model.omega_radius();
  int lo = -1, hi = -1;
  for (int i = 0; i < g.shape[0]; ++i)
    if (std::abs(g.coord(0, i) - s.model.x0) <= rho * (1.0 + 1e-12)) {
      if (lo < 0) lo = i;
      hi = i;
    }
  return {lo, hi};
}

}  // namespace

GridFunction twisted_fiber_function(const FiberSolution& s) {
  const GridDesc& g = s.pair.psi.grid;
  auto [lo, hi] = omega_nodes(s);
  const int ny = g.shape[1];
  GridDesc sub({hi - lo + 1, ny}, g.spacing, {g.coord(0, lo), g.origin[1]});
  TwistFrame fr = s.model.frame(s.h);
  GridFunction phi(sub);
  for (int i = lo; i <= hi; ++i) {
    Eigen::VectorXd x(1);
    x[0] = g.coord(0, i);
    GridFunction r = apply_U(fr, x, fiber_slice(s, i));
    std::copy(r.values.begin(), r.values.end(), phi.values.begin() + static_cast<std::ptrdiff_t>(i - lo) * ny);
  }
  return phi;
}

TwistedResidual twisted_equation_residual(const FiberSolution& s) {
  TwistedResidual out;
  out.h = s.h;
  const GridDesc& g = s.pair.psi.grid;
  auto [lo, hi] = omega_nodes(s);
  GridFunction phi = twisted_fiber_function(s);
  const GridDesc& sub = phi.grid;
  const int nx = sub.shape[0], ny = sub.shape[1];
  TwistFrame fr = s.model.frame(s.h);
  OperatorAssembly op = assemble_P0(fr, sub);
  op.add_potential(fiber_model_potential(fr, s.model.system(), sub, s.pair.E));
  GridFunction r = op.apply(phi);
  double num = 0.0, den = 0.0;
  for (int i = 1; i < nx - 1; ++i)
    for (int j = 0; j < ny; ++j) {
      std::size_t k = static_cast<std::size_t>(i) * ny + j;
      num += r[k] * r[k];
      den += phi[k] * phi[k];
    }
  out.residual = std::sqrt(num / den);
  out.base_nodes = nx - 2;
  const double hy = sub.spacing[1];
  double worst = 0.0, scale = 0.0;
  for (int i = 0; i < nx; ++i) {
    double np = 0.0, ns = 0.0;
    for (int j = 0; j < ny; ++j) {
      double a = phi[static_cast<std::size_t>(i) * ny + j];
      double b = s.pair.psi[static_cast<std::size_t>(i + lo) * ny + j];
      np += a * a * hy;
      ns += b * b * hy;
    }
    worst = std::max(worst, std::abs(std::sqrt(np) - std::sqrt(ns)));
    scale = std::max(scale, std::sqrt(ns));
    if (std::abs(sub.coord(0, i) - s.model.x0) < 1e-12 * (1.0 + s.model.x0))
      for (int j = 0; j < ny; ++j)
        out.x0_discrepancy = std::max(
            out.x0_discrepancy, std::abs(phi[static_cast<std::size_t>(i) * ny + j] -
                                         s.pair.psi[static_cast<std::size_t>(i + lo) * ny + j]));
  }
  out.norm_discrepancy = worst / scale;
  (void)g;
  (void)hi;
  return out;
}

}  // namespace twistreg
