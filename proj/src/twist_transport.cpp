#include "twistreg/twist_transport.hpp"

#include <cmath>

#include "twistreg/errors.hpp"

namespace twistreg {

void TwistFrame::require_in_omega(const Point& x) const {
  if (!cluster.diffeo().in_omega(x)) throw Error(ErrorCode::OutOfOmega, "base point outside Omega");
}

TwistFrame make_frame(const ClusterDiffeo& cluster, const GridDesc& fiber_grid) {
  if (fiber_grid.dim() != cluster.fiber_dim())
    throw Error(ErrorCode::InvalidArgument, "fiber grid dimension must equal n_fibers * base dimension");
  const auto& b = cluster.diffeo().bump();
  const int d = cluster.base_dim();
  for (int ax = 0; ax < fiber_grid.dim(); ++ax) {
    double c = b.center()[ax % d];
    double lo = fiber_grid.origin[ax], hi = fiber_grid.coord(ax, fiber_grid.shape[ax] - 1);
    if (lo > c - b.outer_radius() || hi < c + b.outer_radius())
      throw Error(ErrorCode::InvalidArgument, "fiber grid does not cover supp tau");
  }
  return TwistFrame{cluster, fiber_grid};
}

GridFunction apply_U(const TwistFrame& frame, const Point& x, const GridFunction& theta, bool inverse) {
  frame.require_in_omega(x);
  if (!theta.grid.same_as(frame.fiber_grid)) throw Error(ErrorCode::InvalidArgument, "theta not on the fiber grid");
  const auto& diffeo = frame.cluster.diffeo();
  const auto& bump = diffeo.bump();
  const int d = frame.base_dim(), nd = frame.fiber_dim(), n = nd / d;
  const Point u = x - frame.base_point();
  GridFunction out(theta.grid);
  std::vector<int> idx(nd);
  std::vector<double> y(nd), z(nd);
  double grad[3];
  for (std::size_t k = 0; k < out.size(); ++k) {
    theta.grid.unflat(k, idx.data());
    for (int a = 0; a < nd; ++a) y[a] = theta.grid.coord(a, idx[a]);
    double det = 1.0;
    if (!inverse) {
      frame.cluster.F(x.data(), y.data(), z.data());
      for (int j = 0; j < n; ++j) {
        bump.eval(y.data() + j * d, grad);
        double dl = 1.0;
        for (int l = 0; l < d; ++l) dl += grad[l] * u[l];
        det *= dl;
      }
    } else {
      frame.cluster.G(x.data(), y.data(), z.data());
      for (int j = 0; j < n; ++j) {
        bump.eval(z.data() + j * d, grad);
        double dl = 1.0;
        for (int l = 0; l < d; ++l) dl += grad[l] * u[l];
        det /= dl;
      }
    }
    out[k] = std::sqrt(std::abs(det)) * cubic_interpolate(theta, z.data());
  }
  return out;
}

PointFactors jacobian_factors_at(const TwistFrame& frame, const Point& x, const double* y) {
  const int d = frame.base_dim(), nd = frame.fiber_dim(), n = nd / d;
  const auto& bump = frame.bump();
  const Eigen::VectorXd u = x - frame.base_point();
  PointFactors pf;
  pf.J1 = Eigen::MatrixXd::Zero(d, nd);
  pf.J3 = Eigen::MatrixXd::Zero(nd, nd);
  pf.J2 = Eigen::VectorXd::Zero(d);
  pf.J4 = Eigen::VectorXd::Zero(nd);
  Eigen::VectorXd g(d);
  Eigen::MatrixXd H(d, d);
  for (int j = 0; j < n; ++j) {
    double tau = bump.eval(y + j * d, g.data(), H.data());
    double delta = 1.0 + g.dot(u);
    Eigen::MatrixXd DinvT = Eigen::MatrixXd::Identity(d, d) - g * u.transpose() / delta;
    Eigen::VectorXd Hu = DinvT * (H * u) / delta;
    pf.J1.block(0, j * d, d, d) = -tau * DinvT;
    pf.J3.block(j * d, j * d, d, d) = DinvT;
    pf.J4.segment(j * d, d) = -0.5 * Hu;
    pf.J2 += -0.5 * (g / delta - tau * Hu);
  }
  return pf;
}

JacobianFactors jacobian_factors(const TwistFrame& frame, const Point& x) {
  frame.require_in_omega(x);
  JacobianFactors jf;
  jf.grid = frame.fiber_grid;
  jf.d = frame.base_dim();
  jf.nd = frame.fiber_dim();
  const std::size_t N = jf.grid.size();
  const int d = jf.d, nd = jf.nd;
  jf.J1.resize(N * d * nd);
  jf.J2.resize(N * d);
  jf.J3.resize(N * nd * nd);
  jf.J4.resize(N * nd);
  std::vector<int> idx(nd);
  std::vector<double> y(nd);
  for (std::size_t k = 0; k < N; ++k) {
    jf.grid.unflat(k, idx.data());
    for (int a = 0; a < nd; ++a) y[a] = jf.grid.coord(a, idx[a]);
    PointFactors pf = jacobian_factors_at(frame, x, y.data());
    for (int i = 0; i < d; ++i)
      for (int m = 0; m < nd; ++m) jf.J1[k * d * nd + i * nd + m] = pf.J1(i, m);
    for (int i = 0; i < d; ++i) jf.J2[k * d + i] = pf.J2[i];
    for (int l = 0; l < nd; ++l)
      for (int m = 0; m < nd; ++m) jf.J3[k * nd * nd + l * nd + m] = pf.J3(l, m);
    for (int l = 0; l < nd; ++l) jf.J4[k * nd + l] = pf.J4[l];
  }
  return jf;
}

std::string to_string(TermFamily f) {
  switch (f) {
    case TermFamily::FiberNucleus: return "fiber_nucleus";
    case TermFamily::BaseFiber: return "base_fiber";
    case TermFamily::FiberFiber: return "fiber_fiber";
  }
  return "unknown";
}

GridFunction TwistedPotential::total() const {
  if (terms.empty()) return GridFunction();
  GridFunction t(terms.front().values.grid);
  for (const auto& term : terms)
    for (std::size_t k = 0; k < t.size(); ++k) t[k] += term.values[k];
  return t;
}

namespace {

double inv_power(double dist, double a) {
  if (dist == 0.0) throw Error(ErrorCode::SingularGridPoint, "grid node on a singular set");
  return std::pow(dist, -a);
}

}  // namespace

TwistedPotential twist_potential(const TwistFrame& frame, const MolecularSystem& system, const Point& x) {
  frame.require_in_omega(x);
  if (system.dim() != frame.base_dim()) throw Error(ErrorCode::InvalidArgument, "system dimension mismatch");
  const int d = frame.base_dim(), nd = frame.fiber_dim(), n = nd / d;
  const GridDesc& grid = frame.fiber_grid;
  TwistedPotential tp;
  tp.x = x;
  for (std::size_t k = 0; k < system.nuclei.size(); ++k)
    for (int j = 0; j < n; ++j) tp.terms.push_back({TermFamily::FiberNucleus, j, static_cast<int>(k), GridFunction(grid)});
  for (int j = 0; j < n; ++j) tp.terms.push_back({TermFamily::BaseFiber, j, 0, GridFunction(grid)});
  for (int j = 0; j < n; ++j)
    for (int l = j + 1; l < n; ++l) tp.terms.push_back({TermFamily::FiberFiber, j, l, GridFunction(grid)});

  std::vector<int> idx(nd);
  std::vector<double> y(nd), z(nd);
  auto dist = [d](const double* p, const double* q) {
    double s = 0.0;
    for (int l = 0; l < d; ++l) s += (p[l] - q[l]) * (p[l] - q[l]);
    return std::sqrt(s);
  };
  for (std::size_t node = 0; node < grid.size(); ++node) {
    grid.unflat(node, idx.data());
    for (int a = 0; a < nd; ++a) y[a] = grid.coord(a, idx[a]);
    frame.cluster.F(x.data(), y.data(), z.data());
    for (auto& term : tp.terms) {
      const double* zj = z.data() + term.i * d;
      double v = 0.0;
      switch (term.family) {
        case TermFamily::FiberNucleus: {
          const auto& nuc = system.nuclei[term.k];
          v = -nuc.Z * inv_power(dist(zj, nuc.R.data()), system.a);
          break;
        }
        case TermFamily::BaseFiber:
          v = system.ee_coupling * inv_power(dist(zj, x.data()), system.a);
          break;
        case TermFamily::FiberFiber:
          v = system.ee_coupling * inv_power(dist(zj, z.data() + term.k * d), system.a);
          break;
      }
      term.values[node] = v;
    }
  }
  return tp;
}

namespace {

Jet inv_power_jet(const std::vector<Jet>& diff, double a) {
  Jet r2 = diff[0] * diff[0];
  for (std::size_t l = 1; l < diff.size(); ++l) r2 += diff[l] * diff[l];
  if (r2.value() == 0.0) throw Error(ErrorCode::SingularPoint, "evaluation on the singular set");
  return pow(r2, -0.5 * a);
}

}  // namespace

Jet twisted_term_jet(const TwistFrame& frame, const MolecularSystem& system, TermFamily family, const Point& x,
                     const double* y, int order) {
  const int d = frame.base_dim(), n = frame.fiber_dim() / d;
  const Point& x0 = frame.base_point();
  // F_j(x, y) = y_j + tau(y_j)(x - x0) is affine in x.
  std::vector<double> taus(n);
  for (int j = 0; j < n; ++j) taus[j] = frame.bump().eval(y + j * d);
  std::vector<Jet> xv(d);
  for (int l = 0; l < d; ++l) xv[l] = Jet::variable(d, order, l, x[l]);
  auto F = [&](int j, int l) { return taus[j] * (xv[l] - x0[l]) + y[j * d + l]; };
  Jet total(d, order, 0.0);
  std::vector<Jet> diff(d);
  switch (family) {
    case TermFamily::FiberNucleus:
      for (const auto& nuc : system.nuclei)
        for (int j = 0; j < n; ++j) {
          for (int l = 0; l < d; ++l) diff[l] = F(j, l) - nuc.R[l];
          total -= nuc.Z * inv_power_jet(diff, system.a);
        }
      break;
    case TermFamily::BaseFiber:
      for (int j = 0; j < n; ++j) {
        for (int l = 0; l < d; ++l) diff[l] = xv[l] - F(j, l);
        total += system.ee_coupling * inv_power_jet(diff, system.a);
      }
      break;
    case TermFamily::FiberFiber:
      for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          for (int l = 0; l < d; ++l) diff[l] = F(j, l) - F(k, l);
          total += system.ee_coupling * inv_power_jet(diff, system.a);
        }
      break;
  }
  return total;
}

Jet twisted_potential_jet(const TwistFrame& frame, const MolecularSystem& system, const Point& x, const double* y,
                          int order) {
  Jet t = twisted_term_jet(frame, system, TermFamily::FiberNucleus, x, y, order);
  t += twisted_term_jet(frame, system, TermFamily::BaseFiber, x, y, order);
  t += twisted_term_jet(frame, system, TermFamily::FiberFiber, x, y, order);
  return t;
}

}  // namespace twistreg
