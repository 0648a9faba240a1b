#include "twistreg/conj_operator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "twistreg/errors.hpp"

namespace twistreg {

P0CoefficientJets p0_coefficient_jets(const TwistFrame& frame, const Point& x, const double* y, int order) {
  const int d = frame.base_dim(), nd = frame.fiber_dim(), n = nd / d, nz = d + nd;
  const int K = order;
  const Point& x0 = frame.base_point();
  // tau needs three more orders: a, b, c, e involve grad tau and its Hessian,
  // and B_y, C differentiate them once more.
  const int top = K + 3;
  std::vector<Jet> u(d);
  for (int i = 0; i < d; ++i) u[i] = Jet::variable(nz, K + 1, i, x[i]) - x0[i];

  std::vector<Jet> a(d * nd, Jet(nz, K + 1, 0.0)), c(nd * nd, Jet(nz, K + 1, 0.0));
  std::vector<Jet> b(d, Jet(nz, K + 1, 0.0)), e(nd, Jet(nz, K + 1, 0.0));
  for (int j = 0; j < n; ++j) {
    std::vector<Jet> yj(d);
    for (int l = 0; l < d; ++l) yj[l] = Jet::variable(nz, top, d + j * d + l, y[j * d + l]);
    Jet tau_full = frame.bump().value(yj);
    std::vector<Jet> g(d), H(d * d);
    for (int l = 0; l < d; ++l) {
      Jet gl = tau_full.partial(d + j * d + l);
      for (int m = 0; m < d; ++m) H[l * d + m] = gl.partial(d + j * d + m).truncate(K + 1);
      g[l] = gl.truncate(K + 1);
    }
    Jet tau = tau_full.truncate(K + 1);
    Jet delta = 1.0 + g[0] * u[0];
    for (int l = 1; l < d; ++l) delta += g[l] * u[l];
    Jet inv_delta = reciprocal(delta);
    // D^{-T} = I - grad tau u^T / delta
    std::vector<Jet> DinvT(d * d);
    for (int l = 0; l < d; ++l)
      for (int m = 0; m < d; ++m) DinvT[l * d + m] = (l == m ? 1.0 : 0.0) - g[l] * u[m] * inv_delta;
    std::vector<Jet> Hu(d, Jet(nz, K + 1, 0.0));
    for (int l = 0; l < d; ++l)
      for (int m = 0; m < d; ++m) Hu[l] += H[l * d + m] * u[m];
    std::vector<Jet> w(d, Jet(nz, K + 1, 0.0));
    for (int l = 0; l < d; ++l) {
      for (int m = 0; m < d; ++m) w[l] += DinvT[l * d + m] * Hu[m];
      w[l] *= inv_delta;
    }
    for (int i = 0; i < d; ++i)
      for (int l = 0; l < d; ++l) a[i * nd + j * d + l] = -1.0 * tau * DinvT[i * d + l];
    for (int l = 0; l < d; ++l)
      for (int m = 0; m < d; ++m) c[(j * d + l) * nd + j * d + m] = DinvT[l * d + m];
    for (int l = 0; l < d; ++l) e[j * d + l] = -0.5 * w[l];
    for (int i = 0; i < d; ++i) b[i] += -0.5 * (g[i] * inv_delta - tau * w[i]);
  }

  auto tr = [K](const Jet& j) { return j.truncate(K); };
  auto dx = [](const Jet& j, int i) { return j.partial(i); };
  auto dy = [d](const Jet& j, int l) { return j.partial(d + l); };

  P0CoefficientJets out;
  out.nz = nz;
  out.A.assign(nz * nz, Jet(nz, K, 0.0));
  out.B.assign(nz, Jet(nz, K, 0.0));
  out.C = Jet(nz, K, 0.0);
  for (int i = 0; i < d; ++i) out.A[i * nz + i] = Jet(nz, K, 1.0);
  for (int i = 0; i < d; ++i)
    for (int m = 0; m < nd; ++m) {
      out.A[i * nz + d + m] = tr(a[i * nd + m]);
      out.A[(d + m) * nz + i] = out.A[i * nz + d + m];
    }
  for (int l = 0; l < nd; ++l)
    for (int m = l; m < nd; ++m) {
      Jet s(nz, K + 1, 0.0);
      for (int i = 0; i < d; ++i) s += a[i * nd + l] * a[i * nd + m];
      for (int k = 0; k < nd; ++k) s += c[k * nd + l] * c[k * nd + m];
      out.A[(d + l) * nz + d + m] = tr(s);
      out.A[(d + m) * nz + d + l] = tr(s);
    }
  for (int i = 0; i < d; ++i) out.B[i] = tr(-2.0 * b[i]);
  for (int m = 0; m < nd; ++m) {
    Jet s(nz, K, 0.0);
    for (int i = 0; i < d; ++i) {
      s -= dx(a[i * nd + m], i);
      for (int l = 0; l < nd; ++l) s -= tr(a[i * nd + l]) * dy(a[i * nd + m], l);
      s -= tr(2.0 * b[i] * a[i * nd + m]);
    }
    for (int k = 0; k < nd; ++k) {
      for (int l = 0; l < nd; ++l) s -= tr(c[k * nd + l]) * dy(c[k * nd + m], l);
      s -= tr(2.0 * e[k] * c[k * nd + m]);
    }
    out.B[d + m] = s;
  }
  Jet C(nz, K, 0.0);
  for (int i = 0; i < d; ++i) {
    C -= dx(b[i], i);
    for (int l = 0; l < nd; ++l) C -= tr(a[i * nd + l]) * dy(b[i], l);
    C -= tr(b[i] * b[i]);
  }
  for (int k = 0; k < nd; ++k) {
    for (int l = 0; l < nd; ++l) C -= tr(c[k * nd + l]) * dy(e[k], l);
    C -= tr(e[k] * e[k]);
  }
  out.C = C;
  return out;
}

P0Coefficients p0_coefficients(const TwistFrame& frame, const Point& x, const double* y) {
  P0CoefficientJets j = p0_coefficient_jets(frame, x, y, 0);
  P0Coefficients c;
  c.A.resize(j.nz, j.nz);
  c.B.resize(j.nz);
  for (int r = 0; r < j.nz; ++r) {
    for (int s = 0; s < j.nz; ++s) c.A(r, s) = j.A[r * j.nz + s].value();
    c.B[r] = j.B[r].value();
  }
  c.C = j.C.value();
  return c;
}

P0Coefficients blend(const P0Coefficients& c, int d, double chi) {
  const int nz = static_cast<int>(c.B.size());
  P0Coefficients o = c;
  const double c2 = chi * chi;
  for (int r = 0; r < nz; ++r)
    for (int s = 0; s < nz; ++s) {
      bool rx = r < d, sx = s < d;
      if (rx && sx) continue;
      if (rx != sx) o.A(r, s) = chi * c.A(r, s);
      else o.A(r, s) = r == s ? 1.0 + c2 * (c.A(r, s) - 1.0) : c2 * c.A(r, s);
    }
  for (int r = 0; r < nz; ++r) o.B[r] = (r < d ? chi : c2) * c.B[r];
  o.C = c2 * c.C;
  return o;
}

Eigen::MatrixXd symbol_matrix(const TwistFrame& frame, const Point& x, const double* y, double chi) {
  const int d = frame.base_dim(), nd = frame.fiber_dim();
  PointFactors pf = jacobian_factors_at(frame, x, y);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d + nd, d + nd);
  M.topLeftCorner(d, d).setIdentity();
  M.topRightCorner(d, nd) = chi * pf.J1;
  M.bottomLeftCorner(nd, d) = chi * pf.J1.transpose();
  M.bottomRightCorner(nd, nd) = chi * chi * (pf.J1.transpose() * pf.J1 + pf.J3.transpose() * pf.J3) +
                                (1.0 - chi * chi) * Eigen::MatrixXd::Identity(nd, nd);
  return M;
}

double principal_symbol(const TwistFrame& frame, const Point& x, const double* y, const Eigen::VectorXd& xi,
                        const Eigen::VectorXd& eta) {
  PointFactors pf = jacobian_factors_at(frame, x, y);
  return (xi + pf.J1 * eta).squaredNorm() + (pf.J3 * eta).squaredNorm();
}

Cutoff make_cutoff(const TwistFrame& frame, double inner_radius, double outer_radius) {
  if (!(inner_radius > 0.0) || !(outer_radius > inner_radius))
    throw Error(ErrorCode::BadCutoff, "cutoff radii must satisfy 0 < inner < outer");
  if (outer_radius > frame.cluster.diffeo().omega_radius() * (1.0 + 1e-12))
    throw Error(ErrorCode::BadCutoff, "cutoff support not contained in Omega");
  return Cutoff{BumpFunction(frame.base_point(), inner_radius, outer_radius)};
}

std::vector<Cutoff> nested_cutoffs(const TwistFrame& frame, int count, double shrink) {
  std::vector<Cutoff> out;
  double outer = frame.cluster.diffeo().omega_radius();
  for (int k = 0; k < count; ++k) {
    out.push_back(make_cutoff(frame, outer * shrink, outer));
    outer *= shrink;
  }
  return out;
}

namespace {

void require_planar(const GridDesc& g) {
  if (g.dim() != 2) throw Error(ErrorCode::InvalidArgument, "operator assembly needs a 2D (x, y) grid");
}

// Visits the stencil of row k: cb(column, weight).
template <class F>
void stencil(const OperatorAssembly& op, std::size_t k, F&& cb) {
  const GridDesc& g = op.grid;
  const int nx = g.shape[0], ny = g.shape[1];
  const double hx = g.spacing[0], hy = g.spacing[1];
  const int i = static_cast<int>(k / ny), j = static_cast<int>(k % ny);
  auto at = [&](int di, int dj, double w) {
    int a = i + di, b = j + dj;
    if (w == 0.0 || a < 0 || a >= nx || b < 0 || b >= ny) return;
    cb(static_cast<std::size_t>(a) * ny + b, w);
  };
  const double axx = op.Axx[k], axy = op.Axy[k], ayy = op.Ayy[k];
  double center = 2.0 * axx / (hx * hx) + 2.0 * ayy / (hy * hy) + op.C[k];
  double wx = -axx / (hx * hx), wy = -ayy / (hy * hy);
  // -2 A_xy d_xy with the skew stencil of matching sign.
  const double m = -2.0 * axy / (2.0 * hx * hy);
  if (axy > 0.0) {
    at(1, 1, m);
    at(-1, -1, m);
    wx -= m;
    wy -= m;
    center += 2.0 * m;
  } else if (axy < 0.0) {
    at(1, -1, -m);
    at(-1, 1, -m);
    wx += m;
    wy += m;
    center -= 2.0 * m;
  }
  const double bx = op.Bx[k] / (2.0 * hx), by = op.By[k] / (2.0 * hy);
  at(1, 0, wx + bx);
  at(-1, 0, wx - bx);
  at(0, 1, wy + by);
  at(0, -1, wy - by);
  at(0, 0, center);
}

void resize(OperatorAssembly& op) {
  const std::size_t N = op.grid.size();
  op.Axx.assign(N, 1.0);
  op.Axy.assign(N, 0.0);
  op.Ayy.assign(N, 1.0);
  op.Bx.assign(N, 0.0);
  op.By.assign(N, 0.0);
  op.C.assign(N, 0.0);
}

void store(OperatorAssembly& op, std::size_t k, const P0Coefficients& c) {
  op.Axx[k] = c.A(0, 0);
  op.Axy[k] = c.A(0, 1);
  op.Ayy[k] = c.A(1, 1);
  op.Bx[k] = c.B[0];
  op.By[k] = c.B[1];
  op.C[k] = c.C;
}

bool in_support(const TwistFrame& frame, double y) {
  const auto& b = frame.bump();
  return std::abs(y - b.center()[0]) < b.outer_radius();
}

void require_model_frame(const TwistFrame& frame) {
  if (frame.base_dim() != 1 || frame.fiber_dim() != 1)
    throw Error(ErrorCode::InvalidArgument, "grid assembly supports base and fiber dimension 1");
}

}  // namespace

GridFunction OperatorAssembly::apply(const GridFunction& v) const {
  if (!v.grid.same_as(grid)) throw Error(ErrorCode::InvalidArgument, "operand not on the assembly grid");
  GridFunction out(grid);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double s = 0.0;
    stencil(*this, k, [&](std::size_t col, double w) { s += w * v[col]; });
    out[k] = s;
  }
  return out;
}

Eigen::SparseMatrix<double> OperatorAssembly::matrix() const {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(grid.size() * 7);
  for (std::size_t k = 0; k < grid.size(); ++k)
    stencil(*this, k, [&](std::size_t col, double w) { t.emplace_back(static_cast<int>(k), static_cast<int>(col), w); });
  Eigen::SparseMatrix<double> M(grid.size(), grid.size());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

void OperatorAssembly::add_potential(const std::vector<double>& V) {
  if (V.size() != C.size()) throw Error(ErrorCode::InvalidArgument, "potential size mismatch");
  for (std::size_t k = 0; k < C.size(); ++k) C[k] += V[k];
}

void OperatorAssembly::write_coefficients_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  os << "x,y,Axx,Axy,Ayy,Bx,By,C\n" << std::setprecision(17);
  int idx[2];
  for (std::size_t k = 0; k < grid.size(); ++k) {
    grid.unflat(k, idx);
    os << grid.coord(0, idx[0]) << ',' << grid.coord(1, idx[1]) << ',' << Axx[k] << ',' << Axy[k] << ',' << Ayy[k]
       << ',' << Bx[k] << ',' << By[k] << ',' << C[k] << '\n';
  }
}

OperatorAssembly assemble_P0(const TwistFrame& frame, const GridDesc& grid) {
  require_planar(grid);
  require_model_frame(frame);
  OperatorAssembly op;
  op.grid = grid;
  resize(op);
  const int nx = grid.shape[0], ny = grid.shape[1];
  for (int i = 0; i < nx; ++i) {
    Point x(1);
    x[0] = grid.coord(0, i);
    frame.require_in_omega(x);
    for (int j = 0; j < ny; ++j) {
      double y = grid.coord(1, j);
      if (!in_support(frame, y)) continue;
      store(op, static_cast<std::size_t>(i) * ny + j, p0_coefficients(frame, x, &y));
    }
  }
  return op;
}

OperatorAssembly assemble_P0_tilde(const TwistFrame& frame, const GridDesc& grid, const Cutoff& chi) {
  require_planar(grid);
  require_model_frame(frame);
  OperatorAssembly op;
  op.grid = grid;
  resize(op);
  const int nx = grid.shape[0], ny = grid.shape[1];
  op.chi.assign(nx, 0.0);
  for (int i = 0; i < nx; ++i) {
    Point x(1);
    x[0] = grid.coord(0, i);
    double c = chi.value(x);
    op.chi[i] = c;
    if (c == 0.0) continue;
    for (int j = 0; j < ny; ++j) {
      double y = grid.coord(1, j);
      if (!in_support(frame, y)) continue;
      store(op, static_cast<std::size_t>(i) * ny + j, blend(p0_coefficients(frame, x, &y), 1, c));
    }
  }
  return op;
}

OperatorAssembly assemble_P0_tilde(const OperatorAssembly& p0, const TwistFrame& frame, const Cutoff& chi) {
  OperatorAssembly op = p0;
  const int nx = p0.grid.shape[0], ny = p0.grid.shape[1];
  op.chi.assign(nx, 0.0);
  for (int i = 0; i < nx; ++i) {
    Point x(1);
    x[0] = p0.grid.coord(0, i);
    double c = chi.value(x);
    op.chi[i] = c;
    for (int j = 0; j < ny; ++j) {
      std::size_t k = static_cast<std::size_t>(i) * ny + j;
      P0Coefficients pc;
      pc.A.resize(2, 2);
      pc.A << p0.Axx[k], p0.Axy[k], p0.Axy[k], p0.Ayy[k];
      pc.B.resize(2);
      pc.B << p0.Bx[k], p0.By[k];
      pc.C = p0.C[k];
      store(op, k, blend(pc, 1, c));
    }
  }
  (void)frame;
  return op;
}

GridFunction apply_laplacian(const GridFunction& v) {
  require_planar(v.grid);
  OperatorAssembly lap;
  lap.grid = v.grid;
  resize(lap);
  return lap.apply(v);
}

double window_bound(int n_fibers) {
  Eigen::Matrix2d T;
  T << 1.0, std::sqrt(static_cast<double>(n_fibers)), 0.0, 1.5;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(T);
  double s = svd.singularValues()[0];
  return 1.0 / (s * s);
}

EllipticityReport ellipticity_margin(const TwistFrame& frame, const std::vector<Point>& x_samples,
                                     const std::vector<Eigen::VectorXd>& y_samples, const Cutoff* chi) {
  EllipticityReport rep;
  rep.margin = std::numeric_limits<double>::infinity();
  rep.window_bound = window_bound(frame.cluster.n_fibers());
  for (const auto& x : x_samples) {
    double c = chi ? chi->value(x) : 1.0;
    if (!chi) frame.require_in_omega(x);
    for (const auto& y : y_samples) {
      Eigen::MatrixXd M = symbol_matrix(frame, x, y.data(), c);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
      double lmin = es.eigenvalues()[0];
      ++rep.samples;
      if (lmin < rep.margin) {
        rep.margin = lmin;
        rep.argmin_x = x;
        rep.argmin_y = y;
      }
    }
  }
  if (!(rep.margin > 0.0)) throw Error(ErrorCode::NotElliptic, "principal symbol not positive on the unit sphere");
  return rep;
}

ConjugationError conjugation_error(const TwistFrame& frame, const OperatorAssembly& p0, const GridFunction& v) {
  const GridDesc& g = p0.grid;
  if (!v.grid.same_as(g)) throw Error(ErrorCode::InvalidArgument, "operand not on the assembly grid");
  const int nx = g.shape[0], ny = g.shape[1];
  if (frame.fiber_grid.shape[0] != ny) throw Error(ErrorCode::InvalidArgument, "fiber grid mismatch");
  auto per_slice = [&](const GridFunction& in, bool inverse) {
    GridFunction out(g);
    GridFunction slice(frame.fiber_grid);
    for (int i = 0; i < nx; ++i) {
      Point x(1);
      x[0] = g.coord(0, i);
      std::copy(in.values.begin() + static_cast<std::ptrdiff_t>(i) * ny,
                in.values.begin() + static_cast<std::ptrdiff_t>(i + 1) * ny, slice.values.begin());
      GridFunction r = apply_U(frame, x, slice, inverse);
      std::copy(r.values.begin(), r.values.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i) * ny);
    }
    return out;
  };
  GridFunction lhs = per_slice(apply_laplacian(per_slice(v, true)), false);
  GridFunction rhs = p0.apply(v);
  for (std::size_t k = 0; k < lhs.size(); ++k) lhs[k] -= rhs[k];
  return {lhs.l2_norm(), v.sobolev_norm(2)};
}

std::vector<double> fiber_model_potential(const TwistFrame& frame, const MolecularSystem& system, const GridDesc& grid,
                                          double E) {
  require_planar(grid);
  const int nx = grid.shape[0], ny = grid.shape[1];
  if (frame.fiber_grid.shape[0] != ny) throw Error(ErrorCode::InvalidArgument, "fiber grid mismatch");
  std::vector<double> V(grid.size(), 0.0);
  for (int i = 0; i < nx; ++i) {
    Point x(1);
    x[0] = grid.coord(0, i);
    if (!frame.cluster.diffeo().in_omega(x)) continue;
    double v0 = system.E0;
    for (const auto& nuc : system.nuclei) v0 -= nuc.Z * std::pow(std::abs(x[0] - nuc.R[0]), -system.a);
    GridFunction W = twist_potential(frame, system, x).total();
    for (int j = 0; j < ny; ++j) V[static_cast<std::size_t>(i) * ny + j] = W[j] + v0 - E;
  }
  return V;
}

}  // namespace twistreg
