#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "twistreg/conj_operator.hpp"
#include "twistreg/errors.hpp"

using namespace twistreg;
using Catch::Approx;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) p[i++] = a;
  return p;
}

// Fiber-model geometry: x0 = 3, tau ramp 0.5..2.5, Omega radius 0.5.
TwistFrame line_frame(double h, double ylo = -1.0, double yhi = 6.5) {
  BumpFunction b = make_bump(pt({3.0}), 0.5, 2.5, {pt({0.0})});
  Diffeomorphism d = make_diffeomorphism(b, pt({3.0}));
  int j0 = static_cast<int>(std::ceil((ylo - 3.0) / h - 0.5));
  int j1 = static_cast<int>(std::floor((yhi - 3.0) / h - 0.5));
  return make_frame(ClusterDiffeo(d, 1), GridDesc({j1 - j0 + 1}, {h}, {3.0 + (j0 + 0.5) * h}));
}

GridDesc joint_grid(const TwistFrame& fr, double h, double half_width) {
  int m = static_cast<int>(std::lround(half_width / h));
  return GridDesc({2 * m + 1, fr.fiber_grid.shape[0]}, {h, h}, {3.0 - m * h, fr.fiber_grid.origin[0]});
}

TwistFrame planar_frame() {
  BumpFunction b = make_bump(pt({0, 0}), 0.5, 2.5, {});
  Diffeomorphism d = make_diffeomorphism(b, pt({0, 0}));
  return make_frame(ClusterDiffeo(d, 1), GridDesc({71, 71}, {0.1, 0.1}, {-3.5, -3.5}));
}

}  // namespace

TEST_CASE("coefficient form reproduces the conjugated Laplacian pointwise") {
  // v(x, y) = exp(-|y - c|^2 / 2) (1 + 0.3 x_1 y_1); compare -sum A v_ab + B v_a + C v
  // with U(-Lap)U^{-1} v by nested central differences of w = U^{-1} v.
  for (int d : {1, 2}) {
    TwistFrame fr;
    if (d == 1) fr = line_frame(0.05);
    else fr = planar_frame();
    const int nz = 2 * d;
    Eigen::VectorXd cvec = Eigen::VectorXd::Constant(d, 0.4);
    cvec += fr.base_point();
    auto v = [&](const Eigen::VectorXd& z) {
      Eigen::VectorXd y = z.tail(d);
      return std::exp(-0.5 * (y - cvec).squaredNorm()) * (1.0 + 0.3 * z[0] * z[d]);
    };
    auto det = [&](const Point& x, const double* y) {
      Eigen::VectorXd g(d);
      fr.bump().eval(y, g.data());
      return 1.0 + g.dot(x - fr.base_point());
    };
    auto w = [&](const Eigen::VectorXd& z) {
      Point x = z.head(d);
      Eigen::VectorXd t = z.tail(d), s(d);
      fr.cluster.G(x.data(), t.data(), s.data());
      Eigen::VectorXd zs(nz);
      zs << x, s;
      return v(zs) / std::sqrt(det(x, s.data()));
    };
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> Y(-2.4, 2.4), X(-0.3, 0.3);
    for (int r = 0; r < 8; ++r) {
      Point x(d);
      Eigen::VectorXd y(d);
      for (int i = 0; i < d; ++i) {
        x[i] = fr.base_point()[i] + X(rng);
        y[i] = fr.bump().center()[i] + Y(rng);
      }
      Eigen::VectorXd t(d);
      fr.cluster.F(x.data(), y.data(), t.data());
      Eigen::VectorXd zt(nz), zy(nz);
      zt << x, t;
      zy << x, y;
      const double e = 2e-3;
      double lap = 0.0;
      for (int a = 0; a < nz; ++a) {
        Eigen::VectorXd zp = zt, zm = zt;
        zp[a] += e;
        zm[a] -= e;
        lap += (w(zp) - 2 * w(zt) + w(zm)) / (e * e);
      }
      double lhs = -std::sqrt(det(x, y.data())) * lap;

      P0Coefficients c = p0_coefficients(fr, x, y.data());
      const double f = 1e-3;
      double rhs = c.C * v(zy);
      for (int a = 0; a < nz; ++a) {
        Eigen::VectorXd zp = zy, zm = zy;
        zp[a] += f;
        zm[a] -= f;
        rhs += c.B[a] * (v(zp) - v(zm)) / (2 * f);
        for (int b = 0; b < nz; ++b) {
          Eigen::VectorXd zpp = zy, zpm = zy, zmp = zy, zmm = zy;
          zpp[a] += f; zpp[b] += f;
          zpm[a] += f; zpm[b] -= f;
          zmp[a] -= f; zmp[b] += f;
          zmm[a] -= f; zmm[b] -= f;
          rhs -= c.A(a, b) * (v(zpp) - v(zpm) - v(zmp) + v(zmm)) / (4 * f * f);
        }
      }
      REQUIRE(lhs == Approx(rhs).margin(2e-4));
    }
  }
}

TEST_CASE("principal symbol") {
  TwistFrame fr = planar_frame();
  Point x = pt({0.2, -0.1});
  double y[2] = {1.1, 0.8};
  Eigen::VectorXd xi(2), eta(2), zero = Eigen::VectorXd::Zero(2);
  xi << 0.3, -1.2;
  eta << 0.7, 0.4;
  REQUIRE(principal_symbol(fr, x, y, xi, zero) == Approx(xi.squaredNorm()).epsilon(1e-14));
  double p = principal_symbol(fr, x, y, xi, eta);
  REQUIRE(principal_symbol(fr, x, y, 3.0 * xi, 3.0 * eta) == Approx(9.0 * p).epsilon(1e-14));
  Eigen::VectorXd z(4);
  z << xi, eta;
  REQUIRE(z.dot(symbol_matrix(fr, x, y) * z) == Approx(p).epsilon(1e-13));
  P0Coefficients c = p0_coefficients(fr, x, y);
  REQUIRE(z.dot(c.A * z) == Approx(p).epsilon(1e-13));
}

TEST_CASE("second-order part of J2 minus J3^T J3 is compactly supported") {
  TwistFrame fr = planar_frame();
  Point x = pt({0.25, 0.1});
  double y[2] = {2.7, -0.4};
  P0Coefficients c = p0_coefficients(fr, x, y);
  REQUIRE((c.A - Eigen::MatrixXd::Identity(4, 4)).norm() == 0.0);
  REQUIRE(c.B.norm() == 0.0);
  REQUIRE(c.C == 0.0);
}

TEST_CASE("ellipticity margins") {
  TwistFrame fr = planar_frame();
  REQUIRE(window_bound(1) == Approx(0.2754).margin(1e-4));
  std::vector<Point> xs;
  std::vector<Eigen::VectorXd> ys;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> Y(-2.6, 2.6), X(-0.35, 0.35);
  for (int k = 0; k < 12; ++k) xs.push_back(pt({X(rng), X(rng)}));
  for (int k = 0; k < 200; ++k) ys.push_back(pt({Y(rng), Y(rng)}));
  auto rep = ellipticity_margin(fr, xs, ys);
  REQUIRE(rep.margin > 0.0);
  REQUIRE(rep.margin >= rep.window_bound);

  // At x0 inside the plateau the symbol is |xi - eta|^2 + |eta|^2.
  auto at0 = ellipticity_margin(fr, {fr.base_point()}, {pt({0.1, 0.1})});
  REQUIRE(at0.margin == Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-12));
  // Off supp tau, and wherever chi vanishes, the symbol is |xi|^2 + |eta|^2.
  auto off = ellipticity_margin(fr, {fr.base_point()}, {pt({3.0, 0.0})});
  REQUIRE(off.margin == Approx(1.0).epsilon(1e-14));
  Cutoff chi = make_cutoff(fr, 0.3, 0.45);
  auto flat = ellipticity_margin(fr, {pt({0.47, 0.0})}, ys, &chi);
  REQUIRE(flat.margin == Approx(1.0).epsilon(1e-14));
  auto blended = ellipticity_margin(fr, xs, ys, &chi);
  REQUIRE(blended.margin >= blended.window_bound);
}

TEST_CASE("cutoff validation") {
  TwistFrame fr = planar_frame();
  REQUIRE_THROWS_AS(make_cutoff(fr, 0.3, 0.8), Error);
  auto cs = nested_cutoffs(fr, 3);
  REQUIRE(cs.size() == 3);
  REQUIRE(cs[1].bump.outer_radius() == Approx(cs[0].bump.inner_radius()));
}

TEST_CASE("P0 tilde blends between P0 and the Laplacian") {
  TwistFrame fr = line_frame(0.05);
  GridDesc g = joint_grid(fr, 0.05, 0.5);
  OperatorAssembly p0 = assemble_P0(fr, g);
  Cutoff chi = make_cutoff(fr, 0.2, 0.4);
  OperatorAssembly pt1 = assemble_P0_tilde(fr, g, chi);
  OperatorAssembly pt2 = assemble_P0_tilde(p0, fr, chi);
  const int ny = g.shape[1];
  for (int i = 0; i < g.shape[0]; ++i) {
    double u = std::abs(g.coord(0, i) - 3.0);
    for (int j = 0; j < ny; ++j) {
      std::size_t k = static_cast<std::size_t>(i) * ny + j;
      REQUIRE(pt1.Ayy[k] == Approx(pt2.Ayy[k]).epsilon(1e-14));
      REQUIRE(pt1.C[k] == Approx(pt2.C[k]).margin(1e-12));
      if (u <= 0.2 + 1e-12) {
        REQUIRE(pt1.Axy[k] == p0.Axy[k]);
        REQUIRE(pt1.By[k] == p0.By[k]);
      }
      if (u >= 0.4) {
        REQUIRE(pt1.Axy[k] == 0.0);
        REQUIRE(pt1.Ayy[k] == 1.0);
        REQUIRE(pt1.C[k] == 0.0);
      }
    }
  }
}

TEST_CASE("skew stencil reproduces the shear exactly") {
  const double h = 0.05;
  TwistFrame fr = line_frame(h);
  GridDesc g = joint_grid(fr, h, 0.45);
  OperatorAssembly p0 = assemble_P0(fr, g);
  const int nx = g.shape[0], ny = g.shape[1];
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  GridFunction psi(g);
  for (auto& v : psi.values) v = N(rng);
  GridFunction phi(g), slice(fr.fiber_grid);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) slice[j] = psi[static_cast<std::size_t>(i) * ny + j];
    GridFunction r = apply_U(fr, pt({g.coord(0, i)}), slice);
    for (int j = 0; j < ny; ++j) phi[static_cast<std::size_t>(i) * ny + j] = r[j];
  }
  GridFunction lhs = p0.apply(phi), lap = apply_laplacian(psi);
  int checked = 0;
  for (int i = 1; i < nx - 1; ++i) {
    int shift = static_cast<int>(std::lround((g.coord(0, i) - 3.0) / h));
    for (int j = 1; j < ny - 1; ++j) {
      double y = g.coord(1, j);
      if (std::abs(y - 3.0) > 0.5 - h) continue;
      int jj = j + shift;
      if (jj < 1 || jj >= ny - 1) continue;
      REQUIRE(lhs[static_cast<std::size_t>(i) * ny + j] ==
              Approx(lap[static_cast<std::size_t>(i) * ny + jj]).margin(1e-9));
      ++checked;
    }
  }
  REQUIRE(checked > 0);
}

TEST_CASE("conjugation error is second order") {
  std::vector<double> rel;
  for (double h : {0.05, 0.025, 0.0125}) {
    TwistFrame fr = line_frame(h, 0.0, 6.0);
    GridDesc g = joint_grid(fr, h, 0.5);
    OperatorAssembly p0 = assemble_P0(fr, g);
    GridFunction v(g);
    int idx[2];
    for (std::size_t k = 0; k < v.size(); ++k) {
      g.unflat(k, idx);
      double x = g.coord(0, idx[0]) - 3.0, y = g.coord(1, idx[1]);
      double ex = x * x < 0.16 ? std::exp(-1.0 / (1.0 - x * x / 0.16)) : 0.0;
      v[k] = ex * std::exp(-2.0 * (y - 1.8) * (y - 1.8)) * (1.0 + 0.5 * x);
    }
    rel.push_back(conjugation_error(fr, p0, v).relative());
  }
  REQUIRE(rel[0] < 0.05);
  REQUIRE(std::log2(rel[0] / rel[1]) > 1.7);
  REQUIRE(std::log2(rel[1] / rel[2]) > 1.7);
}
