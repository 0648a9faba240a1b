#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "twistreg/errors.hpp"
#include "twistreg/twist_transport.hpp"

using namespace twistreg;
using Catch::Approx;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<int>(v.size()));
  int i = 0;
  for (double a : v) p[i++] = a;
  return p;
}

// Planar frame: tau on the annulus 0.5..2.5 around the origin, one fiber electron.
TwistFrame planar_frame(double h) {
  BumpFunction b = make_bump(pt({0, 0}), 0.5, 2.5, {});
  Diffeomorphism d = make_diffeomorphism(b, pt({0, 0}));
  int n = static_cast<int>(std::lround(7.0 / h)) + 1;
  return make_frame(ClusterDiffeo(d, 1), GridDesc({n, n}, {h, h}, {-3.5, -3.5}));
}

double gauss2(double y0, double y1) { return std::exp(-((y0 - 0.7) * (y0 - 0.7) + (y1 + 0.4) * (y1 + 0.4)) / 0.8); }

GridFunction sample(const GridDesc& g) {
  GridFunction f(g);
  int idx[2];
  for (std::size_t k = 0; k < f.size(); ++k) {
    g.unflat(k, idx);
    f[k] = gauss2(g.coord(0, idx[0]), g.coord(1, idx[1]));
  }
  return f;
}

}  // namespace

TEST_CASE("identity at the base point") {
  TwistFrame fr = planar_frame(0.1);
  GridFunction th = sample(fr.fiber_grid);
  GridFunction out = apply_U(fr, fr.base_point(), th);
  REQUIRE(out.values == th.values);
  REQUIRE(apply_U(fr, fr.base_point(), th, true).values == th.values);
}

TEST_CASE("out of Omega is rejected") {
  TwistFrame fr = planar_frame(0.1);
  GridFunction th = sample(fr.fiber_grid);
  try {
    apply_U(fr, pt({0.6, 0.0}), th);
    FAIL("expected OutOfOmega");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::OutOfOmega);
  }
}

TEST_CASE("pointwise formula at random nodes") {
  TwistFrame fr = planar_frame(0.025);
  const double rho = fr.cluster.diffeo().omega_radius();
  Point x = pt({0.5 * rho / std::sqrt(2.0), 0.5 * rho / std::sqrt(2.0)});
  GridFunction th = sample(fr.fiber_grid);
  GridFunction out = apply_U(fr, x, th);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> I(0, fr.fiber_grid.shape[0] - 1);
  for (int r = 0; r < 10; ++r) {
    int idx[2] = {I(rng), I(rng)};
    double y[2] = {fr.fiber_grid.coord(0, idx[0]), fr.fiber_grid.coord(1, idx[1])};
    double z[2], g[2];
    fr.cluster.F(x.data(), y, z);
    fr.bump().eval(y, g);
    double det = 1.0 + g[0] * (x[0]) + g[1] * (x[1]);
    double oracle = std::sqrt(det) * gauss2(z[0], z[1]);
    REQUIRE(out[fr.fiber_grid.flat(idx)] == Approx(oracle).margin(2e-5));
  }
}

TEST_CASE("norm drift and round trip shrink under refinement") {
  std::vector<double> drift, trip;
  for (double h : {0.1, 0.05, 0.025}) {
    TwistFrame fr = planar_frame(h);
    Point x = pt({0.3, -0.25});
    GridFunction th = sample(fr.fiber_grid);
    GridFunction out = apply_U(fr, x, th);
    drift.push_back(std::abs(out.l2_norm() - th.l2_norm()) / th.l2_norm());
    GridFunction back = apply_U(fr, x, out, true);
    double e = 0.0;
    for (std::size_t k = 0; k < th.size(); ++k) e += (back[k] - th[k]) * (back[k] - th[k]);
    trip.push_back(std::sqrt(e * th.grid.cell_volume()) / th.l2_norm());
  }
  REQUIRE(drift[0] < 1e-3);
  REQUIRE(drift[1] < drift[0] / 3.0);
  REQUIRE(drift[2] < drift[1] / 3.0);
  REQUIRE(trip[1] < trip[0] / 6.0);
  REQUIRE(trip[2] < trip[1] / 6.0);
}

TEST_CASE("J3 is the identity at x0 and factors live in supp tau") {
  TwistFrame fr = planar_frame(0.1);
  auto jf0 = jacobian_factors(fr, fr.base_point());
  for (std::size_t k = 0; k < jf0.grid.size(); ++k) {
    REQUIRE((jf0.j3(k) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    REQUIRE(jf0.j4(k).norm() == 0.0);
  }
  Point x = pt({0.2, 0.3});
  auto jf = jacobian_factors(fr, x);
  int idx[2];
  for (std::size_t k = 0; k < jf.grid.size(); ++k) {
    jf.grid.unflat(k, idx);
    double r = std::hypot(jf.grid.coord(0, idx[0]), jf.grid.coord(1, idx[1]));
    if (r >= 2.5) {
      REQUIRE(jf.j1(k).norm() == 0.0);
      REQUIRE(jf.j2(k).norm() == 0.0);
      REQUIRE(jf.j4(k).norm() == 0.0);
      REQUIRE((jf.j3(k) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    }
  }
}

TEST_CASE("J1 agrees with central differences of G") {
  TwistFrame fr = planar_frame(0.1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> Y(-2.6, 2.6), X(-0.3, 0.3);
  for (int r = 0; r < 20; ++r) {
    Point x = pt({X(rng), X(rng)});
    double y[2] = {Y(rng), Y(rng)}, t[2];
    fr.cluster.F(x.data(), y, t);
    PointFactors pf = jacobian_factors_at(fr, x, y);
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Point xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      double gp[2], gm[2];
      fr.cluster.G(xp.data(), t, gp);
      fr.cluster.G(xm.data(), t, gm);
      for (int l = 0; l < 2; ++l) REQUIRE(pf.J1(i, l) == Approx((gp[l] - gm[l]) / (2 * h)).margin(1e-8));
    }
  }
}

TEST_CASE("conjugated gradients match the factor formulas") {
  // U d U^{-1} v evaluated pointwise: w(x,t) = |det d_yF(x, G)|^{-1/2} v(x, G(x,t)).
  TwistFrame fr = planar_frame(0.1);
  auto v = [](const Point& x, const double* y) {
    return std::exp(-0.3 * (y[0] * y[0] + y[1] * y[1])) * (1.0 + 0.5 * x[0] - 0.2 * x[1] * y[0]);
  };
  auto dv = [](const Point& x, const double* y, int var) {
    double e = std::exp(-0.3 * (y[0] * y[0] + y[1] * y[1]));
    double p = 1.0 + 0.5 * x[0] - 0.2 * x[1] * y[0];
    switch (var) {
      case 0: return 0.5 * e;
      case 1: return -0.2 * y[0] * e;
      case 2: return -0.6 * y[0] * e * p - 0.2 * x[1] * e;
      default: return -0.6 * y[1] * e * p;
    }
  };
  auto det = [&](const Point& x, const double* y) {
    double g[2];
    fr.bump().eval(y, g);
    return 1.0 + g[0] * x[0] + g[1] * x[1];
  };
  auto w = [&](const Point& x, const double* t) {
    double s[2];
    fr.cluster.G(x.data(), t, s);
    return v(x, s) / std::sqrt(det(x, s));
  };
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> Y(-2.6, 2.6), X(-0.3, 0.3);
  const double h = 1e-5;
  for (int r = 0; r < 20; ++r) {
    Point x = pt({X(rng), X(rng)});
    double y[2] = {Y(rng), Y(rng)}, t[2];
    fr.cluster.F(x.data(), y, t);
    double sq = std::sqrt(det(x, y));
    PointFactors pf = jacobian_factors_at(fr, x, y);
    for (int i = 0; i < 2; ++i) {
      Point xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      double lhs = sq * (w(xp, t) - w(xm, t)) / (2 * h);
      double rhs = dv(x, y, i) + pf.J1(i, 0) * dv(x, y, 2) + pf.J1(i, 1) * dv(x, y, 3) + pf.J2[i] * v(x, y);
      REQUIRE(lhs == Approx(rhs).margin(1e-8));
    }
    for (int m = 0; m < 2; ++m) {
      double tp[2] = {t[0], t[1]}, tm[2] = {t[0], t[1]};
      tp[m] += h;
      tm[m] -= h;
      double lhs = sq * (w(x, tp) - w(x, tm)) / (2 * h);
      double rhs = pf.J3(m, 0) * dv(x, y, 2) + pf.J3(m, 1) * dv(x, y, 3) + pf.J4[m] * v(x, y);
      REQUIRE(lhs == Approx(rhs).margin(1e-8));
    }
  }
}

TEST_CASE("twisted potential") {
  BumpFunction b = make_bump(pt({3.0}), 0.5, 2.5, {pt({0.0})});
  Diffeomorphism d = make_diffeomorphism(b, pt({3.0}));
  const double h = 0.05;
  TwistFrame fr = make_frame(ClusterDiffeo(d, 1), GridDesc({150}, {h}, {3.0 + 0.5 * h - 80 * h}));
  MolecularSystem sys;
  sys.N = 2;
  sys.a = 0.4;
  sys.nuclei.push_back({pt({0.0}), 1.0});

  SECTION("reduces to the untwisted interaction at x0") {
    auto tp = twist_potential(fr, sys, fr.base_point());
    REQUIRE(tp.terms.size() == 2);
    for (int j = 0; j < 150; ++j) {
      double y = fr.fiber_grid.coord(0, j);
      REQUIRE(tp.terms[0].values[j] == Approx(-std::pow(std::abs(y), -0.4)).epsilon(1e-14));
      REQUIRE(tp.terms[1].values[j] == Approx(std::pow(std::abs(y - 3.0), -0.4)).epsilon(1e-14));
    }
  }
  SECTION("singular set is x-independent") {
    Point x = pt({3.3});
    double y = 3.0;
    double z[1];
    fr.cluster.F(x.data(), &y, z);
    REQUIRE(z[0] == Approx(x[0]).epsilon(1e-15));
  }
  SECTION("node on the singular set is rejected") {
    TwistFrame bad = make_frame(ClusterDiffeo(d, 1), GridDesc({151}, {h}, {3.0 - 75 * h}));
    REQUIRE_THROWS_AS(twist_potential(bad, sys, pt({3.1})), Error);
  }
  SECTION("x-jets match finite differences") {
    double y = 2.2;
    Point x = pt({3.1});
    Jet j = twisted_potential_jet(fr, sys, x, &y, 3);
    auto W = [&](double xv) { return twisted_potential_jet(fr, sys, pt({xv}), &y, 0).value(); };
    const double e = 1e-4;
    REQUIRE(j.derivative(1) == Approx((W(3.1 + e) - W(3.1 - e)) / (2 * e)).epsilon(1e-7));
    REQUIRE(j.derivative(2) == Approx((W(3.1 + e) - 2 * W(3.1) + W(3.1 - e)) / (e * e)).epsilon(1e-4));
  }
}
