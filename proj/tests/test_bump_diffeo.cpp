#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "twistreg/bump_diffeo.hpp"
#include "twistreg/errors.hpp"
#include "twistreg/mollifier.hpp"

using namespace twistreg;
using Catch::Approx;

namespace {
Point p3(double a, double b, double c) {
  Point p(3);
  p << a, b, c;
  return p;
}

Diffeomorphism shipped() {
  BumpFunction b = make_bump(p3(0, 0, 0), 1.0, 3.0, {p3(5, 0, 0)});
  return make_diffeomorphism(b, p3(0, 0, 0));
}
}  // namespace

TEST_CASE("bump validation") {
  REQUIRE_THROWS_AS(make_bump(p3(0, 0, 0), 2.0, 1.0, {}), Error);
  try {
    make_bump(p3(0, 0, 0), 1.0, 2.0, {p3(1.5, 0, 0)});
    FAIL("expected NucleusInsideSupport");
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::NucleusInsideSupport);
  }
}

TEST_CASE("bump values") {
  BumpFunction b = make_bump(p3(0, 0, 0), 1.0, 2.0, {});
  REQUIRE(b.value(p3(0, 0, 0)) == 1.0);
  REQUIRE(b.value(p3(4, 0, 0)) == 0.0);
  double mid = b.value(p3(0, 1.5, 0));
  REQUIRE(mid > 0.0);
  REQUIRE(mid < 1.0);
  REQUIRE(mid == Approx(0.5));
  REQUIRE(b.value(p3(0, 1.2, 0)) == Approx(smooth_step(0.8)).epsilon(1e-14));
}

TEST_CASE("gradient and Hessian agree with finite differences") {
  BumpFunction b = make_bump(p3(0.1, -0.2, 0.3), 1.0, 2.0, {});
  Point s = p3(1.0, 0.5, 0.9);
  double g[3], H[9];
  b.eval(s.data(), g, H);
  const double h = 1e-5;
  for (int i = 0; i < 3; ++i) {
    Point sp = s, sm = s;
    sp[i] += h;
    sm[i] -= h;
    REQUIRE(g[i] == Approx((b.value(sp) - b.value(sm)) / (2 * h)).epsilon(1e-7));
    Point gp = b.gradient(sp), gm = b.gradient(sm);
    for (int j = 0; j < 3; ++j) REQUIRE(H[i * 3 + j] == Approx((gp[j] - gm[j]) / (2 * h)).epsilon(1e-6).margin(1e-9));
  }
}

TEST_CASE("jet evaluation agrees with eval") {
  BumpFunction b = make_bump(p3(0, 0, 0), 1.0, 2.0, {});
  std::vector<Jet> s = {Jet::variable(3, 4, 0, 0.9), Jet::variable(3, 4, 1, 0.8), Jet::variable(3, 4, 2, 0.2)};
  Jet t = b.value(s);
  double g[3];
  double v = b.eval(p3(0.9, 0.8, 0.2).data(), g);
  REQUIRE(t.value() == Approx(v).epsilon(1e-14));
  REQUIRE(t.derivative({1, 0, 0}) == Approx(g[0]).epsilon(1e-12));
  REQUIRE(t.derivative({0, 1, 0}) == Approx(g[1]).epsilon(1e-12));
}

TEST_CASE("omega radius for the unit ramp") {
  BumpFunction b = make_bump(p3(0, 0, 0), 1.0, 2.0, {});
  auto o = max_omega_radius(b);
  REQUIRE(o.sup_grad_profile == Approx(2.0).epsilon(1e-10));
  REQUIRE(o.sup_grad_sampled <= o.sup_grad_profile * (1 + 1e-12));
  REQUIRE(o.sup_grad_sampled == Approx(2.0).epsilon(1e-6));
  REQUIRE(o.radius == Approx(0.25).epsilon(1e-10));
}

TEST_CASE("f identities") {
  Diffeomorphism d = shipped();
  Point x = p3(0.2, -0.1, 0.3);
  REQUIRE((d.f(x, d.base_point()) - x).norm() == 0.0);
  Point far = p3(3.5, 0, 0);
  REQUIRE((d.f(x, far) - far).norm() == 0.0);
  Point s = p3(1.7, 0.4, -0.2);
  REQUIRE((d.f(d.base_point(), s) - s).norm() == 0.0);
}

TEST_CASE("g identities and round trips") {
  Diffeomorphism d = shipped();
  Point x = p3(0.3, 0.2, -0.1);
  REQUIRE((d.g(x, x) - d.base_point()).norm() < 1e-12);
  Point far = p3(0, 0, 4);
  REQUIRE((d.g(x, far) - far).norm() == 0.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-3.5, 3.5), X(-0.28, 0.28);
  for (int k = 0; k < 200; ++k) {
    Point xs = p3(X(rng), X(rng), X(rng));
    Point t = p3(U(rng), U(rng), U(rng));
    auto r = d.invert_g(xs, t);
    REQUIRE((d.f(xs, r.s) - t).norm() <= 1e-10);
    REQUIRE(r.max_contraction <= 0.5);
    REQUIRE((d.g(xs, d.f(xs, t)) - t).norm() <= 1e-10);
  }
}

TEST_CASE("Jacobian closed form, inverse and Neumann series") {
  Diffeomorphism d = shipped();
  Point x = p3(0.3, -0.2, 0.25), s = p3(1.4, 1.1, -0.6);
  Eigen::MatrixXd J = d.ds_f(x, s);
  const double h = 1e-5;
  for (int j = 0; j < 3; ++j) {
    Point sp = s, sm = s;
    sp[j] += h;
    sm[j] -= h;
    Point col = (d.f(x, sp) - d.f(x, sm)) / (2 * h);
    for (int i = 0; i < 3; ++i) REQUIRE(J(i, j) == Approx(col[i]).margin(1e-8));
  }
  REQUIRE((J - Eigen::MatrixXd::Identity(3, 3)).norm() <= 0.5);
  Eigen::MatrixXd Ji = d.inverse_jacobian(x, s);
  REQUIRE((Ji * J - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-14);
  REQUIRE((d.inverse_jacobian_neumann(x, s, 60) - Ji).norm() < 1e-13);
}

TEST_CASE("out of Omega fails to converge") {
  BumpFunction b = make_bump(p3(0, 0, 0), 1.0, 2.0, {});
  Diffeomorphism d(b, p3(0, 0, 0), 0.25);
  // Far outside Omega the map is not injective and the iteration cycles.
  REQUIRE_THROWS_AS(d.g(p3(3, 0, 0), p3(1.5, 0, 0)), Error);
}

TEST_CASE("Lipschitz constant of the shipped frame") {
  Diffeomorphism d = shipped();
  ClusterDiffeo c(d, 2);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-3.2, 3.2), X(-0.28, 0.28);
  std::vector<Point> xs = {d.base_point()};
  for (int k = 0; k < 6; ++k) xs.push_back(p3(X(rng), X(rng), X(rng)));
  std::vector<Eigen::VectorXd> ys;
  for (int k = 0; k < 60; ++k) {
    Eigen::VectorXd y(6);
    for (int i = 0; i < 6; ++i) y[i] = U(rng);
    ys.push_back(y);
  }
  auto at_x0 = lipschitz_constants(c, {d.base_point()}, ys);
  REQUIRE(at_x0.forward_max == Approx(1.0).epsilon(1e-12));
  REQUIRE(at_x0.backward_max == Approx(1.0).epsilon(1e-12));
  auto rep = lipschitz_constants(c, xs, ys);
  REQUIRE(std::isfinite(rep.C0));
  REQUIRE(rep.C0 <= 2.0);
  REQUIRE(rep.forward_max <= 1.5 + 1e-12);
  REQUIRE(rep.backward_max <= 2.0 + 1e-12);
}
