#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "twistreg/analyticity.hpp"
#include "twistreg/errors.hpp"

using namespace twistreg;
using Catch::Approx;

namespace {

SampledFunction exp_minus(int dim) {
  SampledFunction f;
  f.dim = dim;
  f.value = [](const double* x) { return std::exp(-x[0]); };
  f.jet = [](const std::vector<Jet>& x) { return exp(-x[0]); };
  return f;
}

// e^{-1/t} for t > 0, 0 otherwise.
SampledFunction flat_exponential() {
  SampledFunction f;
  f.dim = 1;
  f.value = [](const double* t) { return t[0] > 0.0 ? std::exp(-1.0 / t[0]) : 0.0; };
  f.jet = [](const std::vector<Jet>& t) {
    if (t[0].value() <= 0.0) return Jet(t[0].layout_ptr(), 0.0);
    return exp(-reciprocal(t[0]));
  };
  return f;
}

// d^n/dt^n e^{-1/t} = e^{-1/t} P_n(1/t), P_{n+1}(u) = u^2 (P_n(u) - P_n'(u)).
double flat_exponential_derivative(int n, double t) {
  std::vector<double> P = {1.0};
  for (int k = 0; k < n; ++k) {
    std::vector<double> Q(P.size() + 2, 0.0);
    for (std::size_t i = 0; i < P.size(); ++i) {
      Q[i + 2] += P[i];
      if (i > 0) Q[i + 1] -= i * P[i];
    }
    P = Q;
  }
  double u = 1.0 / t, s = 0.0;
  for (std::size_t i = P.size(); i-- > 0;) s = s * u + P[i];
  return std::exp(-u) * s;
}

std::vector<double> synthetic(double C, double s, int N) {
  std::vector<double> M;
  for (int n = 0; n <= N; ++n) M.push_back(std::pow(C, n + 1) * std::pow(std::tgamma(n + 1.0), s));
  return M;
}

}  // namespace

TEST_CASE("constant and zero functions") {
  for (bool exact : {true, false}) {
    DerivativeOptions o;
    o.exact = exact;
    o.step = 0.05;
    DerivativeTable t = derivative_table(constant_function(2, 3.5), ball_set(2, 1.0, 0.25, 1.0), 4, o);
    for (const auto& e : t.entries) {
      if (e.order == 0) REQUIRE(e.sup == Approx(3.5));
      else REQUIRE(e.sup == 0.0);
    }
    Verdict v = classify(t);
    REQUIRE(v.cls == GrowthClass::Analytic);
  }
  DerivativeTable z = derivative_table(constant_function(1, 0.0), segment_set(0, 1, 11, 1.0), 6);
  Verdict v = classify(z);
  REQUIRE(v.cls == GrowthClass::Analytic);
  REQUIRE(v.A == kGrowthFloor);
}

TEST_CASE("order-zero entries are the sup norm") {
  SampledFunction rho = hydrogen_density_function(1.0);
  CompactSet K = shell_set(3, 1.0, 2.0, 100, 3, 1.0);
  DerivativeTable t = derivative_table(rho, K, 3);
  double sup = 0.0;
  for (const auto& p : K.points) sup = std::max(sup, rho.value(p.data()));
  REQUIRE(t.order_max()[0] == Approx(sup).epsilon(1e-15));
  for (const auto& e : t.entries) REQUIRE(e.sup >= 0.0);
}

TEST_CASE("exact jets of the density against closed forms") {
  SampledFunction rho = hydrogen_density_function(1.0);
  const double c = 1.0 / (8.0 * M_PI);
  // Along the x axis only the restriction e^{-x} matters for pure x derivatives.
  CompactSet axis{"point", {{1.5, 0.0, 0.0}}, 1.0};
  DerivativeTable t = derivative_table(rho, axis, 8);
  for (const auto& e : t.entries)
    if (e.alpha[1] == 0 && e.alpha[2] == 0) REQUIRE(e.sup == Approx(c * std::exp(-1.5)).epsilon(1e-12));
  // d_x d_y e^{-r} = e^{-r} x y (1/r^2 + 1/r^3)
  double x = 0.6, y = -0.8, z = 0.5, r = std::sqrt(x * x + y * y + z * z);
  CompactSet pt{"point", {{x, y, z}}, 0.5};
  DerivativeTable u = derivative_table(rho, pt, 2);
  for (const auto& e : u.entries)
    if (e.alpha == MultiIndex{1, 1, 0})
      REQUIRE(e.sup == Approx(c * std::exp(-r) * std::abs(x * y) * (1 / (r * r) + 1 / (r * r * r))).epsilon(1e-12));
  CompactSet origin{"origin", {{0.0, 0.0, 0.0}}, 1.0};
  REQUIRE_THROWS_AS(derivative_table(rho, origin, 2), Error);
}

TEST_CASE("octant reduction reproduces the full-sphere table") {
  SampledFunction rho = hydrogen_density_function(1.0);
  DerivativeTable full = derivative_table(rho, shell_set(3, 1.0, 1.0, 4000, 1, 1.0), 5);
  DerivativeTable oct = derivative_table(rho, octant_shell_set(3, 1.0, 1.0, 4000, 1, 1.0), 5);
  auto a = full.order_max(), b = oct.order_max();
  for (int n = 0; n <= 5; ++n) REQUIRE(b[n] == Approx(a[n]).epsilon(2e-3));
}

TEST_CASE("finite differences against exact derivatives") {
  DerivativeOptions o;
  o.exact = false;
  o.step = 0.1;
  DerivativeTable fd = derivative_table(exp_minus(1), segment_set(0.0, 1.0, 11, 1.0), 4, o);
  REQUIRE(fd.truncation == Truncation::None);
  REQUIRE(fd.steps.size() == 3u);
  for (const auto& e : fd.entries) REQUIRE(e.sup == Approx(1.0).epsilon(1e-6));
  o.step = 0.5;
  REQUIRE_THROWS_AS(derivative_table(exp_minus(1), segment_set(0.0, 1.0, 11, 1.0), 4, o), Error);
}

TEST_CASE("translation invariance and scaling covariance") {
  SampledFunction rho = hydrogen_density_function(1.0);
  const double c[3] = {0.3, -1.1, 2.0};
  SampledFunction shifted = rho;
  shifted.value = [rho, c](const double* x) {
    double y[3] = {x[0] - c[0], x[1] - c[1], x[2] - c[2]};
    return rho.value(y);
  };
  shifted.jet = [rho, c](const std::vector<Jet>& x) { return rho.jet({x[0] - c[0], x[1] - c[1], x[2] - c[2]}); };
  CompactSet K = shell_set(3, 1.0, 2.0, 40, 2, 1.0), Kc = K;
  for (auto& p : Kc.points)
    for (int a = 0; a < 3; ++a) p[a] += c[a];
  DerivativeTable t = derivative_table(rho, K, 6), tc = derivative_table(shifted, Kc, 6);
  for (std::size_t k = 0; k < t.entries.size(); ++k) REQUIRE(tc.entries[k].sup == Approx(t.entries[k].sup).epsilon(1e-10));
  DerivativeOptions o;
  o.exact = false;
  o.step = 0.1;
  DerivativeTable f = derivative_table(rho, K, 3, o), fc = derivative_table(shifted, Kc, 3, o);
  for (std::size_t k = 0; k < f.entries.size(); ++k) REQUIRE(fc.entries[k].sup == Approx(f.entries[k].sup).epsilon(1e-6));

  const double lam = 1.7;
  SampledFunction scaled = exp_minus(1);
  scaled.value = [lam](const double* x) { return std::exp(-lam * x[0]); };
  scaled.jet = [lam](const std::vector<Jet>& x) { return exp(-lam * x[0]); };
  CompactSet S = segment_set(0.0, 1.0, 21, 1.0), S1 = segment_set(0.0, lam, 21, 1.0);
  DerivativeTable a = derivative_table(scaled, S, 10), b = derivative_table(exp_minus(1), S1, 10);
  for (int n = 0; n <= 10; ++n) REQUIRE(a.order_max()[n] == Approx(std::pow(lam, n) * b.order_max()[n]).epsilon(1e-12));
}

TEST_CASE("flat exponential: exact jets against the derivative recurrence") {
  SampledFunction g = flat_exponential();
  for (double t : {0.05, 0.1, 0.3, 0.8})
    for (int n : {1, 2, 5, 10, 16}) {
      CompactSet K{"point", {{t}}, 0.0};
      DerivativeTable tab = derivative_table(g, K, n);
      REQUIRE(tab.order_max()[n] == Approx(std::abs(flat_exponential_derivative(n, t))).epsilon(1e-9));
    }
  DerivativeTable tab = derivative_table(g, segment_set(-0.5, 0.5, 4001, 0.5), 24);
  auto M = tab.order_max();
  // sup |g^(n)| / n! is not bounded by any A^{n+1}: the analytic envelope keeps growing.
  auto env = [&](int n) { return std::pow(M[n] / std::tgamma(n + 1.0), 1.0 / (n + 1)); };
  REQUIRE(env(24) > 1.5 * env(12));
  Verdict v = classify(tab);
  REQUIRE(v.cls == GrowthClass::Gevrey);
  REQUIRE(v.s >= 1.6);
  REQUIRE(v.s <= 2.4);
}

TEST_CASE("shipped bump is Gevrey across its outer endpoint") {
  MollifierCertificate c = certify_mollifier();
  REQUIRE(c.verdict.cls == GrowthClass::Gevrey);
  REQUIRE(c.verdict.s == Approx(2.1109544804642777).epsilon(1e-9));
  REQUIRE(c.verdict.fit_from == 8);
  // Entries vanish outside the support and never exceed the analytic envelope of the interior.
  DerivativeTable outside = derivative_table(bump_function(make_bump(Point::Constant(1, 3.0), 0.5, 2.5, {Point::Zero(1)})),
                                             segment_set(5.6, 6.0, 41, 0.1), 8);
  for (const auto& e : outside.entries) REQUIRE(e.sup == 0.0);
}

TEST_CASE("fit_growth on synthetic tables") {
  for (double A : {0.3, 1.0, 4.2}) {
    GrowthFit f = fit_growth(table_from_orders(synthetic(A, 1.0, 12)), 0);
    REQUIRE(f.A == Approx(A).epsilon(0.01));
    REQUIRE(f.residual < 1e-10);
  }
  GrowthFit g0 = fit_growth(table_from_orders(synthetic(2.0, 2.0, 12)), 0);
  GrowthFit g1 = fit_growth(table_from_orders(synthetic(2.0, 2.0, 12)), 1);
  REQUIRE(g0.residual > kFitRejection);
  REQUIRE(g1.residual > kFitRejection);
  REQUIRE_THROWS_AS(fit_growth(table_from_orders(synthetic(1.0, 1.0, 3)), 0), Error);
}

TEST_CASE("delta = 0 and delta = 1 fits agree up to the factorial equivalence") {
  // alpha! <= |alpha|! <= d^{|alpha|} alpha!, so A_1 / d <= A_0 <= A_1.
  DerivativeTable t = derivative_table(hydrogen_density_function(1.0), shell_set(3, 1.0, 2.0, 200, 3, 1.0), 8);
  GrowthFit f0 = fit_growth(t, 0), f1 = fit_growth(t, 1);
  REQUIRE(f0.A <= f1.A * (1 + 1e-12));
  REQUIRE(f0.A >= f1.A / 3.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.5, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    DerivativeTable r;
    r.dim = 3;
    r.max_order = 7;
    for (int n = 0; n <= 7; ++n)
      for (const auto& a : multi_indices(3, n)) r.entries.push_back({a, n, U(rng) * std::tgamma(n + 1.0)});
    GrowthFit a0 = fit_growth(r, 0), a1 = fit_growth(r, 1);
    REQUIRE(a0.A <= a1.A * (1 + 1e-12));
    REQUIRE(a0.A >= a1.A / 3.0);
  }
}

TEST_CASE("classify on synthetic growth") {
  Verdict a = classify(table_from_orders(synthetic(1.3, 1.0, 16)));
  REQUIRE(a.cls == GrowthClass::Analytic);
  REQUIRE(a.s == Approx(1.0).margin(1e-9));
  REQUIRE(a.A == Approx(1.3).epsilon(1e-9));
  Verdict g = classify(table_from_orders(synthetic(0.7, 2.0, 16)));
  REQUIRE(g.cls == GrowthClass::Gevrey);
  REQUIRE(g.s == Approx(2.0).margin(1e-9));
  REQUIRE(classify(table_from_orders(synthetic(1.0, 4.0, 16))).cls == GrowthClass::SmoothUnclassified);
  // Scale of u does not move s.
  auto M = synthetic(1.3, 1.0, 16);
  for (double& m : M) m *= 1e4;
  REQUIRE(classify(table_from_orders(M)).s == Approx(1.0).margin(1e-9));
  std::string js = a.json();
  for (const char* key : {"\"class\"", "\"A\"", "\"s\"", "\"residual\"", "\"max_order\""})
    REQUIRE(js.find(key) != std::string::npos);
}

TEST_CASE("classify is monotone under growth-increasing enlargement") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto rank = [](GrowthClass c) {
    switch (c) {
      case GrowthClass::Analytic: return 0;
      case GrowthClass::Gevrey: return 1;
      default: return 2;
    }
  };
  for (int trial = 0; trial < 200; ++trial) {
    auto M = synthetic(0.5 + 2.0 * U(rng), 0.8 + 1.6 * U(rng), 16);
    Verdict before = classify(table_from_orders(M));
    // kappa^{n+1} (n!)^t c_n with c_n >= 1 nondecreasing from the fit window on.
    double kappa = 1.0 + U(rng), t = U(rng), step = 1.0 + 3.0 * U(rng);
    int from = static_cast<int>(16 * U(rng));
    std::vector<double> E(M);
    for (int n = 0; n <= 16; ++n)
      E[n] *= std::pow(kappa, n + 1) * std::pow(std::tgamma(n + 1.0), t) * (n >= from ? std::pow(step, n - from) : 1.0);
    Verdict after = classify(table_from_orders(E));
    REQUIRE(after.s >= before.s - 1e-9);
    REQUIRE(rank(after.cls) >= rank(before.cls));
  }
}

TEST_CASE("cusp across the nucleus is non-analytic, noise is not mistaken for it") {
  DerivativeOptions o;
  o.exact = false;
  o.step = 0.1;
  DerivativeTable t = derivative_table(hydrogen_density_function(1.0), ball_set(3, 1.0, 0.25, 1.0), 4, o);
  REQUIRE(t.truncation == Truncation::Divergence);
  REQUIRE(t.truncated_at == 2);
  REQUIRE(classify(t).cls == GrowthClass::NonAnalytic);

  std::mt19937_64 rng(5);
  std::vector<double> noise(1 << 16);
  for (double& v : noise) v = 1e-7 * std::normal_distribution<double>()(rng);
  SampledFunction noisy;
  noisy.dim = 1;
  noisy.value = [&noise](const double* x) {
    std::size_t k = static_cast<std::size_t>(std::llround(x[0] * 4096.0)) & 0xffff;
    return std::exp(-x[0]) + noise[k];
  };
  o.step = 0.05;
  DerivativeTable n = derivative_table(noisy, segment_set(1.0, 2.0, 21, 1.0), 6, o);
  REQUIRE(n.truncation == Truncation::Noise);
  REQUIRE(n.truncated_at >= 2);
  REQUIRE(classify(n).cls != GrowthClass::NonAnalytic);
}

TEST_CASE("hydrogen density certification") {
  HydrogenCertifyOptions o;
  o.max_order = 18;
  HydrogenCertificate c = certify_hydrogen(o);
  REQUIRE(c.solve.energy_error < 1e-2);
  REQUIRE(c.shell_verdict.cls == GrowthClass::Analytic);
  REQUIRE(c.shell_verdict.s == Approx(1.1167460443579129).epsilon(1e-8));
  REQUIRE(c.radial_crosscheck < 1e-3);
  REQUIRE(c.nucleus_verdict.cls == GrowthClass::NonAnalytic);
}

TEST_CASE("C_a by enumeration") {
  for (int d : {1, 2, 3}) {
    int count = 0;
    std::vector<int> beta(d, 0);
    // beta in {0,1,2}^d suffices since r + |beta| < 2.
    for (int r = 0; r <= 2; ++r)
      for (int code = 0; code < static_cast<int>(std::pow(3, d)); ++code) {
        int c = code, size = 0;
        for (int a = 0; a < d; ++a) {
          size += c % 3;
          c /= 3;
        }
        if (r + size < 2) ++count;
      }
    REQUIRE(induction_Ca(d) == 1 + count);
  }
  REQUIRE(induction_Ca(3) == 6);
  REQUIRE(induction_Ca(1) == 4);
}

TEST_CASE("Fornberg weights") {
  auto w = fd_weights({-1, 0, 1}, 2);
  REQUIRE(w[0] == Approx(1.0));
  REQUIRE(w[1] == Approx(-2.0));
  REQUIRE(w[2] == Approx(1.0));
  auto v = fd_weights({-2, -1, 0, 1, 2}, 1);
  REQUIRE(v[0] == Approx(1.0 / 12));
  REQUIRE(v[1] == Approx(-2.0 / 3));
  REQUIRE(v[2] == Approx(0.0).margin(1e-15));
  REQUIRE(v[3] == Approx(2.0 / 3));
  REQUIRE(v[4] == Approx(-1.0 / 12));
}

TEST_CASE("nested norms of e^x g(y)") {
  // D_x^n (e^x g) = e^x g, so every order reproduces the order-zero norm up to O(h^2).
  for (double h : {0.05, 0.025}) {
    int nx = static_cast<int>(std::lround(1.0 / h)) + 1, ny = static_cast<int>(std::lround(4.0 / h)) + 1;
    GridDesc g({nx, ny}, {h, h}, {2.5, -2.0});
    GridFunction phi(g);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        double y = g.coord(1, j);
        phi[static_cast<std::size_t>(i) * ny + j] = std::exp(g.coord(0, i)) * std::exp(-2.0 * y * y);
      }
    NestedNorms nn = nested_norms(phi, 3.0, 0.3, 6);
    double base = nested_norm(nn, 3.0, 0.3, 0.0, 0, 0);
    for (int n = 1; n <= 6; ++n) REQUIRE(nested_norm(nn, 3.0, 0.3, 0.0, n, 0) == Approx(base).epsilon(40 * h * h));
    // Monotone under shrinking.
    for (int r = 0; r <= 2; ++r)
      for (double e = 0.0; e < 0.3; e += 0.02)
        REQUIRE(nested_norm(nn, 3.0, 0.3, e + 0.02, 2, r) <= nested_norm(nn, 3.0, 0.3, e, 2, r));
  }
}

TEST_CASE("induction ledger on the fiber model") {
  FiberModel m;
  FiberSolution s1 = solve_fiber_model(m, 0.05), s2 = solve_fiber_model(m, 0.025);
  InductionLedger a = induction_ledger_check(s1), b = induction_ledger_check(s2);
  REQUIRE(std::isfinite(a.B));
  REQUIRE(a.B > 0.0);
  REQUIRE(b.B == Approx(a.B).epsilon(0.1));
  REQUIRE(a.B == Approx(0.754746).epsilon(1e-4));
  REQUIRE(a.B0 <= a.B);
  REQUIRE(a.Ca == 4.0);
  REQUIRE(a.recipe_met);
  REQUIRE(a.rows.size() == 21u * 42u - 1u);

  FiberSolution zero = s1;
  for (double& v : zero.pair.psi.values) v = 0.0;
  InductionLedger z = induction_ledger_check(zero);
  REQUIRE(z.B == 0.0);
}

TEST_CASE("elliptic a priori estimate") {
  FiberModel m;
  FiberSolution s = solve_fiber_model(m, 0.05);
  AprioriEstimate a = apriori_estimate(m, 0.05, s.pair.E), b = apriori_estimate(m, 0.025, s.pair.E);
  REQUIRE(a.samples == 50);
  REQUIRE(a.per_sample.size() == 50u);
  for (double r : a.per_sample) REQUIRE(r <= a.C);
  REQUIRE(std::isfinite(a.C));
  REQUIRE(b.C == Approx(a.C).epsilon(0.2));
  AprioriEstimate again = apriori_estimate(m, 0.05, s.pair.E);
  REQUIRE(again.C == a.C);
}
