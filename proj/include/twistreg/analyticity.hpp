#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "twistreg/coulomb_bounds.hpp"
#include "twistreg/grid.hpp"
#include "twistreg/jet.hpp"
#include "twistreg/toy_density.hpp"

namespace twistreg {

// Real function on R^d. `jet`, when set, maps the coordinate jets to the jet of
// u and enables exact differentiation.
struct SampledFunction {
  int dim = 1;
  std::function<double(const double*)> value;
  std::function<Jet(const std::vector<Jet>&)> jet;
  std::string name;
};

// Compact set given by sample points. `margin` is the radius of the
// neighbourhood of K on which u may be evaluated.
// With `octant` set, the points cover only {x_1 >= ... >= x_d >= 0} and the
// function is assumed invariant under coordinate permutations and sign
// changes; sup_K |D^alpha u| is then the maximum over permutations of alpha.
struct CompactSet {
  std::string descriptor;
  std::vector<std::vector<double>> points;
  double margin = 0.0;
  bool octant = false;
};

CompactSet segment_set(double a, double b, int n, double margin);
// Points c + r u with u on n_dir sphere samples (plus the axes) and r on n_r radii in [r0, r1].
CompactSet shell_set(int dim, double r0, double r1, int n_dir, int n_r, double margin);
// Same shell restricted to the fundamental domain of the hyperoctahedral group.
CompactSet octant_shell_set(int dim, double r0, double r1, int n_dir, int n_r, double margin);
// Cubic lattice points of spacing `step` inside the closed ball of radius r (contains the centre).
CompactSet ball_set(int dim, double r, double step, double margin);

enum class Truncation { None, Noise, Divergence };
std::string to_string(Truncation t);

struct DerivativeEntry {
  MultiIndex alpha;
  int order = 0;
  double sup = 0.0;
};

struct DerivativeTable {
  std::string K;
  int dim = 0;
  int max_order = 0;  // highest order present after truncation
  std::vector<double> steps;  // finite-difference steps, empty on the exact path
  std::vector<DerivativeEntry> entries;
  Truncation truncation = Truncation::None;
  int truncated_at = -1;  // first rejected order

  // M_n = max_{|alpha| = n} entry, for n = 0..max_order.
  std::vector<double> order_max() const;
  // Columns alpha (dot-separated), order, sup.
  void write_csv(const std::string& path) const;
};

struct DerivativeOptions {
  bool exact = true;   // use u.jet when available
  double step = 0.05;  // base finite-difference step; h, h/2, h/4 are used
  double agreement = 0.1;
  double divergence_ratio = 1.5;
};

// sup_K |D^alpha u| for |alpha| <= max_order. Finite differences are
// tensor-product central differences of second order, Richardson-extrapolated
// over two halvings; the table stops at the first order whose two
// extrapolants disagree by more than `agreement`. Throws InsufficientMargin if
// the stencil leaves the neighbourhood of K.
DerivativeTable derivative_table(const SampledFunction& u, const CompactSet& K, int max_order,
                                 const DerivativeOptions& opt = {});

// Tables built directly from per-order maxima M_n (alpha = (n)).
DerivativeTable table_from_orders(const std::vector<double>& M, const std::string& K = "synthetic");

struct GrowthFit {
  double A = 0.0;
  double residual = 0.0;  // RMS in log space
  int rows = 0;
};

constexpr double kFitRejection = 0.5;
constexpr double kGrowthFloor = 1e-12;

// Least squares of log entry against (|alpha|+1) log A + delta log alpha! + (1-delta) log |alpha|!
// over nonzero entries. Throws TableTooShort with fewer than 5 usable orders.
GrowthFit fit_growth(const DerivativeTable& t, int delta);

enum class GrowthClass { Analytic, Gevrey, SmoothUnclassified, NonAnalytic };
std::string to_string(GrowthClass c);

struct Verdict {
  GrowthClass cls = GrowthClass::SmoothUnclassified;
  double A = 0.0;
  double s = 0.0;
  double residual = 0.0;
  int max_order = 0;
  int fit_from = 0;       // first order of the fit window
  double s_full = 0.0;    // same fit over all orders, for reference
  std::string json() const;
};

// Fit of log M_n = c + n log A + s log n! over the upper orders
// n >= min(N/2, N-4) (the intercept keeps s independent of the scale of u).
// s <= 1 + tol is analytic, up to 3 is Gevrey, beyond that or with fewer than 5
// nonzero orders unclassified. The fit residual is reported, not used for
// rejection. Tables whose finite differences diverge under step refinement are
// non-analytic; tables vanishing beyond a finite order are analytic. A is the
// envelope max_n (M_n / (n!)^s)^{1/(n+1)}, with s = 1 when analytic.
Verdict classify(const DerivativeTable& t, double tol = 0.25);

// Closed forms with exact jets.
SampledFunction hydrogen_density_function(double Z);  // (Z^3 / 8 pi) e^{-Z |x|} in 3D
SampledFunction bump_function(const BumpFunction& b);
SampledFunction constant_function(int dim, double c);

// Certification of the hydrogen density: the numerical radial solution is
// compared with the closed form, the closed form is certified on the shell
// {r0 <= |x| <= r1} by exact jets, finite differences of the numerical radial
// density cross-check the radial derivatives to order 4, and the table across
// the nucleus is built by finite differences on a ball around it.
struct HydrogenCertificate {
  double Z = 1.0;
  HydrogenCheck solve;
  DerivativeTable shell;
  Verdict shell_verdict;
  double radial_crosscheck = 0.0;  // max relative deviation, orders 0..4
  DerivativeTable nucleus;
  Verdict nucleus_verdict;
};
struct HydrogenCertifyOptions {
  double Z = 1.0;
  double r0 = 1.0;
  double r1 = 2.0;
  int max_order = 30;
  int directions = 2000;  // full-sphere density; only the octant is evaluated
  int radii = 5;
  double r_max = 30.0;
  int n_points = 6000;
};
HydrogenCertificate certify_hydrogen(const HydrogenCertifyOptions& opt = {});

// Shipped bump tau across its outer ramp endpoint.
struct MollifierCertificate {
  DerivativeTable table;
  Verdict verdict;
};
MollifierCertificate certify_mollifier(const FiberModel& m = {}, int max_order = 16);

// Nested-domain bookkeeping for the analytic induction on the fiber model.
// Base x in Omega' = (x0 - w, x0 + w), D' = 2w; Omega'_e = {|x - x0| < w - e}.
struct LedgerRow {
  int j = 0, r = 0, alpha = 0;
  double eps = 0.0;  // maximiser over the eps samples
  double bound = 0.0;  // max_eps (eps^{r+alpha} N_{j eps, r}(D^alpha phi))^{1/(r+alpha+1)}
};

// eps ranges over (0, D'], with j eps < D'/2 for j >= 1 so that Omega'_{j eps} is not empty.
struct InductionLedger {
  double omega_half_width = 0.3;
  int max_order = 6;  // base derivatives
  int eps_samples = 200;
  int extra_j = 40;   // j runs from max(0, r + alpha - 1) to r + alpha + extra_j
  // Filled by the check.
  double D = 0.0;
  double B = 0.0;    // minimal B over all computed (j, eps, r, alpha); 0 for phi = 0
  double B0 = 0.0;   // minimal B over j in {0, 1}
  double Cp = 0.0;
  double Ca = 0.0;
  double recipe = 0.0;  // max(B0, 2 Cp <D'>, Ca)
  bool recipe_met = false;  // B <= recipe: the recipe value satisfies every computed row
  LedgerRow binding;
  std::vector<LedgerRow> rows;
  void write_csv(const std::string& path) const;
};

// Number of (r, beta) in {0,1,2} x N^d with r + |beta| < 2, plus one.
int induction_Ca(int base_dim);

struct NestedNorms {
  double h = 0.0;
  std::vector<double> x;                          // base nodes of Omega'
  std::vector<std::vector<std::vector<double>>> fiber;  // fiber[n][r][i] = ||D_x^n phi(x_i)||_{W_r}
};
// D_x^n phi by centred finite differences of second order on the base nodes
// of Omega'; fiber norms by GridFunction::sobolev_norm.
NestedNorms nested_norms(const GridFunction& phi, double x0, double half_width, int max_order);
// N_{e,r}(D^n phi) from the per-node fiber norms.
double nested_norm(const NestedNorms& n, double x0, double half_width, double e, int order, int r);

// C_p from x-derivative jets of the coefficients of P = sum a_beta D_x^beta,
// with operator norms bounded by coefficient sup norms and, for W, by
// ||d_x^n W(x, .)||_{L^2_y} (1D Sobolev embedding constant 1).
double coefficient_constant(const FiberModel& m, double h, double E, double half_width, int max_order);

InductionLedger induction_ledger_check(const FiberSolution& s, InductionLedger ledger = {});

// Elliptic a priori estimate: max over random smooth v compactly supported in
// Omega' x fiber of ||D_x^alpha v||_{L^2(W_r)} / (||P v|| + ||v||), r + |alpha| <= 2.
struct AprioriEstimate {
  double h = 0.0;
  double C = 0.0;
  int samples = 0;
  std::vector<double> per_sample;
};
AprioriEstimate apriori_estimate(const FiberModel& m, double h, double E, int samples = 50, std::uint64_t seed = 7,
                                 double half_width = 0.3);

// Fornberg weights for the n-th derivative at 0 on the given offsets.
std::vector<double> fd_weights(const std::vector<double>& offsets, int n);

}  // namespace twistreg
