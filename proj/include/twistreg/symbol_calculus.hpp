#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "twistreg/conj_operator.hpp"
#include "twistreg/grid.hpp"
#include "twistreg/toy_density.hpp"

namespace twistreg {

using Complex = std::complex<double>;

struct ComplexGridFunction {
  GridDesc grid;
  std::vector<Complex> values;

  ComplexGridFunction() = default;
  explicit ComplexGridFunction(GridDesc g);
  static ComplexGridFunction from_real(const GridFunction& f);

  std::size_t size() const { return values.size(); }
  Complex& operator[](std::size_t k) { return values[k]; }
  Complex operator[](std::size_t k) const { return values[k]; }
  GridFunction real() const;
  double l2_norm() const;
};

ComplexGridFunction operator-(const ComplexGridFunction& a, const ComplexGridFunction& b);
ComplexGridFunction operator+(const ComplexGridFunction& a, const ComplexGridFunction& b);

// a(z, k) = weight(k) kernel(k, c(z)): the dependence on z = (x, y) enters only
// through a short coefficient vector. Where c(z) equals `reference` the symbol
// is a Fourier multiplier, which quantize exploits. An empty weight means 1.
struct Symbol {
  int order = 0;
  int dim = 0;
  int ncoef = 0;
  std::function<void(const double* z, double* c)> coefficients;
  std::function<Complex(const double* k, const double* c)> kernel;
  std::function<double(const double* k)> weight;
  std::vector<double> reference;

  Complex operator()(const double* z, const double* k) const;
};

Symbol constant_symbol(int dim, Complex value = 1.0);
// |k|^2, the symbol of -Lap.
Symbol laplacian_symbol(int dim);
Symbol product(const Symbol& a, const Symbol& b);
// Frequency cutoff: 1 on |k| <= 1, 0 on |k| >= 2.
double frequency_cutoff(double k_norm);

// Sampled weighted derivatives (1 + |k|^2)^{(|beta| - m)/2} |d_z^alpha d_k^beta a|,
// one sup per frequency shell |k| in [r, 2r).
struct SeminormRow {
  std::vector<int> alpha, beta;
  std::vector<double> shell_sup;
  double growth = 0.0;  // last shell sup over the largest earlier one
};
struct SeminormTable {
  int order = 0;
  std::vector<double> radii;
  std::vector<SeminormRow> rows;
  double max_growth = 0.0;
  double max_value = 0.0;
};
SeminormTable estimate_seminorms(const Symbol& a, const std::vector<std::vector<double>>& z_samples,
                                 const std::vector<double>& radii, int max_order, int directions = 12);

// Periodic grid with angular frequencies k = 2 pi m / L. The frequency cutoff
// must not exceed the largest |k| on the grid; a non-positive cutoff selects
// the radius of the ball inscribed in the frequency box.
class TorusQuantizer {
 public:
  TorusQuantizer() = default;
  TorusQuantizer(GridDesc grid, double cutoff, double energy_tol = 1e-14);

  const GridDesc& grid() const { return grid_; }
  double cutoff() const { return cutoff_; }
  double nyquist() const;
  double inscribed_frequency() const;
  std::vector<double> period() const;
  double frequency(int axis, int m) const;

  std::vector<Complex> forward(const ComplexGridFunction& v) const;
  ComplexGridFunction inverse(const std::vector<Complex>& V) const;

  // ||P_{|k| > cutoff} v|| / ||v||.
  double high_frequency_fraction(const ComplexGridFunction& v) const;
  // Throws CutoffExceeded above 1%.
  ComplexGridFunction quantize(const Symbol& a, const ComplexGridFunction& v) const;
  ComplexGridFunction derivative(const ComplexGridFunction& v, const std::vector<int>& order) const;
  // Frequency-weighted norm with weight (1 + |k|^2)^{s/2}; s = 0 is the L2 norm.
  double sobolev_norm(const ComplexGridFunction& v, double s) const;

 private:
  GridDesc grid_;
  double cutoff_ = 0.0;
  double energy_tol_ = 1e-14;
};

// -sum A d d + B . d + C on a 2D torus (x, y), derivatives taken spectrally.
struct TorusOperator {
  TorusQuantizer quantizer;
  std::vector<double> Axx, Axy, Ayy, Bx, By, C;

  ComplexGridFunction apply(const ComplexGridFunction& v) const;
};

// P0 tilde of a twist frame with base and fiber dimension 1, sampled on the
// quantizer grid (coefficients of -Lap where chi = 0).
TorusOperator torus_P0_tilde(const TwistFrame& frame, const Cutoff& chi, const TorusQuantizer& q);
// Principal symbol of P0 tilde as a function of (x, y), for any z.
Symbol p2_tilde_symbol(const TwistFrame& frame, const Cutoff& chi);
// Principal symbol read off an assembled operator; nodes by rounding, -Lap off the grid.
Symbol p2_tilde_symbol(const OperatorAssembly& op);

// q = (1 - tau_c(k)) / p2 with tau_c the frequency cutoff; throws NotElliptic if margin <= 0.
Symbol build_parametrix(const Symbol& p2_tilde, double ellipticity_margin);

struct ProbeSpec {
  std::vector<double> center;
  double width = 1.0;
  std::uint64_t seed = 1;
};
// Gaussian envelope times exp(i lambda omega . z), omega a seeded random unit vector.
ComplexGridFunction make_probe(const TorusQuantizer& q, const ProbeSpec& spec, double lambda);

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct DecayTable {
  std::vector<double> lambdas;
  std::vector<double> ratio;     // ||(Q P0~ - I) e|| / ||e||
  std::vector<double> ratio_q1;  // ||(Q1 P0~ - I) e|| / ||e||, Q1 = (I - R) Q
  double slope = 0.0;
  double slope_q1 = 0.0;
  double constant_ratio = 0.0;   // lambda = 0 probe

  void write_csv(const std::string& path) const;
};
DecayTable residual_gain(const Symbol& q, const TorusOperator& p0_tilde, const std::vector<double>& lambdas,
                         const ProbeSpec& probe);

// ||(Op(a) Op(b) - Op(ab)) e|| / (lambda^{m_a + m_b} ||e||) per lambda.
struct OrderTable {
  std::vector<double> lambdas;
  std::vector<double> ratio;
  double slope = 0.0;
};
OrderTable composition_defect(const Symbol& a, const Symbol& b, const TorusQuantizer& q,
                              const std::vector<double>& lambdas, const ProbeSpec& probe);
// ||Op(a) e||_{s - m} / ||e||_s per lambda.
OrderTable sobolev_gain(const Symbol& a, const TorusQuantizer& q, const std::vector<double>& lambdas,
                        const ProbeSpec& probe, double s);

// Frame for the parametrix decay study: one base and one fiber dimension, tau
// on a wide ramp and a cutoff plateau wide enough to hold the probe envelope.
struct ParametrixModel {
  double tau_inner = 2.0;
  double tau_outer = 34.0;
  double chi_inner = 6.0;
  double chi_outer = 8.0;
  double period_x = 20.0;
  double period_y = 72.0;
  int nx = 250;
  int ny = 900;
  double cutoff = 0.0;  // 0: the inscribed frequency pi / max h
  double energy_tol = 1e-10;
  ProbeSpec probe{{0.0, 10.0}, 2.0, 1};
};
struct ParametrixSetup {
  TwistFrame frame;
  Cutoff chi;
  TorusQuantizer quantizer;
  TorusOperator p0_tilde;
  Symbol p2_tilde;
  Symbol q;
  double margin = 0.0;
};
ParametrixSetup build_parametrix_setup(const ParametrixModel& m);

// P0~(chi0 v) - chi0 P0~ v.
GridFunction commutator(const OperatorAssembly& p0_tilde, const Cutoff& chi0, const GridFunction& v);

// chi0 phi = -R chi0 phi + Q(E - V0) chi0 phi - Q W chi0 phi + Q [P0~, chi0] chi phi
// with R = Q P0~ - I, both sides evaluated on the grid of p0_tilde. Q acts on a
// zero-padded torus around that grid.
struct BootstrapInput {
  OperatorAssembly p0_tilde;
  Cutoff chi;
  Cutoff chi0;
  GridFunction phi;
  std::vector<double> e_minus_v0;
  std::vector<double> w;
  double margin = 0.0;  // ellipticity margin of P0~
};
struct BootstrapResult {
  double mismatch = 0.0;  // ||lhs - rhs|| / ||lhs||
  double lhs_norm = 0.0;
  double rhs_norm = 0.0;
  double h = 0.0;
};
BootstrapResult bootstrap_identity_check(const BootstrapInput& in);
// Builds the input from a fiber-model solution: chi = cutoffs[0], chi0 = cutoffs[1].
BootstrapInput bootstrap_input(const FiberSolution& s, const std::vector<Cutoff>& cutoffs);

}  // namespace twistreg
