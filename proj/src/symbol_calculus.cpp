#include "twistreg/symbol_calculus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "twistreg/errors.hpp"
#include "twistreg/mollifier.hpp"

namespace twistreg {

ComplexGridFunction::ComplexGridFunction(GridDesc g) : grid(std::move(g)), values(grid.size(), 0.0) {}

ComplexGridFunction ComplexGridFunction::from_real(const GridFunction& f) {
  ComplexGridFunction c(f.grid);
  for (std::size_t k = 0; k < f.size(); ++k) c[k] = f[k];
  return c;
}

GridFunction ComplexGridFunction::real() const {
  GridFunction f(grid);
  for (std::size_t k = 0; k < size(); ++k) f[k] = values[k].real();
  return f;
}

double ComplexGridFunction::l2_norm() const {
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  return std::sqrt(s * grid.cell_volume());
}

ComplexGridFunction operator-(const ComplexGridFunction& a, const ComplexGridFunction& b) {
  ComplexGridFunction c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c[k] -= b[k];
  return c;
}

ComplexGridFunction operator+(const ComplexGridFunction& a, const ComplexGridFunction& b) {
  ComplexGridFunction c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c[k] += b[k];
  return c;
}

Complex Symbol::operator()(const double* z, const double* k) const {
  std::vector<double> c(ncoef);
  if (ncoef > 0) coefficients(z, c.data());
  Complex v = kernel(k, c.data());
  return weight ? weight(k) * v : v;
}

Symbol constant_symbol(int dim, Complex value) {
  Symbol s;
  s.dim = dim;
  s.kernel = [value](const double*, const double*) { return value; };
  return s;
}

Symbol laplacian_symbol(int dim) {
  Symbol s;
  s.order = 2;
  s.dim = dim;
  s.kernel = [dim](const double* k, const double*) {
    double r = 0.0;
    for (int a = 0; a < dim; ++a) r += k[a] * k[a];
    return Complex(r, 0.0);
  };
  return s;
}

Symbol product(const Symbol& a, const Symbol& b) {
  if (a.dim != b.dim) throw Error(ErrorCode::InvalidArgument, "symbol dimensions differ");
  Symbol s;
  s.order = a.order + b.order;
  s.dim = a.dim;
  s.ncoef = a.ncoef + b.ncoef;
  const int na = a.ncoef;
  s.coefficients = [a, b, na](const double* z, double* c) {
    if (a.ncoef > 0) a.coefficients(z, c);
    if (b.ncoef > 0) b.coefficients(z, c + na);
  };
  s.kernel = [a, b, na](const double* k, const double* c) { return a.kernel(k, c) * b.kernel(k, c + na); };
  if (a.weight || b.weight)
    s.weight = [a, b](const double* k) { return (a.weight ? a.weight(k) : 1.0) * (b.weight ? b.weight(k) : 1.0); };
  if ((a.ncoef == 0 || !a.reference.empty()) && (b.ncoef == 0 || !b.reference.empty())) {
    s.reference = a.reference;
    s.reference.insert(s.reference.end(), b.reference.begin(), b.reference.end());
  }
  return s;
}

double frequency_cutoff(double k_norm) { return smooth_step(2.0 - k_norm); }

namespace {

// Nested central differences: d_z^alpha d_k^beta a at (z, k).
Complex mixed_derivative(const Symbol& a, std::vector<double> z, std::vector<double> k, std::vector<int> alpha,
                         std::vector<int> beta, double hz, double hk) {
  for (int i = 0; i < a.dim; ++i) {
    if (alpha[i] > 0) {
      alpha[i] -= 1;
      auto zp = z, zm = z;
      zp[i] += hz;
      zm[i] -= hz;
      return (mixed_derivative(a, zp, k, alpha, beta, hz, hk) - mixed_derivative(a, zm, k, alpha, beta, hz, hk)) /
             (2.0 * hz);
    }
    if (beta[i] > 0) {
      beta[i] -= 1;
      auto kp = k, km = k;
      kp[i] += hk;
      km[i] -= hk;
      return (mixed_derivative(a, z, kp, alpha, beta, hz, hk) - mixed_derivative(a, z, km, alpha, beta, hz, hk)) /
             (2.0 * hk);
    }
  }
  return a(z.data(), k.data());
}

void enumerate(int dim, int n, std::vector<int>& cur, int pos, std::vector<std::vector<int>>& out) {
  if (pos == dim - 1) {
    cur[pos] = n;
    out.push_back(cur);
    return;
  }
  for (int v = n; v >= 0; --v) {
    cur[pos] = v;
    enumerate(dim, n - v, cur, pos + 1, out);
  }
}

std::vector<std::vector<int>> indices_of_order(int dim, int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(dim, 0);
  enumerate(dim, n, cur, 0, out);
  return out;
}

}  // namespace

SeminormTable estimate_seminorms(const Symbol& a, const std::vector<std::vector<double>>& z_samples,
                                 const std::vector<double>& radii, int max_order, int directions) {
  SeminormTable t;
  t.order = a.order;
  t.radii = radii;
  const int d = a.dim;
  // Frequency samples: each shell [r, 2r) at radii r, 1.5 r along fixed directions.
  std::vector<std::vector<std::vector<double>>> shells;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N01;
  std::vector<std::vector<double>> dirs;
  for (int j = 0; j < directions; ++j) {
    std::vector<double> w(d);
    double n = 0.0;
    for (auto& v : w) {
      v = N01(rng);
      n += v * v;
    }
    for (auto& v : w) v /= std::sqrt(n);
    dirs.push_back(w);
  }
  for (double r : radii) {
    std::vector<std::vector<double>> pts;
    for (double s : {1.0, 1.5})
      for (const auto& w : dirs) {
        std::vector<double> k(d);
        for (int i = 0; i < d; ++i) k[i] = s * r * w[i];
        pts.push_back(k);
      }
    shells.push_back(pts);
  }
  for (int na = 0; na <= max_order; ++na)
    for (int nb = 0; na + nb <= max_order; ++nb)
      for (const auto& alpha : indices_of_order(d, na))
        for (const auto& beta : indices_of_order(d, nb)) {
          SeminormRow row;
          row.alpha = alpha;
          row.beta = beta;
          for (const auto& pts : shells) {
            double sup = 0.0;
            for (const auto& z : z_samples)
              for (const auto& k : pts) {
                double kn2 = 0.0;
                for (double v : k) kn2 += v * v;
                double hk = 0.02 * std::max(1.0, std::sqrt(kn2));
                Complex dv = mixed_derivative(a, z, k, alpha, beta, 0.02, hk);
                sup = std::max(sup, std::abs(dv) * std::pow(1.0 + kn2, 0.5 * (nb - a.order)));
              }
            row.shell_sup.push_back(sup);
          }
          double earlier = 0.0;
          for (std::size_t s = 0; s + 1 < row.shell_sup.size(); ++s) earlier = std::max(earlier, row.shell_sup[s]);
          row.growth = earlier > 0.0 ? row.shell_sup.back() / earlier : 0.0;
          t.max_growth = std::max(t.max_growth, row.growth);
          for (double v : row.shell_sup) t.max_value = std::max(t.max_value, v);
          t.rows.push_back(row);
        }
  return t;
}

TorusQuantizer::TorusQuantizer(GridDesc grid, double cutoff, double energy_tol)
    : grid_(std::move(grid)), cutoff_(cutoff), energy_tol_(energy_tol) {
  if (grid_.dim() < 1 || grid_.dim() > 3) throw Error(ErrorCode::InvalidArgument, "torus dimension must be 1..3");
  if (cutoff_ <= 0.0) cutoff_ = inscribed_frequency();
  if (cutoff_ > nyquist() * (1.0 + 1e-12))
    throw Error(ErrorCode::InvalidArgument, "frequency cutoff above the Nyquist frequency");
}

double TorusQuantizer::nyquist() const {
  double s = 0.0;
  for (double h : grid_.spacing) s += (M_PI / h) * (M_PI / h);
  return std::sqrt(s);
}

double TorusQuantizer::inscribed_frequency() const {
  double h = *std::max_element(grid_.spacing.begin(), grid_.spacing.end());
  return M_PI / h;
}

std::vector<double> TorusQuantizer::period() const {
  std::vector<double> p(grid_.dim());
  for (int a = 0; a < grid_.dim(); ++a) p[a] = grid_.shape[a] * grid_.spacing[a];
  return p;
}

double TorusQuantizer::frequency(int axis, int m) const {
  const int n = grid_.shape[axis];
  int s = m > n / 2 ? m - n : m;
  return 2.0 * M_PI * s / (n * grid_.spacing[axis]);
}

namespace {

std::vector<Complex> fft(const GridDesc& g, const std::vector<Complex>& in, int sign) {
  std::vector<Complex> out(in.size());
  std::vector<Complex> src = in;
  fftw_plan p = fftw_plan_dft(g.dim(), g.shape.data(), reinterpret_cast<fftw_complex*>(src.data()),
                              reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  return out;
}

}  // namespace

std::vector<Complex> TorusQuantizer::forward(const ComplexGridFunction& v) const {
  if (!v.grid.same_as(grid_)) throw Error(ErrorCode::InvalidArgument, "function not on the quantizer grid");
  return fft(grid_, v.values, FFTW_FORWARD);
}

ComplexGridFunction TorusQuantizer::inverse(const std::vector<Complex>& V) const {
  ComplexGridFunction out(grid_);
  out.values = fft(grid_, V, FFTW_BACKWARD);
  const double n = static_cast<double>(grid_.size());
  for (auto& x : out.values) x /= n;
  return out;
}

namespace {

// Frequency vector of flat spectral index m.
void frequency_of(const TorusQuantizer& q, std::size_t m, int* idx, double* k) {
  q.grid().unflat(m, idx);
  for (int a = 0; a < q.grid().dim(); ++a) k[a] = q.frequency(a, idx[a]);
}

}  // namespace

double TorusQuantizer::high_frequency_fraction(const ComplexGridFunction& v) const {
  std::vector<Complex> V = forward(v);
  double total = 0.0, high = 0.0;
  int idx[3];
  double k[3];
  for (std::size_t m = 0; m < V.size(); ++m) {
    frequency_of(*this, m, idx, k);
    double kn = 0.0;
    for (int a = 0; a < grid_.dim(); ++a) kn += k[a] * k[a];
    double e = std::norm(V[m]);
    total += e;
    if (std::sqrt(kn) > cutoff_) high += e;
  }
  return total > 0.0 ? std::sqrt(high / total) : 0.0;
}

ComplexGridFunction TorusQuantizer::quantize(const Symbol& a, const ComplexGridFunction& v) const {
  const int d = grid_.dim();
  if (a.dim != d) throw Error(ErrorCode::InvalidArgument, "symbol dimension does not match the torus");
  if (high_frequency_fraction(v) > 0.01)
    throw Error(ErrorCode::CutoffExceeded, "more than 1% of the input lies above the frequency cutoff");
  std::vector<Complex> V = forward(v);
  const std::size_t N = V.size();
  auto weight = [&](const double* k) { return a.weight ? a.weight(k) : 1.0; };

  const bool has_ref = !a.reference.empty() || a.ncoef == 0;
  ComplexGridFunction out(grid_);
  if (has_ref) {
    std::vector<Complex> W(N);
    int idx[3];
    double k[3];
    for (std::size_t m = 0; m < N; ++m) {
      frequency_of(*this, m, idx, k);
      if (V[m] != 0.0) W[m] = weight(k) * a.kernel(k, a.reference.data()) * V[m];
    }
    out = inverse(W);
    if (a.ncoef == 0) return out;
  }

  // Spectral support kept for the node-dependent sums.
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::norm(V[i]) > std::norm(V[j]); });
  double total = 0.0;
  for (const auto& x : V) total += std::norm(x);
  std::vector<std::size_t> active;
  double acc = 0.0;
  for (std::size_t m : order) {
    if (acc >= total * (1.0 - energy_tol_) || std::norm(V[m]) == 0.0) break;
    acc += std::norm(V[m]);
    active.push_back(m);
  }
  const std::size_t K = active.size();
  const double inv_n = 1.0 / static_cast<double>(N);
  std::vector<double> kf(K * d);
  std::vector<int> mi(K * d);
  std::vector<Complex> amp(K), ref_kernel(K, 0.0);
  for (std::size_t j = 0; j < K; ++j) {
    frequency_of(*this, active[j], mi.data() + j * d, kf.data() + j * d);
    amp[j] = weight(kf.data() + j * d) * V[active[j]] * inv_n;
    if (has_ref) ref_kernel[j] = a.kernel(kf.data() + j * d, a.reference.data());
  }

  std::vector<std::vector<Complex>> roots(d);
  for (int ax = 0; ax < d; ++ax) {
    const int n = grid_.shape[ax];
    roots[ax].resize(n);
    for (int t = 0; t < n; ++t) roots[ax][t] = std::polar(1.0, 2.0 * M_PI * t / n);
  }

  // Nodes are visited in row-major order; along the last axis the phase
  // index of each frequency advances by its own index modulo n.
  const int nl = grid_.shape[d - 1];
  std::vector<Complex> lead(K);  // amplitude times the phase of the leading axes
  std::vector<int> run(K);       // phase index along the last axis
  std::vector<double> c(a.ncoef);
  int idx[3];
  double z[3];
  bool fresh = false;
  for (std::size_t node = 0; node < N; ++node) {
    grid_.unflat(node, idx);
    if (idx[d - 1] == 0) {
      for (std::size_t j = 0; j < K; ++j) {
        Complex ph = amp[j];
        for (int ax = 0; ax + 1 < d; ++ax)
          ph *= roots[ax][static_cast<std::size_t>(mi[j * d + ax]) * idx[ax] % grid_.shape[ax]];
        lead[j] = ph;
      }
      fresh = false;
    }
    for (int ax = 0; ax < d; ++ax) z[ax] = grid_.coord(ax, idx[ax]);
    a.coefficients(z, c.data());
    if (has_ref && std::equal(c.begin(), c.end(), a.reference.begin())) {
      fresh = false;
      continue;
    }
    if (!fresh) {
      for (std::size_t j = 0; j < K; ++j)
        run[j] = static_cast<int>(static_cast<std::size_t>(mi[j * d + d - 1]) * idx[d - 1] % nl);
      fresh = true;
    }
    Complex s = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      Complex w = a.kernel(kf.data() + j * d, c.data()) - ref_kernel[j];
      s += w * lead[j] * roots[d - 1][run[j]];
      run[j] += mi[j * d + d - 1];
      if (run[j] >= nl) run[j] -= nl;
    }
    out[node] += s;
  }
  return out;
}

ComplexGridFunction TorusQuantizer::derivative(const ComplexGridFunction& v, const std::vector<int>& ord) const {
  std::vector<Complex> V = forward(v);
  int idx[3];
  double k[3];
  for (std::size_t m = 0; m < V.size(); ++m) {
    frequency_of(*this, m, idx, k);
    Complex f = 1.0;
    for (int a = 0; a < grid_.dim(); ++a)
      for (int r = 0; r < ord[a]; ++r) f *= Complex(0.0, k[a]);
    V[m] *= f;
  }
  return inverse(V);
}

double TorusQuantizer::sobolev_norm(const ComplexGridFunction& v, double s) const {
  std::vector<Complex> V = forward(v);
  int idx[3];
  double k[3];
  double acc = 0.0;
  for (std::size_t m = 0; m < V.size(); ++m) {
    frequency_of(*this, m, idx, k);
    double kn = 0.0;
    for (int a = 0; a < grid_.dim(); ++a) kn += k[a] * k[a];
    acc += std::pow(1.0 + kn, s) * std::norm(V[m]);
  }
  return std::sqrt(acc * grid_.cell_volume() / static_cast<double>(V.size()));
}

ComplexGridFunction TorusOperator::apply(const ComplexGridFunction& v) const {
  auto dxx = quantizer.derivative(v, {2, 0});
  auto dxy = quantizer.derivative(v, {1, 1});
  auto dyy = quantizer.derivative(v, {0, 2});
  auto dx = quantizer.derivative(v, {1, 0});
  auto dy = quantizer.derivative(v, {0, 1});
  ComplexGridFunction out(v.grid);
  for (std::size_t k = 0; k < v.size(); ++k)
    out[k] = -(Axx[k] * dxx[k] + 2.0 * Axy[k] * dxy[k] + Ayy[k] * dyy[k]) + Bx[k] * dx[k] + By[k] * dy[k] +
             C[k] * v[k];
  return out;
}

namespace {

void require_planar_frame(const TwistFrame& frame) {
  if (frame.base_dim() != 1 || frame.fiber_dim() != 1)
    throw Error(ErrorCode::InvalidArgument, "torus operators need base and fiber dimension 1");
}

P0Coefficients blended_at(const TwistFrame& frame, const Cutoff& chi, double x, double y) {
  Point p(1);
  p[0] = x;
  double c = chi.value(p);
  P0Coefficients out;
  out.A = Eigen::Matrix2d::Identity();
  out.B = Eigen::Vector2d::Zero();
  if (c > 0.0) out = blend(p0_coefficients(frame, p, &y), 1, c);
  return out;
}

}  // namespace

TorusOperator torus_P0_tilde(const TwistFrame& frame, const Cutoff& chi, const TorusQuantizer& q) {
  require_planar_frame(frame);
  const GridDesc& g = q.grid();
  if (g.dim() != 2) throw Error(ErrorCode::InvalidArgument, "torus operator needs a 2D grid");
  TorusOperator op;
  op.quantizer = q;
  const std::size_t n = g.size();
  op.Axx.assign(n, 1.0);
  op.Axy.assign(n, 0.0);
  op.Ayy.assign(n, 1.0);
  op.Bx.assign(n, 0.0);
  op.By.assign(n, 0.0);
  op.C.assign(n, 0.0);
  int idx[2];
  for (std::size_t k = 0; k < n; ++k) {
    g.unflat(k, idx);
    P0Coefficients c = blended_at(frame, chi, g.coord(0, idx[0]), g.coord(1, idx[1]));
    op.Axx[k] = c.A(0, 0);
    op.Axy[k] = c.A(0, 1);
    op.Ayy[k] = c.A(1, 1);
    op.Bx[k] = c.B[0];
    op.By[k] = c.B[1];
    op.C[k] = c.C;
  }
  return op;
}

namespace {

Complex quadratic_kernel(const double* k, const double* c) {
  return k[0] * k[0] * c[0] + 2.0 * c[1] * k[0] * k[1] + c[2] * k[1] * k[1];
}

}  // namespace

Symbol p2_tilde_symbol(const TwistFrame& frame, const Cutoff& chi) {
  require_planar_frame(frame);
  Symbol s;
  s.order = 2;
  s.dim = 2;
  s.ncoef = 3;
  s.reference = {1.0, 0.0, 1.0};
  s.coefficients = [frame, chi](const double* z, double* c) {
    P0Coefficients p = blended_at(frame, chi, z[0], z[1]);
    c[0] = p.A(0, 0);
    c[1] = p.A(0, 1);
    c[2] = p.A(1, 1);
  };
  s.kernel = quadratic_kernel;
  return s;
}

Symbol p2_tilde_symbol(const OperatorAssembly& op) {
  if (op.grid.dim() != 2) throw Error(ErrorCode::InvalidArgument, "assembly must be 2D");
  Symbol s;
  s.order = 2;
  s.dim = 2;
  s.ncoef = 3;
  s.reference = {1.0, 0.0, 1.0};
  const GridDesc g = op.grid;
  auto axx = std::make_shared<std::vector<double>>(op.Axx);
  auto axy = std::make_shared<std::vector<double>>(op.Axy);
  auto ayy = std::make_shared<std::vector<double>>(op.Ayy);
  s.coefficients = [g, axx, axy, ayy](const double* z, double* c) {
    c[0] = 1.0;
    c[1] = 0.0;
    c[2] = 1.0;
    int idx[2];
    for (int a = 0; a < 2; ++a) {
      double t = (z[a] - g.origin[a]) / g.spacing[a];
      idx[a] = static_cast<int>(std::lround(t));
      if (idx[a] < 0 || idx[a] >= g.shape[a]) return;
    }
    std::size_t k = g.flat(idx);
    c[0] = (*axx)[k];
    c[1] = (*axy)[k];
    c[2] = (*ayy)[k];
  };
  s.kernel = quadratic_kernel;
  return s;
}

Symbol build_parametrix(const Symbol& p2_tilde, double ellipticity_margin) {
  if (!(ellipticity_margin > 0.0)) throw Error(ErrorCode::NotElliptic, "principal symbol is not elliptic");
  Symbol q = p2_tilde;
  q.order = -p2_tilde.order;
  auto p2k = p2_tilde.kernel;
  auto p2w = p2_tilde.weight;
  const int d = p2_tilde.dim;
  q.kernel = [p2k, d](const double* k, const double* c) -> Complex {
    double kn = 0.0;
    for (int a = 0; a < d; ++a) kn += k[a] * k[a];
    if (kn == 0.0) return 0.0;  // removed by the frequency cutoff
    Complex p = p2k(k, c);
    if (!(p.real() > 0.0)) throw Error(ErrorCode::NotElliptic, "principal symbol vanishes off the origin");
    return 1.0 / p;
  };
  q.weight = [p2w, d](const double* k) {
    double kn = 0.0;
    for (int a = 0; a < d; ++a) kn += k[a] * k[a];
    double cut = frequency_cutoff(std::sqrt(kn));
    return (1.0 - cut) / (p2w ? p2w(k) : 1.0);
  };
  return q;
}

ComplexGridFunction make_probe(const TorusQuantizer& q, const ProbeSpec& spec, double lambda) {
  const GridDesc& g = q.grid();
  const int d = g.dim();
  if (static_cast<int>(spec.center.size()) != d) throw Error(ErrorCode::InvalidArgument, "probe center dimension");
  std::mt19937_64 rng(spec.seed);
  std::vector<double> omega(d);
  if (d == 1) {
    omega[0] = 1.0;
  } else {
    std::normal_distribution<double> N01;
    double n = 0.0;
    for (auto& w : omega) {
      w = N01(rng);
      n += w * w;
    }
    for (auto& w : omega) w /= std::sqrt(n);
  }
  auto L = q.period();
  ComplexGridFunction e(g);
  int idx[3];
  for (std::size_t k = 0; k < e.size(); ++k) {
    g.unflat(k, idx);
    double r2 = 0.0, phase = 0.0;
    for (int a = 0; a < d; ++a) {
      double t = g.coord(a, idx[a]) - spec.center[a];
      t -= L[a] * std::round(t / L[a]);
      r2 += t * t;
      phase += omega[a] * t;
    }
    e[k] = std::exp(-0.5 * r2 / (spec.width * spec.width)) * std::polar(1.0, lambda * phase);
  }
  return e;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw Error(ErrorCode::InvalidArgument, "slope fit needs two or more points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

void DecayTable::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  os << std::setprecision(17) << "lambda,ratio,ratio_q1,slope,slope_q1\n";
  for (std::size_t i = 0; i < lambdas.size(); ++i)
    os << lambdas[i] << ',' << ratio[i] << ',' << ratio_q1[i] << ',' << slope << ',' << slope_q1 << '\n';
}

DecayTable residual_gain(const Symbol& q, const TorusOperator& p0_tilde, const std::vector<double>& lambdas,
                         const ProbeSpec& probe) {
  const TorusQuantizer& tq = p0_tilde.quantizer;
  auto R = [&](const ComplexGridFunction& v) { return tq.quantize(q, p0_tilde.apply(v)) - v; };
  DecayTable t;
  t.lambdas = lambdas;
  for (double lam : lambdas) {
    ComplexGridFunction e = make_probe(tq, probe, lam);
    const double ne = e.l2_norm();
    ComplexGridFunction w = tq.quantize(q, p0_tilde.apply(e));
    t.ratio.push_back((w - e).l2_norm() / ne);
    // Q1 P0~ e - e = (I - R) w - e
    ComplexGridFunction q1 = w - R(w) - e;
    t.ratio_q1.push_back(q1.l2_norm() / ne);
  }
  t.slope = loglog_slope(t.lambdas, t.ratio);
  t.slope_q1 = loglog_slope(t.lambdas, t.ratio_q1);
  ComplexGridFunction e0 = make_probe(tq, probe, 0.0);
  t.constant_ratio = R(e0).l2_norm() / e0.l2_norm();
  return t;
}

OrderTable composition_defect(const Symbol& a, const Symbol& b, const TorusQuantizer& q,
                              const std::vector<double>& lambdas, const ProbeSpec& probe) {
  Symbol ab = product(a, b);
  OrderTable t;
  t.lambdas = lambdas;
  for (double lam : lambdas) {
    ComplexGridFunction e = make_probe(q, probe, lam);
    ComplexGridFunction d = q.quantize(a, q.quantize(b, e)) - q.quantize(ab, e);
    t.ratio.push_back(d.l2_norm() / (std::pow(lam, a.order + b.order) * e.l2_norm()));
  }
  t.slope = loglog_slope(t.lambdas, t.ratio);
  return t;
}

OrderTable sobolev_gain(const Symbol& a, const TorusQuantizer& q, const std::vector<double>& lambdas,
                        const ProbeSpec& probe, double s) {
  OrderTable t;
  t.lambdas = lambdas;
  for (double lam : lambdas) {
    ComplexGridFunction e = make_probe(q, probe, lam);
    t.ratio.push_back(q.sobolev_norm(q.quantize(a, e), s - a.order) / q.sobolev_norm(e, s));
  }
  t.slope = loglog_slope(t.lambdas, t.ratio);
  return t;
}

ParametrixSetup build_parametrix_setup(const ParametrixModel& m) {
  ParametrixSetup s;
  Point c = Point::Zero(1);
  BumpFunction tau = make_bump(c, m.tau_inner, m.tau_outer, {});
  Diffeomorphism f = make_diffeomorphism(tau, c);
  GridDesc torus({m.nx, m.ny}, {m.period_x / m.nx, m.period_y / m.ny}, {-0.5 * m.period_x, -0.5 * m.period_y});
  GridDesc fiber({m.ny}, {torus.spacing[1]}, {torus.origin[1]});
  s.frame = make_frame(ClusterDiffeo(f, 1), fiber);
  s.chi = make_cutoff(s.frame, m.chi_inner, m.chi_outer);
  s.quantizer = TorusQuantizer(torus, m.cutoff, m.energy_tol);

  std::vector<Point> xs;
  std::vector<Eigen::VectorXd> ys;
  for (int i = -20; i <= 20; ++i) {
    Point x(1);
    x[0] = m.chi_outer * i / 20.0;
    xs.push_back(x);
  }
  for (int j = 0; j < m.ny; j += 2) {
    Eigen::VectorXd y(1);
    y[0] = torus.coord(1, j);
    ys.push_back(y);
  }
  s.margin = ellipticity_margin(s.frame, xs, ys, &s.chi).margin;
  s.p0_tilde = torus_P0_tilde(s.frame, s.chi, s.quantizer);
  s.p2_tilde = p2_tilde_symbol(s.frame, s.chi);
  s.q = build_parametrix(s.p2_tilde, s.margin);
  return s;
}

GridFunction commutator(const OperatorAssembly& p0_tilde, const Cutoff& chi0, const GridFunction& v) {
  const GridDesc& g = v.grid;
  std::vector<double> c(static_cast<std::size_t>(g.shape[0]));
  for (int i = 0; i < g.shape[0]; ++i) {
    Point x(1);
    x[0] = g.coord(0, i);
    c[i] = chi0.value(x);
  }
  const int ny = g.shape[1];
  GridFunction cv = v;
  for (std::size_t k = 0; k < v.size(); ++k) cv[k] *= c[k / ny];
  GridFunction a = p0_tilde.apply(cv);
  GridFunction b = p0_tilde.apply(v);
  for (std::size_t k = 0; k < v.size(); ++k) a[k] -= c[k / ny] * b[k];
  return a;
}

namespace {

// Zero-padded torus around a 2D grid: x period at least 4 times the cutoff
// support, y padded by a quarter of the box.
struct Padding {
  GridDesc torus;
  int off_x = 0, off_y = 0;
};

Padding pad_for(const GridDesc& g, double chi_outer) {
  const double hx = g.spacing[0], hy = g.spacing[1];
  int nx = std::max(g.shape[0] + 2, static_cast<int>(std::ceil(8.0 * chi_outer / hx)));
  nx += nx % 2;
  int ny = g.shape[1] + std::max(8, g.shape[1] / 4);
  ny += ny % 2;
  Padding p;
  p.off_x = (nx - g.shape[0]) / 2;
  p.off_y = (ny - g.shape[1]) / 2;
  p.torus = GridDesc({nx, ny}, {hx, hy}, {g.origin[0] - p.off_x * hx, g.origin[1] - p.off_y * hy});
  return p;
}

ComplexGridFunction extend(const Padding& p, const GridFunction& f) {
  ComplexGridFunction out(p.torus);
  const int nx = f.grid.shape[0], ny = f.grid.shape[1], NY = p.torus.shape[1];
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      out[static_cast<std::size_t>(i + p.off_x) * NY + (j + p.off_y)] = f[static_cast<std::size_t>(i) * ny + j];
  return out;
}

GridFunction restrict_to(const Padding& p, const ComplexGridFunction& f, const GridDesc& g) {
  GridFunction out(g);
  const int nx = g.shape[0], ny = g.shape[1], NY = p.torus.shape[1];
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      out[static_cast<std::size_t>(i) * ny + j] = f[static_cast<std::size_t>(i + p.off_x) * NY + (j + p.off_y)].real();
  return out;
}

double norm_of(const GridFunction& f) { return f.l2_norm(); }

}  // namespace

BootstrapResult bootstrap_identity_check(const BootstrapInput& in) {
  const GridDesc& g = in.phi.grid;
  if (!g.same_as(in.p0_tilde.grid)) throw Error(ErrorCode::InvalidArgument, "phi not on the assembly grid");
  const int nx = g.shape[0], ny = g.shape[1];
  BootstrapResult r;
  r.h = g.spacing[0];
  std::vector<double> c0(nx), c(nx);
  for (int i = 0; i < nx; ++i) {
    Point x(1);
    x[0] = g.coord(0, i);
    c0[i] = in.chi0.value(x);
    c[i] = in.chi.value(x);
  }
  GridFunction lhs = in.phi, chi_phi = in.phi;
  for (std::size_t k = 0; k < lhs.size(); ++k) {
    lhs[k] *= c0[k / ny];
    chi_phi[k] *= c[k / ny];
  }
  r.lhs_norm = norm_of(lhs);
  if (r.lhs_norm == 0.0) return r;

  Padding pad = pad_for(g, in.chi.bump.outer_radius());
  TorusQuantizer tq(pad.torus, 0.0, 1e-12);
  tq = TorusQuantizer(pad.torus, tq.nyquist(), 1e-12);
  Symbol q = build_parametrix(p2_tilde_symbol(in.p0_tilde), in.margin);
  auto Q = [&](const GridFunction& f) { return restrict_to(pad, tq.quantize(q, extend(pad, f)), g); };

  // -R chi0 phi = chi0 phi - Q P0~ chi0 phi
  GridFunction qp = Q(in.p0_tilde.apply(lhs));
  GridFunction src = commutator(in.p0_tilde, in.chi0, chi_phi);
  for (std::size_t k = 0; k < src.size(); ++k) src[k] += (in.e_minus_v0[k] - in.w[k]) * lhs[k];
  GridFunction qs = Q(src);
  GridFunction rhs(g), diff(g);
  for (std::size_t k = 0; k < rhs.size(); ++k) {
    rhs[k] = lhs[k] - qp[k] + qs[k];
    diff[k] = lhs[k] - rhs[k];
  }
  r.rhs_norm = norm_of(rhs);
  r.mismatch = norm_of(diff) / r.lhs_norm;
  return r;
}

BootstrapInput bootstrap_input(const FiberSolution& s, const std::vector<Cutoff>& cutoffs) {
  if (cutoffs.size() < 2) throw Error(ErrorCode::InvalidArgument, "bootstrap needs two nested cutoffs");
  BootstrapInput in;
  in.phi = twisted_fiber_function(s);
  const GridDesc& g = in.phi.grid;
  TwistFrame fr = s.model.frame(s.h);
  in.chi = cutoffs[0];
  in.chi0 = cutoffs[1];
  in.p0_tilde = assemble_P0_tilde(fr, g, in.chi);
  std::vector<Point> xs;
  std::vector<Eigen::VectorXd> ys;
  for (int i = 0; i < g.shape[0]; ++i) xs.push_back(Point::Constant(1, g.coord(0, i)));
  for (int j = 0; j < g.shape[1]; ++j) ys.push_back(Eigen::VectorXd::Constant(1, g.coord(1, j)));
  in.margin = ellipticity_margin(fr, xs, ys, &in.chi).margin;
  MolecularSystem sys = s.model.system();
  std::vector<double> total = fiber_model_potential(fr, sys, g, s.pair.E);
  const int nx = g.shape[0], ny = g.shape[1];
  in.e_minus_v0.assign(g.size(), 0.0);
  in.w.assign(g.size(), 0.0);
  for (int i = 0; i < nx; ++i) {
    double x = g.coord(0, i);
    double v0 = sys.E0;
    for (const auto& nuc : sys.nuclei) v0 -= nuc.Z * std::pow(std::abs(x - nuc.R[0]), -sys.a);
    for (int j = 0; j < ny; ++j) {
      std::size_t k = static_cast<std::size_t>(i) * ny + j;
      in.e_minus_v0[k] = s.pair.E - v0;
      in.w[k] = total[k] + in.e_minus_v0[k];
    }
  }
  return in;
}

}  // namespace twistreg
