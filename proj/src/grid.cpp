#include "twistreg/grid.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "twistreg/errors.hpp"

namespace twistreg {

GridDesc::GridDesc(std::vector<int> s, std::vector<double> h, std::vector<double> o)
    : shape(std::move(s)), spacing(std::move(h)), origin(std::move(o)) {
  if (shape.empty() || shape.size() != spacing.size() || shape.size() != origin.size())
    throw Error(ErrorCode::InvalidArgument, "grid descriptor dimensions disagree");
  for (std::size_t a = 0; a < shape.size(); ++a)
    if (shape[a] < 1 || !(spacing[a] > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid shape or spacing");
}

std::size_t GridDesc::size() const {
  std::size_t n = 1;
  for (int s : shape) n *= static_cast<std::size_t>(s);
  return n;
}

double GridDesc::cell_volume() const {
  double v = 1.0;
  for (double h : spacing) v *= h;
  return v;
}

std::size_t GridDesc::stride(int axis) const {
  std::size_t s = 1;
  for (int a = dim() - 1; a > axis; --a) s *= static_cast<std::size_t>(shape[a]);
  return s;
}

std::size_t GridDesc::flat(const int* idx) const {
  std::size_t k = 0;
  for (int a = 0; a < dim(); ++a) k = k * shape[a] + idx[a];
  return k;
}

void GridDesc::unflat(std::size_t k, int* idx) const {
  for (int a = dim() - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(k % shape[a]);
    k /= shape[a];
  }
}

bool GridDesc::same_as(const GridDesc& o) const {
  if (shape != o.shape) return false;
  for (int a = 0; a < dim(); ++a) {
    if (std::abs(spacing[a] - o.spacing[a]) > 1e-12 * spacing[a]) return false;
    if (std::abs(origin[a] - o.origin[a]) > 1e-12 * (1.0 + std::abs(origin[a]))) return false;
  }
  return true;
}

std::string GridDesc::describe() const {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int a = 0; a < dim(); ++a) {
    if (a) os << " x ";
    os << shape[a] << "@" << spacing[a] << "+" << origin[a];
  }
  return os.str();
}

GridFunction::GridFunction(GridDesc g, double fill) : grid(std::move(g)), values(grid.size(), fill) {}

double GridFunction::l2_norm() const { return std::sqrt(inner(*this)); }

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double GridFunction::inner(const GridFunction& o) const {
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) s += values[k] * o.values[k];
  return s * grid.cell_volume();
}

double GridFunction::sobolev_norm(int s) const {
  if (s < 0 || s > 2) throw Error(ErrorCode::InvalidArgument, "sobolev order must be 0, 1 or 2");
  const int d = grid.dim();
  double total = 0.0;
  for (double v : values) total += v * v;
  std::vector<int> idx(d);
  auto at = [&](std::vector<int> i) -> double {
    for (int a = 0; a < d; ++a)
      if (i[a] < 0 || i[a] >= grid.shape[a]) return 0.0;
    return values[grid.flat(i.data())];
  };
  if (s >= 1) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      grid.unflat(k, idx.data());
      for (int a = 0; a < d; ++a) {
        auto j = idx;
        j[a] += 1;
        double g = (at(j) - values[k]) / grid.spacing[a];
        total += g * g;
      }
    }
    // boundary faces towards the zero extension at index -1
    for (std::size_t k = 0; k < values.size(); ++k) {
      grid.unflat(k, idx.data());
      for (int a = 0; a < d; ++a)
        if (idx[a] == 0) {
          double g = values[k] / grid.spacing[a];
          total += g * g;
        }
    }
  }
  if (s >= 2) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      grid.unflat(k, idx.data());
      for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
          double dd;
          if (a == b) {
            auto p = idx, m = idx;
            p[a] += 1;
            m[a] -= 1;
            dd = (at(p) - 2.0 * values[k] + at(m)) / (grid.spacing[a] * grid.spacing[a]);
          } else {
            auto pp = idx, pm = idx, mp = idx, mm = idx;
            pp[a] += 1, pp[b] += 1;
            pm[a] += 1, pm[b] -= 1;
            mp[a] -= 1, mp[b] += 1;
            mm[a] -= 1, mm[b] -= 1;
            dd = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * grid.spacing[a] * grid.spacing[b]);
          }
          total += dd * dd;
        }
      }
    }
  }
  return std::sqrt(total * grid.cell_volume());
}

void GridFunction::write(const std::string& base) const {
  {
    std::ofstream bin(base + ".bin", std::ios::binary);
    if (!bin) throw Error(ErrorCode::InvalidArgument, "cannot open " + base + ".bin");
    bin.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  std::ofstream hdr(base + ".hdr");
  if (!hdr) throw Error(ErrorCode::InvalidArgument, "cannot open " + base + ".hdr");
  hdr << std::setprecision(17);
  hdr << "format twistreg-grid 1\n";
  hdr << "dtype float64-le\n";
  hdr << "order row-major\n";
  hdr << "dim " << grid.dim() << "\n";
  hdr << "shape";
  for (int s : grid.shape) hdr << ' ' << s;
  hdr << "\nspacing";
  for (double h : grid.spacing) hdr << ' ' << h;
  hdr << "\norigin";
  for (double o : grid.origin) hdr << ' ' << o;
  hdr << "\n";
}

GridFunction GridFunction::read(const std::string& base) {
  std::ifstream hdr(base + ".hdr");
  if (!hdr) throw Error(ErrorCode::InvalidArgument, "cannot open " + base + ".hdr");
  std::vector<int> shape;
  std::vector<double> spacing, origin;
  std::string line;
  while (std::getline(hdr, line)) {
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "shape") {
      int v;
      while (is >> v) shape.push_back(v);
    } else if (key == "spacing") {
      double v;
      while (is >> v) spacing.push_back(v);
    } else if (key == "origin") {
      double v;
      while (is >> v) origin.push_back(v);
    }
  }
  GridFunction f(GridDesc(shape, spacing, origin));
  std::ifstream bin(base + ".bin", std::ios::binary);
  bin.read(reinterpret_cast<char*>(f.values.data()), static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  if (!bin) throw Error(ErrorCode::InvalidArgument, "short read from " + base + ".bin");
  return f;
}

void GridFunction::write_csv(const std::string& path) const {
  if (grid.dim() > 2) throw Error(ErrorCode::InvalidArgument, "CSV export supports 1D and 2D grids only");
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  os << std::setprecision(17);
  os << (grid.dim() == 1 ? "x,value\n" : "x,y,value\n");
  int idx[2];
  for (std::size_t k = 0; k < values.size(); ++k) {
    grid.unflat(k, idx);
    for (int a = 0; a < grid.dim(); ++a) os << grid.coord(a, idx[a]) << ',';
    os << values[k] << '\n';
  }
}

void cubic_weights(double t, double w[4]) {
  w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
  w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
  w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
}

double cubic_interpolate(const GridFunction& f, const double* point) {
  const GridDesc& g = f.grid;
  const int d = g.dim();
  if (d > 3) throw Error(ErrorCode::InvalidArgument, "cubic interpolation supports up to 3 axes");
  int base[3] = {0, 0, 0};
  double w[3][4];
  for (int a = 0; a < d; ++a) {
    double s = (point[a] - g.origin[a]) / g.spacing[a];
    double fl = std::floor(s);
    double t = s - fl;
    // snap values that sit on a node up to rounding
    if (t < 1e-13) t = 0.0;
    if (t > 1.0 - 1e-13) {
      t = 0.0;
      fl += 1.0;
    }
    if (fl < -4.0 || fl > g.shape[a] + 3.0) return 0.0;
    base[a] = static_cast<int>(fl) - 1;
    cubic_weights(t, w[a]);
  }
  double sum = 0.0;
  int idx[3];
  const int n1 = d > 1 ? 4 : 1, n2 = d > 2 ? 4 : 1;
  for (int i = 0; i < 4; ++i) {
    idx[0] = base[0] + i;
    if (idx[0] < 0 || idx[0] >= g.shape[0] || w[0][i] == 0.0) continue;
    for (int j = 0; j < n1; ++j) {
      double wij = w[0][i];
      if (d > 1) {
        idx[1] = base[1] + j;
        if (idx[1] < 0 || idx[1] >= g.shape[1] || w[1][j] == 0.0) continue;
        wij *= w[1][j];
      }
      for (int k = 0; k < n2; ++k) {
        double wijk = wij;
        if (d > 2) {
          idx[2] = base[2] + k;
          if (idx[2] < 0 || idx[2] >= g.shape[2] || w[2][k] == 0.0) continue;
          wijk *= w[2][k];
        }
        sum += wijk * f.values[g.flat(idx)];
      }
    }
  }
  return sum;
}

}  // namespace twistreg
