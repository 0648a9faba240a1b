#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace twistreg {

// Uniform rectangular grid; row-major with the last axis fastest.
struct GridDesc {
  std::vector<int> shape;
  std::vector<double> spacing;
  std::vector<double> origin;

  GridDesc() = default;
  GridDesc(std::vector<int> shape, std::vector<double> spacing, std::vector<double> origin);

  int dim() const { return static_cast<int>(shape.size()); }
  std::size_t size() const;
  double cell_volume() const;
  double coord(int axis, int i) const { return origin[axis] + i * spacing[axis]; }
  std::size_t stride(int axis) const;
  std::size_t flat(const int* idx) const;
  void unflat(std::size_t k, int* idx) const;
  bool same_as(const GridDesc& o) const;
  std::string describe() const;
};

struct GridFunction {
  GridDesc grid;
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(GridDesc g, double fill = 0.0);

  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }
  std::size_t size() const { return values.size(); }

  double l2_norm() const;
  double sup_norm() const;
  double inner(const GridFunction& o) const;
  // Discrete W^{s,2} norm for s in {0,1,2}: forward differences for first
  // derivatives, standard second differences (and centered mixed ones) for s = 2.
  double sobolev_norm(int s) const;

  // Flat little-endian float64 array in <base>.bin plus a text header <base>.hdr.
  void write(const std::string& base) const;
  static GridFunction read(const std::string& base);
  // CSV export: columns are the coordinates followed by the value; 1D and 2D only.
  void write_csv(const std::string& path) const;
};

// Tensor-product cubic (4-point Lagrange) interpolation, zero outside the grid.
double cubic_interpolate(const GridFunction& f, const double* point);

// 4-point Lagrange weights for nodes at offsets -1, 0, 1, 2 and fractional position t.
void cubic_weights(double t, double w[4]);

}  // namespace twistreg
