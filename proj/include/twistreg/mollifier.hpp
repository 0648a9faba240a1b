#pragma once

#include <vector>

#include "twistreg/jet.hpp"

namespace twistreg {

// Flat-exponential smooth step: 0 for t <= 0, 1 for t >= 1,
// 1 / (1 + exp(1/t - 1/(1-t))) in between.
double smooth_step(double t);
Jet smooth_step(const Jet& t);
// S^{(k)}(t) for k = 0..n.
std::vector<double> smooth_step_derivatives(double t, int n);
// sup_t S'(t) and its location, from a dense scan refined by bisection on S''.
struct SlopeMax {
  double t;
  double slope;
};
SlopeMax smooth_step_max_slope();

}  // namespace twistreg
