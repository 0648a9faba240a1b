#include "twistreg/mollifier.hpp"

#include <cmath>

namespace twistreg {

double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return logistic_taylor(1.0 / (1.0 - t) - 1.0 / t, 0)[0];
}

Jet smooth_step(const Jet& t) {
  // Within 1/600 of an endpoint every derivative is below exp(-600) times a
  // power of 600, so the step is constant to double precision.
  constexpr double flat = 1.0 / 600.0;
  double t0 = t.value();
  if (t0 <= flat) return Jet(t.layout_ptr(), 0.0);
  if (t0 >= 1.0 - flat) return Jet(t.layout_ptr(), 1.0);
  return logistic(reciprocal(1.0 - t) - reciprocal(t));
}

std::vector<double> smooth_step_derivatives(double t, int n) {
  Jet j = smooth_step(Jet::variable(1, n, 0, t));
  std::vector<double> d(n + 1);
  for (int k = 0; k <= n; ++k) d[k] = j.derivative(k);
  return d;
}

SlopeMax smooth_step_max_slope() {
  const int n = 4000;
  double best_t = 0.5, best = 0.0;
  for (int i = 1; i < n; ++i) {
    double t = static_cast<double>(i) / n;
    double s = smooth_step_derivatives(t, 1)[1];
    if (s > best) {
      best = s;
      best_t = t;
    }
  }
  double lo = best_t - 1.0 / n, hi = best_t + 1.0 / n;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (smooth_step_derivatives(mid, 2)[2] > 0.0) lo = mid;
    else hi = mid;
  }
  double t = 0.5 * (lo + hi);
  return {t, smooth_step_derivatives(t, 1)[1]};
}

}  // namespace twistreg
