#include "twistreg/jet.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "twistreg/errors.hpp"

namespace twistreg {

namespace {

int dense_key(const std::vector<int>& e, int order) {
  int key = 0, base = 1;
  for (int v : e) {
    key += v * base;
    base *= order + 1;
  }
  return key;
}

void enumerate(int nvars, int deg, int var, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (var == nvars - 1) {
    cur[var] = deg;
    out.push_back(cur);
    return;
  }
  for (int k = deg; k >= 0; --k) {
    cur[var] = k;
    enumerate(nvars, deg - k, var + 1, cur, out);
  }
}

std::shared_ptr<const JetLayout> build_layout(int nvars, int order) {
  auto L = std::make_shared<JetLayout>();
  L->nvars = nvars;
  L->order = order;
  std::vector<int> cur(nvars, 0);
  for (int d = 0; d <= order; ++d) enumerate(nvars, d, 0, cur, L->exponents);
  int dense = 1;
  for (int v = 0; v < nvars; ++v) dense *= order + 1;
  L->dense_index.assign(dense, -1);
  for (int k = 0; k < L->size(); ++k) {
    int s = 0;
    for (int e : L->exponents[k]) s += e;
    L->degree.push_back(s);
    L->dense_index[dense_key(L->exponents[k], order)] = k;
  }
  L->products.resize(L->size());
  std::vector<int> sum(nvars);
  for (int i = 0; i < L->size(); ++i) {
    for (int j = 0; j < L->size(); ++j) {
      if (L->degree[i] + L->degree[j] > order) continue;
      for (int v = 0; v < nvars; ++v) sum[v] = L->exponents[i][v] + L->exponents[j][v];
      L->products[L->dense_index[dense_key(sum, order)]].emplace_back(i, j);
    }
  }
  return L;
}

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

}  // namespace

int JetLayout::index(const std::vector<int>& alpha) const {
  if (static_cast<int>(alpha.size()) != nvars) throw Error(ErrorCode::InvalidArgument, "multi-index dimension");
  int s = 0;
  for (int a : alpha) {
    if (a < 0) throw Error(ErrorCode::InvalidArgument, "negative multi-index");
    s += a;
  }
  if (s > order) return -1;
  return dense_index[dense_key(alpha, order)];
}

std::shared_ptr<const JetLayout> JetLayout::get(int nvars, int order) {
  if (nvars < 1 || order < 0) throw Error(ErrorCode::InvalidArgument, "jet layout");
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetLayout>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{nvars, order}];
  if (!slot) slot = build_layout(nvars, order);
  return slot;
}

Jet::Jet(int nvars, int order, double value) : Jet(JetLayout::get(nvars, order), value) {}

Jet::Jet(std::shared_ptr<const JetLayout> layout, double value)
    : layout_(std::move(layout)), c_(layout_->size(), 0.0) {
  c_[0] = value;
}

Jet Jet::variable(int nvars, int order, int var, double value) {
  Jet j(nvars, order, value);
  if (order >= 1) {
    std::vector<int> e(nvars, 0);
    e[var] = 1;
    j.c_[j.layout_->index(e)] = 1.0;
  }
  return j;
}

double Jet::coeff(const std::vector<int>& alpha) const {
  int k = layout_->index(alpha);
  if (k < 0) throw Error(ErrorCode::InvalidArgument, "multi-index exceeds jet order");
  return c_[k];
}

double Jet::derivative(const std::vector<int>& alpha) const {
  double f = 1.0;
  for (int a : alpha) f *= factorial(a);
  return coeff(alpha) * f;
}

double Jet::derivative(int n) const {
  std::vector<int> alpha(nvars(), 0);
  alpha[0] = n;
  return derivative(alpha);
}

Jet Jet::partial(int var) const {
  if (order() < 1) return Jet(nvars(), 0, 0.0);
  Jet out(nvars(), order() - 1);
  const auto& L = out.layout();
  std::vector<int> e;
  for (int k = 0; k < L.size(); ++k) {
    e = L.exponents[k];
    e[var] += 1;
    out.c_[k] = e[var] * c_[layout_->index(e)];
  }
  return out;
}

Jet Jet::truncate(int order) const {
  if (order >= this->order()) return *this;
  Jet out(nvars(), order);
  const auto& L = out.layout();
  for (int k = 0; k < L.size(); ++k) out.c_[k] = c_[layout_->index(L.exponents[k])];
  return out;
}

Jet Jet::embed(int nv, const std::vector<int>& map) const {
  Jet out(nv, order());
  std::vector<int> e(nv);
  for (int k = 0; k < layout_->size(); ++k) {
    std::fill(e.begin(), e.end(), 0);
    for (int v = 0; v < nvars(); ++v) e[map[v]] += layout_->exponents[k][v];
    out.c_[out.layout_->index(e)] = c_[k];
  }
  return out;
}

namespace {
void check_same(const Jet& a, const Jet& b) {
  if (a.layout_ptr() != b.layout_ptr()) throw Error(ErrorCode::InvalidArgument, "jet layout mismatch");
}
}  // namespace

Jet& Jet::operator+=(const Jet& o) {
  check_same(*this, o);
  for (size_t k = 0; k < c_.size(); ++k) c_[k] += o.c_[k];
  return *this;
}
Jet& Jet::operator-=(const Jet& o) {
  check_same(*this, o);
  for (size_t k = 0; k < c_.size(); ++k) c_[k] -= o.c_[k];
  return *this;
}
Jet& Jet::operator*=(const Jet& o) { return *this = *this * o; }
Jet& Jet::operator/=(const Jet& o) { return *this = *this / o; }
Jet& Jet::operator+=(double s) {
  c_[0] += s;
  return *this;
}
Jet& Jet::operator-=(double s) {
  c_[0] -= s;
  return *this;
}
Jet& Jet::operator*=(double s) {
  for (double& v : c_) v *= s;
  return *this;
}
Jet& Jet::operator/=(double s) {
  for (double& v : c_) v /= s;
  return *this;
}

Jet operator-(const Jet& a) { return a * -1.0; }
Jet operator+(Jet a, const Jet& b) { return a += b; }
Jet operator-(Jet a, const Jet& b) { return a -= b; }
Jet operator*(const Jet& a, const Jet& b) {
  check_same(a, b);
  Jet out(a.layout_ptr(), 0.0);
  const auto& P = a.layout().products;
  for (size_t k = 0; k < P.size(); ++k) {
    double s = 0.0;
    for (const auto& [i, j] : P[k]) s += a[i] * b[j];
    out[static_cast<int>(k)] = s;
  }
  return out;
}
Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
Jet operator+(Jet a, double s) { return a += s; }
Jet operator+(double s, Jet a) { return a += s; }
Jet operator-(Jet a, double s) { return a -= s; }
Jet operator-(double s, const Jet& a) { return (-a) += s; }
Jet operator*(Jet a, double s) { return a *= s; }
Jet operator*(double s, Jet a) { return a *= s; }
Jet operator/(Jet a, double s) { return a /= s; }
Jet operator/(double s, const Jet& a) { return reciprocal(a) * s; }

Jet compose(const Jet& u, const std::vector<double>& taylor) {
  Jet delta = u;
  delta[0] = 0.0;
  int n = std::min<int>(u.order(), static_cast<int>(taylor.size()) - 1);
  Jet out(u.layout_ptr(), taylor[n]);
  for (int k = n - 1; k >= 0; --k) {
    out = out * delta;
    out[0] += taylor[k];
  }
  return out;
}

Jet exp(const Jet& u) {
  std::vector<double> t(u.order() + 1);
  double e = std::exp(u.value());
  for (int k = 0; k <= u.order(); ++k) t[k] = e / factorial(k);
  return compose(u, t);
}

Jet log(const Jet& u) {
  double u0 = u.value();
  if (!(u0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "log of non-positive jet");
  std::vector<double> t(u.order() + 1);
  t[0] = std::log(u0);
  for (int k = 1; k <= u.order(); ++k) t[k] = ((k % 2) ? 1.0 : -1.0) / (k * std::pow(u0, k));
  return compose(u, t);
}

Jet pow(const Jet& u, double p) {
  double u0 = u.value();
  if (!(u0 > 0.0) && p != std::floor(p)) throw Error(ErrorCode::InvalidArgument, "fractional power of non-positive jet");
  std::vector<double> t(u.order() + 1);
  double binom = 1.0;
  for (int k = 0; k <= u.order(); ++k) {
    t[k] = binom * std::pow(u0, p - k);
    binom *= (p - k) / (k + 1);
  }
  return compose(u, t);
}

Jet sqrt(const Jet& u) { return pow(u, 0.5); }

Jet reciprocal(const Jet& u) {
  double u0 = u.value();
  if (u0 == 0.0) throw Error(ErrorCode::InvalidArgument, "reciprocal of zero jet");
  std::vector<double> t(u.order() + 1);
  double r = 1.0 / u0, pk = r;
  for (int k = 0; k <= u.order(); ++k) {
    t[k] = (k % 2 ? -pk : pk);
    pk *= r;
  }
  return compose(u, t);
}

std::vector<double> logistic_taylor(double v, int order) {
  double p, q;
  if (v >= 0) {
    double e = std::exp(-v);
    p = 1.0 / (1.0 + e);
    q = e / (1.0 + e);
  } else {
    double e = std::exp(v);
    p = e / (1.0 + e);
    q = 1.0 / (1.0 + e);
  }
  // d^k sigma / dv^k = sum_i c[i] p^i q^(k+1-i), using p' = pq and q' = -pq.
  std::vector<double> out(order + 1);
  std::vector<double> c = {0.0, 1.0};
  double kfact = 1.0;
  for (int k = 0; k <= order; ++k) {
    if (k > 0) kfact *= k;
    double s = 0.0;
    for (int i = 1; i <= k + 1; ++i) {
      if (c[i] == 0.0) continue;
      s += c[i] * std::pow(p, i) * std::pow(q, k + 1 - i);
    }
    out[k] = s / kfact;
    std::vector<double> next(k + 3, 0.0);
    for (int i = 0; i <= k + 1; ++i) {
      int j = k + 1 - i;
      next[i] += i * c[i];
      next[i + 1] -= j * c[i];
    }
    c = std::move(next);
  }
  return out;
}

Jet logistic(const Jet& u) { return compose(u, logistic_taylor(u.value(), u.order())); }

}  // namespace twistreg
