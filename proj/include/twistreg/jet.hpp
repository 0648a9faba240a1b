#pragma once

#include <memory>
#include <vector>

namespace twistreg {

// Monomial bookkeeping shared by all jets with the same (nvars, order).
struct JetLayout {
  int nvars = 0;
  int order = 0;
  std::vector<std::vector<int>> exponents;  // graded ordering, constant term first
  std::vector<int> degree;
  std::vector<int> dense_index;             // mixed-radix key -> monomial index or -1
  std::vector<std::vector<std::pair<int, int>>> products;  // products[k] = {(i, j): m_i + m_j = m_k}

  int size() const { return static_cast<int>(exponents.size()); }
  int index(const std::vector<int>& alpha) const;
  static std::shared_ptr<const JetLayout> get(int nvars, int order);
};

// Truncated multivariate Taylor polynomial: coefficient c_alpha = D^alpha f / alpha!.
class Jet {
 public:
  Jet() = default;
  Jet(int nvars, int order, double value = 0.0);
  explicit Jet(std::shared_ptr<const JetLayout> layout, double value = 0.0);

  static Jet variable(int nvars, int order, int var, double value);

  int nvars() const { return layout_->nvars; }
  int order() const { return layout_->order; }
  const JetLayout& layout() const { return *layout_; }
  const std::shared_ptr<const JetLayout>& layout_ptr() const { return layout_; }

  double value() const { return c_[0]; }
  double coeff(const std::vector<int>& alpha) const;
  double derivative(const std::vector<int>& alpha) const;
  // Univariate shortcut: n-th derivative along variable 0.
  double derivative(int n) const;
  double& operator[](int k) { return c_[k]; }
  double operator[](int k) const { return c_[k]; }
  const std::vector<double>& coefficients() const { return c_; }

  // Jet of the partial derivative along `var`, one order lower.
  Jet partial(int var) const;
  Jet truncate(int order) const;
  // Jet of the same function re-expressed in a layout with more variables;
  // variable v of this jet becomes variable map[v].
  Jet embed(int nvars, const std::vector<int>& map) const;

  Jet& operator+=(const Jet& o);
  Jet& operator-=(const Jet& o);
  Jet& operator*=(const Jet& o);
  Jet& operator/=(const Jet& o);
  Jet& operator+=(double s);
  Jet& operator-=(double s);
  Jet& operator*=(double s);
  Jet& operator/=(double s);

 private:
  std::shared_ptr<const JetLayout> layout_;
  std::vector<double> c_;
};

Jet operator-(const Jet& a);
Jet operator+(Jet a, const Jet& b);
Jet operator-(Jet a, const Jet& b);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet operator+(Jet a, double s);
Jet operator+(double s, Jet a);
Jet operator-(Jet a, double s);
Jet operator-(double s, const Jet& a);
Jet operator*(Jet a, double s);
Jet operator*(double s, Jet a);
Jet operator/(Jet a, double s);
Jet operator/(double s, const Jet& a);

// f(u) where taylor[k] = f^{(k)}(u0)/k! at u0 = u.value().
Jet compose(const Jet& u, const std::vector<double>& taylor);
Jet exp(const Jet& u);
Jet log(const Jet& u);
Jet sqrt(const Jet& u);
Jet pow(const Jet& u, double p);
Jet reciprocal(const Jet& u);
// Logistic 1/(1+e^{-u}); derivatives are evaluated from sigma(u) and sigma(-u)
// separately so both tails keep full relative accuracy.
Jet logistic(const Jet& u);

// Taylor coefficients of the logistic function at v up to `order`.
std::vector<double> logistic_taylor(double v, int order);

}  // namespace twistreg
