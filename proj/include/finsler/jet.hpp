#pragma once

// Truncated multivariate Taylor arithmetic ("jets"). A Jet stores the Taylor
// coefficients of a function of `nvars` variables up to a total degree
// `order`, so arithmetic on jets propagates exact mixed partial derivatives
// through any composite expression. Dimensions stay small here (nvars <= 8,
// order <= 4), so dense storage with a precomputed product table is cheap.

#include "finsler/common.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace finsler {

inline constexpr int kJetMaxVars = 8;
inline constexpr int kJetMaxOrder = 6;

using JetExponents = std::array<std::uint8_t, kJetMaxVars>;

class JetTable {
 public:
  int nvars = 0;
  int order = 0;
  int size = 0;
  std::vector<JetExponents> exps;   // graded ordering, exps[0] = 0
  std::vector<std::int32_t> prod;   // size*size; index of exps[i]+exps[j], -1 if above order
  std::vector<double> factorial;    // alpha! per entry
  std::vector<int> degree;          // |alpha| per entry

  // Index of a multi-index, -1 if absent.
  int index_of(const JetExponents& e) const {
    auto it = lookup_.find(e);
    return it == lookup_.end() ? -1 : it->second;
  }

  int var_index(int var) const { return var_index_[static_cast<size_t>(var)]; }

  static std::shared_ptr<const JetTable> get(int nvars, int order);

 private:
  std::map<JetExponents, int> lookup_;
  std::vector<int> var_index_;

  static void enumerate(int nvars, int order, JetTable& t);
};

inline void JetTable::enumerate(int nvars, int order, JetTable& t) {
  t.nvars = nvars;
  t.order = order;
  // All multi-indices with |alpha| = d, in lexicographic order, per degree d.
  std::vector<JetExponents> all;
  JetExponents cur{};
  auto rec = [&](auto&& self, int var, int remaining) -> void {
    if (var == nvars - 1) {
      cur[static_cast<size_t>(var)] = static_cast<std::uint8_t>(remaining);
      all.push_back(cur);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      cur[static_cast<size_t>(var)] = static_cast<std::uint8_t>(k);
      self(self, var + 1, remaining - k);
    }
  };
  for (int d = 0; d <= order; ++d) {
    if (nvars == 0) {
      if (d == 0) all.push_back(JetExponents{});
      continue;
    }
    rec(rec, 0, d);
  }
  t.exps = std::move(all);
  t.size = static_cast<int>(t.exps.size());
  t.factorial.resize(static_cast<size_t>(t.size));
  t.degree.resize(static_cast<size_t>(t.size));
  for (int i = 0; i < t.size; ++i) {
    double f = 1.0;
    int deg = 0;
    for (int v = 0; v < nvars; ++v) {
      int k = t.exps[static_cast<size_t>(i)][static_cast<size_t>(v)];
      deg += k;
      for (int j = 2; j <= k; ++j) f *= j;
    }
    t.factorial[static_cast<size_t>(i)] = f;
    t.degree[static_cast<size_t>(i)] = deg;
    t.lookup_[t.exps[static_cast<size_t>(i)]] = i;
  }
  t.var_index_.resize(static_cast<size_t>(nvars));
  for (int v = 0; v < nvars; ++v) {
    JetExponents e{};
    e[static_cast<size_t>(v)] = 1;
    t.var_index_[static_cast<size_t>(v)] = t.index_of(e);
  }
  t.prod.assign(static_cast<size_t>(t.size) * static_cast<size_t>(t.size), -1);
  for (int i = 0; i < t.size; ++i) {
    for (int j = 0; j < t.size; ++j) {
      if (t.degree[static_cast<size_t>(i)] + t.degree[static_cast<size_t>(j)] > order) continue;
      JetExponents s{};
      for (int v = 0; v < nvars; ++v)
        s[static_cast<size_t>(v)] = static_cast<std::uint8_t>(
            t.exps[static_cast<size_t>(i)][static_cast<size_t>(v)] +
            t.exps[static_cast<size_t>(j)][static_cast<size_t>(v)]);
      t.prod[static_cast<size_t>(i) * static_cast<size_t>(t.size) + static_cast<size_t>(j)] =
          t.index_of(s);
    }
  }
}

inline std::shared_ptr<const JetTable> JetTable::get(int nvars, int order) {
  if (nvars < 0 || nvars > kJetMaxVars) throw NumericalError("jet variable count out of range");
  if (order < 0 || order > kJetMaxOrder) throw NumericalError("jet order out of range");
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::shared_ptr<const JetTable>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(nvars, order);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<JetTable>();
  enumerate(nvars, order, *t);
  cache[key] = t;
  return t;
}

class Jet {
 public:
  Jet() = default;

  static Jet constant(double v, std::shared_ptr<const JetTable> t) {
    Jet j;
    j.tab_ = std::move(t);
    j.c_.assign(static_cast<size_t>(j.tab_->size), 0.0);
    j.c_[0] = v;
    return j;
  }

  static Jet variable(double v, int var, std::shared_ptr<const JetTable> t) {
    Jet j = constant(v, std::move(t));
    j.c_[static_cast<size_t>(j.tab_->var_index(var))] = 1.0;
    return j;
  }

  const JetTable& table() const { return *tab_; }
  std::shared_ptr<const JetTable> table_ptr() const { return tab_; }
  double value() const { return c_.empty() ? 0.0 : c_[0]; }
  const std::vector<double>& coeffs() const { return c_; }

  // alpha-th Taylor coefficient; the partial derivative is alpha! * coeff.
  double coeff(const JetExponents& e) const {
    int i = tab_->index_of(e);
    if (i < 0) throw NumericalError("jet coefficient index above truncation order");
    return c_[static_cast<size_t>(i)];
  }

  double derivative(const JetExponents& e) const {
    int i = tab_->index_of(e);
    if (i < 0) throw NumericalError("jet derivative above truncation order");
    return c_[static_cast<size_t>(i)] * tab_->factorial[static_cast<size_t>(i)];
  }

  Jet& operator+=(const Jet& o) {
    align(o);
    for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    align(o);
    for (size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }
  Jet& operator-=(double s) {
    c_[0] -= s;
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& x : c_) x *= s;
    return *this;
  }
  Jet& operator/=(double s) {
    if (s == 0.0) throw DomainError("division by zero");
    for (double& x : c_) x /= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double b) { return a += b; }
  friend Jet operator+(double a, Jet b) { return b += a; }
  friend Jet operator-(Jet a, double b) { return a -= b; }
  friend Jet operator-(double a, const Jet& b) { return (-b) + a; }
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double a, Jet b) { return b *= a; }
  friend Jet operator/(Jet a, double b) { return a /= b; }

  Jet operator-() const {
    Jet r = *this;
    for (double& x : r.c_) x = -x;
    return r;
  }
  Jet operator+() const { return *this; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check_same(b);
    const JetTable& t = *a.tab_;
    Jet r = Jet::constant(0.0, a.tab_);
    const std::int32_t* prod = t.prod.data();
    for (int i = 0; i < t.size; ++i) {
      double ai = a.c_[static_cast<size_t>(i)];
      if (ai == 0.0) continue;
      const std::int32_t* row = prod + static_cast<size_t>(i) * static_cast<size_t>(t.size);
      for (int j = 0; j < t.size; ++j) {
        std::int32_t k = row[j];
        if (k < 0) continue;
        r.c_[static_cast<size_t>(k)] += ai * b.c_[static_cast<size_t>(j)];
      }
    }
    return r;
  }

  friend Jet operator/(const Jet& a, const Jet& b);

  // f(u) for a univariate f given its scaled derivatives at the primal value,
  // dcoef[k] = f^(k)(u0)/k!. Evaluates sum_k dcoef[k] (u - u0)^k by Horner.
  friend Jet compose(const Jet& u, const std::vector<double>& dcoef) {
    Jet n = u;
    n.c_[0] = 0.0;
    Jet r = Jet::constant(dcoef.back(), u.tab_);
    for (int k = static_cast<int>(dcoef.size()) - 2; k >= 0; --k) {
      r = r * n;
      r.c_[0] += dcoef[static_cast<size_t>(k)];
    }
    return r;
  }

 private:
  std::shared_ptr<const JetTable> tab_;
  std::vector<double> c_;

  void check_same(const Jet& o) const {
    if (tab_.get() != o.tab_.get()) throw NumericalError("jet table mismatch");
  }
  void align(const Jet& o) { check_same(o); }
};

inline double primal_of(const Jet& j) { return j.value(); }

namespace detail {
inline std::vector<double> jet_dcoef(const Jet& u) {
  return std::vector<double>(static_cast<size_t>(u.table().order) + 1, 0.0);
}
}  // namespace detail

inline Jet recip(const Jet& u) {
  double u0 = u.value();
  if (u0 == 0.0) throw DomainError("division by zero");
  auto d = detail::jet_dcoef(u);
  double p = 1.0 / u0;
  for (size_t k = 0; k < d.size(); ++k) {
    d[k] = p;
    p = -p / u0;
  }
  return compose(u, d);
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * recip(b); }

inline Jet sqrt(const Jet& u) {
  double u0 = u.value();
  if (u0 <= 0.0) throw DomainError("sqrt of non-positive value");
  auto d = detail::jet_dcoef(u);
  d[0] = std::sqrt(u0);
  for (size_t k = 1; k < d.size(); ++k)
    d[k] = d[k - 1] * (0.5 - (static_cast<double>(k) - 1.0)) / (static_cast<double>(k) * u0);
  return compose(u, d);
}

inline Jet exp(const Jet& u) {
  auto d = detail::jet_dcoef(u);
  d[0] = std::exp(u.value());
  for (size_t k = 1; k < d.size(); ++k) d[k] = d[k - 1] / static_cast<double>(k);
  return compose(u, d);
}

inline Jet log(const Jet& u) {
  double u0 = u.value();
  if (u0 <= 0.0) throw DomainError("log of non-positive value");
  auto d = detail::jet_dcoef(u);
  d[0] = std::log(u0);
  if (d.size() > 1) d[1] = 1.0 / u0;
  for (size_t k = 2; k < d.size(); ++k)
    d[k] = -d[k - 1] * (static_cast<double>(k) - 1.0) / (static_cast<double>(k) * u0);
  return compose(u, d);
}

inline Jet sin(const Jet& u) {
  auto d = detail::jet_dcoef(u);
  double s = std::sin(u.value()), c = std::cos(u.value());
  double fact = 1.0;
  for (size_t k = 0; k < d.size(); ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    switch (k % 4) {
      case 0: d[k] = s / fact; break;
      case 1: d[k] = c / fact; break;
      case 2: d[k] = -s / fact; break;
      default: d[k] = -c / fact; break;
    }
  }
  return compose(u, d);
}

inline Jet cos(const Jet& u) {
  auto d = detail::jet_dcoef(u);
  double s = std::sin(u.value()), c = std::cos(u.value());
  double fact = 1.0;
  for (size_t k = 0; k < d.size(); ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    switch (k % 4) {
      case 0: d[k] = c / fact; break;
      case 1: d[k] = -s / fact; break;
      case 2: d[k] = -c / fact; break;
      default: d[k] = s / fact; break;
    }
  }
  return compose(u, d);
}

// Derivative of |x| is sign(x); at exactly 0 the jet is undefined.
inline Jet abs(const Jet& u) {
  double u0 = u.value();
  if (u0 == 0.0) throw DomainError("abs evaluated at 0 in jet mode");
  return u0 > 0.0 ? u : -u;
}

// Integer powers. Non-negative exponents go through plain products so that a
// zero primal part stays exact (polynomials); negative ones need a unit.
inline Jet pow_int(const Jet& u, long long p) {
  if (p < 0) return recip(pow_int(u, -p));
  Jet r = Jet::constant(1.0, u.table_ptr());
  Jet base = u;
  long long e = p;
  while (e > 0) {
    if (e & 1) r = r * base;
    e >>= 1;
    if (e > 0) base = base * base;
  }
  return r;
}

}  // namespace finsler
