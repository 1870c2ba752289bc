#pragma once

// Mixed partial derivatives of scalar fields on the tangent bundle, up to
// total order 4, in base point x and fiber v. Exact mode evaluates the field
// over truncated Taylor jets; fd mode is an independent central-difference
// oracle with one Richardson level for orders >= 3.

#include "finsler/common.hpp"
#include "finsler/expr.hpp"
#include "finsler/jet.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace finsler {

// A scalar field on a chart's tangent bundle, evaluable over doubles and
// jets, with a pointwise domain predicate.
class ScalarField {
 public:
  using RealFn = std::function<double(const Vec&, const Vec&)>;
  using JetFn = std::function<Jet(const std::vector<Jet>&, const std::vector<Jet>&)>;
  using DomainFn = std::function<bool(const Vec&, const Vec&)>;

  ScalarField() = default;
  ScalarField(int dim, RealFn real, JetFn jet, DomainFn domain = nullptr)
      : dimension(dim),
        real(std::move(real)),
        jet(std::move(jet)),
        domain(std::move(domain)) {}

  int dimension = 0;
  RealFn real;
  JetFn jet;
  DomainFn domain;  // null means all of the slit bundle

  double operator()(const Vec& x, const Vec& v) const { return real(x, v); }
  bool in_domain(const Vec& x, const Vec& v) const {
    return domain ? domain(x, v) : true;
  }
};

// Field built from an expression in x1..xn, v1..vn, with an optional domain
// predicate expression (membership means predicate > 0).
inline ScalarField field_from_expression(const ExprAst& f, ExprAst domain_expr) {
  int n = f.dimension;
  auto dom = domain_expr.root
                 ? ScalarField::DomainFn([domain_expr, n](const Vec& x, const Vec& v) {
                     EvalScope<double> s{n, to_std(x), to_std(v)};
                     try {
                       return evaluate(domain_expr, s) > 0.0;
                     } catch (const DomainError&) {
                       return false;
                     }
                   })
                 : ScalarField::DomainFn();
  return ScalarField(
      n,
      [f, n](const Vec& x, const Vec& v) {
        EvalScope<double> s{n, to_std(x), to_std(v)};
        return evaluate(f, s);
      },
      [f, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        EvalScope<Jet> s{n, x, v};
        return evaluate(f, s);
      },
      dom);
}

enum class DerivMode { exact, fd };

// Dense tensor of mixed partials: order_x chart slots then order_v fiber
// slots, each running over 0..n-1. Symmetric within each slot group.
class PartialTensor {
 public:
  PartialTensor() = default;
  PartialTensor(int n, int ox, int ov, Vec x, Vec v)
      : n_(n), order_x_(ox), order_v_(ov), x_(std::move(x)), v_(std::move(v)) {
    size_t size = 1;
    for (int i = 0; i < ox + ov; ++i) size *= static_cast<size_t>(n);
    e_.assign(size, 0.0);
  }

  int dimension() const { return n_; }
  int order_x() const { return order_x_; }
  int order_v() const { return order_v_; }
  const Vec& base_x() const { return x_; }
  const Vec& base_v() const { return v_; }

  double& at(const std::vector<int>& xi, const std::vector<int>& vi) {
    return e_[flat(xi, vi)];
  }
  double at(const std::vector<int>& xi, const std::vector<int>& vi) const {
    return e_[flat(xi, vi)];
  }

  const std::vector<double>& entries() const { return e_; }
  std::vector<double>& entries() { return e_; }

  double max_abs() const {
    double m = 0.0;
    for (double x : e_) m = std::max(m, std::abs(x));
    return m;
  }

  double max_abs_diff(const PartialTensor& o) const {
    double m = 0.0;
    for (size_t i = 0; i < e_.size(); ++i) m = std::max(m, std::abs(e_[i] - o.e_[i]));
    return m;
  }

  // Iterate all slot index tuples (xi, vi).
  template <class F>
  void for_each(F&& f) const {
    std::vector<int> xi(static_cast<size_t>(order_x_), 0);
    std::vector<int> vi(static_cast<size_t>(order_v_), 0);
    for_each_rec(xi, vi, 0, f);
  }

 private:
  int n_ = 0, order_x_ = 0, order_v_ = 0;
  Vec x_, v_;
  std::vector<double> e_;

  size_t flat(const std::vector<int>& xi, const std::vector<int>& vi) const {
    size_t idx = 0;
    for (int i : xi) idx = idx * static_cast<size_t>(n_) + static_cast<size_t>(i);
    for (int i : vi) idx = idx * static_cast<size_t>(n_) + static_cast<size_t>(i);
    return idx;
  }

  template <class F>
  void for_each_rec(std::vector<int>& xi, std::vector<int>& vi, int slot, F& f) const {
    int total = order_x_ + order_v_;
    if (slot == total) {
      f(const_cast<const std::vector<int>&>(xi), const_cast<const std::vector<int>&>(vi));
      return;
    }
    bool is_x = slot < order_x_;
    int& ref = is_x ? xi[static_cast<size_t>(slot)] : vi[static_cast<size_t>(slot - order_x_)];
    for (int i = 0; i < n_; ++i) {
      ref = i;
      for_each_rec(xi, vi, slot + 1, f);
    }
  }
};

namespace detail {

inline void check_point(const ScalarField& f, const Vec& x, const Vec& v) {
  if (!f.in_domain(x, v)) {
    std::ostringstream os;
    os << "point outside field domain: x=[" << x.transpose() << "], v=[" << v.transpose() << "]";
    throw DomainError(os.str());
  }
}

inline PartialTensor partial_tensor_exact(const ScalarField& f, const Vec& x, const Vec& v,
                                          int ox, int ov) {
  int n = f.dimension;
  int order = ox + ov;
  bool seed_x = ox > 0;
  bool seed_v = ov > 0;
  int nvars = (seed_x ? n : 0) + (seed_v ? n : 0);
  auto table = JetTable::get(std::max(nvars, 1), order);
  std::vector<Jet> xj, vj;
  int var = 0;
  for (int i = 0; i < n; ++i)
    xj.push_back(seed_x ? Jet::variable(x[i], var++, table) : Jet::constant(x[i], table));
  for (int i = 0; i < n; ++i)
    vj.push_back(seed_v ? Jet::variable(v[i], var++, table) : Jet::constant(v[i], table));
  Jet value = f.jet(xj, vj);

  PartialTensor t(n, ox, ov, x, v);
  t.for_each([&](const std::vector<int>& xi, const std::vector<int>& vi) {
    JetExponents e{};
    for (int i : xi) e[static_cast<size_t>(i)] += 1;  // nonempty only when seed_x
    for (int i : vi) e[static_cast<size_t>((seed_x ? n : 0) + i)] += 1;
    t.at(xi, vi) = value.derivative(e);
  });
  return t;
}

// Iterated central differences on the (x, v) lattice; evaluations memoized by
// integer offset. Every stencil point must stay inside the field's domain.
class FdStencil {
 public:
  FdStencil(const ScalarField& f, const Vec& x, const Vec& v, double step)
      : f_(f), x_(x), v_(v), h_(step), n_(f.dimension) {}

  // vars: per slot, variable id in 0..2n-1 (x then v).
  double derivative(const std::vector<int>& vars) {
    std::vector<int> offset(static_cast<size_t>(2 * n_), 0);
    return diff(vars, 0, offset);
  }

 private:
  const ScalarField& f_;
  const Vec& x_;
  const Vec& v_;
  double h_;
  int n_;
  std::map<std::vector<int>, double> memo_;

  double diff(const std::vector<int>& vars, size_t k, std::vector<int>& offset) {
    if (k == vars.size()) return eval(offset);
    int var = vars[k];
    offset[static_cast<size_t>(var)] += 1;
    double plus = diff(vars, k + 1, offset);
    offset[static_cast<size_t>(var)] -= 2;
    double minus = diff(vars, k + 1, offset);
    offset[static_cast<size_t>(var)] += 1;
    return (plus - minus) / (2.0 * h_);
  }

  double eval(const std::vector<int>& offset) {
    auto it = memo_.find(offset);
    if (it != memo_.end()) return it->second;
    Vec xs = x_, vs = v_;
    for (int i = 0; i < n_; ++i) {
      xs[i] += h_ * offset[static_cast<size_t>(i)];
      vs[i] += h_ * offset[static_cast<size_t>(n_ + i)];
    }
    if (!f_.in_domain(xs, vs)) {
      std::ostringstream os;
      os << "fd stencil point outside domain: x=[" << xs.transpose() << "], v=["
         << vs.transpose() << "]";
      throw DomainError(os.str());
    }
    double val = f_.real(xs, vs);
    memo_[offset] = val;
    return val;
  }
};

inline PartialTensor partial_tensor_fd(const ScalarField& f, const Vec& x, const Vec& v,
                                       int ox, int ov, double step) {
  int n = f.dimension;
  int order = ox + ov;
  if (step <= 0.0) {
    // Base step grows with the order: divided differences of order k lose
    // roughly eps/h^k to roundoff, so higher orders need a wider stencil.
    double scale = std::max({1.0, x.lpNorm<Eigen::Infinity>(), v.lpNorm<Eigen::Infinity>()});
    double base = order <= 2 ? 1e-4 : (order == 3 ? 1e-3 : 2.5e-3);
    step = base * scale;
  }

  auto compute = [&](double h) {
    FdStencil st(f, x, v, h);
    PartialTensor t(n, ox, ov, x, v);
    t.for_each([&](const std::vector<int>& xi, const std::vector<int>& vi) {
      std::vector<int> sorted_x = xi, sorted_v = vi;
      std::sort(sorted_x.begin(), sorted_x.end());
      std::sort(sorted_v.begin(), sorted_v.end());
      std::vector<int> vars;
      for (int i : sorted_x) vars.push_back(i);
      for (int i : sorted_v) vars.push_back(n + i);
      t.at(xi, vi) = st.derivative(vars);
    });
    return t;
  };

  PartialTensor t1 = compute(step);
  if (order >= 3) {
    PartialTensor t2 = compute(2.0 * step);
    for (size_t i = 0; i < t1.entries().size(); ++i)
      t1.entries()[i] = (4.0 * t1.entries()[i] - t2.entries()[i]) / 3.0;
  }
  return t1;
}

}  // namespace detail

inline PartialTensor partial_tensor(const ScalarField& f, const Vec& x, const Vec& v,
                                    int order_x, int order_v,
                                    DerivMode mode = DerivMode::exact, double fd_step = 0.0) {
  if (order_x < 0 || order_v < 0 || order_x + order_v > 4)
    throw NumericalError("partial_tensor supports total order <= 4");
  detail::check_point(f, x, v);
  return mode == DerivMode::exact
             ? detail::partial_tensor_exact(f, x, v, order_x, order_v)
             : detail::partial_tensor_fd(f, x, v, order_x, order_v, fd_step);
}

// Max relative homogeneity residual of `f` in the fiber over the scalings
// {0.5, 2, 7}. Conic domains are closed under positive scaling, so the scaled
// points stay admissible.
inline double homogeneity_check(const ScalarField& f, const Vec& x, const Vec& v, int degree) {
  detail::check_point(f, x, v);
  double base = f.real(x, v);
  double worst = 0.0;
  for (double lambda : {0.5, 2.0, 7.0}) {
    Vec vs = lambda * v;
    detail::check_point(f, x, vs);
    double expected = std::pow(lambda, degree) * base;
    double got = f.real(x, vs);
    worst = std::max(worst, std::abs(got - expected) / std::max(1e-300, std::abs(expected)));
  }
  return worst;
}

}  // namespace finsler
