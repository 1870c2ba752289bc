#pragma once

// Characteristic tensors of a conic pseudo-Finsler metric at a tangent
// sample: fundamental tensor g_v = (1/2) d^2_v F^2, Cartan tensor
// C_v = (1/4) d^3_v F^2, mean Cartan torsion I_v = tr_g C_v, angular metric
// h_v = g_v - g_v(v,.) g_v(v,.) / F^2, and the Matsumoto tensor
//   M_v = C_v - (eps/(n+1)) sym3(I_v x h_v),
// where eps is +1 when the index of g_v is even and -1 when odd.

#include "finsler/common.hpp"
#include "finsler/deriv.hpp"
#include "finsler/metrics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace finsler {

inline constexpr double kEigenvalueTol = 1e-10;

struct SymTensor3 {
  int n = 0;
  std::vector<double> e;  // dense n^3

  explicit SymTensor3(int dim = 0) : n(dim), e(static_cast<size_t>(dim * dim * dim), 0.0) {}

  double& at(int i, int j, int k) {
    return e[static_cast<size_t>((i * n + j) * n + k)];
  }
  double at(int i, int j, int k) const {
    return e[static_cast<size_t>((i * n + j) * n + k)];
  }
  double max_abs() const {
    double m = 0;
    for (double x : e) m = std::max(m, std::abs(x));
    return m;
  }
  // max |T(v, ., .)| over the remaining slots
  double max_abs_contract(const Vec& v) const {
    double m = 0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        double acc = 0;
        for (int i = 0; i < n; ++i) acc += at(i, j, k) * v[i];
        m = std::max(m, std::abs(acc));
      }
    return m;
  }
};

struct SignatureReport {
  int index = 0;                  // count of negative eigenvalues of g_v
  std::vector<double> eigenvalues;
  int parity_sign = 1;            // +1 if index even, -1 if odd
};

inline SignatureReport metric_index(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose().eval()));
  SignatureReport r;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    double ev = es.eigenvalues()[i];
    if (std::abs(ev) < kEigenvalueTol) {
      std::ostringstream os;
      os << "numerically degenerate symmetric matrix (|eigenvalue| = " << std::abs(ev) << ")";
      throw NumericalError(os.str());
    }
    r.eigenvalues.push_back(ev);
    if (ev < 0.0) ++r.index;
  }
  r.parity_sign = (r.index % 2 == 0) ? 1 : -1;
  return r;
}

inline Mat fundamental_tensor(const MetricInstance& m, const Vec& x, const Vec& v,
                              DerivMode mode = DerivMode::exact) {
  PartialTensor t = partial_tensor(m.f_squared, x, v, 0, 2, mode);
  int n = m.dimension;
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = 0.5 * t.at({}, {i, j});
  g = 0.5 * (g + g.transpose().eval());
  if (std::abs(g.determinant()) < kEigenvalueTol)
    throw NumericalError("degenerate fundamental tensor");
  return g;
}

inline SymTensor3 cartan_tensor(const MetricInstance& m, const Vec& x, const Vec& v,
                                DerivMode mode = DerivMode::exact) {
  PartialTensor t = partial_tensor(m.f_squared, x, v, 0, 3, mode);
  int n = m.dimension;
  SymTensor3 c(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c.at(i, j, k) = 0.25 * t.at({}, {i, j, k});
  if (mode == DerivMode::fd) {
    // symmetrize over the three slots (fd asymmetry stays tiny by stencil
    // construction, but enforce it anyway)
    SymTensor3 s(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          s.at(i, j, k) = (c.at(i, j, k) + c.at(i, k, j) + c.at(j, i, k) + c.at(j, k, i) +
                           c.at(k, i, j) + c.at(k, j, i)) /
                          6.0;
    return s;
  }
  return c;
}

inline Vec mean_cartan_torsion(const MetricInstance& m, const Vec& x, const Vec& v,
                               DerivMode mode = DerivMode::exact) {
  Mat g = fundamental_tensor(m, x, v, mode);
  SymTensor3 c = cartan_tensor(m, x, v, mode);
  Mat ginv = g.inverse();
  int n = m.dimension;
  Vec torsion = Vec::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) torsion[k] += ginv(i, j) * c.at(k, i, j);
  return torsion;
}

inline Mat angular_metric(const MetricInstance& m, const Vec& x, const Vec& v,
                          DerivMode mode = DerivMode::exact) {
  Mat g = fundamental_tensor(m, x, v, mode);
  Vec gv = g * v;
  double f2 = v.dot(gv);
  return g - (gv * gv.transpose()) / f2;
}

inline SymTensor3 matsumoto_tensor(const MetricInstance& m, const Vec& x, const Vec& v,
                                   DerivMode mode = DerivMode::exact) {
  Mat g = fundamental_tensor(m, x, v, mode);
  SignatureReport sig = metric_index(g);
  SymTensor3 c = cartan_tensor(m, x, v, mode);
  Mat ginv = g.inverse();
  int n = m.dimension;
  Vec torsion = Vec::Zero(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) torsion[k] += ginv(i, j) * c.at(k, i, j);
  Vec gv = g * v;
  double f2 = v.dot(gv);
  Mat h = g - (gv * gv.transpose()) / f2;

  double w = static_cast<double>(sig.parity_sign) / (n + 1);
  SymTensor3 mt(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        mt.at(i, j, k) = c.at(i, j, k) -
                         w * (torsion[i] * h(j, k) + torsion[j] * h(i, k) + torsion[k] * h(i, j));
  return mt;
}

// Classification of a translated value: u = v/Z(v) - W must be transversal to
// the original indicatrix; the sign of g_u(u, v) names the branch.
inline TranslationCharacter translation_character(const MetricInstance& base, const WindField& w,
                                                  const Vec& x, const Vec& v, double z_value) {
  Vec u = v / z_value - w.eval(x);
  if (!base.in_domain(x, u)) {
    std::ostringstream os;
    os << "translated support vector leaves the base domain: u=[" << u.transpose() << "]";
    throw DomainError(os.str());
  }
  Mat gu = fundamental_matrix(base, x, u);
  double q = u.dot(gu * v);
  if (std::abs(q) < kTransversalityTol)
    throw NumericalError("transversality failure: |g_u(u, v)| below tolerance");
  return q > 0.0 ? TranslationCharacter::straight : TranslationCharacter::reverse;
}

}  // namespace finsler
