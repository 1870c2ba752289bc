#pragma once

// Legendre transformation of a conic pseudo-Finsler metric, its local Newton
// inverse, the dual norm F*, and the duality relations of translations:
//   straight:  Fhat*(xi) = F*(xi) + xi(W)
//   reverse:   Fhat*(xi) = -Frev*(xi) + xi(W).
// The transformation is L_F(v) = g_v(v, .) = (1/2) d_v F^2, with fiber
// Jacobian g_v, so Newton steps solve g_v dv = L_F(v) - xi.

#include "finsler/common.hpp"
#include "finsler/metrics.hpp"

#include <cmath>
#include <sstream>

namespace finsler {

struct CotangentSample {
  Vec x;
  Vec xi;
};

inline Vec legendre(const MetricInstance& m, const Vec& x, const Vec& v) {
  PartialTensor t = partial_tensor(m.f_squared, x, v, 0, 1, DerivMode::exact);
  int n = m.dimension;
  Vec xi(n);
  for (int i = 0; i < n; ++i) xi[i] = 0.5 * t.at({}, {i});
  return xi;
}

// Local inverse on the branch selected by the seed. Newton with step halving
// (up to 30 times) whenever the iterate leaves the conic domain or the
// residual fails to decrease; conic domains are not Newton-invariant.
inline Vec legendre_inverse(const MetricInstance& m, const Vec& x, const Vec& xi,
                            const Vec& seed, int max_iter = 50) {
  double xi_norm = xi.lpNorm<Eigen::Infinity>();
  if (xi_norm == 0.0) throw DomainError("zero covector has no Legendre preimage");
  double tol = 1e-12 * xi_norm;
  if (!m.in_domain(x, seed)) throw DomainError("legendre_inverse seed outside the conic domain");
  Vec v = seed;
  Vec r = legendre(m, x, v) - xi;
  double rn = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < max_iter; ++it) {
    if (rn <= tol) return v;
    Mat g = fundamental_matrix(m, x, v);
    Vec step = g.fullPivLu().solve(r);
    double damp = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 30; ++halvings) {
      Vec trial = v - damp * step;
      if (m.in_domain(x, trial)) {
        Vec rt = legendre(m, x, trial) - xi;
        double rtn = rt.lpNorm<Eigen::Infinity>();
        if (rtn < rn) {
          v = trial;
          r = rt;
          rn = rtn;
          accepted = true;
          break;
        }
      }
      damp *= 0.5;
    }
    if (!accepted) break;
  }
  if (rn <= tol) return v;
  std::ostringstream os;
  os << "legendre_inverse did not converge: residual " << rn << " for xi=[" << xi.transpose()
     << "]";
  throw NumericalError(os.str());
}

inline double dual_norm(const MetricInstance& m, const Vec& x, const Vec& xi, const Vec& seed) {
  Vec v = legendre_inverse(m, x, xi, seed);
  return m.evaluate(x, v);
}

// The two sides of the translation duality relation: lhs = Fhat*(xi) and
// rhs = F*(xi) + xi(W) for straight translations, -Frev*(xi) + xi(W) for
// reverse ones, all terms computed through their own Newton inverses.
struct DualityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

inline DualityCheck duality_check(const MetricInstance& base, const MetricInstance& translated,
                                  const WindField& w, TranslationCharacter character, const Vec& x,
                                  const Vec& xi, const Vec& seed_translated, const Vec& seed_base) {
  DualityCheck out;
  out.lhs = dual_norm(translated, x, xi, seed_translated);
  double xiW = xi.dot(w.eval(x));
  if (character == TranslationCharacter::straight) {
    out.rhs = dual_norm(base, x, xi, seed_base) + xiW;
  } else {
    MetricInstance rev = reverse(base);
    out.rhs = -dual_norm(rev, x, xi, seed_base) + xiW;
  }
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

inline double duality_residual(const MetricInstance& base, const MetricInstance& translated,
                               const WindField& w, TranslationCharacter character, const Vec& x,
                               const Vec& xi, const Vec& seed_translated, const Vec& seed_base) {
  return duality_check(base, translated, w, character, x, xi, seed_translated, seed_base).residual;
}

}  // namespace finsler
