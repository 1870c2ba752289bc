#pragma once

// Conic pseudo-Finsler metrics with explicit conic domain predicates:
// semi-Riemannian squares, pseudo-Randers and pseudo-Kropina metrics,
// closed-form Zermelo translations of semi-Riemannian metrics, numerical
// translations of arbitrary metrics by wind fields, and reverse metrics.
//
// Conventions: L = F^2 is the stored scalar field; the fundamental tensor is
// g_v = (1/2) d^2_v L; a translation by W moves the indicatrix {F = 1} to
// {F = 1} + W, i.e. the translated norm Z solves F(v/Z(v) - W) = 1.

#include "finsler/common.hpp"
#include "finsler/deriv.hpp"
#include "finsler/expr.hpp"
#include "finsler/jet.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace finsler {

// Any defining inequality this close to zero counts as a boundary point and
// is rejected by the domain predicates.
inline constexpr double kBoundaryTol = 1e-12;
// Transversality threshold |F(u) + g_u(u, W)| below which a translation is
// treated as undefined.
inline constexpr double kTransversalityTol = 1e-10;
// Below this |g(W,W) - 1| the first Zermelo closed form (which divides by
// g(W,W) - 1) is abandoned for the conjugate one.
inline constexpr double kZermeloFormSwitch = 1e-8;

// ---------------------------------------------------------------------------
// Coefficient bundles evaluable over doubles and jets.

class SemiRiemannianMetric {
 public:
  using RealCoeff = std::function<Mat(const Vec&)>;
  using JetCoeff = std::function<std::vector<Jet>(const std::vector<Jet>&)>;  // row-major

  int dimension = 0;
  RealCoeff coeff;
  JetCoeff coeff_jet;

  Mat eval(const Vec& x) const { return coeff(x); }
  double value(const Vec& x, const Vec& u, const Vec& w) const {
    return u.dot(eval(x) * w);
  }
};

class WindField {
 public:
  using RealComps = std::function<Vec(const Vec&)>;
  using JetComps = std::function<std::vector<Jet>(const std::vector<Jet>&)>;

  int dimension = 0;
  RealComps comps;
  JetComps comps_jet;
  std::optional<double> claimed_sigma;

  Vec eval(const Vec& x) const { return comps(x); }
};

class OneForm {
 public:
  using RealComps = std::function<Vec(const Vec&)>;
  using JetComps = std::function<std::vector<Jet>(const std::vector<Jet>&)>;

  int dimension = 0;
  RealComps comps;
  JetComps comps_jet;

  double value(const Vec& x, const Vec& v) const { return eval(x).dot(v); }
  Vec eval(const Vec& x) const { return comps(x); }
};

inline SemiRiemannianMetric make_semi_riemannian(const std::vector<std::vector<ExprAst>>& g) {
  int n = static_cast<int>(g.size());
  for (const auto& row : g)
    if (static_cast<int>(row.size()) != n)
      throw NumericalError("metric coefficient matrix must be square");
  SemiRiemannianMetric m;
  m.dimension = n;
  m.coeff = [g, n](const Vec& x) {
    EvalScope<double> s{n, to_std(x), std::vector<double>(static_cast<size_t>(n), 0.0)};
    Mat out(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = evaluate(g[static_cast<size_t>(i)][static_cast<size_t>(j)], s);
    out = 0.5 * (out + out.transpose().eval());
    return out;
  };
  m.coeff_jet = [g, n](const std::vector<Jet>& x) {
    EvalScope<Jet> s{n, x, std::vector<Jet>(static_cast<size_t>(n), Jet::constant(0.0, x.front().table_ptr()))};
    std::vector<Jet> out;
    out.reserve(static_cast<size_t>(n * n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Jet gij = evaluate(g[static_cast<size_t>(i)][static_cast<size_t>(j)], s);
        Jet gji = evaluate(g[static_cast<size_t>(j)][static_cast<size_t>(i)], s);
        out.push_back(0.5 * (gij + gji));
      }
    return out;
  };
  return m;
}

inline SemiRiemannianMetric make_semi_riemannian(int n, const std::vector<std::vector<std::string>>& g) {
  std::vector<std::vector<ExprAst>> asts;
  for (const auto& row : g) {
    std::vector<ExprAst> r;
    for (const auto& e : row) r.push_back(parse(e, n));
    asts.push_back(std::move(r));
  }
  return make_semi_riemannian(asts);
}

inline WindField make_wind(const std::vector<ExprAst>& comps,
                           std::optional<double> claimed_sigma = std::nullopt) {
  int n = static_cast<int>(comps.size());
  WindField w;
  w.dimension = n;
  w.claimed_sigma = claimed_sigma;
  w.comps = [comps, n](const Vec& x) {
    EvalScope<double> s{n, to_std(x), std::vector<double>(static_cast<size_t>(n), 0.0)};
    Vec out(n);
    for (int i = 0; i < n; ++i) out[i] = evaluate(comps[static_cast<size_t>(i)], s);
    return out;
  };
  w.comps_jet = [comps, n](const std::vector<Jet>& x) {
    EvalScope<Jet> s{n, x, std::vector<Jet>(static_cast<size_t>(n), Jet::constant(0.0, x.front().table_ptr()))};
    std::vector<Jet> out;
    for (int i = 0; i < n; ++i) out.push_back(evaluate(comps[static_cast<size_t>(i)], s));
    return out;
  };
  return w;
}

inline WindField make_wind(int n, const std::vector<std::string>& comps,
                           std::optional<double> claimed_sigma = std::nullopt) {
  std::vector<ExprAst> asts;
  for (const auto& e : comps) asts.push_back(parse(e, n));
  return make_wind(asts, claimed_sigma);
}

inline OneForm make_one_form(const std::vector<ExprAst>& comps) {
  int n = static_cast<int>(comps.size());
  OneForm b;
  b.dimension = n;
  b.comps = [comps, n](const Vec& x) {
    EvalScope<double> s{n, to_std(x), std::vector<double>(static_cast<size_t>(n), 0.0)};
    Vec out(n);
    for (int i = 0; i < n; ++i) out[i] = evaluate(comps[static_cast<size_t>(i)], s);
    return out;
  };
  b.comps_jet = [comps, n](const std::vector<Jet>& x) {
    EvalScope<Jet> s{n, x, std::vector<Jet>(static_cast<size_t>(n), Jet::constant(0.0, x.front().table_ptr()))};
    std::vector<Jet> out;
    for (int i = 0; i < n; ++i) out.push_back(evaluate(comps[static_cast<size_t>(i)], s));
    return out;
  };
  return b;
}

inline OneForm make_one_form(int n, const std::vector<std::string>& comps) {
  std::vector<ExprAst> asts;
  for (const auto& e : comps) asts.push_back(parse(e, n));
  return make_one_form(asts);
}

namespace detail {

template <class T>
T bilinear(const std::vector<T>& g, const std::vector<T>& a, const std::vector<T>& b, int n) {
  T acc = g[0] * a[0] * b[0];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == 0 && j == 0) continue;
      acc += g[static_cast<size_t>(i * n + j)] * a[static_cast<size_t>(i)] * b[static_cast<size_t>(j)];
    }
  return acc;
}

inline std::vector<double> coeffs_at(const SemiRiemannianMetric& g, const Vec& x) {
  Mat m = g.eval(x);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(m.size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Metric instances.

enum class MetricKind {
  semi_riemannian,
  randers,
  kropina,
  zermelo_closed_form,
  translated_numeric,
  reverse,
  custom
};

enum class TranslationCharacter { straight, reverse };

inline const char* to_string(TranslationCharacter c) {
  return c == TranslationCharacter::straight ? "straight" : "reverse";
}

class MetricInstance;

struct RandersData {
  SemiRiemannianMetric h;
  OneForm beta;
  int eps = 1;
};
struct KropinaData {
  SemiRiemannianMetric h;
  OneForm beta;
};
struct ZermeloData {
  SemiRiemannianMetric g;
  WindField wind;
  int eps = 1;
};
struct TranslatedData {
  std::shared_ptr<const MetricInstance> base;
  WindField wind;
  TranslationCharacter character = TranslationCharacter::straight;
};
struct ReverseData {
  std::shared_ptr<const MetricInstance> base;
};

class MetricInstance {
 public:
  int dimension = 0;
  MetricKind kind = MetricKind::custom;
  // L = F^2 with the conic domain predicate attached.
  ScalarField f_squared;
  // Values of the defining inequalities at (x, v); membership in the conic
  // domain means all of them exceed kBoundaryTol.
  std::function<std::vector<double>(const Vec&, const Vec&)> domain_quantities;
  std::variant<std::monostate, RandersData, KropinaData, ZermeloData, TranslatedData, ReverseData>
      data;

  bool in_domain(const Vec& x, const Vec& v) const {
    if (v.lpNorm<Eigen::Infinity>() == 0.0) return false;
    try {
      for (double q : domain_quantities(x, v))
        if (!(q > kBoundaryTol)) return false;
    } catch (const DomainError&) {
      return false;
    } catch (const NumericalError&) {
      return false;
    }
    return true;
  }

  // Smallest defining-inequality value; usable as an interior margin.
  double domain_margin(const Vec& x, const Vec& v) const {
    double m = std::numeric_limits<double>::infinity();
    for (double q : domain_quantities(x, v)) m = std::min(m, q);
    return m;
  }

  double evaluate(const Vec& x, const Vec& v) const {
    if (!in_domain(x, v)) {
      std::ostringstream os;
      os << "vector outside conic domain: x=[" << x.transpose() << "], v=[" << v.transpose()
         << "]";
      throw DomainError(os.str());
    }
    double L = f_squared.real(x, v);
    if (!(L > 0.0)) throw NumericalError("F^2 not positive inside the declared domain");
    return std::sqrt(L);
  }
};

// Fundamental tensor g_v = (1/2) d^2_v L as a plain matrix (no degeneracy
// check; tensors.hpp layers the checked operation on top).
inline Mat fundamental_matrix(const MetricInstance& m, const Vec& x, const Vec& v) {
  PartialTensor t = partial_tensor(m.f_squared, x, v, 0, 2, DerivMode::exact);
  int n = m.dimension;
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = 0.5 * t.at({}, {i, j});
  return 0.5 * (g + g.transpose().eval());
}

// ---------------------------------------------------------------------------
// Constructors.

inline MetricInstance semi_riemannian_instance(const SemiRiemannianMetric& g) {
  int n = g.dimension;
  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::semi_riemannian;
  m.domain_quantities = [g](const Vec& x, const Vec& v) {
    return std::vector<double>{v.dot(g.eval(x) * v)};
  };
  auto dom = [g](const Vec& x, const Vec& v) { return v.dot(g.eval(x) * v) > kBoundaryTol; };
  m.f_squared = ScalarField(
      n, [g](const Vec& x, const Vec& v) { return v.dot(g.eval(x) * v); },
      [g, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        return detail::bilinear(g.coeff_jet(x), v, v, n);
      },
      dom);
  return m;
}

inline MetricInstance randers(const SemiRiemannianMetric& h, const OneForm& beta, int eps) {
  if (eps != 1 && eps != -1) throw NumericalError("randers sign must be +1 or -1");
  int n = h.dimension;
  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::randers;
  m.data = RandersData{h, beta, eps};
  double e = static_cast<double>(eps);
  auto quantities = [h, beta, e](const Vec& x, const Vec& v) {
    double hvv = v.dot(h.eval(x) * v);
    std::vector<double> q{hvv};
    if (hvv > 0.0) q.push_back(e * std::sqrt(hvv) + beta.value(x, v));
    else q.push_back(-1.0);
    return q;
  };
  m.domain_quantities = quantities;
  auto dom = [quantities](const Vec& x, const Vec& v) {
    for (double q : quantities(x, v))
      if (!(q > kBoundaryTol)) return false;
    return true;
  };
  m.f_squared = ScalarField(
      n,
      [h, beta, e](const Vec& x, const Vec& v) {
        double f = e * std::sqrt(v.dot(h.eval(x) * v)) + beta.value(x, v);
        return f * f;
      },
      [h, beta, e, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        Jet hvv = detail::bilinear(h.coeff_jet(x), v, v, n);
        std::vector<Jet> b = beta.comps_jet(x);
        Jet bv = b[0] * v[0];
        for (int i = 1; i < n; ++i) bv += b[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        Jet f = e * sqrt(hvv) + bv;
        return f * f;
      },
      dom);
  return m;
}

inline MetricInstance kropina(const SemiRiemannianMetric& h, const OneForm& beta) {
  int n = h.dimension;
  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::kropina;
  m.data = KropinaData{h, beta};
  auto quantities = [h, beta](const Vec& x, const Vec& v) {
    double hvv = v.dot(h.eval(x) * v);
    double bv = beta.value(x, v);
    return std::vector<double>{hvv * bv};
  };
  m.domain_quantities = quantities;
  auto dom = [quantities](const Vec& x, const Vec& v) {
    for (double q : quantities(x, v))
      if (!(q > kBoundaryTol)) return false;
    return true;
  };
  m.f_squared = ScalarField(
      n,
      [h, beta](const Vec& x, const Vec& v) {
        double hvv = v.dot(h.eval(x) * v);
        double bv = beta.value(x, v);
        double f = hvv / bv;
        return f * f;
      },
      [h, beta, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        Jet hvv = detail::bilinear(h.coeff_jet(x), v, v, n);
        std::vector<Jet> b = beta.comps_jet(x);
        Jet bv = b[0] * v[0];
        for (int i = 1; i < n; ++i) bv += b[static_cast<size_t>(i)] * v[static_cast<size_t>(i)];
        Jet f = hvv / bv;
        return f * f;
      },
      dom);
  return m;
}

// F^2 given directly as an expression (plus optional conic domain predicate
// expression, membership meaning predicate > 0).
inline MetricInstance expression_metric(const ExprAst& f_squared, ExprAst domain_expr = {}) {
  int n = f_squared.dimension;
  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::custom;
  ScalarField field = field_from_expression(f_squared, domain_expr);
  m.domain_quantities = [field, domain_expr, n](const Vec& x, const Vec& v) {
    std::vector<double> q;
    if (domain_expr.root) {
      EvalScope<double> s{n, to_std(x), to_std(v)};
      q.push_back(evaluate(domain_expr, s));
    }
    q.push_back(field.real(x, v));  // F^2 itself must be positive
    return q;
  };
  m.f_squared = field;
  // tighten the field's own domain to the quantity rule
  auto quantities = m.domain_quantities;
  m.f_squared.domain = [quantities](const Vec& x, const Vec& v) {
    try {
      for (double q : quantities(x, v))
        if (!(q > kBoundaryTol)) return false;
    } catch (const DomainError&) {
      return false;
    }
    return true;
  };
  return m;
}

// ---------------------------------------------------------------------------
// Zermelo closed forms (translation of a semi-Riemannian metric).

namespace detail {

// Z_eps over any numeric semantics; branch selection on primal values.
template <class T>
T zermelo_value(const std::vector<T>& g, const std::vector<T>& w, const std::vector<T>& v,
                double eps, int n) {
  T gvv = bilinear(g, v, v, n);
  T gvw = bilinear(g, v, w, n);
  T gww = bilinear(g, w, w, n);
  T h = gvw * gvw + gvv * (1.0 - gww);
  if (primal_of(h) <= 0.0) throw DomainError("translation undefined: h(v,v) <= 0");
  using std::sqrt;
  T root = sqrt(h);
  if (std::abs(primal_of(gww) - 1.0) > kZermeloFormSwitch) {
    return (gvw - eps * root) / (gww - 1.0);
  }
  T den = gvw + eps * root;
  if (std::abs(primal_of(den)) < kZermeloFormSwitch)
    throw NumericalError("both Zermelo closed forms ill-conditioned at this sample");
  return gvv / den;
}

inline std::vector<double> zermelo_domain_quantities(const SemiRiemannianMetric& g,
                                                     const WindField& w, double eps,
                                                     const Vec& x, const Vec& v) {
  Mat G = g.eval(x);
  Vec W = w.eval(x);
  double gvv = v.dot(G * v);
  double gvw = v.dot(G * W);
  double gww = W.dot(G * W);
  double h = gvw * gvw + gvv * (1.0 - gww);
  double cse = eps * (1.0 - gww);
  std::vector<double> q;
  if (std::abs(1.0 - gww) <= kBoundaryTol) {
    // g(W,W) = 1: A_eps = {g(v,v) g(v,W) > 0, eps g(v,W) > 0}
    q.push_back(gvv * gvw);
    q.push_back(eps * gvw);
  } else if (cse > 0.0) {
    // A_eps = {eps g(v,v) > 0} u {eps g(v,W) < 0, h(v,v) > 0}
    q.push_back(std::max(eps * gvv, std::min(-eps * gvw, h)));
  } else {
    // A_eps = {eps g(v,v) > 0, eps g(v,W) > 0, h(v,v) > 0}
    q.push_back(eps * gvv);
    q.push_back(eps * gvw);
  }
  q.push_back(h);
  return q;
}

}  // namespace detail

inline MetricInstance zermelo_translate(const SemiRiemannianMetric& g, const WindField& w,
                                        int eps) {
  if (eps != 1 && eps != -1) throw NumericalError("zermelo branch must be +1 or -1");
  if (g.dimension != w.dimension) throw NumericalError("wind dimension mismatch");
  int n = g.dimension;
  double e = static_cast<double>(eps);
  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::zermelo_closed_form;
  m.data = ZermeloData{g, w, eps};
  auto quantities = [g, w, e](const Vec& x, const Vec& v) {
    return detail::zermelo_domain_quantities(g, w, e, x, v);
  };
  m.domain_quantities = quantities;
  auto dom = [quantities](const Vec& x, const Vec& v) {
    try {
      for (double q : quantities(x, v))
        if (!(q > kBoundaryTol)) return false;
    } catch (const DomainError&) {
      return false;
    }
    return true;
  };
  m.f_squared = ScalarField(
      n,
      [g, w, e, n](const Vec& x, const Vec& v) {
        auto gc = detail::coeffs_at(g, x);
        auto wc = to_std(w.eval(x));
        auto vc = to_std(v);
        double z = detail::zermelo_value<double>(gc, wc, vc, e, n);
        if (!(z > 0.0)) throw DomainError("Zermelo value not positive at this sample");
        return z * z;
      },
      [g, w, e, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        Jet z = detail::zermelo_value<Jet>(g.coeff_jet(x), w.comps_jet(x), v, e, n);
        if (!(z.value() > 0.0)) throw DomainError("Zermelo value not positive at this sample");
        return z * z;
      },
      dom);
  return m;
}

// ---------------------------------------------------------------------------
// Numerical translation of an arbitrary metric by a wind field.

struct TranslationSeed {
  Vec x;
  Vec v;
  double scale = 1.0;  // initial guess for Z(v) at the seed
};

namespace detail {

struct RootCandidate {
  double z = 0.0;              // root of F(v/z - W) = 1
  double transversality = 0.0; // g_u(u, v) at u = v/z - W
};

// All transversal roots of F(x, v/z - W(x)) = 1 along the ray through v,
// found by a log-spaced scan plus bisection/Newton polish. `v` is used as
// given (callers normalize).
inline std::vector<RootCandidate> translation_roots(const MetricInstance& base, const Vec& W,
                                                    const Vec& x, const Vec& v) {
  auto phi = [&](double z) -> std::optional<double> {
    Vec u = v / z - W;
    if (!base.in_domain(x, u)) return std::nullopt;
    return base.evaluate(x, u) - 1.0;
  };
  auto transversality_at = [&](double z) {
    Vec u = v / z - W;
    Mat gu = fundamental_matrix(base, x, u);
    return u.dot(gu * v);
  };

  const int kScan = 241;
  const double lo = 1e-3, hi = 1e3;
  std::vector<RootCandidate> roots;
  double prev_z = 0.0;
  std::optional<double> prev;
  for (int i = 0; i < kScan; ++i) {
    double z = lo * std::pow(hi / lo, static_cast<double>(i) / (kScan - 1));
    std::optional<double> cur = phi(z);
    if (prev && cur && (*prev) * (*cur) <= 0.0 && (*prev != *cur)) {
      double a = prev_z, b = z;
      double fa = *prev;
      for (int it = 0; it < 200; ++it) {
        double c = 0.5 * (a + b);
        auto fc = phi(c);
        if (!fc) break;  // domain pinched inside the bracket; give up on it
        if (*fc == 0.0) {
          a = b = c;
          break;
        }
        if (fa * (*fc) < 0.0) {
          b = c;
        } else {
          a = c;
          fa = *fc;
        }
        if (b - a < 1e-13 * c) break;
      }
      double z0 = 0.5 * (a + b);
      // Newton polish with the analytic slope phi'(z) = -g_u(u,v)/(F(u) z^2)
      for (int it = 0; it < 20; ++it) {
        auto f = phi(z0);
        if (!f) break;
        Vec u = v / z0 - W;
        double fu = base.evaluate(x, u);
        double slope = -transversality_at(z0) / (fu * z0 * z0);
        if (slope == 0.0) break;
        double step = *f / slope;
        double znext = z0 - step;
        if (!(znext > 0.0) || !phi(znext)) break;
        z0 = znext;
        if (std::abs(step) < 1e-15 * z0) break;
      }
      auto fcheck = phi(z0);
      if (fcheck && std::abs(*fcheck) < 1e-10) {
        double t = transversality_at(z0);
        bool duplicate = false;
        for (const auto& r : roots)
          if (std::abs(r.z - z0) < 1e-9 * std::max(1.0, z0)) duplicate = true;
        if (!duplicate) roots.push_back({z0, t});
      }
    }
    prev = cur;
    prev_z = z;
  }
  return roots;
}

inline RootCandidate solve_translation(const MetricInstance& base, const Vec& W, const Vec& x,
                                       const Vec& v, TranslationCharacter character) {
  double vnorm = v.norm();
  if (vnorm == 0.0) throw DomainError("zero vector has no translation value");
  Vec vb = v / vnorm;
  auto roots = translation_roots(base, W, x, vb);
  std::vector<RootCandidate> matching;
  for (const auto& r : roots) {
    if (std::abs(r.transversality) < kTransversalityTol) continue;
    TranslationCharacter c = r.transversality > 0.0 ? TranslationCharacter::straight
                                                    : TranslationCharacter::reverse;
    if (c == character) matching.push_back(r);
  }
  if (matching.empty()) {
    std::ostringstream os;
    os << "no transversal root on the seeded branch (" << to_string(character)
       << ") along v=[" << v.transpose() << "]";
    throw DomainError(os.str());
  }
  if (matching.size() > 1)
    throw NumericalError("translation branch ambiguous: several roots share the seeded character");
  RootCandidate r = matching.front();
  r.z *= vnorm;
  r.transversality *= vnorm;  // g_u(u, v) scales linearly in v
  return r;
}

}  // namespace detail

inline MetricInstance translate_numeric(const MetricInstance& base, const WindField& w,
                                        const TranslationSeed& seed) {
  if (base.dimension != w.dimension) throw NumericalError("wind dimension mismatch");
  int n = base.dimension;
  auto base_ptr = std::make_shared<const MetricInstance>(base);

  // Establish the branch character at the seed: refine the seeded scale by
  // safeguarded Newton, then classify by the sign of g_u(u, v).
  Vec Wx = w.eval(seed.x);
  double z0 = seed.scale;
  {
    double z = z0;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      Vec u = seed.v / z - Wx;
      if (!base_ptr->in_domain(seed.x, u)) break;
      double f = base_ptr->evaluate(seed.x, u) - 1.0;
      if (std::abs(f) < 1e-12) {
        ok = true;
        break;
      }
      Mat gu = fundamental_matrix(*base_ptr, seed.x, u);
      double slope = -u.dot(gu * seed.v) / ((f + 1.0) * z * z);
      if (slope == 0.0) break;
      double step = f / slope;
      double znext = z - step;
      int halvings = 0;
      while (halvings < 30 && (!(znext > 0.0) || !base_ptr->in_domain(seed.x, seed.v / znext - Wx))) {
        step *= 0.5;
        znext = z - step;
        ++halvings;
      }
      if (halvings == 30) break;
      z = znext;
    }
    if (!ok) {
      double resid = std::numeric_limits<double>::infinity();
      Vec u = seed.v / z - Wx;
      if (base_ptr->in_domain(seed.x, u)) resid = std::abs(base_ptr->evaluate(seed.x, u) - 1.0);
      if (resid > 1e-10)
        throw NumericalError("translation seed did not converge to a root of F(v/z - W) = 1");
    }
    z0 = z;
  }
  Vec u0 = seed.v / z0 - Wx;
  Mat gu0 = fundamental_matrix(*base_ptr, seed.x, u0);
  double trans0 = u0.dot(gu0 * seed.v);
  if (std::abs(trans0) < kTransversalityTol)
    throw NumericalError("translation seed sits at a transversality failure");
  TranslationCharacter character =
      trans0 > 0.0 ? TranslationCharacter::straight : TranslationCharacter::reverse;

  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::translated_numeric;
  m.data = TranslatedData{base_ptr, w, character};

  auto solve = [base_ptr, w, character](const Vec& x, const Vec& v) {
    return detail::solve_translation(*base_ptr, w.eval(x), x, v, character);
  };

  m.domain_quantities = [solve](const Vec& x, const Vec& v) {
    try {
      auto r = solve(x, v);
      return std::vector<double>{std::abs(r.transversality) - kTransversalityTol};
    } catch (const DomainError&) {
      return std::vector<double>{-1.0};
    } catch (const NumericalError&) {
      return std::vector<double>{-1.0};
    }
  };
  auto dom = [solve](const Vec& x, const Vec& v) {
    try {
      auto r = solve(x, v);
      return std::abs(r.transversality) > kTransversalityTol;
    } catch (const DomainError&) {
      return false;
    } catch (const NumericalError&) {
      return false;
    }
  };

  auto base_field = base_ptr->f_squared;
  m.f_squared = ScalarField(
      n,
      [solve](const Vec& x, const Vec& v) {
        auto r = solve(x, v);
        return r.z * r.z;
      },
      [solve, base_field, w, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        // Primal solve, then implicit-function refinement over jets:
        // each pass gains one Taylor order, so order+2 passes suffice.
        Vec xp(n), vp(n);
        for (int i = 0; i < n; ++i) {
          xp[i] = x[static_cast<size_t>(i)].value();
          vp[i] = v[static_cast<size_t>(i)].value();
        }
        auto r = solve(xp, vp);
        double slope = -r.transversality / (r.z * r.z);  // dphi/dz at the root
        auto table = x.front().table_ptr();
        Jet z = Jet::constant(r.z, table);
        std::vector<Jet> wj = w.comps_jet(x);
        for (int pass = 0; pass < table->order + 2; ++pass) {
          std::vector<Jet> u;
          u.reserve(static_cast<size_t>(n));
          for (int i = 0; i < n; ++i)
            u.push_back(v[static_cast<size_t>(i)] / z - wj[static_cast<size_t>(i)]);
          Jet f = sqrt(base_field.jet(x, u)) - 1.0;
          z = z - f / slope;
        }
        return z * z;
      },
      dom);
  return m;
}

inline MetricInstance reverse(const MetricInstance& base) {
  auto base_ptr = std::make_shared<const MetricInstance>(base);
  int n = base.dimension;
  MetricInstance m;
  m.dimension = n;
  m.kind = MetricKind::reverse;
  m.data = ReverseData{base_ptr};
  m.domain_quantities = [base_ptr](const Vec& x, const Vec& v) {
    return base_ptr->domain_quantities(x, -v);
  };
  auto base_field = base_ptr->f_squared;
  m.f_squared = ScalarField(
      n, [base_field](const Vec& x, const Vec& v) { return base_field.real(x, Vec(-v)); },
      [base_field, n](const std::vector<Jet>& x, const std::vector<Jet>& v) {
        std::vector<Jet> nv;
        nv.reserve(static_cast<size_t>(n));
        for (const Jet& c : v) nv.push_back(-c);
        return base_field.jet(x, nv);
      },
      [base_field](const Vec& x, const Vec& v) { return base_field.in_domain(x, Vec(-v)); });
  return m;
}

// ---------------------------------------------------------------------------
// Navigation data (Randers/Kropina <-> Zermelo dictionary).

struct NavigationData {
  SemiRiemannianMetric g;
  WindField wind;
};

namespace detail {

// B = h^{-1} beta and h(B,B), over any semantics.
template <class T>
std::pair<std::vector<T>, T> h_dual(const std::vector<T>& h, const std::vector<T>& b, int n) {
  std::vector<T> B = solve_linear<T>(h, b, n);
  T hbb = b[0] * B[0];
  for (int i = 1; i < n; ++i) hbb += b[static_cast<size_t>(i)] * B[static_cast<size_t>(i)];
  return {B, hbb};
}

}  // namespace detail

inline NavigationData navigation_data(const MetricInstance& m) {
  if (const auto* rd = std::get_if<RandersData>(&m.data)) {
    const SemiRiemannianMetric h = rd->h;
    const OneForm beta = rd->beta;
    int n = m.dimension;
    NavigationData out;
    out.g.dimension = n;
    out.g.coeff = [h, beta, n](const Vec& x) {
      Mat H = h.eval(x);
      Vec b = beta.eval(x);
      auto [B, hbb] = detail::h_dual<double>(detail::coeffs_at(h, x), to_std(b), n);
      double delta = 1.0 - hbb;
      if (std::abs(delta) < kBoundaryTol)
        throw NumericalError("degenerate pseudo-Randers metric: h(B,B) = 1");
      return Mat(delta * (H - b * b.transpose()));
    };
    out.g.coeff_jet = [h, beta, n](const std::vector<Jet>& x) {
      auto hc = h.coeff_jet(x);
      auto bc = beta.comps_jet(x);
      auto [B, hbb] = detail::h_dual<Jet>(hc, bc, n);
      Jet delta = 1.0 - hbb;
      if (std::abs(delta.value()) < kBoundaryTol)
        throw NumericalError("degenerate pseudo-Randers metric: h(B,B) = 1");
      std::vector<Jet> out_c;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          out_c.push_back(delta * (hc[static_cast<size_t>(i * n + j)] -
                                   bc[static_cast<size_t>(i)] * bc[static_cast<size_t>(j)]));
      return out_c;
    };
    out.wind.dimension = n;
    out.wind.comps = [h, beta, n](const Vec& x) {
      auto [B, hbb] = detail::h_dual<double>(detail::coeffs_at(h, x), to_std(beta.eval(x)), n);
      double delta = 1.0 - hbb;
      if (std::abs(delta) < kBoundaryTol)
        throw NumericalError("degenerate pseudo-Randers metric: h(B,B) = 1");
      Vec W(n);
      for (int i = 0; i < n; ++i) W[i] = -B[static_cast<size_t>(i)] / delta;
      return W;
    };
    out.wind.comps_jet = [h, beta, n](const std::vector<Jet>& x) {
      auto [B, hbb] = detail::h_dual<Jet>(h.coeff_jet(x), beta.comps_jet(x), n);
      Jet delta = 1.0 - hbb;
      std::vector<Jet> W;
      for (int i = 0; i < n; ++i) W.push_back(-B[static_cast<size_t>(i)] / delta);
      return W;
    };
    return out;
  }
  if (const auto* kd = std::get_if<KropinaData>(&m.data)) {
    const SemiRiemannianMetric h = kd->h;
    const OneForm beta = kd->beta;
    int n = m.dimension;
    NavigationData out;
    out.g.dimension = n;
    out.g.coeff = [h, beta, n](const Vec& x) {
      auto [B, hbb] = detail::h_dual<double>(detail::coeffs_at(h, x), to_std(beta.eval(x)), n);
      if (std::abs(hbb) < kBoundaryTol)
        throw NumericalError("degenerate pseudo-Kropina metric: h(B,B) = 0");
      return Mat((4.0 / hbb) * h.eval(x));
    };
    out.g.coeff_jet = [h, beta, n](const std::vector<Jet>& x) {
      auto hc = h.coeff_jet(x);
      auto [B, hbb] = detail::h_dual<Jet>(hc, beta.comps_jet(x), n);
      if (std::abs(hbb.value()) < kBoundaryTol)
        throw NumericalError("degenerate pseudo-Kropina metric: h(B,B) = 0");
      std::vector<Jet> out_c;
      for (size_t i = 0; i < hc.size(); ++i) out_c.push_back(4.0 * hc[i] / hbb);
      return out_c;
    };
    out.wind.dimension = n;
    out.wind.comps = [h, beta, n](const Vec& x) {
      auto [B, hbb] = detail::h_dual<double>(detail::coeffs_at(h, x), to_std(beta.eval(x)), n);
      Vec W(n);
      for (int i = 0; i < n; ++i) W[i] = 0.5 * B[static_cast<size_t>(i)];
      return W;
    };
    out.wind.comps_jet = [h, beta, n](const std::vector<Jet>& x) {
      auto [B, hbb] = detail::h_dual<Jet>(h.coeff_jet(x), beta.comps_jet(x), n);
      std::vector<Jet> W;
      for (int i = 0; i < n; ++i) W.push_back(0.5 * B[static_cast<size_t>(i)]);
      return W;
    };
    return out;
  }
  throw NumericalError("navigation_data needs a pseudo-Randers or pseudo-Kropina instance");
}

// Express a Zermelo closed-form instance as pseudo-Randers or pseudo-Kropina
// (the type is decided at the probe point by |g(W,W) - 1|).
inline MetricInstance zermelo_as_randers_kropina(const MetricInstance& z, const Vec& x_probe) {
  const auto* zd = std::get_if<ZermeloData>(&z.data);
  if (!zd) throw NumericalError("expected a Zermelo closed-form instance");
  const SemiRiemannianMetric g = zd->g;
  const WindField w = zd->wind;
  int n = z.dimension;
  Mat G = g.eval(x_probe);
  Vec W = w.eval(x_probe);
  double gww = W.dot(G * W);

  if (std::abs(gww - 1.0) > kZermeloFormSwitch) {
    // Randers type: h = (1/a^2)(gW)x(gW) + (1/a) g, beta = -(gW)/a, a = 1 - g(W,W).
    SemiRiemannianMetric h;
    h.dimension = n;
    h.coeff = [g, w, n](const Vec& x) {
      Mat G2 = g.eval(x);
      Vec gw = G2 * w.eval(x);
      double a = 1.0 - w.eval(x).dot(gw);
      return Mat((1.0 / (a * a)) * gw * gw.transpose() + (1.0 / a) * G2);
    };
    h.coeff_jet = [g, w, n](const std::vector<Jet>& x) {
      auto gc = g.coeff_jet(x);
      auto wc = w.comps_jet(x);
      std::vector<Jet> gw;
      for (int i = 0; i < n; ++i) {
        Jet acc = gc[static_cast<size_t>(i * n)] * wc[0];
        for (int j = 1; j < n; ++j)
          acc += gc[static_cast<size_t>(i * n + j)] * wc[static_cast<size_t>(j)];
        gw.push_back(acc);
      }
      Jet a = 1.0 - detail::bilinear(gc, wc, wc, n);
      std::vector<Jet> out;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          out.push_back(gw[static_cast<size_t>(i)] * gw[static_cast<size_t>(j)] / (a * a) +
                        gc[static_cast<size_t>(i * n + j)] / a);
      return out;
    };
    OneForm beta;
    beta.dimension = n;
    beta.comps = [g, w](const Vec& x) {
      Mat G2 = g.eval(x);
      Vec W2 = w.eval(x);
      double a = 1.0 - W2.dot(G2 * W2);
      return Vec(-(G2 * W2) / a);
    };
    beta.comps_jet = [g, w, n](const std::vector<Jet>& x) {
      auto gc = g.coeff_jet(x);
      auto wc = w.comps_jet(x);
      Jet a = 1.0 - detail::bilinear(gc, wc, wc, n);
      std::vector<Jet> out;
      for (int i = 0; i < n; ++i) {
        Jet acc = gc[static_cast<size_t>(i * n)] * wc[0];
        for (int j = 1; j < n; ++j)
          acc += gc[static_cast<size_t>(i * n + j)] * wc[static_cast<size_t>(j)];
        out.push_back(-acc / a);
      }
      return out;
    };
    double a_probe = 1.0 - gww;
    int eps_r = (zd->eps > 0) == (a_probe > 0.0) ? 1 : -1;
    return randers(h, beta, eps_r);
  }

  // Kropina type: h = g, beta = 2 g(W, .).
  OneForm beta;
  beta.dimension = n;
  beta.comps = [g, w](const Vec& x) { return Vec(2.0 * (g.eval(x) * w.eval(x))); };
  beta.comps_jet = [g, w, n](const std::vector<Jet>& x) {
    auto gc = g.coeff_jet(x);
    auto wc = w.comps_jet(x);
    std::vector<Jet> out;
    for (int i = 0; i < n; ++i) {
      Jet acc = gc[static_cast<size_t>(i * n)] * wc[0];
      for (int j = 1; j < n; ++j)
        acc += gc[static_cast<size_t>(i * n + j)] * wc[static_cast<size_t>(j)];
      out.push_back(2.0 * acc);
    }
    return out;
  };
  return kropina(g, beta);
}

// Nondegeneracy preflight for pseudo-Randers (h(B,B) != 1) and pseudo-Kropina
// (h(B,B) != 0) at the given chart points.
inline void check_randers_kropina_nondegenerate(const MetricInstance& m,
                                                const std::vector<Vec>& chart_points) {
  for (const Vec& x : chart_points) {
    if (const auto* rd = std::get_if<RandersData>(&m.data)) {
      auto [B, hbb] =
          detail::h_dual<double>(detail::coeffs_at(rd->h, x), to_std(rd->beta.eval(x)), m.dimension);
      if (std::abs(1.0 - hbb) < 1e-10) {
        std::ostringstream os;
        os << "pseudo-Randers degeneracy h(B,B) = 1 at x=[" << x.transpose() << "]";
        throw NumericalError(os.str());
      }
    } else if (const auto* kd = std::get_if<KropinaData>(&m.data)) {
      auto [B, hbb] =
          detail::h_dual<double>(detail::coeffs_at(kd->h, x), to_std(kd->beta.eval(x)), m.dimension);
      if (std::abs(hbb) < 1e-10) {
        std::ostringstream os;
        os << "pseudo-Kropina degeneracy h(B,B) = 0 at x=[" << x.transpose() << "]";
        throw NumericalError(os.str());
      }
    }
  }
}

}  // namespace finsler
