#pragma once

// Geodesic spray and flows. The spray of L = F^2 is
//   G^i = (1/4) g^{il} ( d2L/dv^l dx^k v^k - dL/dx^l ),
// the geodesic equation is xddot = -2 G(x, xdot). The co-geodesic flow is the
// Hamiltonian flow of H = (1/2)(F*)^2 on the cotangent bundle; it is realized
// here by integrating the spray in TM and mapping through the Legendre
// transformation, with the flow linearization D psi_t obtained by central
// finite differences of the flow map over the 2n phase directions.

#include "finsler/common.hpp"
#include "finsler/legendre.hpp"
#include "finsler/metrics.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace finsler {

using ChartPredicate = std::function<bool(const Vec&)>;

inline bool chart_ok(const ChartPredicate& chart, const Vec& x) {
  return chart ? chart(x) : true;
}

// ---------------------------------------------------------------------------
// Partial derivatives of L at a point, all read off one jet evaluation.

class FieldDerivatives {
 public:
  FieldDerivatives(const ScalarField& f, const Vec& x, const Vec& v, int order)
      : n_(f.dimension) {
    detail::check_point(f, x, v);
    auto table = JetTable::get(2 * n_, order);
    std::vector<Jet> xj, vj;
    for (int i = 0; i < n_; ++i) xj.push_back(Jet::variable(x[i], i, table));
    for (int i = 0; i < n_; ++i) vj.push_back(Jet::variable(v[i], n_ + i, table));
    value_ = f.jet(xj, vj);
  }

  // d^{|xs|+|vs|} L / dx^{xs} dv^{vs}
  double d(std::initializer_list<int> xs, std::initializer_list<int> vs) const {
    JetExponents e{};
    for (int i : xs) e[static_cast<size_t>(i)] += 1;
    for (int i : vs) e[static_cast<size_t>(n_ + i)] += 1;
    return value_.derivative(e);
  }

  double value() const { return value_.value(); }
  int dimension() const { return n_; }

 private:
  int n_;
  Jet value_;
};

// ---------------------------------------------------------------------------
// Spray coefficients and their derivatives.

struct SprayCoefficients {
  Vec G;
};

struct SprayDerivatives {
  Vec G;                 // G^i
  Mat dG_dv;             // (i, j) -> dG^i/dv^j
  Mat dG_dx;             // (i, j) -> dG^i/dx^j
  std::vector<Mat> d2G_dvdv;  // [i](j, k) -> d2 G^i / dv^j dv^k
  std::vector<Mat> d2G_dxdv;  // [i](j, k) -> d2 G^i / dx^j dv^k
};

namespace detail {

inline Vec spray_from(const FieldDerivatives& L, const Vec& v) {
  int n = L.dimension();
  Mat g(n, n);
  Vec A(n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) g(a, b) = 0.5 * L.d({}, {a, b});
    double acc = 0;
    for (int k = 0; k < n; ++k) acc += L.d({k}, {a}) * v[k];
    A[a] = acc - L.d({a}, {});
  }
  return 0.25 * g.fullPivLu().solve(A);
}

}  // namespace detail

inline SprayCoefficients spray(const MetricInstance& m, const Vec& x, const Vec& v) {
  FieldDerivatives L(m.f_squared, x, v, 2);
  return {detail::spray_from(L, v)};
}

// Full first/second derivative package of G, assembled by the chain rule
// from L-partials of total order <= 4 (exact jets).
inline SprayDerivatives spray_derivatives(const MetricInstance& m, const Vec& x, const Vec& v) {
  int n = m.dimension;
  FieldDerivatives L(m.f_squared, x, v, 4);

  Mat g(n, n);
  Vec A(n);
  std::vector<Mat> dgv(static_cast<size_t>(n), Mat(n, n)), dgx(static_cast<size_t>(n), Mat(n, n));
  std::vector<Vec> dAv(static_cast<size_t>(n), Vec(n)), dAx(static_cast<size_t>(n), Vec(n));
  std::vector<std::vector<Mat>> d2gvv(static_cast<size_t>(n),
                                      std::vector<Mat>(static_cast<size_t>(n), Mat(n, n)));
  std::vector<std::vector<Mat>> d2gxv(static_cast<size_t>(n),
                                      std::vector<Mat>(static_cast<size_t>(n), Mat(n, n)));
  std::vector<std::vector<Vec>> d2Avv(static_cast<size_t>(n),
                                      std::vector<Vec>(static_cast<size_t>(n), Vec(n)));
  std::vector<std::vector<Vec>> d2Axv(static_cast<size_t>(n),
                                      std::vector<Vec>(static_cast<size_t>(n), Vec(n)));

  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) g(a, b) = 0.5 * L.d({}, {a, b});
    double acc = 0;
    for (int k = 0; k < n; ++k) acc += L.d({k}, {a}) * v[k];
    A[a] = acc - L.d({a}, {});
  }
  for (int mth = 0; mth < n; ++mth) {
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        dgv[static_cast<size_t>(mth)](a, b) = 0.5 * L.d({}, {a, b, mth});
        dgx[static_cast<size_t>(mth)](a, b) = 0.5 * L.d({mth}, {a, b});
      }
      double accv = 0, accx = 0;
      for (int k = 0; k < n; ++k) {
        accv += L.d({k}, {a, mth}) * v[k];
        accx += L.d({k, mth}, {a}) * v[k];
      }
      dAv[static_cast<size_t>(mth)][a] = accv + L.d({mth}, {a}) - L.d({a}, {mth});
      dAx[static_cast<size_t>(mth)][a] = accx - L.d({a, mth}, {});
    }
  }
  for (int mth = 0; mth < n; ++mth) {
    for (int p = 0; p < n; ++p) {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          d2gvv[static_cast<size_t>(mth)][static_cast<size_t>(p)](a, b) =
              0.5 * L.d({}, {a, b, mth, p});
          d2gxv[static_cast<size_t>(mth)][static_cast<size_t>(p)](a, b) =
              0.5 * L.d({mth}, {a, b, p});
        }
        double accvv = 0, accxv = 0;
        for (int k = 0; k < n; ++k) {
          accvv += L.d({k}, {a, mth, p}) * v[k];
          accxv += L.d({k, mth}, {a, p}) * v[k];
        }
        d2Avv[static_cast<size_t>(mth)][static_cast<size_t>(p)][a] =
            accvv + L.d({p}, {a, mth}) + L.d({mth}, {a, p}) - L.d({a}, {mth, p});
        d2Axv[static_cast<size_t>(mth)][static_cast<size_t>(p)][a] =
            accxv + L.d({p, mth}, {a}) - L.d({a, mth}, {p});
      }
    }
  }

  Mat B = g.inverse();
  auto dB = [&](const Mat& dg) { return Mat(-B * dg * B); };
  auto d2B = [&](const Mat& dgz, const Mat& dgw, const Mat& dgzw) {
    return Mat(-B * dgzw * B + B * dgz * B * dgw * B + B * dgw * B * dgz * B);
  };

  SprayDerivatives out;
  out.G = 0.25 * (B * A);
  out.dG_dv.resize(n, n);
  out.dG_dx.resize(n, n);
  out.d2G_dvdv.assign(static_cast<size_t>(n), Mat::Zero(n, n));
  out.d2G_dxdv.assign(static_cast<size_t>(n), Mat::Zero(n, n));

  std::vector<Mat> dBv(static_cast<size_t>(n)), dBx(static_cast<size_t>(n));
  for (int mth = 0; mth < n; ++mth) {
    dBv[static_cast<size_t>(mth)] = dB(dgv[static_cast<size_t>(mth)]);
    dBx[static_cast<size_t>(mth)] = dB(dgx[static_cast<size_t>(mth)]);
    Vec col_v = 0.25 * (dBv[static_cast<size_t>(mth)] * A + B * dAv[static_cast<size_t>(mth)]);
    Vec col_x = 0.25 * (dBx[static_cast<size_t>(mth)] * A + B * dAx[static_cast<size_t>(mth)]);
    out.dG_dv.col(mth) = col_v;
    out.dG_dx.col(mth) = col_x;
  }

  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < n; ++k) {
      // d2 G / dv^j dv^k
      Mat Bjk = d2B(dgv[static_cast<size_t>(j)], dgv[static_cast<size_t>(k)],
                    d2gvv[static_cast<size_t>(j)][static_cast<size_t>(k)]);
      Vec gvv = 0.25 * (Bjk * A + dBv[static_cast<size_t>(j)] * dAv[static_cast<size_t>(k)] +
                        dBv[static_cast<size_t>(k)] * dAv[static_cast<size_t>(j)] +
                        B * d2Avv[static_cast<size_t>(j)][static_cast<size_t>(k)]);
      // d2 G / dx^j dv^k
      Mat Bxv = d2B(dgx[static_cast<size_t>(j)], dgv[static_cast<size_t>(k)],
                    d2gxv[static_cast<size_t>(j)][static_cast<size_t>(k)]);
      Vec gxv = 0.25 * (Bxv * A + dBx[static_cast<size_t>(j)] * dAv[static_cast<size_t>(k)] +
                        dBv[static_cast<size_t>(k)] * dAx[static_cast<size_t>(j)] +
                        B * d2Axv[static_cast<size_t>(j)][static_cast<size_t>(k)]);
      for (int i = 0; i < n; ++i) {
        out.d2G_dvdv[static_cast<size_t>(i)](j, k) = gvv[i];
        out.d2G_dxdv[static_cast<size_t>(i)](j, k) = gxv[i];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-step RK4.

struct RawTrajectory {
  std::vector<double> t;
  std::vector<Vec> z;
  bool stopped_early = false;
  std::string stop_reason;
};

inline RawTrajectory rk4(const std::function<Vec(const Vec&)>& rhs, const Vec& z0, double T,
                         double step) {
  if (step <= 0.0) throw NumericalError("integration step must be positive");
  RawTrajectory out;
  out.t.push_back(0.0);
  out.z.push_back(z0);
  double dir = T >= 0.0 ? 1.0 : -1.0;
  double total = std::abs(T);
  long long nfull = static_cast<long long>(std::floor(total / step + 1e-9));
  double rem = total - static_cast<double>(nfull) * step;
  if (rem < 1e-12 * step) rem = 0.0;
  Vec z = z0;
  double t = 0.0;
  auto advance = [&](double h) {
    Vec k1 = rhs(z);
    Vec k2 = rhs(Vec(z + 0.5 * h * k1));
    Vec k3 = rhs(Vec(z + 0.5 * h * k2));
    Vec k4 = rhs(Vec(z + h * k3));
    z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  };
  try {
    for (long long i = 0; i < nfull; ++i) {
      advance(dir * step);
      out.t.push_back(t);
      out.z.push_back(z);
    }
    if (rem > 0.0) {
      advance(dir * rem);
      out.t.push_back(t);
      out.z.push_back(z);
    }
  } catch (const DomainError& e) {
    out.stopped_early = true;
    out.stop_reason = e.what();
  } catch (const NumericalError& e) {
    out.stopped_early = true;
    out.stop_reason = e.what();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectories.

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> x;
  std::vector<Vec> fiber;          // v in TM, xi in T*M; empty for wind flows
  std::vector<double> conserved;   // F (geodesic) or H (co-geodesic)
  std::vector<Mat> linearization;  // D psi_t per node when requested
  bool stopped_early = false;
  std::string stop_reason;

  const Vec& end_x() const { return x.back(); }
  double conserved_drift() const {
    double c0 = conserved.front();
    double worst = 0;
    for (double c : conserved) worst = std::max(worst, std::abs(c - c0));
    return worst / std::max(1e-300, std::abs(c0));
  }
};

namespace detail {

inline std::function<Vec(const Vec&)> geodesic_rhs(const MetricInstance& m,
                                                   const ChartPredicate& chart) {
  int n = m.dimension;
  return [&m, chart, n](const Vec& z) {
    Vec x = z.head(n), v = z.tail(n);
    if (!chart_ok(chart, x)) throw DomainError("trajectory left the chart");
    Vec G = spray(m, x, v).G;  // checks the conic domain
    Vec dz(2 * n);
    dz.head(n) = v;
    dz.tail(n) = -2.0 * G;
    return dz;
  };
}

}  // namespace detail

inline Trajectory geodesic(const MetricInstance& m, const Vec& x0, const Vec& v0, double T,
                           double step, const ChartPredicate& chart = nullptr) {
  int n = m.dimension;
  Vec z0(2 * n);
  z0.head(n) = x0;
  z0.tail(n) = v0;
  RawTrajectory raw = rk4(detail::geodesic_rhs(m, chart), z0, T, step);
  Trajectory out;
  out.stopped_early = raw.stopped_early;
  out.stop_reason = raw.stop_reason;
  for (size_t i = 0; i < raw.z.size(); ++i) {
    Vec x = raw.z[i].head(n), v = raw.z[i].tail(n);
    out.times.push_back(raw.t[i]);
    out.x.push_back(x);
    out.fiber.push_back(v);
    out.conserved.push_back(m.evaluate(x, v));
  }
  return out;
}

// Endpoint of the geodesic from (x0, v0) at parameter s (integrates [0, s]).
inline Vec geodesic_point(const MetricInstance& m, const Vec& x0, const Vec& v0, double s,
                          double step, const ChartPredicate& chart = nullptr) {
  if (s == 0.0) return x0;
  Trajectory tr = geodesic(m, x0, v0, s, step, chart);
  if (tr.stopped_early)
    throw DomainError("geodesic integration stopped early: " + tr.stop_reason);
  return tr.end_x();
}

// The co-geodesic field S(x, xi) at xi = L_F(v), expressed through TM data:
// xdot = v, xidot = (1/2) dL/dx.
inline Vec cogeodesic_field(const MetricInstance& m, const Vec& x, const Vec& v) {
  int n = m.dimension;
  FieldDerivatives L(m.f_squared, x, v, 1);
  Vec dz(2 * n);
  dz.head(n) = v;
  for (int j = 0; j < n; ++j) dz[n + j] = 0.5 * L.d({j}, {});
  return dz;
}

// Jacobian DS of the co-geodesic field at (x, xi = L_F(v)); exact from
// L-partials of order <= 2 and the implicit derivative of v*(x, xi).
inline Mat cogeodesic_field_jacobian(const MetricInstance& m, const Vec& x, const Vec& v) {
  int n = m.dimension;
  FieldDerivatives L(m.f_squared, x, v, 2);
  Mat g(n, n), Lxv(n, n), Lxx(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      g(a, b) = 0.5 * L.d({}, {a, b});
      Lxv(a, b) = L.d({a}, {b});  // d2L/dx^a dv^b
      Lxx(a, b) = L.d({a, b}, {});
    }
  Mat B = g.inverse();
  // dv*/dxi = B; dv*/dx^k = -B (1/2) Lxv(k, .)
  Mat dv_dx(n, n);
  for (int k = 0; k < n; ++k) dv_dx.col(k) = -0.5 * (B * Lxv.row(k).transpose());
  Mat DS(2 * n, 2 * n);
  DS.topLeftCorner(n, n) = dv_dx;
  DS.topRightCorner(n, n) = B;
  // S2_j = (1/2) L_{x^j}(x, v*)
  DS.bottomLeftCorner(n, n) = 0.5 * (Lxx + Lxv * dv_dx);
  DS.bottomRightCorner(n, n) = 0.5 * (Lxv * B);
  return DS;
}

inline Trajectory cogeodesic_flow(const MetricInstance& m, const Vec& x0, const Vec& xi0,
                                  const Vec& v_seed, double T, double step,
                                  bool with_linearization = false,
                                  const ChartPredicate& chart = nullptr,
                                  double fd_step = 1e-5) {
  int n = m.dimension;
  Vec v0 = legendre_inverse(m, x0, xi0, v_seed);

  auto tm_flow = [&](const Vec& xs, const Vec& vs) {
    Vec z0(2 * n);
    z0.head(n) = xs;
    z0.tail(n) = vs;
    return rk4(detail::geodesic_rhs(m, chart), z0, T, step);
  };

  RawTrajectory raw = tm_flow(x0, v0);
  Trajectory out;
  out.stopped_early = raw.stopped_early;
  out.stop_reason = raw.stop_reason;
  for (size_t i = 0; i < raw.z.size(); ++i) {
    Vec x = raw.z[i].head(n), v = raw.z[i].tail(n);
    out.times.push_back(raw.t[i]);
    out.x.push_back(x);
    Vec xi = legendre(m, x, v);
    out.fiber.push_back(xi);
    double f = m.evaluate(x, v);
    out.conserved.push_back(0.5 * f * f);
  }
  if (!with_linearization || out.stopped_early) return out;

  // D psi_t by central differences of the T*M flow map over the 2n phase
  // directions. Perturbed covectors are pulled back to TM with the base
  // velocity as the Newton seed.
  size_t nodes = out.times.size();
  std::vector<Mat> lin(nodes, Mat(2 * n, 2 * n));
  for (int dir = 0; dir < 2 * n; ++dir) {
    auto flow_states = [&](double sign) {
      Vec xs = x0, xis = xi0;
      if (dir < n)
        xs[dir] += sign * fd_step;
      else
        xis[dir - n] += sign * fd_step;
      Vec vs = legendre_inverse(m, xs, xis, v0);
      RawTrajectory r = tm_flow(xs, vs);
      if (r.stopped_early || r.z.size() != nodes)
        throw NumericalError("perturbed flow for D psi_t stopped early");
      std::vector<Vec> states(nodes);
      for (size_t i = 0; i < nodes; ++i) {
        Vec x = r.z[i].head(n), v = r.z[i].tail(n);
        Vec st(2 * n);
        st.head(n) = x;
        st.tail(n) = legendre(m, x, v);
        states[i] = st;
      }
      return states;
    };
    auto plus = flow_states(1.0);
    auto minus = flow_states(-1.0);
    for (size_t i = 0; i < nodes; ++i)
      lin[i].col(dir) = (plus[i] - minus[i]) / (2.0 * fd_step);
  }
  out.linearization = std::move(lin);
  return out;
}

// Direct Hamiltonian integration in T*M (Newton inverse inside the right-hand
// side, warm-started along the flow); used to cross-check the mapped flow.
inline Trajectory cogeodesic_flow_direct(const MetricInstance& m, const Vec& x0, const Vec& xi0,
                                         const Vec& v_seed, double T, double step) {
  int n = m.dimension;
  Vec warm = legendre_inverse(m, x0, xi0, v_seed);
  auto rhs = [&m, &warm, n](const Vec& z) {
    Vec x = z.head(n), xi = z.tail(n);
    Vec v = legendre_inverse(m, x, xi, warm);
    warm = v;
    return cogeodesic_field(m, x, v);
  };
  Vec z0(2 * n);
  z0.head(n) = x0;
  z0.tail(n) = xi0;
  RawTrajectory raw = rk4(rhs, z0, T, step);
  Trajectory out;
  out.stopped_early = raw.stopped_early;
  out.stop_reason = raw.stop_reason;
  for (size_t i = 0; i < raw.z.size(); ++i) {
    Vec x = raw.z[i].head(n), xi = raw.z[i].tail(n);
    out.times.push_back(raw.t[i]);
    out.x.push_back(x);
    out.fiber.push_back(xi);
    Vec v = legendre_inverse(m, x, xi, warm);
    double f = m.evaluate(x, v);
    out.conserved.push_back(0.5 * f * f);
  }
  return out;
}

// Standard Darboux matrix of the chart: omega(u, w) = u^T Omega w with
// states ordered (x, xi).
inline Mat darboux_matrix(int n) {
  Mat J = Mat::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n) = -Mat::Identity(n, n);
  J.bottomLeftCorner(n, n) = Mat::Identity(n, n);
  return J;
}

inline double symplectic_residual(const Mat& dpsi) {
  int n2 = static_cast<int>(dpsi.rows());
  Mat J = darboux_matrix(n2 / 2);
  return (dpsi.transpose() * J * dpsi - J).lpNorm<Eigen::Infinity>();
}

// ---------------------------------------------------------------------------
// Wind flows.

inline Trajectory wind_flow(const WindField& w, const Vec& x0, double T, double step,
                            const ChartPredicate& chart = nullptr) {
  auto rhs = [&w, &chart](const Vec& x) {
    if (!chart_ok(chart, x)) throw DomainError("wind flow left the chart");
    return w.eval(x);
  };
  RawTrajectory raw = rk4(rhs, x0, T, step);
  Trajectory out;
  out.stopped_early = raw.stopped_early;
  out.stop_reason = raw.stop_reason;
  out.times = raw.t;
  out.x = raw.z;
  return out;
}

inline Vec wind_flow_point(const WindField& w, const Vec& x0, double T, double step,
                           const ChartPredicate& chart = nullptr) {
  if (T == 0.0) return x0;
  Trajectory tr = wind_flow(w, x0, T, step, chart);
  if (tr.stopped_early) throw DomainError("wind flow stopped early: " + tr.stop_reason);
  return tr.end_x();
}

// D Psi_t of the wind flow by central differences (step 1e-5).
inline Mat wind_flow_differential(const WindField& w, const Vec& x0, double T, double step,
                                  const ChartPredicate& chart = nullptr, double fd_step = 1e-5) {
  int n = w.dimension;
  Mat D(n, n);
  for (int i = 0; i < n; ++i) {
    Vec xp = x0, xm = x0;
    xp[i] += fd_step;
    xm[i] -= fd_step;
    Vec fp = wind_flow_point(w, xp, T, step, chart);
    Vec fm = wind_flow_point(w, xm, T, step, chart);
    D.col(i) = (fp - fm) / (2.0 * fd_step);
  }
  return D;
}

// ---------------------------------------------------------------------------
// Homothety: (psi_t^W)^* F = e^{-sigma t} F.

struct HomothetyEstimate {
  double sigma = 0.0;
  double residual = 0.0;  // max |e^{sigma t} F(DPsi_t v) / F(v) - 1|
};

inline HomothetyEstimate homothety_constant(const MetricInstance& m, const WindField& w,
                                            const std::vector<std::pair<Vec, Vec>>& samples,
                                            double flow_step = 1e-3,
                                            const ChartPredicate& chart = nullptr) {
  if (samples.empty()) throw NumericalError("homothety_constant needs at least one sample");
  auto pullback = [&](const Vec& x, const Vec& v, double t) {
    Vec xt = wind_flow_point(w, x, t, flow_step, chart);
    Mat D = wind_flow_differential(w, x, t, flow_step, chart);
    return m.evaluate(xt, Vec(D * v));
  };
  const double tau = 0.05;
  double sigma_acc = 0.0;
  for (const auto& [x, v] : samples) {
    double cp = std::log(pullback(x, v, tau));
    double cm = std::log(pullback(x, v, -tau));
    sigma_acc += -(cp - cm) / (2.0 * tau);
  }
  HomothetyEstimate est;
  est.sigma = sigma_acc / static_cast<double>(samples.size());
  for (const auto& [x, v] : samples) {
    double f0 = m.evaluate(x, v);
    for (double t : {-0.2, -0.1, 0.1, 0.2}) {
      double val = std::exp(est.sigma * t) * pullback(x, v, t) / f0;
      est.residual = std::max(est.residual, std::abs(val - 1.0));
    }
  }
  return est;
}

// ---------------------------------------------------------------------------
// Geodesic correspondence under a homothetic wind: the unit-speed geodesics
// of the translation are psi_t^W(gamma(f(t))) with f(t) = (e^{sigma t}-1)/sigma
// (f = t when sigma = 0) and gamma the unit-speed base geodesic.

inline double correspondence_reparametrization(double sigma, double t) {
  if (std::abs(sigma) < 1e-14) return t;
  return (std::exp(sigma * t) - 1.0) / sigma;
}

inline Vec corresponding_geodesic_point(const MetricInstance& base, const WindField& w,
                                        double sigma, const Vec& x0, const Vec& u0, double t,
                                        double step, const ChartPredicate& chart = nullptr) {
  double f = correspondence_reparametrization(sigma, t);
  Vec mid = geodesic_point(base, x0, u0, f, step, chart);
  return wind_flow_point(w, mid, t, step, chart);
}

}  // namespace finsler
