#pragma once

// Flag curvature by two independent routes.
//
// Spray route: R^i_k = 2 dG^i/dx^k - v^j d2G^i/dx^j dv^k
//                      + 2 G^j d2G^i/dv^j dv^k - dG^i/dv^j dG^j/dv^k,
// K(v, span{v,w}) = g_v(w, Rw) / (g_v(v,v) g_v(w,w) - g_v(v,w)^2).
//
// Fanning route: the Jacobi curve ell_xi(t) = D psi_{-t}(L_{psi_t(xi)}) of the
// co-geodesic flow is a fanning curve of Lagrangian subspaces of the contact
// plane C_xi; its Wronskian W(t)(a,b) = omega(adot, b) corresponds to the
// fundamental tensor along the geodesic, the fundamental endomorphism F(t)
// satisfies F a_i = 0, F adot_i = a_i, and the Jacobi endomorphism
// K(t) = (1/4) Fddot(t)^2 yields the flag curvature
//   K_F(v, Pi) = (1/F^2(v)) W(0)(K(0) a, a) / W(0)(a, a),  a = g_v(w, .).

#include "finsler/common.hpp"
#include "finsler/dynamics.hpp"
#include "finsler/legendre.hpp"
#include "finsler/metrics.hpp"
#include "finsler/tensors.hpp"

#include <cmath>
#include <sstream>
#include <vector>

namespace finsler {

// ---------------------------------------------------------------------------
// Spray route.

inline Mat riemann_spray_curvature(const MetricInstance& m, const Vec& x, const Vec& v) {
  int n = m.dimension;
  SprayDerivatives d = spray_derivatives(m, x, v);
  Mat R(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      double acc = 2.0 * d.dG_dx(i, k);
      for (int j = 0; j < n; ++j) {
        acc -= v[j] * d.d2G_dxdv[static_cast<size_t>(i)](j, k);
        acc += 2.0 * d.G[j] * d.d2G_dvdv[static_cast<size_t>(i)](j, k);
        acc -= d.dG_dv(i, j) * d.dG_dv(j, k);
      }
      R(i, k) = acc;
    }
  return R;
}

// A flag: pole v and transverse edge w with g_v(v, w) = 0 enforced by
// projection; requires a nondegenerate restriction of g_v to the 2-plane.
struct Flag {
  Vec x;
  Vec v;
  Vec w;             // projected edge
  double discriminant = 0.0;  // g(v,v) g(w,w) - g(v,w)^2 after projection
};

inline Flag make_flag(const MetricInstance& m, const Vec& x, const Vec& v, const Vec& w_raw) {
  Mat g = fundamental_matrix(m, x, v);
  double gvv = v.dot(g * v);
  double gvw = v.dot(g * w_raw);
  Vec w = w_raw - (gvw / gvv) * v;
  double gww = w.dot(g * w);
  double disc = gvv * gww;  // g(v,w) = 0 after projection
  if (std::abs(disc) < 1e-10)
    throw NumericalError("flag plane is v-degenerate (discriminant below tolerance)");
  if (w.lpNorm<Eigen::Infinity>() < 1e-12)
    throw NumericalError("flag edge is parallel to the pole");
  return Flag{x, v, w, disc};
}

inline double flag_curvature_spray(const MetricInstance& m, const Flag& flag) {
  Mat g = fundamental_matrix(m, flag.x, flag.v);
  Mat R = riemann_spray_curvature(m, flag.x, flag.v);
  double num = flag.w.dot(g * (R * flag.w));
  return num / flag.discriminant;
}

// ---------------------------------------------------------------------------
// Fanning route.

struct FanningOptions {
  double delta = 1e-2;   // grid spacing of the symmetric time grid
  int half_nodes = 4;    // k: grid is {-k delta .. +k delta}
  double step = 1e-3;    // RK4 step of the underlying flow
  double fd_step = 1e-5; // central-difference step of D psi_t
  double cond_limit = 1e8;
  int max_delta_halvings = 3;
};

struct FanningFrameSeries {
  std::vector<double> times;                 // 2k+1 grid times
  std::vector<std::vector<Vec>> frames;      // [node][i]: a_i(t) in T_xi(T*M)
  std::vector<std::vector<Vec>> frame_dots;  // [node][i]: adot_i(t)
  std::vector<Mat> wronskian;                // per node, (n-1) x (n-1)
  std::vector<Mat> fundamental;              // per node, (2n-2) x (2n-2), fixed C_xi basis
  Mat frame_coords0;                         // coords of a_i(0) in the C_xi basis
  Mat c_basis;                               // 2n x (2n-2)
  Eigen::FullPivLU<Mat> full_basis_lu;       // [c_basis | C | S] factor for coordinates
  double f_value = 0.0;                      // F(v) at the base sample
  int dropped_index = -1;
  double max_iso_residual = 0.0;  // max |omega(a_i, a_j)| over the grid
  double max_w_asym = 0.0;        // max Wronskian asymmetry over the grid
  double max_cond = 0.0;          // conditioning of [P Q] across the grid
  int center = 0;                 // index of t = 0

  Vec coords(const Vec& ambient) const {
    Vec full = full_basis_lu.solve(ambient);
    return full.head(full.size() - 2);
  }
};

namespace detail {

struct NodeState {
  Vec x, v;
  Mat dpsi;  // 2n x 2n
};

// Flow states and D psi_t at the grid times j*delta, j = -k..k.
inline std::vector<NodeState> flow_grid(const MetricInstance& m, const Vec& x0, const Vec& v0,
                                        const FanningOptions& opt) {
  int n = m.dimension;
  int k = opt.half_nodes;
  int nsub = std::max(1, static_cast<int>(std::ceil(opt.delta / opt.step - 1e-12)));
  double h = opt.delta / nsub;
  double horizon = k * opt.delta;

  Vec xi0 = legendre(m, x0, v0);

  auto tm_run = [&](const Vec& xs, const Vec& vs, double T) {
    Vec z0(2 * n);
    z0.head(n) = xs;
    z0.tail(n) = vs;
    RawTrajectory r = rk4(detail::geodesic_rhs(m, nullptr), z0, T, h);
    if (r.stopped_early)
      throw NumericalError("fanning flow stopped early: " + r.stop_reason);
    return r;
  };

  auto states_at_nodes = [&](const Vec& xs, const Vec& vs) {
    RawTrajectory fwd = tm_run(xs, vs, horizon);
    RawTrajectory bwd = tm_run(xs, vs, -horizon);
    std::vector<Vec> out(static_cast<size_t>(2 * k + 1));
    for (int j = -k; j <= k; ++j) {
      const RawTrajectory& r = j >= 0 ? fwd : bwd;
      size_t idx = static_cast<size_t>(std::abs(j) * nsub);
      if (idx >= r.z.size()) throw NumericalError("fanning flow grid underran");
      out[static_cast<size_t>(j + k)] = r.z[idx];
    }
    return out;
  };

  std::vector<Vec> primal = states_at_nodes(x0, v0);
  // perturbed runs for D psi_t: phase space is (x, xi)
  std::vector<std::vector<Vec>> plus(static_cast<size_t>(2 * n)),
      minus(static_cast<size_t>(2 * n));
  for (int dir = 0; dir < 2 * n; ++dir) {
    for (double sign : {1.0, -1.0}) {
      Vec xs = x0, xis = xi0;
      if (dir < n)
        xs[dir] += sign * opt.fd_step;
      else
        xis[dir - n] += sign * opt.fd_step;
      Vec vs = legendre_inverse(m, xs, xis, v0);
      auto states = states_at_nodes(xs, vs);
      (sign > 0 ? plus : minus)[static_cast<size_t>(dir)] = std::move(states);
    }
  }

  std::vector<NodeState> nodes(static_cast<size_t>(2 * k + 1));
  for (int j = 0; j < 2 * k + 1; ++j) {
    NodeState st;
    st.x = primal[static_cast<size_t>(j)].head(n);
    st.v = primal[static_cast<size_t>(j)].tail(n);
    st.dpsi.resize(2 * n, 2 * n);
    for (int dir = 0; dir < 2 * n; ++dir) {
      const Vec& zp = plus[static_cast<size_t>(dir)][static_cast<size_t>(j)];
      const Vec& zm = minus[static_cast<size_t>(dir)][static_cast<size_t>(j)];
      Vec xp = zp.head(n), vp = zp.tail(n);
      Vec xm = zm.head(n), vm = zm.tail(n);
      Vec sp(2 * n), sm(2 * n);
      sp.head(n) = xp;
      sp.tail(n) = legendre(m, xp, vp);
      sm.head(n) = xm;
      sm.tail(n) = legendre(m, xm, vm);
      st.dpsi.col(dir) = (sp - sm) / (2.0 * opt.fd_step);
    }
    nodes[static_cast<size_t>(j)] = std::move(st);
  }
  return nodes;
}

}  // namespace detail

// Build the Jacobi-curve frame series at (x, v). The frame of the vertical
// Legendrean space at the flowed point projects the covector axes
// e_i -> e_i - (DF*(e_i)/F*) xi_t (the index with the largest |DF*(e_i)| at
// t = 0 is dropped, fixing the gauge), then pulls back through D psi_t^{-1}.
// Frame time-derivatives use the variational identity
//   d/dt [D psi_t^{-1} eta(t)] = D psi_t^{-1} (eta'(t) - DS(psi_t) eta(t)),
// with DS the exact Jacobian of the co-geodesic field, so no divided
// differences of flow maps enter before the final second difference of F(t).
inline FanningFrameSeries jacobi_curve(const MetricInstance& m, const Vec& x, const Vec& v,
                                       const FanningOptions& opt = {}) {
  int n = m.dimension;
  if (n < 2) throw NumericalError("fanning pipeline needs dimension >= 2");
  int k = opt.half_nodes;
  auto nodes = detail::flow_grid(m, x, v, opt);

  FanningFrameSeries out;
  out.center = k;
  double f0 = m.evaluate(x, v);
  out.f_value = f0;

  // gauge: drop the axis most parallel to DF*(e_i) = v^i / F* at t = 0
  int drop = 0;
  for (int i = 1; i < n; ++i)
    if (std::abs(v[i]) > std::abs(v[drop])) drop = i;
  out.dropped_index = drop;
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (i != drop) keep.push_back(i);

  Mat omega = darboux_matrix(n);
  Vec xi0 = legendre(m, x, v);
  Vec S0 = cogeodesic_field(m, x, v);
  Vec Cvec = Vec::Zero(2 * n);
  Cvec.tail(n) = xi0;

  // vertical frame and its time derivative at a node
  auto vertical_frames = [&](const detail::NodeState& st) {
    Vec xi_t = legendre(m, st.x, st.v);
    double f = m.evaluate(st.x, st.v);
    double f2 = f * f;
    Vec vdot = -2.0 * spray(m, st.x, st.v).G;
    Vec xidot = cogeodesic_field(m, st.x, st.v).tail(n);
    std::vector<Vec> eta, etadot;
    for (int i : keep) {
      Vec e = Vec::Zero(n);
      e[i] = 1.0;
      Vec q = e - (st.v[i] / f2) * xi_t;
      Vec qdot = -(vdot[i] / f2) * xi_t - (st.v[i] / f2) * xidot;
      eta.push_back(q);
      etadot.push_back(qdot);
    }
    return std::make_pair(eta, etadot);
  };

  int nn = 2 * k + 1;
  out.times.resize(static_cast<size_t>(nn));
  out.frames.resize(static_cast<size_t>(nn));
  out.frame_dots.resize(static_cast<size_t>(nn));
  out.wronskian.resize(static_cast<size_t>(nn));
  out.fundamental.resize(static_cast<size_t>(nn));

  std::vector<std::vector<Vec>> raw_a(static_cast<size_t>(nn)), raw_ad(static_cast<size_t>(nn));
  for (int j = 0; j < nn; ++j) {
    const auto& st = nodes[static_cast<size_t>(j)];
    out.times[static_cast<size_t>(j)] = (j - k) * opt.delta;
    auto [eta, etadot] = vertical_frames(st);
    Mat DS = cogeodesic_field_jacobian(m, st.x, st.v);
    Eigen::FullPivLU<Mat> dpsi_lu(st.dpsi);
    std::vector<Vec> a, ad;
    for (size_t i = 0; i < eta.size(); ++i) {
      Vec lift = Vec::Zero(2 * n);
      lift.tail(n) = eta[i];
      Vec liftdot = Vec::Zero(2 * n);
      liftdot.tail(n) = etadot[i];
      a.push_back(dpsi_lu.solve(lift));
      ad.push_back(dpsi_lu.solve(Vec(liftdot - DS * lift)));
    }
    raw_a[static_cast<size_t>(j)] = std::move(a);
    raw_ad[static_cast<size_t>(j)] = std::move(ad);
  }

  // project everything onto the contact plane C_xi along span{S0, Cvec}:
  // C_xi = ker omega(S0, .) \cap ker omega(Cvec, .)
  double wSC = S0.dot(omega * Cvec);  // omega(S, C) = -omega(C, S) = -F*^2
  auto project = [&](const Vec& X) {
    double cs = S0.dot(omega * X) / wSC;   // coefficient of Cvec
    double cc = Cvec.dot(omega * X) / -wSC;  // coefficient of S0
    return Vec(X - cs * Cvec - cc * S0);
  };

  for (int j = 0; j < nn; ++j) {
    auto& a = raw_a[static_cast<size_t>(j)];
    auto& ad = raw_ad[static_cast<size_t>(j)];
    for (auto& vec : a) vec = project(vec);
    for (auto& vec : ad) vec = project(vec);
  }

  // fixed basis of C_xi from the frame at t = 0 (fanning property)
  int dimC = 2 * (n - 1);
  Mat basis(2 * n, dimC);
  for (int i = 0; i < n - 1; ++i) {
    basis.col(i) = raw_a[static_cast<size_t>(k)][static_cast<size_t>(i)];
    basis.col(n - 1 + i) = raw_ad[static_cast<size_t>(k)][static_cast<size_t>(i)];
  }
  Mat full(2 * n, 2 * n);
  full.leftCols(dimC) = basis;
  full.col(dimC) = Cvec;
  full.col(dimC + 1) = S0;
  out.c_basis = basis;
  out.full_basis_lu = Eigen::FullPivLU<Mat>(full);
  if (out.full_basis_lu.rank() < 2 * n)
    throw NumericalError("fanning frame failed to span the contact plane at t = 0");

  for (int j = 0; j < nn; ++j) {
    const auto& a = raw_a[static_cast<size_t>(j)];
    const auto& ad = raw_ad[static_cast<size_t>(j)];
    int nf = n - 1;
    Mat W(nf, nf);
    for (int i = 0; i < nf; ++i)
      for (int l = 0; l < nf; ++l)
        W(i, l) = ad[static_cast<size_t>(i)].dot(omega * a[static_cast<size_t>(l)]);
    out.max_w_asym = std::max(out.max_w_asym, (W - W.transpose().eval()).lpNorm<Eigen::Infinity>());
    out.wronskian[static_cast<size_t>(j)] = 0.5 * (W + W.transpose().eval());
    for (int i = 0; i < nf; ++i)
      for (int l = 0; l < nf; ++l)
        out.max_iso_residual =
            std::max(out.max_iso_residual,
                     std::abs(a[static_cast<size_t>(i)].dot(omega * a[static_cast<size_t>(l)])));

    Mat P(dimC, nf), Q(dimC, nf);
    for (int i = 0; i < nf; ++i) {
      P.col(i) = out.coords(a[static_cast<size_t>(i)]);
      Q.col(i) = out.coords(ad[static_cast<size_t>(i)]);
    }
    Mat M(dimC, dimC);
    M.leftCols(nf) = P;
    M.rightCols(nf) = Q;
    Eigen::JacobiSVD<Mat> svd(M);
    double cond = svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    out.max_cond = std::max(out.max_cond, cond);
    Mat target(dimC, dimC);
    target.setZero();
    target.rightCols(nf) = P;
    out.fundamental[static_cast<size_t>(j)] = target * M.inverse();
    if (j == k) out.frame_coords0 = P;
  }
  if (out.max_cond > opt.cond_limit)
    throw NumericalError("fanning frame conditioning failure");

  out.frames = std::move(raw_a);
  out.frame_dots = std::move(raw_ad);
  return out;
}

// K(0) = (1/4) Fddot(0)^2 with Fddot by symmetric second differences at
// widths delta and 2 delta combined by one Richardson level.
inline Mat jacobi_endomorphism(const FanningFrameSeries& s) {
  int c = s.center;
  if (c < 2) throw NumericalError("jacobi_endomorphism needs half_nodes >= 2");
  double delta = s.times[static_cast<size_t>(c + 1)] - s.times[static_cast<size_t>(c)];
  const Mat& F0 = s.fundamental[static_cast<size_t>(c)];
  auto d2 = [&](int width) {
    const Mat& Fp = s.fundamental[static_cast<size_t>(c + width)];
    const Mat& Fm = s.fundamental[static_cast<size_t>(c - width)];
    double wd = width * delta;
    return Mat((Fp - 2.0 * F0 + Fm) / (wd * wd));
  };
  Mat fddot = (4.0 * d2(1) - d2(2)) / 3.0;
  return 0.25 * (fddot * fddot);
}

// Flag curvature through the fanning pipeline, with delta halving (up to the
// configured limit) on conditioning failures.
inline double flag_curvature_fanning(const MetricInstance& m, const Flag& flag,
                                     FanningOptions opt = {}) {
  for (int attempt = 0;; ++attempt) {
    try {
      FanningFrameSeries s = jacobi_curve(m, flag.x, flag.v, opt);
      Mat K0 = jacobi_endomorphism(s);

      Mat g = fundamental_matrix(m, flag.x, flag.v);
      Vec a_vert = Vec::Zero(2 * m.dimension);
      a_vert.tail(m.dimension) = g * flag.w;  // iota_v(w) = g_v(w, .)
      Vec a_coords = s.coords(a_vert);

      const Mat& P0 = s.frame_coords0;
      // a in the frame of ell(0), K(0) a re-expressed in the same frame
      Vec ca = P0.fullPivHouseholderQr().solve(a_coords);
      Vec ka = K0 * a_coords;
      Vec da = P0.fullPivHouseholderQr().solve(ka);

      const Mat& W0 = s.wronskian[static_cast<size_t>(s.center)];
      double denom = ca.dot(W0 * ca);
      if (std::abs(denom) < 1e-12)
        throw NumericalError("flag edge degenerate against the Wronskian");
      double num = da.dot(W0 * ca);
      return num / denom / (s.f_value * s.f_value);
    } catch (const NumericalError&) {
      if (attempt >= opt.max_delta_halvings) throw;
      opt.delta *= 0.5;
    }
  }
}

// ---------------------------------------------------------------------------
// Curvature shift under a homothetic wind (both sides through the requested
// route): residual of K_Fhat(u, Pi) = K_F(u/Fhat(u) - W, span{u/Fhat(u)-W, w})
// - sigma^2/4.

enum class CurvatureRoute { spray, fanning };

struct CurvatureShiftResult {
  double k_translated = 0.0;
  double k_base = 0.0;
  double residual = 0.0;
};

inline CurvatureShiftResult curvature_shift_check(const MetricInstance& base,
                                                  const MetricInstance& translated,
                                                  const WindField& w, double sigma,
                                                  const Flag& flag,
                                                  CurvatureRoute route = CurvatureRoute::spray,
                                                  const FanningOptions& opt = {}) {
  double fhat = translated.evaluate(flag.x, flag.v);
  Vec u_tilde = flag.v / fhat - w.eval(flag.x);
  Flag base_flag = make_flag(base, flag.x, u_tilde, flag.w);

  CurvatureShiftResult r;
  if (route == CurvatureRoute::spray) {
    r.k_translated = flag_curvature_spray(translated, flag);
  } else {
    r.k_translated = flag_curvature_fanning(translated, flag, opt);
  }
  r.k_base = flag_curvature_spray(base, base_flag);
  r.residual = std::abs(r.k_translated - r.k_base + 0.25 * sigma * sigma);
  return r;
}

}  // namespace finsler
