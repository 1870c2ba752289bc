#include <catch2/catch_amalgamated.hpp>

#include "finsler/curvature.hpp"
#include "helpers.hpp"

using namespace finsler;
using namespace finsler::testing;

namespace {

SemiRiemannianMetric sphere_metric() {
  return make_semi_riemannian(
      2, {{"4/(1+x1^2+x2^2)^2", "0"}, {"0", "4/(1+x1^2+x2^2)^2"}});
}

Flag random_flag(Sampler& s, const MetricInstance& m,
                 const std::vector<std::pair<double, double>>& x_box,
                 const std::vector<std::pair<double, double>>& v_box) {
  for (int t = 0; t < 500; ++t) {
    auto [x, v] = s.domain_sample(m, x_box, v_box, 1e-2);
    Vec w = s.vec_in_box(v_box);
    try {
      Flag f = make_flag(m, x, v, w);
      if (f.w.norm() > 1e-3) return f;
    } catch (const NumericalError&) {
    }
  }
  throw NumericalError("no usable flag found");
}

}  // namespace

TEST_CASE("spray curvature of the flat metric vanishes") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  Mat R = riemann_spray_curvature(euc, vec2(0.2, -0.3), vec2(1.1, 0.4));
  CHECK(R.lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("spray curvature annihilates the pole and sees constant curvature 1") {
  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  Sampler s(2211);
  for (int i = 0; i < 10; ++i) {
    Vec x = s.vec_in_box({{-0.7, 0.7}, {-0.7, 0.7}});
    Vec v = s.vec_in_box({{-1.5, 1.5}, {-1.5, 1.5}});
    if (v.norm() < 0.4) continue;
    Mat R = riemann_spray_curvature(sph, x, v);
    CHECK((R * v).lpNorm<Eigen::Infinity>() < 1e-8 * std::max(1.0, R.lpNorm<Eigen::Infinity>()));
    // R(w) = F^2 w on g-orthogonal w for curvature 1
    Mat g = fundamental_tensor(sph, x, v);
    double f2 = v.dot(g * v);
    Vec w = s.vec_in_box({{-1, 1}, {-1, 1}});
    w -= (v.dot(g * w) / f2) * v;
    CHECK((Vec(R * w) - f2 * w).lpNorm<Eigen::Infinity>() < 1e-7 * f2);
  }
}

TEST_CASE("flag curvature via spray: plane, sphere, Funk disc") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  Sampler s(31415);
  Flag f0 = random_flag(s, euc, {{-1, 1}, {-1, 1}}, {{-2, 2}, {-2, 2}});
  CHECK(std::abs(flag_curvature_spray(euc, f0)) < 1e-10);

  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  for (int i = 0; i < 10; ++i) {
    Flag f = random_flag(s, sph, {{-0.7, 0.7}, {-0.7, 0.7}}, {{-1.5, 1.5}, {-1.5, 1.5}});
    CHECK(flag_curvature_spray(sph, f) == Catch::Approx(1.0).margin(1e-6));
  }

  WindField wind = make_wind(2, {"-x1", "-x2"}, 1.0);
  MetricInstance funk = zermelo_translate(euclid(2), wind, 1);
  for (int i = 0; i < 10; ++i) {
    Flag f = random_flag(s, funk, {{-0.3, 0.3}, {-0.3, 0.3}}, {{-1.5, 1.5}, {-1.5, 1.5}});
    CHECK(flag_curvature_spray(funk, f) == Catch::Approx(-0.25).margin(1e-4));
  }
}

TEST_CASE("flag curvature is invariant under pole scaling") {
  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  Sampler s(999);
  Flag f = random_flag(s, sph, {{-0.7, 0.7}, {-0.7, 0.7}}, {{-1.5, 1.5}, {-1.5, 1.5}});
  double k1 = flag_curvature_spray(sph, f);
  Flag f2 = make_flag(sph, f.x, Vec(2.0 * f.v), f.w);
  CHECK(std::abs(flag_curvature_spray(sph, f2) - k1) < 1e-6);
}

TEST_CASE("jacobi curve of the flat metric") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  Vec x = vec2(0.1, -0.2), v = vec2(1.2, 0.5);
  FanningFrameSeries s = jacobi_curve(euc, x, v);
  // W(t) constant across the grid
  const Mat& w0 = s.wronskian[static_cast<size_t>(s.center)];
  for (const Mat& w : s.wronskian)
    CHECK((w - w0).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(s.max_w_asym < 1e-6);
  CHECK(s.max_iso_residual < 1e-6);
  // K(0) = 0
  Mat K0 = jacobi_endomorphism(s);
  CHECK(K0.lpNorm<Eigen::Infinity>() < 1e-6);

  // W(0) represents g_v on ker g_v(v, .): W(0)(iota_v w, iota_v w) = g_v(w, w)
  Mat g = fundamental_tensor(euc, x, v);
  Vec w = vec2(-0.5, 1.2);
  double f2 = v.dot(g * v);
  w -= (v.dot(g * w) / f2) * v;
  Vec a_vert = Vec::Zero(4);
  a_vert.tail(2) = g * w;
  Vec ca = s.frame_coords0.fullPivHouseholderQr().solve(s.coords(a_vert));
  double wa = ca.dot(w0 * ca);
  CHECK(std::abs(wa - w.dot(g * w)) < 1e-5);
}

TEST_CASE("wronskian represents the fundamental tensor on curved samples") {
  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  Sampler smp(808);
  for (int i = 0; i < 20; ++i) {
    auto [x, v] = smp.domain_sample(sph, {{-0.6, 0.6}, {-0.6, 0.6}}, {{-1.2, 1.2}, {-1.2, 1.2}},
                                    1e-2);
    if (v.norm() < 0.4) continue;
    FanningFrameSeries s = jacobi_curve(sph, x, v);
    Mat g = fundamental_tensor(sph, x, v);
    double f2 = v.dot(g * v);
    Vec w = smp.vec_in_box({{-1, 1}, {-1, 1}});
    w -= (v.dot(g * w) / f2) * v;
    if (w.norm() < 0.2) continue;
    Vec a_vert = Vec::Zero(4);
    a_vert.tail(2) = g * w;
    Vec ca = s.frame_coords0.fullPivHouseholderQr().solve(s.coords(a_vert));
    double wa = ca.dot(s.wronskian[static_cast<size_t>(s.center)] * ca);
    CHECK(std::abs(wa - w.dot(g * w)) < 1e-5 * std::max(1.0, std::abs(w.dot(g * w))));
  }
}

TEST_CASE("fanning and spray routes agree") {
  Sampler s(606);
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  for (int i = 0; i < 5; ++i) {
    Flag f = random_flag(s, euc, {{-0.5, 0.5}, {-0.5, 0.5}}, {{-1.5, 1.5}, {-1.5, 1.5}});
    CHECK(std::abs(flag_curvature_fanning(euc, f) - 0.0) < 1e-3);
  }
  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  for (int i = 0; i < 5; ++i) {
    Flag f = random_flag(s, sph, {{-0.6, 0.6}, {-0.6, 0.6}}, {{-1.3, 1.3}, {-1.3, 1.3}});
    double kf = flag_curvature_fanning(sph, f);
    double ks = flag_curvature_spray(sph, f);
    CHECK(std::abs(kf - ks) < 1e-3);
  }
  WindField wind = make_wind(2, {"-x1", "-x2"}, 1.0);
  MetricInstance funk = zermelo_translate(euclid(2), wind, 1);
  for (int i = 0; i < 5; ++i) {
    Flag f = random_flag(s, funk, {{-0.3, 0.3}, {-0.3, 0.3}}, {{-1.3, 1.3}, {-1.3, 1.3}});
    double kf = flag_curvature_fanning(funk, f);
    double ks = flag_curvature_spray(funk, f);
    CHECK(std::abs(kf - ks) < 1e-3);
    CHECK(kf == Catch::Approx(-0.25).margin(1e-3));
  }
}

TEST_CASE("curvature shift under homothetic winds") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  WindField wind = make_wind(2, {"-x1", "-x2"}, 1.0);
  MetricInstance funk = zermelo_translate(euclid(2), wind, 1);
  Sampler s(404);
  for (int i = 0; i < 10; ++i) {
    Flag f = random_flag(s, funk, {{-0.3, 0.3}, {-0.3, 0.3}}, {{-1.5, 1.5}, {-1.5, 1.5}});
    CurvatureShiftResult r = curvature_shift_check(euc, funk, wind, 1.0, f);
    CHECK(r.residual < 1e-4);
    CHECK(r.k_translated == Catch::Approx(-0.25).margin(1e-4));
  }

  // Killing wind on the sphere: sigma = 0, curvature unchanged
  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  WindField killing = make_wind(2, {"-0.3*x2", "0.3*x1"}, 0.0);
  MetricInstance katok = zermelo_translate(sphere_metric(), killing, 1);
  for (int i = 0; i < 5; ++i) {
    Flag f = random_flag(s, katok, {{-0.6, 0.6}, {-0.6, 0.6}}, {{-1.3, 1.3}, {-1.3, 1.3}});
    CurvatureShiftResult r = curvature_shift_check(sph, katok, killing, 0.0, f);
    CHECK(r.residual < 1e-4);
    CHECK(r.k_translated == Catch::Approx(1.0).margin(1e-4));
  }

  // zero wind: residual vanishes identically
  WindField none = make_wind(2, {"0", "0"}, 0.0);
  MetricInstance same = zermelo_translate(euclid(2), none, 1);
  Flag f = random_flag(s, same, {{-0.5, 0.5}, {-0.5, 0.5}}, {{-1.5, 1.5}, {-1.5, 1.5}});
  CurvatureShiftResult r = curvature_shift_check(euc, same, none, 0.0, f);
  CHECK(r.residual < 1e-10);
}

TEST_CASE("reverse metric flips the pole in the flag curvature") {
  WindField wind = make_wind(2, {"-x1", "-x2"}, 1.0);
  MetricInstance funk = zermelo_translate(euclid(2), wind, 1);
  MetricInstance funk_rev = reverse(funk);
  Sampler s(123);
  for (int i = 0; i < 5; ++i) {
    Flag f = random_flag(s, funk, {{-0.3, 0.3}, {-0.3, 0.3}}, {{-1.5, 1.5}, {-1.5, 1.5}});
    Flag frev = make_flag(funk_rev, f.x, Vec(-f.v), f.w);
    double k1 = flag_curvature_spray(funk, f);
    double k2 = flag_curvature_spray(funk_rev, frev);
    CHECK(std::abs(k1 - k2) < 1e-6);
  }
}
