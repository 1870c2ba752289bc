#include <catch2/catch_amalgamated.hpp>

#include "finsler/dynamics.hpp"
#include "helpers.hpp"

using namespace finsler;
using namespace finsler::testing;

namespace {

// Round sphere in the stereographic chart.
SemiRiemannianMetric sphere_metric() {
  return make_semi_riemannian(
      2, {{"4/(1+x1^2+x2^2)^2", "0"}, {"0", "4/(1+x1^2+x2^2)^2"}});
}

// Conformal Christoffel oracle for g = e^{2phi} delta with
// phi = log 2 - log(1+|x|^2).
Vec sphere_spray_oracle(const Vec& x, const Vec& v) {
  double r2 = x.squaredNorm();
  Vec dphi = -2.0 * x / (1.0 + r2);
  Vec G(2);
  for (int i = 0; i < 2; ++i) {
    double acc = 0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        double gamma = (i == j ? dphi[k] : 0.0) + (i == k ? dphi[j] : 0.0) -
                       (j == k ? dphi[i] : 0.0);
        acc += gamma * v[j] * v[k];
      }
    G[i] = 0.5 * acc;
  }
  return G;
}

}  // namespace

TEST_CASE("spray of flat and curved metrics") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  CHECK(spray(euc, vec2(0.3, -0.2), vec2(1.5, 0.7)).G.lpNorm<Eigen::Infinity>() < 1e-13);

  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  Sampler s(55);
  for (int i = 0; i < 10; ++i) {
    Vec x = s.vec_in_box({{-0.8, 0.8}, {-0.8, 0.8}});
    Vec v = s.vec_in_box({{-1.5, 1.5}, {-1.5, 1.5}});
    if (v.norm() < 0.3) continue;
    Vec G = spray(sph, x, v).G;
    Vec Go = sphere_spray_oracle(x, v);
    CHECK((G - Go).lpNorm<Eigen::Infinity>() < 1e-8);
    // 2-homogeneity in v
    Vec G2 = spray(sph, x, Vec(2.0 * v)).G;
    CHECK((G2 - 4.0 * G).lpNorm<Eigen::Infinity>() / std::max(1.0, G.lpNorm<Eigen::Infinity>()) <
          1e-8);
  }
}

TEST_CASE("spray derivative package matches finite differences") {
  MetricInstance rd = randers(sphere_metric(), make_one_form(2, {"0.2*x2", "0.1"}), 1);
  Vec x = vec2(0.31, -0.14), v = vec2(1.1, 0.52);
  SprayDerivatives d = spray_derivatives(rd, x, v);
  CHECK((d.G - spray(rd, x, v).G).lpNorm<Eigen::Infinity>() < 1e-12);

  double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    Vec vp = v, vm = v;
    vp[j] += h;
    vm[j] -= h;
    Vec fd_v = (spray(rd, x, vp).G - spray(rd, x, vm).G) / (2 * h);
    CHECK((Vec(d.dG_dv.col(j)) - fd_v).lpNorm<Eigen::Infinity>() < 1e-6);
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    Vec fd_x = (spray(rd, xp, v).G - spray(rd, xm, v).G) / (2 * h);
    CHECK((Vec(d.dG_dx.col(j)) - fd_x).lpNorm<Eigen::Infinity>() < 1e-6);

    for (int k = 0; k < 2; ++k) {
      Vec vpk = v, vmk = v;
      vpk[k] += h;
      vmk[k] -= h;
      Vec fd_vv = (Vec(spray_derivatives(rd, x, vpk).dG_dv.col(j)) -
                   Vec(spray_derivatives(rd, x, vmk).dG_dv.col(j))) /
                  (2 * h);
      Vec fd_xv = (Vec(spray_derivatives(rd, x, vpk).dG_dx.col(j)) -
                   Vec(spray_derivatives(rd, x, vmk).dG_dx.col(j))) /
                  (2 * h);
      for (int i = 0; i < 2; ++i) {
        CHECK(d.d2G_dvdv[static_cast<size_t>(i)](j, k) == Catch::Approx(fd_vv[i]).margin(1e-5));
        CHECK(d.d2G_dxdv[static_cast<size_t>(i)](j, k) == Catch::Approx(fd_xv[i]).margin(1e-5));
      }
    }
  }
}

TEST_CASE("geodesics: straight lines and great circles") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  Trajectory line = geodesic(euc, vec2(0, 0), vec2(1, 0), 1.0, 1e-3);
  CHECK_FALSE(line.stopped_early);
  CHECK((line.end_x() - vec2(1, 0)).lpNorm<Eigen::Infinity>() < 1e-12);

  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  Vec x0 = vec2(0.3, 0.2);
  Vec v0 = vec2(0.7, -0.4);
  double f = sph.evaluate(x0, v0);
  v0 /= f;  // unit speed: great circle closes after 2 pi
  Trajectory circle = geodesic(sph, x0, v0, 2.0 * M_PI, 1e-3);
  CHECK_FALSE(circle.stopped_early);
  CHECK((circle.end_x() - x0).lpNorm<Eigen::Infinity>() < 1e-5);
  CHECK(circle.conserved_drift() < 1e-8);
}

TEST_CASE("randers geodesic conserves F") {
  MetricInstance rd = randers(euclid(2), make_one_form(2, {"0.5", "0"}), 1);
  Trajectory tr = geodesic(rd, vec2(0.1, -0.2), vec2(0.8, 0.5), 1.0, 1e-3);
  CHECK_FALSE(tr.stopped_early);
  CHECK(tr.conserved_drift() < 1e-8);
}

TEST_CASE("geodesic stops at the chart boundary") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  ChartPredicate disc = [](const Vec& x) { return x.squaredNorm() < 1.0; };
  Trajectory tr = geodesic(euc, vec2(0, 0), vec2(1, 0), 2.0, 1e-3, disc);
  CHECK(tr.stopped_early);
  CHECK(tr.end_x()[0] < 1.0);
  CHECK(tr.end_x()[0] > 0.9);
}

TEST_CASE("cogeodesic flow of the flat metric") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  Vec xi0 = vec2(1, 0);
  Trajectory tr = cogeodesic_flow(euc, vec2(0, 0), xi0, vec2(0.9, 0.1), 1.0, 1e-2, true);
  CHECK_FALSE(tr.stopped_early);
  CHECK((tr.end_x() - vec2(1, 0)).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK((tr.fiber.back() - xi0).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(tr.conserved_drift() < 1e-12);
  // D psi_t = [[I, tI], [0, I]]
  size_t last = tr.times.size() - 1;
  Mat expect(4, 4);
  expect << 1, 0, 1, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK((tr.linearization[last] - expect).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(symplectic_residual(tr.linearization[last]) < 1e-6);
}

TEST_CASE("cogeodesic flow on the sphere: conservation, symplecticity, Hamilton check") {
  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  Vec x0 = vec2(0.25, -0.1);
  Vec v0 = vec2(0.6, 0.8);
  Vec xi0 = legendre(sph, x0, v0);
  Trajectory tr = cogeodesic_flow(sph, x0, xi0, v0, 0.5, 1e-3, true);
  CHECK_FALSE(tr.stopped_early);
  CHECK(tr.conserved_drift() < 1e-8);
  CHECK(symplectic_residual(tr.linearization.back()) < 1e-4);

  // direct Hamiltonian integration lands on the same trajectory
  Trajectory direct = cogeodesic_flow_direct(sph, x0, xi0, v0, 0.5, 1e-3);
  REQUIRE(direct.times.size() == tr.times.size());
  for (size_t i = 0; i < tr.times.size(); i += 100) {
    CHECK((tr.x[i] - direct.x[i]).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((tr.fiber[i] - direct.fiber[i]).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("wind flows") {
  WindField constant = make_wind(2, {"1", "0"});
  CHECK((wind_flow_point(constant, vec2(0, 0), 2.0, 1e-3) - vec2(2, 0)).lpNorm<Eigen::Infinity>() <
        1e-12);

  WindField contraction = make_wind(2, {"-x1", "-x2"});
  Vec end = wind_flow_point(contraction, vec2(1, 0), 1.0, 1e-3);
  CHECK(std::abs(end[0] - std::exp(-1.0)) < 1e-12);

  double c = 0.3;
  WindField rotation = make_wind(2, {"-0.3*x2", "0.3*x1"});
  Vec x0 = vec2(0.4, -0.1);
  Vec back = wind_flow_point(rotation, x0, 2.0 * M_PI / c, 1e-3);
  CHECK((back - x0).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("homothety constants") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  WindField contraction = make_wind(2, {"-x1", "-x2"});
  std::vector<std::pair<Vec, Vec>> samples = {{vec2(0.3, 0.1), vec2(1, 0.2)},
                                              {vec2(-0.2, 0.4), vec2(0.5, -1)}};
  HomothetyEstimate est = homothety_constant(euc, contraction, samples);
  CHECK(std::abs(est.sigma - 1.0) < 1e-10);
  CHECK(est.residual < 1e-8);

  MetricInstance sph = semi_riemannian_instance(sphere_metric());
  WindField killing = make_wind(2, {"-0.3*x2", "0.3*x1"});
  HomothetyEstimate k = homothety_constant(sph, killing, samples);
  CHECK(std::abs(k.sigma) < 1e-10);
  CHECK(k.residual < 1e-8);

  WindField translation = make_wind(2, {"1", "0"});
  HomothetyEstimate t = homothety_constant(euc, translation, samples);
  CHECK(std::abs(t.sigma) < 1e-10);
}

TEST_CASE("correspondence reparametrization") {
  CHECK(correspondence_reparametrization(0.0, 0.37) == 0.37);
  CHECK(correspondence_reparametrization(1.0, std::log(2.0)) == Catch::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("corresponding geodesic point for the contracting wind on the plane") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  WindField contraction = make_wind(2, {"-x1", "-x2"});
  for (double t : {0.1, 0.3, 0.5}) {
    Vec p = corresponding_geodesic_point(euc, contraction, 1.0, vec2(0, 0), vec2(1, 0), t, 1e-3);
    CHECK(std::abs(p[0] - (1.0 - std::exp(-t))) < 1e-10);
    CHECK(std::abs(p[1]) < 1e-12);
  }
}

TEST_CASE("Funk-type correspondence over a short horizon") {
  SemiRiemannianMetric ge = euclid(2);
  WindField wind = make_wind(2, {"-x1", "-x2"}, 1.0);
  MetricInstance funk = zermelo_translate(ge, wind, 1);
  MetricInstance base = semi_riemannian_instance(ge);
  ChartPredicate disc = [](const Vec& x) { return x.squaredNorm() < 1.0; };

  Vec x0 = vec2(0.1, -0.05);
  Vec vhat = vec2(0.9, 0.35);
  vhat /= funk.evaluate(x0, vhat);  // unit speed
  Trajectory hat = geodesic(funk, x0, vhat, 0.3, 1e-3, disc);
  REQUIRE_FALSE(hat.stopped_early);
  Vec u0 = vhat - wind.eval(x0);
  CHECK(std::abs(base.evaluate(x0, u0) - 1.0) < 1e-12);

  double worst = 0;
  for (size_t i = 0; i < hat.times.size(); i += 30) {
    double t = hat.times[i];
    Vec pred = corresponding_geodesic_point(base, wind, 1.0, x0, u0, t, 1e-3, disc);
    worst = std::max(worst, (hat.x[i] - pred).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst < 1e-6);
}
