#include <catch2/catch_amalgamated.hpp>

#include "finsler/tensors.hpp"
#include "helpers.hpp"

using namespace finsler;
using namespace finsler::testing;

TEST_CASE("fundamental tensor of quadratic metrics") {
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  Mat g = fundamental_tensor(euc, vec2(0, 0), vec2(0.3, 1.7));
  CHECK((g - Mat::Identity(2, 2)).lpNorm<Eigen::Infinity>() < 1e-12);

  MetricInstance mink = expression_metric(parse("v1^2 - v2^2", 2), parse("v1 - abs(v2)", 2));
  Mat gm = fundamental_tensor(mink, vec2(0, 0), vec2(2, 1));
  CHECK(gm(0, 0) == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(gm(1, 1) == Catch::Approx(-1.0).epsilon(1e-12));
  CHECK(gm(0, 1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("fundamental tensor satisfies g_v(v,v) = F^2 and matches fd") {
  MetricInstance rd = randers(euclid(2), make_one_form(2, {"0.5", "0"}), 1);
  Vec x = vec2(0, 0), v = vec2(1, 0);
  Mat g = fundamental_tensor(rd, x, v);
  double f = rd.evaluate(x, v);
  CHECK(std::abs(v.dot(g * v) - f * f) / (f * f) < 1e-10);

  Mat gfd = fundamental_tensor(rd, x, v, DerivMode::fd);
  CHECK((g - gfd).lpNorm<Eigen::Infinity>() < 1e-6);

  Sampler s(21);
  for (int i = 0; i < 10; ++i) {
    auto [xs, vs] = s.domain_sample(rd, {{-1, 1}, {-1, 1}}, {{-2, 2}, {-2, 2}}, 1e-2);
    Mat gs = fundamental_tensor(rd, xs, vs);
    double fs = rd.evaluate(xs, vs);
    CHECK(std::abs(vs.dot(gs * vs) - fs * fs) / (fs * fs) < 1e-10);
  }
}

TEST_CASE("cartan tensor identities") {
  // quadratic metrics have vanishing Cartan tensor
  MetricInstance euc = semi_riemannian_instance(euclid(2));
  CHECK(cartan_tensor(euc, vec2(0, 0), vec2(1.2, -0.4)).max_abs() < 1e-12);
  CHECK(mean_cartan_torsion(euc, vec2(0, 0), vec2(1.2, -0.4)).lpNorm<Eigen::Infinity>() < 1e-12);

  MetricInstance rd = randers(euclid(2), make_one_form(2, {"0.5", "0"}), 1);
  Vec x = vec2(0, 0), v = vec2(1, 0);
  SymTensor3 c = cartan_tensor(rd, x, v);
  CHECK(c.max_abs_contract(v) < 1e-12);  // C_v(v,.,.) = 0
  Mat h = angular_metric(rd, x, v);
  CHECK((h * v).lpNorm<Eigen::Infinity>() < 1e-12);  // h_v(v,.) = 0

  // fd oracle agreement
  SymTensor3 cfd = cartan_tensor(rd, x, v, DerivMode::fd);
  double diff = 0;
  for (size_t i = 0; i < c.e.size(); ++i) diff = std::max(diff, std::abs(c.e[i] - cfd.e[i]));
  CHECK(diff < 1e-5);
  Vec ifd = mean_cartan_torsion(rd, x, v, DerivMode::fd);
  Vec iad = mean_cartan_torsion(rd, x, v);
  CHECK((ifd - iad).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("tensor scalings in the fiber") {
  MetricInstance rd = randers(euclid(2), make_one_form(2, {"0.3", "0.1"}), 1);
  Vec x = vec2(0.1, 0.2), v = vec2(0.9, 0.4);
  Mat g = fundamental_tensor(rd, x, v);
  SymTensor3 c = cartan_tensor(rd, x, v);
  for (double lambda : {0.5, 2.0}) {
    Mat gl = fundamental_tensor(rd, x, Vec(lambda * v));
    CHECK((gl - g).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>() < 1e-9);
    SymTensor3 cl = cartan_tensor(rd, x, Vec(lambda * v));
    double diff = 0;
    for (size_t i = 0; i < c.e.size(); ++i)
      diff = std::max(diff, std::abs(cl.e[i] - c.e[i] / lambda));
    CHECK(diff / c.max_abs() < 1e-9);
  }
}

TEST_CASE("metric index and parity") {
  SignatureReport r1 = metric_index(Mat::Identity(2, 2));
  CHECK(r1.index == 0);
  CHECK(r1.parity_sign == 1);

  Mat m(2, 2);
  m << 1, 0, 0, -1;
  SignatureReport r2 = metric_index(m);
  CHECK(r2.index == 1);
  CHECK(r2.parity_sign == -1);

  Mat degenerate(2, 2);
  degenerate << 1, 0, 0, 1e-12;
  CHECK_THROWS_AS(metric_index(degenerate), NumericalError);

  // reverse translation of Euclid with strong wind is Lorentz type: index 1
  MetricInstance zr = zermelo_translate(euclid(2), make_wind(2, {"2", "0"}), -1);
  Mat gz = fundamental_tensor(zr, vec2(0, 0), vec2(1, 0));
  CHECK(metric_index(gz).index == 1);
  // and the straight branch keeps index 0
  MetricInstance z1 = zermelo_translate(euclid(2), make_wind(2, {"2", "0"}), 1);
  CHECK(metric_index(fundamental_tensor(z1, vec2(0, 0), vec2(1, 0))).index == 0);
}

TEST_CASE("matsumoto tensor vanishes for pseudo-Randers-Kropina (dim 3)") {
  MetricInstance rd = randers(euclid(3), make_one_form(3, {"0.3", "0", "0"}), 1);
  MetricInstance kr = kropina(euclid(3), make_one_form(3, {"1", "0", "0"}));
  Sampler s(2024);
  for (int i = 0; i < 20; ++i) {
    auto [x, v] = s.domain_sample(rd, {{-1, 1}, {-1, 1}, {-1, 1}},
                                  {{-1.5, 1.5}, {-1.5, 1.5}, {-1.5, 1.5}}, 1e-2);
    CHECK(matsumoto_tensor(rd, x, v).max_abs() < 1e-7);
  }
  for (int i = 0; i < 20; ++i) {
    auto [x, v] = s.domain_sample(kr, {{-1, 1}, {-1, 1}, {-1, 1}},
                                  {{0.2, 1.5}, {-1.5, 1.5}, {-1.5, 1.5}}, 1e-2);
    CHECK(matsumoto_tensor(kr, x, v).max_abs() < 1e-7);
  }
}

TEST_CASE("odd-index Randers metric: index bookkeeping and cubic-form vanishing") {
  // h = diag(1,1,-1): the fundamental tensor of R_1 has index ind(h) = 1.
  // The index-free combination C - (1/(n+1)) sym(I x h) vanishes on any
  // translated-quadric indicatrix; with odd index the parity-signed tensor
  // differs from it by twice the correction term and stays away from zero.
  SemiRiemannianMetric h = make_semi_riemannian(
      3, {{"1", "0", "0"}, {"0", "1", "0"}, {"0", "0", "-1"}});
  MetricInstance rd = randers(h, make_one_form(3, {"0.2", "0", "0"}), 1);
  Sampler s(7);
  int checked = 0;
  for (int i = 0; i < 200 && checked < 15; ++i) {
    Vec x = s.vec_in_box({{-1, 1}, {-1, 1}, {-1, 1}});
    Vec v = s.vec_in_box({{0.6, 1.5}, {-0.5, 0.5}, {-0.5, 0.5}});
    if (!rd.in_domain(x, v) || rd.domain_margin(x, v) < 1e-2) continue;
    Mat g = fundamental_tensor(rd, x, v);
    SignatureReport sig = metric_index(g);
    CHECK(sig.index == 1);
    CHECK(sig.parity_sign == -1);

    SymTensor3 c = cartan_tensor(rd, x, v);
    Vec torsion = mean_cartan_torsion(rd, x, v);
    Mat ang = angular_metric(rd, x, v);
    double worst_free = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int d = 0; d < 3; ++d) {
          double corr = (torsion[a] * ang(b, d) + torsion[b] * ang(a, d) +
                         torsion[d] * ang(a, b)) /
                        4.0;
          worst_free = std::max(worst_free, std::abs(c.at(a, b, d) - corr));
        }
    CHECK(worst_free < 1e-7);
    // the parity-signed tensor adds the correction instead of cancelling it
    CHECK(matsumoto_tensor(rd, x, v).max_abs() > 1e-3);
    ++checked;
  }
  CHECK(checked >= 15);
}

TEST_CASE("matsumoto tensor does not vanish for the quartic metric") {
  MetricInstance q = expression_metric(parse("sqrt(v1^4 + v2^4 + v3^4)", 3));
  Sampler s(13);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    Vec v = s.vec_in_box({{0.7, 1.3}, {0.7, 1.3}, {0.7, 1.3}});
    SymTensor3 m = matsumoto_tensor(q, vec3(0, 0, 0), v);
    worst = std::max(worst, m.max_abs());
    // homogeneity and M(v,.,.) = 0 hold regardless
    CHECK(m.max_abs_contract(v) < 1e-9);
    SymTensor3 m2 = matsumoto_tensor(q, vec3(0, 0, 0), Vec(2.0 * v));
    double diff = 0;
    for (size_t k = 0; k < m.e.size(); ++k)
      diff = std::max(diff, std::abs(m2.e[k] - 0.5 * m.e[k]));
    CHECK(diff < 1e-9);
  }
  CHECK(worst >= 1e-3);
}

TEST_CASE("matsumoto tensor vanishes on zermelo translations of semi-Riemannian metrics") {
  // Lorentzian base metric on R^3 with a mild constant wind, both branches
  SemiRiemannianMetric g = make_semi_riemannian(
      3, {{"1", "0", "0"}, {"0", "-1", "0"}, {"0", "0", "-1"}});
  WindField w = make_wind(3, {"0.5", "0", "0"});
  MetricInstance z1 = zermelo_translate(g, w, 1);
  MetricInstance zm1 = zermelo_translate(g, w, -1);
  Sampler s(5150);
  int found1 = 0, found2 = 0;
  for (int i = 0; i < 4000 && (found1 < 10 || found2 < 10); ++i) {
    Vec x = s.vec_in_box({{-1, 1}, {-1, 1}, {-1, 1}});
    Vec v = s.vec_in_box({{-1.6, 1.6}, {-1.6, 1.6}, {-1.6, 1.6}});
    if (found1 < 10 && z1.in_domain(x, v) && z1.domain_margin(x, v) > 5e-2) {
      CHECK(matsumoto_tensor(z1, x, v).max_abs() < 1e-7);
      ++found1;
    }
    if (found2 < 10 && zm1.in_domain(x, v) && zm1.domain_margin(x, v) > 5e-2) {
      CHECK(matsumoto_tensor(zm1, x, v).max_abs() < 1e-7);
      ++found2;
    }
  }
  CHECK(found1 >= 10);
  CHECK(found2 >= 10);
}

TEST_CASE("translation character from values") {
  MetricInstance base = semi_riemannian_instance(euclid(2));
  WindField mild = make_wind(2, {"0.5", "0"});
  WindField strong = make_wind(2, {"2", "0"});
  CHECK(translation_character(base, mild, vec2(0, 0), vec2(1, 0), 2.0 / 3.0) ==
        TranslationCharacter::straight);
  CHECK(translation_character(base, strong, vec2(0, 0), vec2(1, 0), 1.0) ==
        TranslationCharacter::reverse);
  CHECK(translation_character(base, strong, vec2(0, 0), vec2(1, 0), 1.0 / 3.0) ==
        TranslationCharacter::straight);
}
