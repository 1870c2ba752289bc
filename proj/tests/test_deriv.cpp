#include <catch2/catch_amalgamated.hpp>

#include "finsler/deriv.hpp"

using namespace finsler;

namespace {

ScalarField expr_field(const std::string& text, int n, const std::string& dom = "") {
  return field_from_expression(parse(text, n), dom.empty() ? ExprAst{} : parse(dom, n));
}

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("quadratic form fiber hessian") {
  ScalarField f = expr_field("v1^2+v2^2", 2);
  PartialTensor t = partial_tensor(f, vec2(0, 0), vec2(3, 4), 0, 2);
  CHECK(t.at({}, {0, 0}) == Catch::Approx(2.0));
  CHECK(t.at({}, {1, 1}) == Catch::Approx(2.0));
  CHECK(t.at({}, {0, 1}) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("mixed polynomial partial") {
  // field x1*v1^2: order_x=1, order_v=2 -> entry (0;0,0)=2, others 0
  ScalarField f = expr_field("x1*v1^2", 2);
  PartialTensor t = partial_tensor(f, vec2(0.7, 0.1), vec2(0.4, -0.2), 1, 2);
  t.for_each([&](const std::vector<int>& xi, const std::vector<int>& vi) {
    double expect = (xi[0] == 0 && vi[0] == 0 && vi[1] == 0) ? 2.0 : 0.0;
    CHECK(t.at(xi, vi) == Catch::Approx(expect).margin(1e-14));
  });
}

TEST_CASE("exact and fd modes agree on a Randers-type field") {
  // F^2 for sqrt(v1^2+v2^2) + 0.5 v1
  ScalarField f = expr_field("(sqrt(v1^2+v2^2) + 0.5*v1)^2", 2);
  Vec x = vec2(0, 0), v = vec2(1, 0);
  for (auto [ox, ov] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 1}, {0, 3}}) {
    PartialTensor ad = partial_tensor(f, x, v, ox, ov, DerivMode::exact);
    PartialTensor fd = partial_tensor(f, x, v, ox, ov, DerivMode::fd);
    INFO("order_x=" << ox << " order_v=" << ov);
    CHECK(ad.max_abs_diff(fd) < 1e-6);
  }
  PartialTensor ad4 = partial_tensor(f, x, v, 0, 4, DerivMode::exact);
  PartialTensor fd4 = partial_tensor(f, x, v, 0, 4, DerivMode::fd);
  CHECK(ad4.max_abs_diff(fd4) < 1e-3);
}

TEST_CASE("fd stencil domain violation is reported") {
  ScalarField f = expr_field("v1^2/x1", 1, "x1");
  Vec x(1), v(1);
  x << 1e-6;  // closer to the boundary than the stencil width
  v << 1.0;
  CHECK_THROWS_AS(partial_tensor(f, x, v, 1, 1, DerivMode::fd), DomainError);
}

TEST_CASE("euler relation for 2-homogeneous fields") {
  ScalarField f = expr_field("(sqrt(v1^2+v2^2) + 0.5*v1)^2", 2);
  Vec x = vec2(0.2, -0.3);
  for (auto v : {vec2(1, 0), vec2(0.3, 1.2), vec2(-0.5, 2.0)}) {
    PartialTensor grad = partial_tensor(f, x, v, 0, 1);
    double lhs = 0;
    for (int i = 0; i < 2; ++i) lhs += grad.at({}, {i}) * v[i];
    double rhs = 2.0 * f(x, v);
    CHECK(std::abs(lhs - rhs) / std::abs(rhs) < 1e-10);
  }
}

TEST_CASE("homogeneity check") {
  ScalarField euclid = expr_field("v1^2+v2^2", 2);
  CHECK(homogeneity_check(euclid, vec2(0, 0), vec2(0.3, 1.7), 2) < 1e-15);

  ScalarField randers = expr_field("(sqrt(v1^2+v2^2) + 0.5*v1)^2", 2);
  CHECK(homogeneity_check(randers, vec2(0, 0), vec2(1, 0), 2) < 1e-12);

  ScalarField bad = expr_field("v1^2+v1", 2);
  CHECK(homogeneity_check(bad, vec2(0, 0), vec2(1, 0), 2) > 0.1);
}

TEST_CASE("domain violations are rejected") {
  ScalarField f = expr_field("v1^2", 1, "v1");
  Vec x(1), v(1);
  x << 0.0;
  v << -1.0;
  CHECK_THROWS_AS(partial_tensor(f, x, v, 0, 2), DomainError);
}
