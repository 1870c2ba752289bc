#include <catch2/catch_amalgamated.hpp>

#include "finsler/jet.hpp"

#include <cmath>

using namespace finsler;

namespace {

JetExponents exps(std::initializer_list<int> l) {
  JetExponents e{};
  size_t i = 0;
  for (int k : l) e[i++] = static_cast<std::uint8_t>(k);
  return e;
}

}  // namespace

TEST_CASE("product of linear jets") {
  auto t = JetTable::get(2, 3);
  Jet a = Jet::variable(2.0, 0, t);
  Jet b = Jet::variable(3.0, 1, t);
  Jet p = a * b;
  CHECK(p.value() == 6.0);
  CHECK(p.derivative(exps({1, 0})) == 3.0);
  CHECK(p.derivative(exps({0, 1})) == 2.0);
  CHECK(p.derivative(exps({1, 1})) == 1.0);
  CHECK(p.derivative(exps({2, 0})) == 0.0);
}

TEST_CASE("polynomial derivatives are exact") {
  auto t = JetTable::get(2, 4);
  Jet a = Jet::variable(1.5, 0, t);
  Jet b = Jet::variable(-0.5, 1, t);
  // f = a^3 b + 2 a b^2
  Jet f = pow_int(a, 3) * b + 2.0 * a * pow_int(b, 2);
  // d3f/da^2 db = 6a
  CHECK(f.derivative(exps({2, 1})) == Catch::Approx(6.0 * 1.5).epsilon(1e-14));
  // d3f/da db^2 = 4
  CHECK(f.derivative(exps({1, 2})) == Catch::Approx(4.0).epsilon(1e-14));
  // d4f/da^3 db = 6
  CHECK(f.derivative(exps({3, 1})) == Catch::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("pow_int with zero primal stays exact") {
  auto t = JetTable::get(1, 2);
  Jet v = Jet::variable(0.0, 0, t);
  Jet f = pow_int(v, 2);
  CHECK(f.value() == 0.0);
  CHECK(f.derivative(exps({1})) == 0.0);
  CHECK(f.derivative(exps({2})) == 2.0);
}

TEST_CASE("elementary functions match analytic derivatives") {
  auto t = JetTable::get(1, 4);
  double x0 = 0.7;
  Jet x = Jet::variable(x0, 0, t);

  Jet s = sqrt(x);
  CHECK(s.value() == Catch::Approx(std::sqrt(x0)).epsilon(1e-15));
  CHECK(s.derivative(exps({1})) == Catch::Approx(0.5 / std::sqrt(x0)).epsilon(1e-14));
  CHECK(s.derivative(exps({2})) == Catch::Approx(-0.25 * std::pow(x0, -1.5)).epsilon(1e-14));

  Jet e = exp(x);
  for (int k = 1; k <= 4; ++k) {
    JetExponents a{};
    a[0] = static_cast<std::uint8_t>(k);
    CHECK(e.derivative(a) == Catch::Approx(std::exp(x0)).epsilon(1e-13));
  }

  Jet l = log(x);
  CHECK(l.derivative(exps({1})) == Catch::Approx(1.0 / x0).epsilon(1e-14));
  CHECK(l.derivative(exps({2})) == Catch::Approx(-1.0 / (x0 * x0)).epsilon(1e-14));
  CHECK(l.derivative(exps({3})) == Catch::Approx(2.0 / (x0 * x0 * x0)).epsilon(1e-14));

  Jet sn = sin(x);
  CHECK(sn.derivative(exps({1})) == Catch::Approx(std::cos(x0)).epsilon(1e-14));
  CHECK(sn.derivative(exps({2})) == Catch::Approx(-std::sin(x0)).epsilon(1e-14));
  Jet cs = cos(x);
  CHECK(cs.derivative(exps({1})) == Catch::Approx(-std::sin(x0)).epsilon(1e-14));
}

TEST_CASE("division agrees with reciprocal multiplication") {
  auto t = JetTable::get(2, 3);
  Jet a = Jet::variable(1.2, 0, t);
  Jet b = Jet::variable(0.8, 1, t);
  Jet q = (a * a + 1.0) / (b + 2.0);
  // check against f = (a^2+1)/(b+2): df/db = -(a^2+1)/(b+2)^2
  double expect = -(1.2 * 1.2 + 1.0) / ((0.8 + 2.0) * (0.8 + 2.0));
  CHECK(q.derivative(exps({0, 1})) == Catch::Approx(expect).epsilon(1e-13));
  // d2f/dadb = -2a/(b+2)^2
  double expect2 = -2.0 * 1.2 / ((2.8) * (2.8));
  CHECK(q.derivative(exps({1, 1})) == Catch::Approx(expect2).epsilon(1e-13));
}

TEST_CASE("domain errors") {
  auto t = JetTable::get(1, 2);
  Jet x = Jet::variable(-1.0, 0, t);
  CHECK_THROWS_AS(sqrt(x), DomainError);
  CHECK_THROWS_AS(log(x), DomainError);
  Jet z = Jet::variable(0.0, 0, t);
  CHECK_THROWS_AS(abs(z), DomainError);
  CHECK_THROWS_AS(recip(z), DomainError);
  CHECK_THROWS_AS(pow_int(z, -1), DomainError);
}

TEST_CASE("eight variables order four table sizes") {
  auto t = JetTable::get(8, 4);
  CHECK(t->size == 495);  // C(12,4)
  auto t2 = JetTable::get(4, 4);
  CHECK(t2->size == 70);  // C(8,4)
}
