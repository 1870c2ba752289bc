#pragma once

#include "finsler/metrics.hpp"

#include <cstdint>
#include <random>

namespace finsler::testing {

// Deterministic uniform sampler (explicit bit mapping, independent of
// libstdc++ distribution internals).
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  Vec vec_in_box(const std::vector<std::pair<double, double>>& box) {
    Vec v(static_cast<int>(box.size()));
    for (size_t i = 0; i < box.size(); ++i)
      v[static_cast<int>(i)] = uniform(box[i].first, box[i].second);
    return v;
  }

  // Rejection sampling of (x, v) against the conic domain, with an optional
  // required margin on the defining inequalities.
  std::pair<Vec, Vec> domain_sample(const MetricInstance& m,
                                    const std::vector<std::pair<double, double>>& x_box,
                                    const std::vector<std::pair<double, double>>& v_box,
                                    double margin = 0.0, int max_tries = 20000) {
    for (int t = 0; t < max_tries; ++t) {
      Vec x = vec_in_box(x_box);
      Vec v = vec_in_box(v_box);
      if (!m.in_domain(x, v)) continue;
      if (margin > 0.0 && m.domain_margin(x, v) < margin) continue;
      return {x, v};
    }
    throw NumericalError("rejection sampling failed to find a domain point");
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline SemiRiemannianMetric euclid(int n) {
  std::vector<std::vector<std::string>> g(static_cast<size_t>(n),
                                          std::vector<std::string>(static_cast<size_t>(n), "0"));
  for (int i = 0; i < n; ++i) g[static_cast<size_t>(i)][static_cast<size_t>(i)] = "1";
  return make_semi_riemannian(n, g);
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

inline Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

}  // namespace finsler::testing
