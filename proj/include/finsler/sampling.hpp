#pragma once

// Seeded rejection sampling of tangent samples against conic domain
// predicates. Uniform doubles are produced by an explicit bit mapping from a
// 64-bit PRNG so that identical seeds give identical streams everywhere.

#include "finsler/common.hpp"
#include "finsler/metrics.hpp"

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace finsler {

using Box = std::vector<std::pair<double, double>>;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  Vec vec_in_box(const Box& box) {
    Vec v(static_cast<int>(box.size()));
    for (size_t i = 0; i < box.size(); ++i)
      v[static_cast<int>(i)] = uniform(box[i].first, box[i].second);
    return v;
  }

  // (x, v) with v in the conic domain at x, requiring all defining
  // inequalities to clear `margin`.
  std::pair<Vec, Vec> domain_sample(const MetricInstance& m, const Box& x_box, const Box& v_box,
                                    double margin = 0.0, int max_tries = 20000) {
    for (int t = 0; t < max_tries; ++t) {
      Vec x = vec_in_box(x_box);
      Vec v = vec_in_box(v_box);
      if (v.lpNorm<Eigen::Infinity>() < 1e-6) continue;
      if (!m.in_domain(x, v)) continue;
      if (margin > 0.0 && m.domain_margin(x, v) < margin) continue;
      return {x, v};
    }
    throw NumericalError("rejection sampling found no admissible (x, v) in " +
                         std::to_string(max_tries) + " tries");
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace finsler
