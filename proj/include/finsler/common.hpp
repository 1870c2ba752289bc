#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Raised when an evaluation point leaves the conic domain of a metric, a
// chart, or the defined range of an elementary function.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a computation is numerically meaningless (degenerate tensor,
// failed root bracket, non-convergent iteration, ill-conditioned frame).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the expression parser; `position` is 1-based in the source text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int position)
      : std::runtime_error(what + " at offset " + std::to_string(position)),
        position_(position) {}
  int position() const { return position_; }

 private:
  int position_;
};

inline double primal_of(double x) { return x; }

// Gaussian elimination with partial pivoting on the primal magnitude of the
// scalar type. Works for plain doubles and for jets (a commutative ring whose
// units are the jets with non-zero primal part). `a` is row-major k x k.
template <class T>
std::vector<T> solve_linear(std::vector<T> a, std::vector<T> b, int k) {
  for (int col = 0; col < k; ++col) {
    int pivot = col;
    double best = std::abs(primal_of(a[col * k + col]));
    for (int r = col + 1; r < k; ++r) {
      double m = std::abs(primal_of(a[r * k + col]));
      if (m > best) {
        best = m;
        pivot = r;
      }
    }
    if (best < 1e-14) throw NumericalError("singular matrix in solve_linear");
    if (pivot != col) {
      for (int c = 0; c < k; ++c) std::swap(a[col * k + c], a[pivot * k + c]);
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < k; ++r) {
      T f = a[r * k + col] / a[col * k + col];
      for (int c = col; c < k; ++c) a[r * k + c] = a[r * k + c] - f * a[col * k + c];
      b[r] = b[r] - f * b[col];
    }
  }
  std::vector<T> x(b);
  for (int r = k - 1; r >= 0; --r) {
    T s = b[r];
    for (int c = r + 1; c < k; ++c) s = s - a[r * k + c] * x[c];
    x[r] = s / a[r * k + r];
  }
  return x;
}

inline Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (int i = 0; i < out.size(); ++i) out[i] = v[static_cast<size_t>(i)];
  return out;
}

inline std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace finsler
