#include "dynalloc/weights.hpp"

#include <cmath>
#include <numeric>

#include "dynalloc/error.hpp"

namespace dynalloc {

bool on_simplex(std::span<const double> w, double tol) noexcept {
  if (w.empty()) return false;
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

double turnover(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

WeightVector::WeightVector(Vector w) : w_(std::move(w)) {
  if (!on_simplex(w_)) throw Error("weights are not on the simplex");
}

WeightVector WeightVector::uniform(std::size_t n) {
  if (n == 0) throw Error("uniform weights need at least one asset");
  return WeightVector(Vector(n, 1.0 / static_cast<double>(n)));
}

WeightVector WeightVector::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) throw Error("one-hot index out of range");
  Vector w(n, 0.0);
  w[index] = 1.0;
  return WeightVector(std::move(w));
}

WeightVector WeightVector::normalized(Vector w) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("weights must be finite and non-negative");
    sum += v;
  }
  if (!(sum > 0.0)) throw Error("weights sum to zero");
  for (double& v : w) v /= sum;
  return WeightVector(std::move(w));
}

}  // namespace dynalloc
