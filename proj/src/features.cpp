#include "dynalloc/features.hpp"

#include <cmath>

#include "dynalloc/error.hpp"

namespace dynalloc {

Standardizer Standardizer::fit(const Matrix& returns) {
  if (returns.rows() == 0) throw Error("cannot fit standardizer on empty data");
  const std::size_t N = returns.cols();
  const double n = static_cast<double>(returns.rows());
  Standardizer z{Vector(N, 0.0), Vector(N, 0.0)};
  for (std::size_t t = 0; t < returns.rows(); ++t) {
    for (std::size_t i = 0; i < N; ++i) z.mean[i] += returns(t, i);
  }
  for (double& m : z.mean) m /= n;
  for (std::size_t t = 0; t < returns.rows(); ++t) {
    for (std::size_t i = 0; i < N; ++i) {
      const double d = returns(t, i) - z.mean[i];
      z.scale[i] += d * d;
    }
  }
  for (double& s : z.scale) {
    s = std::sqrt(s / n);
    if (!(s > 1e-12)) s = 1.0;
  }
  return z;
}

Vector lookback_features(const Matrix& returns, std::size_t t, std::size_t lookback,
                         const Standardizer& z) {
  if (t < lookback || t > returns.rows()) throw Error("lookback window out of range");
  const std::size_t N = returns.cols();
  Vector out;
  out.reserve(lookback * N);
  for (std::size_t r = t - lookback; r < t; ++r) {
    for (std::size_t i = 0; i < N; ++i) out.push_back(z.apply(i, returns(r, i)));
  }
  return out;
}

}  // namespace dynalloc
