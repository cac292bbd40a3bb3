#pragma once

#include <span>
#include <vector>

#include "dynalloc/linalg.hpp"

namespace dynalloc {

inline constexpr double kSimplexTolerance = 1e-9;

/// Long-only allocation: entries in [0, 1] summing to one.
class WeightVector {
public:
  WeightVector() = default;
  /// Throws if `w` is off the simplex by more than kSimplexTolerance.
  explicit WeightVector(Vector w);

  static WeightVector uniform(std::size_t n);
  static WeightVector one_hot(std::size_t n, std::size_t index);
  /// Rescales non-negative values to sum to one; throws if the sum is zero.
  static WeightVector normalized(Vector w);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const noexcept { return w_[i]; }
  const Vector& values() const noexcept { return w_; }
  std::span<const double> span() const noexcept { return w_; }
  auto begin() const noexcept { return w_.begin(); }
  auto end() const noexcept { return w_.end(); }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
  friend auto operator<=>(const WeightVector& a, const WeightVector& b) { return a.w_ <=> b.w_; }

private:
  Vector w_;
};

/// True when every entry lies in [0, 1] and the sum is within `tol` of one.
bool on_simplex(std::span<const double> w, double tol = kSimplexTolerance) noexcept;

/// Sum of absolute differences.
double turnover(std::span<const double> a, std::span<const double> b) noexcept;

}  // namespace dynalloc
