#pragma once

#include <span>

#include "dynalloc/linalg.hpp"
#include "dynalloc/market_data.hpp"

namespace dynalloc {

/// Per-asset z-scoring with statistics fitted on a training segment.
struct Standardizer {
  Vector mean;
  Vector scale;  // population std; 1 where a column has no variance

  static Standardizer fit(const Matrix& returns);
  double apply(std::size_t asset, double value) const noexcept {
    return (value - mean[asset]) / scale[asset];
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// Flattened window of standardized returns for rows [t - lookback, t),
/// oldest first. Requires t >= lookback.
Vector lookback_features(const Matrix& returns, std::size_t t, std::size_t lookback,
                         const Standardizer& z);

}  // namespace dynalloc
