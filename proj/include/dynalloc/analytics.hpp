#pragma once

// Classical portfolio mathematics over a ReturnMatrix: moments, portfolio
// risk and return, a sampled efficient frontier and share allocation.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dynalloc/linalg.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/weights.hpp"

namespace dynalloc::analytics {

inline constexpr int kTradingDaysPerYear = 252;

struct ExpectedReturns {
  std::vector<std::string> tickers;
  Vector mu;  // annualized
};

struct CovMatrix {
  std::vector<std::string> tickers;
  Matrix cov;  // annualized, symmetric

  std::size_t dim() const noexcept { return cov.rows(); }
};

struct FrontierPoint {
  double risk = 0.0;
  double ret = 0.0;
  double sharpe = 0.0;
  WeightVector weights;
};

struct AllocationPlan {
  std::vector<std::string> tickers;
  std::vector<long long> shares;
  double leftover = 0.0;
  double budget = 0.0;
};

struct SubsetSelection {
  std::vector<std::string> tickers;
  std::vector<std::size_t> columns;
  FrontierPoint best;
  std::size_t subsets_examined = 0;
};

ExpectedReturns expected_returns(const market::ReturnMatrix& returns,
                                 int periods_per_year = kTradingDaysPerYear);

/// Unbiased sample covariance (n - 1), scaled by periods_per_year.
CovMatrix covariance(const market::ReturnMatrix& returns,
                     int periods_per_year = kTradingDaysPerYear);

double portfolio_return(const ExpectedReturns& mu, const WeightVector& w);

/// sqrt(w' S w). Radicands in [-1e-12, 0) clamp to zero; anything more
/// negative means S was not positive semidefinite and throws.
double portfolio_risk(const CovMatrix& cov, const WeightVector& w);

FrontierPoint evaluate(const ExpectedReturns& mu, const CovMatrix& cov, WeightVector w);

/// Uniform draws from the simplex (Dirichlet with all concentrations 1).
std::vector<FrontierPoint> sample_frontier(const ExpectedReturns& mu, const CovMatrix& cov,
                                           std::size_t n_samples, std::uint64_t seed);

/// Highest Sharpe; ties go to lower risk, then the lexicographically smaller
/// weight vector. Points with zero risk are skipped.
FrontierPoint max_sharpe(const std::vector<FrontierPoint>& points);

inline constexpr std::uint64_t kMaxSubsets = 1'000'000;

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

/// Exhaustive search over k-asset subsets for the best max-Sharpe sampled
/// portfolio. Every subset is sampled with the same seed.
SubsetSelection select_best_subset(const market::ReturnMatrix& returns, std::size_t k,
                                   std::size_t n_samples, std::uint64_t seed,
                                   int periods_per_year = kTradingDaysPerYear);

/// Floor allocation followed by greedy one-share purchases of the
/// affordable asset with the largest value deficit (ties by ticker order).
AllocationPlan discrete_allocation(const WeightVector& w, const Vector& latest_prices,
                                   double budget,
                                   const std::vector<std::string>& tickers = {});

/// Plot-ready TSV: `risk return sharpe w_1 .. w_N`.
std::string frontier_tsv(const std::vector<FrontierPoint>& points);

/// {"<ticker>": shares, ..., "leftover": cash}
std::string allocation_json(const AllocationPlan& plan);

}  // namespace dynalloc::analytics
