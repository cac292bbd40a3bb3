#pragma once

// Walk-forward evaluation of allocation strategies on a price segment, with
// the same linear transaction-cost model the environment rewards use.

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dynalloc/analytics.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/ppo.hpp"
#include "dynalloc/sharpe_trainer.hpp"
#include "dynalloc/weights.hpp"

namespace dynalloc::backtest {

enum class StrategyKind { drl_ppo, sharpe_policy, equal_weight, mean_variance, buy_and_hold };

std::string_view kind_name(StrategyKind k) noexcept;
StrategyKind parse_kind(std::string_view name);

inline constexpr std::size_t kNeverRebalance = std::numeric_limits<std::size_t>::max();

struct StrategyRef {
  StrategyKind kind = StrategyKind::equal_weight;
  std::string name;
  std::size_t rebalance_interval = 1;
  WeightVector fixed_weights;  // equal_weight, mean_variance, buy_and_hold
  std::shared_ptr<const sharpe::SharpePolicy> sharpe;
  std::shared_ptr<const rl::PpoPolicy> ppo;

  /// Return rows of history the strategy needs before its first decision.
  std::size_t warmup() const;
  void validate(std::size_t assets) const;
};

StrategyRef equal_weight_strategy(std::size_t assets, std::size_t rebalance_interval = 1);
/// Max-Sharpe sampled portfolio fitted on `train` only, held fixed.
StrategyRef mean_variance_strategy(const market::ReturnMatrix& train, std::size_t n_samples,
                                   std::uint64_t seed,
                                   int periods_per_year = analytics::kTradingDaysPerYear,
                                   std::size_t rebalance_interval = 1);
StrategyRef buy_and_hold_strategy(WeightVector initial);
StrategyRef sharpe_policy_strategy(sharpe::SharpePolicy policy, std::size_t rebalance_interval = 1);
StrategyRef ppo_strategy(rl::PpoPolicy policy, std::optional<std::size_t> rebalance_interval = std::nullopt);

struct Metrics {
  double ann_return = 0.0;
  double ann_vol = 0.0;
  std::optional<double> sharpe;      // empty when volatility is zero
  double max_drawdown = 0.0;
  std::optional<double> info_ratio;  // empty when tracking error is zero
  double winning_days = 0.0;
  double turnover = 0.0;   // mean per-period sum |target - drifted|
  double cost_paid = 0.0;  // currency
};

/// Daily volatilities at or below this are treated as zero.
inline constexpr double kZeroVolatility = 1e-12;

Metrics compute_metrics(const Vector& equity, const Vector& benchmark_equity,
                        int periods_per_year = analytics::kTradingDaysPerYear);

struct BacktestOptions {
  double mu_cost = 0.001;
  double initial_wealth = 1.0;
  int periods_per_year = analytics::kTradingDaysPerYear;
  // Price row where the equity curve starts; rows before it are history.
  // Defaults to the strategy's warmup.
  std::optional<std::size_t> start_row;
  // Information-ratio benchmark; equal weight when unset.
  std::optional<StrategyRef> benchmark;
};

struct Simulation {
  std::vector<market::Date> dates;
  Vector equity;
  double mean_turnover = 0.0;
  double cost_paid = 0.0;
  std::vector<WeightVector> targets;  // weights held over each period
};

Simulation simulate(const StrategyRef& strategy, const market::PriceTable& prices,
                    const BacktestOptions& opts);

struct BacktestReport {
  std::string strategy;
  std::vector<market::Date> dates;
  Vector equity;
  Metrics metrics;
};

BacktestReport run_strategy(const StrategyRef& strategy, const market::PriceTable& prices,
                            const BacktestOptions& opts = {});

std::string report_json(const BacktestReport& r);
BacktestReport report_from_json(std::string_view text);
/// `date  wealth`
std::string equity_tsv(const BacktestReport& r);

struct ComparisonTable {
  std::vector<std::string> columns;
  std::vector<std::string> metrics;
  std::vector<std::vector<std::optional<double>>> values;  // [metric][column]
};

ComparisonTable compare_report(const std::vector<BacktestReport>& reports);
std::string comparison_tsv(const ComparisonTable& t);
std::string comparison_json(const ComparisonTable& t);

}  // namespace dynalloc::backtest
