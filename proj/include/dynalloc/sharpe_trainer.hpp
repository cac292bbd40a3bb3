#pragma once

// Direct Sharpe-ratio maximization: the policy network maps a lookback
// window of returns to weights, and gradient ascent runs on the period
// Sharpe ratio of the resulting portfolio return series.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dynalloc/features.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/optimizer.hpp"
#include "dynalloc/policy_net.hpp"
#include "dynalloc/weights.hpp"

namespace dynalloc::sharpe {

struct SharpeTrainConfig {
  double alpha = 0.5;
  std::size_t epochs = 200;
  // Trading-period length in steps; 0 uses every row after the lookback.
  std::size_t period = 0;
  std::size_t lookback = 20;
  double eps_vol = 1e-8;
  std::vector<std::size_t> hidden = {64, 64};
  double l1 = 0.0;
  double l2 = 0.0;
  bool use_adam = false;
  policy::AdamConfig adam{};
  double plateau_tol = 1e-8;
  std::size_t plateau_epochs = 10;

  void validate() const;
};

/// R_t = w_{t-1} . r_t. `weights[k]` is applied to `returns` row k.
Vector realized_returns(std::span<const WeightVector> weights, const Matrix& returns);

/// Population-moment Sharpe ratio mean(R) / sqrt(mean(R^2) - mean(R)^2).
/// Throws ZeroVolatilityError when the variance is below eps_vol^2.
double sharpe_objective(std::span<const double> R, double eps_vol = 1e-8);

/// Closed-form dL/dR_t of sharpe_objective.
Vector sharpe_grad_wrt_returns(std::span<const double> R, double eps_vol = 1e-8);

/// theta + alpha * g.
policy::MlpParams grad_ascent_step(const policy::MlpParams& params,
                                   const policy::MlpParams& grad, double alpha);

struct ObjectiveGradient {
  double objective = 0.0;
  policy::MlpParams grad;
  std::vector<WeightVector> weights;
  Vector portfolio_returns;
};

/// L_T and dL_T/dtheta for one trading period. Row k of `features` yields
/// the weights applied to row k of `asset_returns`.
ObjectiveGradient objective_and_gradient(const policy::MlpParams& params, const Matrix& features,
                                         const Matrix& asset_returns, double eps_vol = 1e-8);

/// Builds the (features, aligned returns) pair for steps
/// [lookback, lookback + period).
struct Episode {
  Matrix features;
  Matrix returns;
};
Episode build_episode(const Matrix& returns, std::size_t lookback, std::size_t period,
                      const Standardizer& z);

/// What a trained Sharpe policy needs at inference time.
struct SharpePolicy {
  policy::MlpParams params;
  Standardizer standardizer;
  std::size_t lookback = 0;

  WeightVector decide(const Matrix& returns, std::size_t t) const;
};

std::string to_json(const SharpePolicy& p);
SharpePolicy sharpe_policy_from_json(std::string_view text);
void save(const SharpePolicy& p, const std::filesystem::path& path);
SharpePolicy load_sharpe_policy(const std::filesystem::path& path);

struct TrainResult {
  SharpePolicy policy;
  Vector history;  // L_T per epoch, measured before that epoch's update
  double final_objective = 0.0;  // L_T at the returned parameters
  bool converged = false;
};

TrainResult train(const market::ReturnMatrix& returns, const SharpeTrainConfig& cfg,
                  std::uint64_t seed);

/// `epoch  sharpe` TSV.
std::string history_tsv(const Vector& history);

}  // namespace dynalloc::sharpe
