#pragma once

// Portfolio-rebalancing environment over historical returns. Each step the
// agent picks target weights A; the reward is ln(A.y - mu * |A - W|_1) where
// y are the step's price relatives and W the drifted pre-trade holdings.

#include <optional>

#include "dynalloc/features.hpp"
#include "dynalloc/linalg.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/weights.hpp"

namespace dynalloc::rl {

struct EnvConfig {
  double mu_cost = 0.001;
  std::size_t lookback = 20;
  std::size_t episode_len = 252;
  double initial_wealth = 1.0;
  // Steps between decisions; holdings drift untouched in between.
  std::size_t action_interval = 21;

  void validate() const;
};

/// Historical data the environment replays. Optional high/close and
/// low/close ratios are row-aligned with `returns`.
struct EnvData {
  Matrix returns;
  Standardizer standardizer;
  std::optional<Matrix> high_ratio;
  std::optional<Matrix> low_ratio;

  std::size_t assets() const noexcept { return returns.cols(); }
  std::size_t rows() const noexcept { return returns.rows(); }
};

/// Standardizer fitted on `returns` itself; high/low ratios taken from the
/// price table rows that close each return period.
EnvData make_env_data(const market::ReturnMatrix& returns,
                      const market::PriceTable* prices = nullptr);
EnvData make_env_data(const market::ReturnMatrix& returns, const Standardizer& z,
                      const market::PriceTable* prices = nullptr);

struct EnvState {
  Matrix window;  // lookback x N standardized returns, oldest first
  Matrix cov;     // N x N sample covariance of `window`
  WeightVector prev_weights;
  std::size_t step = 0;
  std::size_t start_row = 0;  // data row rewarded at step 0
  double wealth = 1.0;
  bool done = false;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
  bool ruined = false;
};

/// Ruin sentinel: the reward assigned when the ln argument is non-positive.
inline constexpr double kRuinReward = -18.420680743952367;  // ln(1e-8)

/// ln(A.y - mu * sum|A_i - W_i|). Throws RuinError when the argument is
/// not positive.
double reward(const WeightVector& action, std::span<const double> price_relatives,
              const WeightVector& prev_weights, double mu);

/// A_i y_i / sum_j A_j y_j.
WeightVector drift(const WeightVector& w, std::span<const double> price_relatives);

bool is_decision_step(const EnvState& s, const EnvConfig& cfg) noexcept;

/// Starts an episode whose first rewarded row is `start_row` (defaults to
/// the first row after the lookback window).
EnvState env_reset(const EnvData& data, const EnvConfig& cfg,
                   std::optional<std::size_t> start_row = std::nullopt);

/// State whose next rewarded row is `row`, with the given holdings. Used to
/// query a trained policy outside an episode.
EnvState state_at(const EnvData& data, std::size_t row, std::size_t lookback,
                  WeightVector prev_weights);

/// Applies `action` (renormalized if within 1e-6 of the simplex). Between
/// decision steps the action is replaced by the drifted holdings.
StepResult env_step(const EnvState& state, std::span<const double> action, const EnvData& data,
                    const EnvConfig& cfg);

/// Flat policy input: window, upper-triangular covariance, previous
/// weights, then high/low ratios of the latest row when present.
Vector observation(const EnvState& s, const EnvData& data);
std::size_t observation_size(std::size_t assets, std::size_t lookback, bool high_low);

/// Covariance of the window rows; zero when lookback is 1.
Matrix window_covariance(const Matrix& window);

}  // namespace dynalloc::rl
