#include "dynalloc/rl_gym.hpp"

#include <algorithm>
#include <cmath>

#include "dynalloc/error.hpp"
#include "dynalloc/kernels.hpp"

namespace dynalloc::rl {

namespace {

Matrix build_window(const EnvData& data, std::size_t end_row, std::size_t lookback) {
  Matrix w(lookback, data.assets());
  for (std::size_t k = 0; k < lookback; ++k) {
    const std::size_t r = end_row - lookback + k;
    for (std::size_t i = 0; i < data.assets(); ++i) {
      w(k, i) = data.standardizer.apply(i, data.returns(r, i));
    }
  }
  return w;
}

std::optional<Matrix> ratio_rows(const market::PriceTable& prices, const std::optional<Matrix>& extra,
                                 std::size_t first_price_row, std::size_t rows) {
  if (!extra) return std::nullopt;
  Matrix out(rows, prices.assets());
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t i = 0; i < prices.assets(); ++i) {
      out(t, i) = (*extra)(first_price_row + t, i) / prices.close(first_price_row + t, i);
    }
  }
  return out;
}

}  // namespace

void EnvConfig::validate() const {
  if (!(mu_cost >= 0.0 && mu_cost <= 0.1)) throw Error("mu_cost out of range [0, 0.1]");
  if (lookback < 1) throw Error("lookback must be at least 1");
  if (episode_len < 2) throw Error("episode_len must be at least 2");
  if (!(initial_wealth > 0.0)) throw Error("initial_wealth must be positive");
  if (action_interval < 1) throw Error("action_interval must be at least 1");
}

EnvData make_env_data(const market::ReturnMatrix& returns, const market::PriceTable* prices) {
  return make_env_data(returns, Standardizer::fit(returns.returns), prices);
}

EnvData make_env_data(const market::ReturnMatrix& returns, const Standardizer& z,
                      const market::PriceTable* prices) {
  EnvData data{returns.returns, z, std::nullopt, std::nullopt};
  if (prices && prices->high && prices->low && returns.rows() > 0) {
    const auto it = std::find(prices->dates.begin(), prices->dates.end(), returns.dates.front());
    if (it == prices->dates.end()) throw Error("price table does not cover the return dates");
    const auto first = static_cast<std::size_t>(it - prices->dates.begin());
    if (first + returns.rows() > prices->rows()) throw Error("price table does not cover the return dates");
    data.high_ratio = ratio_rows(*prices, prices->high, first, returns.rows());
    data.low_ratio = ratio_rows(*prices, prices->low, first, returns.rows());
  }
  return data;
}

double reward(const WeightVector& action, std::span<const double> price_relatives,
              const WeightVector& prev_weights, double mu) {
  if (action.size() != price_relatives.size() || prev_weights.size() != action.size()) {
    throw Error("reward dimension mismatch");
  }
  const double growth = kernels::dot(action.span(), price_relatives);
  const double arg = growth - mu * turnover(action.span(), prev_weights.span());
  if (!(arg > 0.0)) throw RuinError("portfolio value is non-positive after costs");
  return std::log(arg);
}

WeightVector drift(const WeightVector& w, std::span<const double> price_relatives) {
  Vector held(w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    held[i] = w[i] * price_relatives[i];
    total += held[i];
  }
  if (!(total > 0.0)) throw RuinError("holdings lost all value");
  for (double& h : held) h /= total;
  return WeightVector::normalized(std::move(held));
}

bool is_decision_step(const EnvState& s, const EnvConfig& cfg) noexcept {
  return s.step % cfg.action_interval == 0;
}

Matrix window_covariance(const Matrix& window) {
  const std::size_t W = window.rows();
  const std::size_t N = window.cols();
  Matrix cov(N, N);
  if (W < 2) return cov;
  Vector mean(N, 0.0);
  for (std::size_t t = 0; t < W; ++t) kernels::axpy(mean, 1.0, window.row(t));
  for (double& m : mean) m /= static_cast<double>(W);
  kernels::active().centered_crossprod(window.data(), W, N, mean.data(), cov.data());
  for (double& v : cov.flat()) v /= static_cast<double>(W - 1);
  return cov;
}

EnvState env_reset(const EnvData& data, const EnvConfig& cfg, std::optional<std::size_t> start_row) {
  cfg.validate();
  const std::size_t start = start_row.value_or(cfg.lookback);
  if (data.rows() < cfg.lookback + cfg.episode_len) {
    throw Error("segment of " + std::to_string(data.rows()) + " rows is shorter than lookback + episode_len (" +
                std::to_string(cfg.lookback + cfg.episode_len) + ")");
  }
  if (start < cfg.lookback || start + cfg.episode_len > data.rows()) {
    throw Error("episode start row out of range");
  }
  EnvState s;
  s.window = build_window(data, start, cfg.lookback);
  s.cov = window_covariance(s.window);
  s.prev_weights = WeightVector::uniform(data.assets());
  s.step = 0;
  s.start_row = start;
  s.wealth = cfg.initial_wealth;
  return s;
}

EnvState state_at(const EnvData& data, std::size_t row, std::size_t lookback,
                  WeightVector prev_weights) {
  if (row < lookback || row > data.rows()) throw Error("state row out of range");
  EnvState s;
  s.window = build_window(data, row, lookback);
  s.cov = window_covariance(s.window);
  s.prev_weights = std::move(prev_weights);
  s.start_row = row;
  return s;
}

StepResult env_step(const EnvState& state, std::span<const double> action, const EnvData& data,
                    const EnvConfig& cfg) {
  if (state.done) throw Error("episode already finished");
  if (action.size() != data.assets()) throw Error("action dimension mismatch");
  WeightVector target;
  if (is_decision_step(state, cfg)) {
    if (!on_simplex(action, 1e-6)) throw Error("action is off the simplex");
    target = WeightVector::normalized(Vector(action.begin(), action.end()));
  } else {
    target = state.prev_weights;
  }

  const std::size_t row = state.start_row + state.step;
  Vector y(data.assets());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 + data.returns(row, i);

  StepResult out;
  try {
    out.reward = reward(target, y, state.prev_weights, cfg.mu_cost);
  } catch (const RuinError&) {
    out.reward = kRuinReward;
    out.ruined = true;
  }
  out.next = state;
  out.next.wealth = state.wealth * std::exp(out.reward);
  out.next.step = state.step + 1;
  out.done = out.ruined || out.next.step >= cfg.episode_len;
  out.next.done = out.done;
  if (!out.ruined) out.next.prev_weights = drift(target, y);
  if (!out.done) {
    out.next.window = build_window(data, row + 1, cfg.lookback);
    out.next.cov = window_covariance(out.next.window);
  }
  return out;
}

std::size_t observation_size(std::size_t assets, std::size_t lookback, bool high_low) {
  return lookback * assets + assets * (assets + 1) / 2 + assets + (high_low ? 2 * assets : 0);
}

Vector observation(const EnvState& s, const EnvData& data) {
  const std::size_t N = data.assets();
  const bool hl = data.high_ratio && data.low_ratio;
  Vector obs;
  obs.reserve(observation_size(N, s.window.rows(), hl));
  obs.insert(obs.end(), s.window.flat().begin(), s.window.flat().end());
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i; j < N; ++j) obs.push_back(s.cov(i, j));
  }
  obs.insert(obs.end(), s.prev_weights.begin(), s.prev_weights.end());
  if (hl) {
    const std::size_t latest = s.start_row + s.step - 1;
    for (std::size_t i = 0; i < N; ++i) obs.push_back((*data.high_ratio)(latest, i));
    for (std::size_t i = 0; i < N; ++i) obs.push_back((*data.low_ratio)(latest, i));
  }
  return obs;
}

}  // namespace dynalloc::rl
