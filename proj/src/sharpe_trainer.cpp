#include "dynalloc/sharpe_trainer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"
#include "dynalloc/kernels.hpp"
#include "json.hpp"

namespace dynalloc::sharpe {

namespace {

struct Moments {
  double mean;
  double second;
  double variance;
};

Moments population_moments(std::span<const double> R, double eps_vol) {
  if (R.size() < 2) throw Error("Sharpe objective needs at least 2 returns");
  double a = 0.0;
  double b = 0.0;
  for (double r : R) {
    a += r;
    b += r * r;
  }
  const double n = static_cast<double>(R.size());
  a /= n;
  b /= n;
  const double s = b - a * a;
  if (!std::isfinite(s)) throw NonFiniteError("non-finite portfolio returns");
  if (s < eps_vol * eps_vol) throw ZeroVolatilityError("portfolio returns have zero volatility");
  return {a, b, s};
}

}  // namespace

void SharpeTrainConfig::validate() const {
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (period == 1) throw Error("trading period must be at least 2 steps");
  if (lookback < 1) throw Error("lookback must be at least 1");
  if (!(eps_vol > 0.0)) throw Error("eps_vol must be positive");
  if (l1 < 0.0 || l2 < 0.0) throw Error("regularization coefficients must be non-negative");
  for (std::size_t h : hidden) {
    if (h == 0) throw Error("hidden layer sizes must be positive");
  }
}

Vector realized_returns(std::span<const WeightVector> weights, const Matrix& returns) {
  if (weights.size() != returns.rows()) {
    throw Error("weights path length " + std::to_string(weights.size()) +
                " does not match return rows " + std::to_string(returns.rows()));
  }
  Vector R(weights.size());
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (weights[t].size() != returns.cols()) throw Error("weight dimension does not match assets");
    R[t] = kernels::dot(weights[t].span(), returns.row(t));
  }
  return R;
}

double sharpe_objective(std::span<const double> R, double eps_vol) {
  const Moments m = population_moments(R, eps_vol);
  return m.mean / std::sqrt(m.variance);
}

Vector sharpe_grad_wrt_returns(std::span<const double> R, double eps_vol) {
  const Moments m = population_moments(R, eps_vol);
  const double s32 = m.variance * std::sqrt(m.variance);
  const double dA = m.second / s32;
  const double dB = -0.5 * m.mean / s32;
  const double n = static_cast<double>(R.size());
  Vector g(R.size());
  for (std::size_t t = 0; t < R.size(); ++t) g[t] = dA / n + dB * 2.0 * R[t] / n;
  return g;
}

policy::MlpParams grad_ascent_step(const policy::MlpParams& params,
                                   const policy::MlpParams& grad, double alpha) {
  policy::MlpParams out = params;
  policy::sgd_step(out, grad, alpha, policy::Direction::ascend);
  return out;
}

ObjectiveGradient objective_and_gradient(const policy::MlpParams& params, const Matrix& features,
                                         const Matrix& asset_returns, double eps_vol) {
  if (features.rows() != asset_returns.rows()) throw Error("features and returns are misaligned");
  const std::size_t T = features.rows();
  ObjectiveGradient out;
  out.weights.reserve(T);
  std::vector<policy::ForwardCache> caches;
  caches.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    auto fwd = policy::forward(params, features.row(t));
    out.weights.push_back(std::move(fwd.weights));
    caches.push_back(std::move(fwd.cache));
  }
  out.portfolio_returns = realized_returns(out.weights, asset_returns);
  out.objective = sharpe_objective(out.portfolio_returns, eps_vol);
  const Vector dR = sharpe_grad_wrt_returns(out.portfolio_returns, eps_vol);

  // dL/dw_{t-1} = dL/dR_t * r_t, accumulated in step order.
  out.grad = params.zeros_like();
  Vector grad_w(asset_returns.cols());
  for (std::size_t t = 0; t < T; ++t) {
    const auto r = asset_returns.row(t);
    for (std::size_t i = 0; i < grad_w.size(); ++i) grad_w[i] = dR[t] * r[i];
    const Vector grad_logits = policy::softmax_vjp(caches[t].weights, grad_w);
    policy::backward_logits(params, caches[t], grad_logits, out.grad);
  }
  return out;
}

Episode build_episode(const Matrix& returns, std::size_t lookback, std::size_t period,
                      const Standardizer& z) {
  if (returns.rows() < lookback + 2) throw Error("not enough rows for lookback plus a trading period");
  const std::size_t T = period == 0 ? returns.rows() - lookback : period;
  if (lookback + T > returns.rows()) {
    throw Error("need " + std::to_string(lookback + T) + " rows for lookback + period, have " +
                std::to_string(returns.rows()));
  }
  Episode ep{Matrix(T, lookback * returns.cols()), returns.slice_rows(lookback, T)};
  for (std::size_t k = 0; k < T; ++k) {
    const Vector f = lookback_features(returns, lookback + k, lookback, z);
    std::copy(f.begin(), f.end(), ep.features.row(k).begin());
  }
  return ep;
}

WeightVector SharpePolicy::decide(const Matrix& returns, std::size_t t) const {
  return policy::forward(params, lookback_features(returns, t, lookback, standardizer)).weights;
}

std::string to_json(const SharpePolicy& p) {
  nlohmann::ordered_json j;
  j["format"] = "dynalloc.sharpe_policy";
  j["version"] = 1;
  j["lookback"] = p.lookback;
  j["feature_mean"] = p.standardizer.mean;
  j["feature_scale"] = p.standardizer.scale;
  j["network"] = nlohmann::json::parse(policy::to_json(p.params));
  return j.dump();
}

SharpePolicy sharpe_policy_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed Sharpe policy: ") + e.what());
  }
  if (j.value("format", "") != "dynalloc.sharpe_policy") throw Error("not a Sharpe policy checkpoint");
  SharpePolicy p;
  p.lookback = j.at("lookback").get<std::size_t>();
  p.standardizer.mean = j.at("feature_mean").get<Vector>();
  p.standardizer.scale = j.at("feature_scale").get<Vector>();
  p.params = policy::from_json(j.at("network").dump());
  if (p.params.input_size() != p.lookback * p.standardizer.mean.size()) {
    throw Error("Sharpe policy network input does not match lookback x assets");
  }
  return p;
}

void save(const SharpePolicy& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out << to_json(p) << '\n';
}

SharpePolicy load_sharpe_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing checkpoint: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sharpe_policy_from_json(ss.str());
}

TrainResult train(const market::ReturnMatrix& returns, const SharpeTrainConfig& cfg,
                  std::uint64_t seed) {
  cfg.validate();
  const std::size_t N = returns.assets();
  TrainResult result;
  result.policy.lookback = cfg.lookback;
  result.policy.standardizer = Standardizer::fit(returns.returns);

  std::vector<std::size_t> sizes{cfg.lookback * N};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(N);
  result.policy.params = policy::init_params(sizes, seed);

  const Episode ep = build_episode(returns.returns, cfg.lookback, cfg.period, result.policy.standardizer);
  policy::Adam adam(result.policy.params, cfg.adam);
  const bool regularized = cfg.l1 > 0.0 || cfg.l2 > 0.0;

  std::size_t flat_epochs = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ObjectiveGradient og =
        objective_and_gradient(result.policy.params, ep.features, ep.returns, cfg.eps_vol);
    if (!std::isfinite(og.objective)) throw NonFiniteError("non-finite Sharpe objective");
    if (!result.history.empty()) {
      flat_epochs = std::abs(og.objective - result.history.back()) < cfg.plateau_tol ? flat_epochs + 1 : 0;
    }
    result.history.push_back(og.objective);
    if (flat_epochs >= cfg.plateau_epochs) {
      result.converged = true;
      break;
    }
    if (regularized) {
      policy::add_scaled(og.grad, policy::penalty_grad(result.policy.params, cfg.l1, cfg.l2), -1.0);
    }
    if (cfg.use_adam) {
      adam.step(result.policy.params, og.grad, policy::Direction::ascend);
    } else {
      result.policy.params = grad_ascent_step(result.policy.params, og.grad, cfg.alpha);
    }
  }
  result.final_objective =
      objective_and_gradient(result.policy.params, ep.features, ep.returns, cfg.eps_vol).objective;
  return result;
}

std::string history_tsv(const Vector& history) {
  std::ostringstream os;
  os << "epoch\tsharpe\n";
  for (std::size_t e = 0; e < history.size(); ++e) os << e << '\t' << format_double(history[e]) << '\n';
  return os.str();
}

}  // namespace dynalloc::sharpe
