#include "dynalloc/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"
#include "dynalloc/kernels.hpp"
#include "json.hpp"

namespace dynalloc::backtest {

namespace {

using nlohmann::ordered_json;

double sample_std(const Vector& x) {
  if (x.size() < 2) return 0.0;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0));
}

double mean_of(const Vector& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

Vector period_returns(const Vector& equity) {
  Vector q(equity.size() - 1);
  for (std::size_t t = 1; t < equity.size(); ++t) q[t - 1] = equity[t] / equity[t - 1] - 1.0;
  return q;
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

WeightVector decide(const StrategyRef& s, const market::ReturnMatrix& returns,
                    const std::optional<rl::EnvData>& env, std::size_t return_row,
                    const Vector& holdings) {
  switch (s.kind) {
    case StrategyKind::equal_weight:
    case StrategyKind::mean_variance:
    case StrategyKind::buy_and_hold:
      return s.fixed_weights;
    case StrategyKind::sharpe_policy:
      return s.sharpe->decide(returns.returns, return_row);
    case StrategyKind::drl_ppo: {
      const bool cash = std::all_of(holdings.begin(), holdings.end(), [](double h) { return h == 0.0; });
      WeightVector prev = cash ? WeightVector::uniform(holdings.size()) : WeightVector::normalized(holdings);
      const rl::EnvState st = rl::state_at(*env, return_row, s.ppo->env.lookback, std::move(prev));
      return s.ppo->mean_action(rl::observation(st, *env));
    }
  }
  throw Error("unknown strategy kind");
}

}  // namespace

std::string_view kind_name(StrategyKind k) noexcept {
  switch (k) {
    case StrategyKind::drl_ppo: return "drl_ppo";
    case StrategyKind::sharpe_policy: return "sharpe_policy";
    case StrategyKind::equal_weight: return "equal_weight";
    case StrategyKind::mean_variance: return "mean_variance";
    case StrategyKind::buy_and_hold: return "buy_and_hold";
  }
  return "unknown";
}

StrategyKind parse_kind(std::string_view name) {
  for (StrategyKind k : {StrategyKind::drl_ppo, StrategyKind::sharpe_policy, StrategyKind::equal_weight,
                         StrategyKind::mean_variance, StrategyKind::buy_and_hold}) {
    if (kind_name(k) == name) return k;
  }
  throw Error("unknown strategy '" + std::string(name) + "'");
}

std::size_t StrategyRef::warmup() const {
  switch (kind) {
    case StrategyKind::sharpe_policy: return sharpe ? sharpe->lookback : 0;
    case StrategyKind::drl_ppo: return ppo ? ppo->env.lookback : 0;
    default: return 0;
  }
}

void StrategyRef::validate(std::size_t assets) const {
  if (rebalance_interval < 1) throw Error("rebalance_interval must be at least 1");
  switch (kind) {
    case StrategyKind::sharpe_policy:
      if (!sharpe) throw Error("strategy checkpoint missing: sharpe_policy");
      if (sharpe->standardizer.mean.size() != assets) throw Error("Sharpe policy asset count mismatch");
      break;
    case StrategyKind::drl_ppo:
      if (!ppo) throw Error("strategy checkpoint missing: drl_ppo");
      if (ppo->standardizer.mean.size() != assets) throw Error("PPO policy asset count mismatch");
      break;
    default:
      if (fixed_weights.size() != assets) throw Error("strategy weights do not match asset count");
  }
}

StrategyRef equal_weight_strategy(std::size_t assets, std::size_t rebalance_interval) {
  StrategyRef s;
  s.kind = StrategyKind::equal_weight;
  s.name = "equal_weight";
  s.rebalance_interval = rebalance_interval;
  s.fixed_weights = WeightVector::uniform(assets);
  return s;
}

StrategyRef mean_variance_strategy(const market::ReturnMatrix& train, std::size_t n_samples,
                                   std::uint64_t seed, int periods_per_year,
                                   std::size_t rebalance_interval) {
  if (train.rows() < 2) throw Error("mean-variance fit needs at least 2 training rows");
  StrategyRef s;
  s.kind = StrategyKind::mean_variance;
  s.name = "mean_variance";
  s.rebalance_interval = rebalance_interval;
  if (train.assets() == 1) {
    s.fixed_weights = WeightVector::uniform(1);
    return s;
  }
  const auto mu = analytics::expected_returns(train, periods_per_year);
  const auto cov = analytics::covariance(train, periods_per_year);
  s.fixed_weights = analytics::max_sharpe(analytics::sample_frontier(mu, cov, n_samples, seed)).weights;
  return s;
}

StrategyRef buy_and_hold_strategy(WeightVector initial) {
  StrategyRef s;
  s.kind = StrategyKind::buy_and_hold;
  s.name = "buy_and_hold";
  s.rebalance_interval = kNeverRebalance;
  s.fixed_weights = std::move(initial);
  return s;
}

StrategyRef sharpe_policy_strategy(sharpe::SharpePolicy policy, std::size_t rebalance_interval) {
  StrategyRef s;
  s.kind = StrategyKind::sharpe_policy;
  s.name = "sharpe_policy";
  s.rebalance_interval = rebalance_interval;
  s.sharpe = std::make_shared<const sharpe::SharpePolicy>(std::move(policy));
  return s;
}

StrategyRef ppo_strategy(rl::PpoPolicy policy, std::optional<std::size_t> rebalance_interval) {
  StrategyRef s;
  s.kind = StrategyKind::drl_ppo;
  s.name = "drl_ppo";
  s.rebalance_interval = rebalance_interval.value_or(policy.env.action_interval);
  s.ppo = std::make_shared<const rl::PpoPolicy>(std::move(policy));
  return s;
}

Metrics compute_metrics(const Vector& equity, const Vector& benchmark_equity, int periods_per_year) {
  if (equity.size() < 2) throw Error("equity curve needs at least 2 points");
  if (benchmark_equity.size() != equity.size()) throw Error("benchmark equity is not aligned");
  if (periods_per_year <= 0) throw Error("periods_per_year must be positive");
  for (double e : equity) {
    if (!(e > 0.0) || !std::isfinite(e)) throw Error("equity must be strictly positive");
  }
  const double ppy = static_cast<double>(periods_per_year);
  const Vector q = period_returns(equity);
  const Vector qb = period_returns(benchmark_equity);
  const double periods = static_cast<double>(q.size());

  Metrics m;
  m.ann_return = std::pow(equity.back() / equity.front(), ppy / periods) - 1.0;
  const double daily_vol = sample_std(q);
  m.ann_vol = daily_vol <= kZeroVolatility ? 0.0 : daily_vol * std::sqrt(ppy);
  if (m.ann_vol > 0.0) m.sharpe = m.ann_return / m.ann_vol;

  double peak = equity.front();
  for (double e : equity) {
    peak = std::max(peak, e);
    m.max_drawdown = std::max(m.max_drawdown, 1.0 - e / peak);
  }

  std::size_t wins = 0;
  for (double v : q) wins += v > 0.0 ? 1 : 0;
  m.winning_days = static_cast<double>(wins) / periods;

  Vector active(q.size());
  for (std::size_t t = 0; t < q.size(); ++t) active[t] = q[t] - qb[t];
  const double te = sample_std(active);
  if (te > kZeroVolatility) m.info_ratio = mean_of(active) / te * std::sqrt(ppy);
  return m;
}

Simulation simulate(const StrategyRef& strategy, const market::PriceTable& prices,
                    const BacktestOptions& opts) {
  const std::size_t N = prices.assets();
  strategy.validate(N);
  if (!(opts.mu_cost >= 0.0)) throw Error("mu_cost must be non-negative");
  if (!(opts.initial_wealth > 0.0)) throw Error("initial_wealth must be positive");
  const std::size_t start = opts.start_row.value_or(strategy.warmup());
  if (start < strategy.warmup()) {
    throw Error("start row leaves " + std::to_string(start) + " history rows; strategy needs " +
                std::to_string(strategy.warmup()));
  }
  const std::size_t interval = std::min(strategy.rebalance_interval, kNeverRebalance);
  if (start + 2 > prices.rows() ||
      (interval != kNeverRebalance && prices.rows() - start < interval + 1)) {
    throw Error("price segment too short for the rebalance interval");
  }

  const market::ReturnMatrix returns = market::to_returns(prices);
  std::optional<rl::EnvData> env;
  if (strategy.kind == StrategyKind::drl_ppo) {
    env = rl::make_env_data(returns, strategy.ppo->standardizer,
                            strategy.ppo->high_low ? &prices : nullptr);
    if (strategy.ppo->high_low && !env->high_ratio) {
      throw Error("PPO policy expects high/low prices but the segment has none");
    }
  }

  Simulation sim;
  sim.dates.assign(prices.dates.begin() + static_cast<std::ptrdiff_t>(start), prices.dates.end());
  sim.equity.push_back(opts.initial_wealth);
  Vector holdings(N, 0.0);  // start in cash
  double total_turnover = 0.0;
  Vector y(N);
  for (std::size_t t = start + 1; t < prices.rows(); ++t) {
    const std::size_t k = t - start - 1;
    const std::size_t return_row = t - 1;
    for (std::size_t i = 0; i < N; ++i) y[i] = 1.0 + returns.returns(return_row, i);
    const double wealth = sim.equity.back();
    const bool rebalance = k == 0 || (interval != kNeverRebalance && k % interval == 0);
    Vector held = holdings;
    double growth = 0.0;
    if (rebalance) {
      const WeightVector target = decide(strategy, returns, env, return_row, holdings);
      const double turn = turnover(target.span(), holdings);
      total_turnover += turn;
      sim.cost_paid += wealth * opts.mu_cost * turn;
      growth = kernels::dot(target.span(), y) - opts.mu_cost * turn;
      held = target.values();
      sim.targets.push_back(target);
    } else {
      growth = kernels::dot(holdings, y);
      sim.targets.push_back(WeightVector::normalized(holdings));
    }
    if (!(growth > 0.0)) throw RuinError("portfolio wealth fell to zero");
    sim.equity.push_back(wealth * growth);
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      holdings[i] = held[i] * y[i];
      total += holdings[i];
    }
    for (double& h : holdings) h /= total;
  }
  sim.mean_turnover = total_turnover / static_cast<double>(sim.equity.size() - 1);
  return sim;
}

BacktestReport run_strategy(const StrategyRef& strategy, const market::PriceTable& prices,
                            const BacktestOptions& opts) {
  BacktestOptions resolved = opts;
  resolved.start_row = opts.start_row.value_or(strategy.warmup());
  const Simulation sim = simulate(strategy, prices, resolved);

  const StrategyRef bench = opts.benchmark.value_or(equal_weight_strategy(prices.assets()));
  BacktestOptions bench_opts = resolved;
  bench_opts.benchmark.reset();
  const Simulation bench_sim = simulate(bench, prices, bench_opts);

  BacktestReport r;
  r.strategy = strategy.name.empty() ? std::string(kind_name(strategy.kind)) : strategy.name;
  r.dates = sim.dates;
  r.equity = sim.equity;
  r.metrics = compute_metrics(sim.equity, bench_sim.equity, opts.periods_per_year);
  r.metrics.turnover = sim.mean_turnover;
  r.metrics.cost_paid = sim.cost_paid;
  return r;
}

std::string report_json(const BacktestReport& r) {
  ordered_json j;
  j["strategy"] = r.strategy;
  j["period"] = {{"start", market::format_date(r.dates.front())},
                 {"end", market::format_date(r.dates.back())}};
  j["metrics"] = {{"ann_return", r.metrics.ann_return},
                  {"ann_vol", r.metrics.ann_vol},
                  {"sharpe", optional_json(r.metrics.sharpe)},
                  {"max_drawdown", r.metrics.max_drawdown},
                  {"info_ratio", optional_json(r.metrics.info_ratio)},
                  {"winning_days", r.metrics.winning_days},
                  {"turnover", r.metrics.turnover},
                  {"cost_paid", r.metrics.cost_paid}};
  ordered_json eq = ordered_json::array();
  for (std::size_t t = 0; t < r.equity.size(); ++t) {
    eq.push_back(ordered_json::array({market::format_date(r.dates[t]), r.equity[t]}));
  }
  j["equity"] = std::move(eq);
  return j.dump(2) + "\n";
}

BacktestReport report_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  BacktestReport r;
  try {
    r.strategy = j.at("strategy").get<std::string>();
    const auto& m = j.at("metrics");
    r.metrics.ann_return = m.at("ann_return").get<double>();
    r.metrics.ann_vol = m.at("ann_vol").get<double>();
    r.metrics.sharpe = optional_from(m.at("sharpe"));
    r.metrics.max_drawdown = m.at("max_drawdown").get<double>();
    r.metrics.info_ratio = optional_from(m.at("info_ratio"));
    r.metrics.winning_days = m.at("winning_days").get<double>();
    r.metrics.turnover = m.at("turnover").get<double>();
    r.metrics.cost_paid = m.at("cost_paid").get<double>();
    for (const auto& point : j.at("equity")) {
      r.dates.push_back(market::parse_date(point.at(0).get<std::string>()));
      r.equity.push_back(point.at(1).get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string equity_tsv(const BacktestReport& r) {
  std::ostringstream os;
  os << "date\twealth\n";
  for (std::size_t t = 0; t < r.equity.size(); ++t) {
    os << market::format_date(r.dates[t]) << '\t' << format_double(r.equity[t]) << '\n';
  }
  return os.str();
}

ComparisonTable compare_report(const std::vector<BacktestReport>& reports) {
  ComparisonTable t;
  t.metrics = {"ann_return", "ann_vol",      "sharpe",   "max_drawdown",
               "info_ratio", "winning_days", "turnover", "cost_paid"};
  t.values.assign(t.metrics.size(), {});
  for (const auto& r : reports) {
    t.columns.push_back(r.strategy);
    const Metrics& m = r.metrics;
    const std::optional<double> row[] = {m.ann_return, m.ann_vol,      m.sharpe,   m.max_drawdown,
                                         m.info_ratio, m.winning_days, m.turnover, m.cost_paid};
    for (std::size_t k = 0; k < t.metrics.size(); ++k) t.values[k].push_back(row[k]);
  }
  return t;
}

std::string comparison_tsv(const ComparisonTable& t) {
  std::ostringstream os;
  os << "metric";
  for (const auto& c : t.columns) os << '\t' << c;
  os << '\n';
  for (std::size_t k = 0; k < t.metrics.size(); ++k) {
    os << t.metrics[k];
    for (const auto& v : t.values[k]) os << '\t' << (v ? format_double(*v) : std::string("NA"));
    os << '\n';
  }
  return os.str();
}

std::string comparison_json(const ComparisonTable& t) {
  ordered_json j;
  j["columns"] = t.columns;
  ordered_json rows = ordered_json::object();
  for (std::size_t k = 0; k < t.metrics.size(); ++k) {
    ordered_json vals = ordered_json::array();
    for (const auto& v : t.values[k]) vals.push_back(optional_json(v));
    rows[t.metrics[k]] = std::move(vals);
  }
  j["metrics"] = std::move(rows);
  return j.dump(2) + "\n";
}

}  // namespace dynalloc::backtest
