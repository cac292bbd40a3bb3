#include <cmath>
#include <random>

#include "doctest.h"
#include "dynalloc/backtest.hpp"
#include "dynalloc/error.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace dynalloc;
using namespace dynalloc::backtest;

namespace {

BacktestOptions opts(double mu) {
  BacktestOptions o;
  o.mu_cost = mu;
  return o;
}

// Independent re-simulation of a fixed-target strategy rebalanced every
// `interval` periods, starting from cash. Costs come out of the period's
// gross growth: W' = W (A.y - mu |A - H|).
Vector naive_equity(const market::PriceTable& p, const Vector& target, std::size_t interval, double mu) {
  const std::size_t N = p.assets();
  Vector value(N, 0.0);
  Vector eq{1.0};
  for (std::size_t t = 1; t < p.rows(); ++t) {
    const std::size_t k = t - 1;
    const double wealth = eq.back();
    Vector a(N);
    double tv = 0.0;
    const bool trade = k == 0 || (interval != kNeverRebalance && k % interval == 0);
    for (std::size_t i = 0; i < N; ++i) {
      a[i] = trade ? target[i] : value[i] / wealth;
      tv += std::abs(a[i] - value[i] / wealth);
    }
    double gross = 0.0;
    for (std::size_t i = 0; i < N; ++i) gross += a[i] * p.close(t, i) / p.close(t - 1, i);
    const double next = wealth * (gross - mu * tv);
    for (std::size_t i = 0; i < N; ++i) value[i] = next * a[i] * (p.close(t, i) / p.close(t - 1, i)) / gross;
    eq.push_back(next);
  }
  return eq;
}

}  // namespace

TEST_CASE("strategy factories") {
  const auto ew = equal_weight_strategy(4);
  CHECK(ew.fixed_weights == WeightVector({0.25, 0.25, 0.25, 0.25}));
  CHECK(equal_weight_strategy(1).fixed_weights == WeightVector({1.0}));
  CHECK(buy_and_hold_strategy(WeightVector({1, 0})).rebalance_interval == kNeverRebalance);
  CHECK(parse_kind("drl_ppo") == StrategyKind::drl_ppo);
  CHECK(kind_name(StrategyKind::mean_variance) == "mean_variance");
  CHECK_THROWS_AS(parse_kind("momentum"), Error);

  StrategyRef missing;
  missing.kind = StrategyKind::sharpe_policy;
  CHECK_THROWS_WITH_AS(missing.validate(2), doctest::Contains("strategy checkpoint missing"), Error);
}

TEST_CASE("mean_variance on a dominant asset puts most weight on it") {
  std::mt19937_64 rng(3);
  Matrix m = testing::random_matrix(300, 3, rng, -0.01, 0.01);
  for (std::size_t t = 0; t < 300; ++t) m(t, 0) += 0.003;
  const auto s = mean_variance_strategy(testing::make_returns(m), 5000, 1);
  CHECK(s.fixed_weights[0] >= 0.8);
}

TEST_CASE("compute_metrics examples") {
  Vector eq(253);
  for (std::size_t t = 0; t < eq.size(); ++t) eq[t] = std::pow(1.001, static_cast<double>(t));
  const Metrics m = compute_metrics(eq, eq);
  CHECK(std::abs(m.ann_return - (std::pow(1.001, 252) - 1.0)) <= 1e-9);
  CHECK(std::abs(m.ann_return - 0.286434) <= 1e-6);
  CHECK(m.ann_vol == 0.0);
  CHECK_FALSE(m.sharpe.has_value());
  CHECK_FALSE(m.info_ratio.has_value());
  CHECK(m.winning_days == 1.0);

  const Vector dd{1, 1.1, 0.99, 1.2};
  CHECK(std::abs(compute_metrics(dd, dd).max_drawdown - 0.1) <= 1e-12);
  CHECK_THROWS_AS(compute_metrics(Vector{1.0}, Vector{1.0}), Error);
  CHECK_THROWS_AS(compute_metrics(Vector{1.0, 0.0}, Vector{1.0, 1.0}), Error);
}

TEST_CASE("compute_metrics matches direct formulas") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0005, 0.01);
  for (int trial = 0; trial < 20; ++trial) {
    Vector eq{1.0}, bench{1.0};
    for (int t = 0; t < 100; ++t) {
      eq.push_back(eq.back() * (1 + g(rng)));
      bench.push_back(bench.back() * (1 + g(rng)));
    }
    const Metrics m = compute_metrics(eq, bench, 252);
    Vector q, a;
    for (std::size_t t = 1; t < eq.size(); ++t) {
      q.push_back(eq[t] / eq[t - 1] - 1);
      a.push_back(q.back() - (bench[t] / bench[t - 1] - 1));
    }
    auto std_of = [](const Vector& v) {
      double mu = 0;
      for (double x : v) mu += x / static_cast<double>(v.size());
      double s = 0;
      for (double x : v) s += (x - mu) * (x - mu);
      return std::pair{mu, std::sqrt(s / static_cast<double>(v.size() - 1))};
    };
    const auto [mq, sq] = std_of(q);
    const auto [ma, sa] = std_of(a);
    (void)mq;
    CHECK(testing::rel_err(m.ann_return, std::pow(eq.back(), 252.0 / 100.0) - 1) <= 1e-12);
    CHECK(testing::rel_err(m.ann_vol, sq * std::sqrt(252.0)) <= 1e-12);
    REQUIRE(m.sharpe);
    CHECK(testing::rel_err(*m.sharpe, m.ann_return / m.ann_vol) <= 1e-12);
    REQUIRE(m.info_ratio);
    CHECK(testing::rel_err(*m.info_ratio, ma / sa * std::sqrt(252.0)) <= 1e-12);
    double peak = 0, mdd = 0;
    for (double e : eq) {
      peak = std::max(peak, e);
      mdd = std::max(mdd, (peak - e) / peak);
    }
    CHECK(std::abs(m.max_drawdown - mdd) <= 1e-12);
  }
}

TEST_CASE("run_strategy examples") {
  market::PriceTable p = testing::prices_from_returns(Matrix(3, 2, 0.0));
  p.close(3, 0) = 110.0;
  p.close(3, 1) = 110.0;
  const auto r = run_strategy(equal_weight_strategy(2), p, opts(0.0));
  CHECK(r.equity.back() == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(r.equity.size() == 4);

  std::mt19937_64 rng(9);
  const market::PriceTable q = testing::prices_from_returns(testing::random_matrix(60, 2, rng, -0.02, 0.02));
  const auto bh = run_strategy(buy_and_hold_strategy(WeightVector::one_hot(2, 0)), q, opts(0.0));
  for (std::size_t t = 0; t < q.rows(); ++t) CHECK(std::abs(bh.equity[t] - q.close(t, 0) / 100.0) <= 1e-12);
}

TEST_CASE("simulation matches a naive re-simulation") {
  std::mt19937_64 rng(17);
  for (std::size_t interval : {std::size_t{1}, std::size_t{5}, kNeverRebalance}) {
    const market::PriceTable p = testing::prices_from_returns(testing::random_matrix(80, 3, rng, -0.03, 0.03));
    StrategyRef s = equal_weight_strategy(3, interval);
    s.fixed_weights = WeightVector({0.5, 0.3, 0.2});
    const Simulation sim = simulate(s, p, opts(0.003));
    const Vector oracle = naive_equity(p, s.fixed_weights.values(), interval, 0.003);
    REQUIRE(sim.equity.size() == oracle.size());
    for (std::size_t t = 0; t < oracle.size(); ++t) CHECK(testing::rel_err(sim.equity[t], oracle[t]) <= 1e-12);
    for (const auto& w : sim.targets) CHECK(on_simplex(w.span()));
  }
}

TEST_CASE("buy and hold pays cost only on the initial purchase") {
  std::mt19937_64 rng(1);
  const market::PriceTable p = testing::prices_from_returns(testing::random_matrix(50, 2, rng, -0.02, 0.02));
  const auto s = buy_and_hold_strategy(WeightVector({0.6, 0.4}));
  const Simulation free = simulate(s, p, opts(0.0));
  const Simulation paid = simulate(s, p, opts(0.01));
  CHECK(paid.cost_paid == doctest::Approx(0.01));
  CHECK(testing::rel_err(paid.equity[1], free.equity[1] - 0.01) <= 1e-12);
  for (std::size_t t = 1; t < free.equity.size(); ++t) {
    CHECK(testing::rel_err(paid.equity[t] / paid.equity[1], free.equity[t] / free.equity[1]) <= 1e-12);
  }
}

TEST_CASE("equal weight with daily rebalancing compounds mean returns") {
  std::mt19937_64 rng(4);
  const Matrix r = testing::random_matrix(40, 4, rng, -0.02, 0.02);
  const market::PriceTable p = testing::prices_from_returns(r);
  const Simulation sim = simulate(equal_weight_strategy(4), p, opts(0.0));
  double w = 1.0;
  for (std::size_t t = 0; t < r.rows(); ++t) {
    double m = 0;
    for (std::size_t i = 0; i < 4; ++i) m += r(t, i) / 4;
    w *= 1 + m;
    CHECK(testing::rel_err(sim.equity[t + 1], w) <= 1e-12);
  }
}

TEST_CASE("higher costs never raise terminal wealth") {
  std::mt19937_64 rng(6);
  for (int path = 0; path < 20; ++path) {
    const market::PriceTable p = testing::prices_from_returns(testing::random_matrix(30, 3, rng, -0.03, 0.03));
    StrategyRef s = equal_weight_strategy(3, 3);
    double prev = simulate(s, p, opts(0.0)).equity.back();
    for (double mu : {0.001, 0.01, 0.05, 0.1}) {
      const double cur = simulate(s, p, opts(mu)).equity.back();
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("report serialization and comparison") {
  std::mt19937_64 rng(2);
  const market::PriceTable p = testing::prices_from_returns(testing::random_matrix(30, 2, rng, -0.02, 0.02));
  const auto r = run_strategy(equal_weight_strategy(2), p, opts(0.001));
  const BacktestReport back = report_from_json(report_json(r));
  CHECK(back.strategy == "equal_weight");
  CHECK(back.equity == r.equity);
  CHECK(back.dates == r.dates);
  CHECK(back.metrics.ann_return == r.metrics.ann_return);
  CHECK_FALSE(back.metrics.info_ratio.has_value());

  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["metrics"]["info_ratio"].is_null());
  CHECK(j["equity"].size() == r.equity.size());

  const ComparisonTable one = compare_report({r});
  CHECK(one.columns.size() == 1);
  CHECK(one.metrics.size() == 8);
  const ComparisonTable two = compare_report({r, r});
  for (const auto& row : two.values) CHECK(row[0] == row[1]);
  CHECK(comparison_tsv(one).find("NA") != std::string::npos);
  CHECK(equity_tsv(r).rfind("date\twealth\n", 0) == 0);
}

TEST_CASE("drawdown bounds") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 0.05), g(0.8, 1.2);
  for (int trial = 0; trial < 50; ++trial) {
    Vector up{1.0}, any{1.0};
    for (int t = 0; t < 60; ++t) {
      up.push_back(up.back() * (1 + u(rng)));
      any.push_back(any.back() * g(rng));
    }
    CHECK(compute_metrics(up, up).max_drawdown == 0.0);
    const double dd = compute_metrics(any, up).max_drawdown;
    CHECK(dd >= 0.0);
    CHECK(dd < 1.0);
  }
}
