#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "dynalloc/analytics.hpp"
#include "dynalloc/error.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace dynalloc;
using namespace dynalloc::analytics;

namespace {

market::ReturnMatrix columns(std::initializer_list<Vector> cols) {
  const std::size_t n = cols.begin()->size();
  Matrix m(n, cols.size());
  std::size_t c = 0;
  for (const Vector& col : cols) {
    for (std::size_t t = 0; t < n; ++t) m(t, c) = col[t];
    ++c;
  }
  return testing::make_returns(std::move(m));
}

ExpectedReturns mu_of(Vector mu) {
  ExpectedReturns out;
  for (std::size_t i = 0; i < mu.size(); ++i) out.tickers.push_back("A" + std::to_string(i));
  out.mu = std::move(mu);
  return out;
}

CovMatrix cov_of(Matrix s) {
  CovMatrix out;
  for (std::size_t i = 0; i < s.rows(); ++i) out.tickers.push_back("A" + std::to_string(i));
  out.cov = std::move(s);
  return out;
}

Matrix diag(Vector d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

FrontierPoint point(double risk, double sharpe, Vector w) {
  FrontierPoint p;
  p.risk = risk;
  p.sharpe = sharpe;
  p.ret = risk * sharpe;
  p.weights = WeightVector(std::move(w));
  return p;
}

// Textbook covariance entry by entry, mean recomputed per pair.
double brute_cov(const Matrix& r, std::size_t i, std::size_t j) {
  const double n = static_cast<double>(r.rows());
  double mi = 0, mj = 0;
  for (std::size_t t = 0; t < r.rows(); ++t) {
    mi += r(t, i);
    mj += r(t, j);
  }
  mi /= n;
  mj /= n;
  double s = 0;
  for (std::size_t t = 0; t < r.rows(); ++t) s += (r(t, i) - mi) * (r(t, j) - mj);
  return s / (n - 1.0);
}

}  // namespace

TEST_CASE("expected_returns examples") {
  CHECK(expected_returns(columns({Vector(10, 0.001)})).mu[0] == doctest::Approx(0.252).epsilon(1e-12));
  CHECK(std::abs(expected_returns(columns({{0.02, -0.02}})).mu[0]) <= 1e-15);
  CHECK(expected_returns(columns({{0.01, 0.03}})).mu[0] == doctest::Approx(5.04).epsilon(1e-12));
  CHECK(expected_returns(columns({{0.01, 0.03}}), 12).mu[0] == doctest::Approx(0.24).epsilon(1e-12));
}

TEST_CASE("covariance examples") {
  const CovMatrix z = covariance(columns({Vector(5, 0.01), Vector(5, -0.02)}));
  for (double v : z.cov.flat()) CHECK(std::abs(v) <= 1e-18);
  CHECK(covariance(columns({{0.01, -0.01}})).cov(0, 0) == doctest::Approx(0.0504).epsilon(1e-12));
  CHECK_THROWS_AS(covariance(columns({{0.01}})), Error);
}

TEST_CASE("covariance matches a brute-force oracle and is symmetric") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 6);
    const Matrix r = testing::random_matrix(30 + trial, n, rng, -0.05, 0.05);
    const CovMatrix c = covariance(testing::make_returns(r));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(c.cov(i, j) == c.cov(j, i));
        CHECK(testing::rel_err(c.cov(i, j), 252.0 * brute_cov(r, i, j)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("portfolio_return examples") {
  const auto mu = mu_of({0.1, 0.2});
  CHECK(portfolio_return(mu, WeightVector({1, 0})) == doctest::Approx(0.1));
  CHECK(portfolio_return(mu, WeightVector({0.5, 0.5})) == doctest::Approx(0.15));
  CHECK(portfolio_return(mu, WeightVector({0.3, 0.7})) == doctest::Approx(0.17));
}

TEST_CASE("portfolio_risk examples") {
  const auto cov = cov_of(diag({0.04, 0.09}));
  CHECK(portfolio_risk(cov, WeightVector({1, 0})) == doctest::Approx(0.2));
  CHECK(std::abs(portfolio_risk(cov, WeightVector({0.5, 0.5})) - 0.180278) <= 1e-6);
  Matrix full(2, 2, 0.09);
  CHECK(portfolio_risk(cov_of(full), WeightVector({0.5, 0.5})) == doctest::Approx(0.3));
  Matrix bad = diag({-1.0, -1.0});
  CHECK_THROWS_AS(portfolio_risk(cov_of(bad), WeightVector({0.5, 0.5})), Error);
}

TEST_CASE("quad form risk matches a triple-loop oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 9);
    const Matrix r = testing::random_matrix(40, n, rng, -0.03, 0.03);
    const CovMatrix c = covariance(testing::make_returns(r));
    Vector raw(n);
    for (double& v : raw) v = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    const WeightVector w = WeightVector::normalized(raw);
    double q = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) q += w[i] * c.cov(i, j) * w[j];
    CHECK(testing::rel_err(portfolio_risk(c, w), std::sqrt(q)) <= 1e-12);
  }
}

TEST_CASE("sample_frontier shape, determinism and symmetry") {
  const auto mu = mu_of({0.1, 0.05});
  const auto cov = cov_of(diag({0.01, 0.04}));
  const auto one = sample_frontier(mu, cov, 1, 123);
  REQUIRE(one.size() == 1);
  CHECK(on_simplex(one[0].weights.span()));
  CHECK(sample_frontier(mu, cov, 50, 9).back().weights == sample_frontier(mu, cov, 50, 9).back().weights);

  Matrix same(2, 2, 0.04);
  const auto pts = sample_frontier(mu_of({0.1, 0.1}), cov_of(same), 100, 1);
  for (const auto& p : pts) {
    CHECK(p.risk == doctest::Approx(pts[0].risk).epsilon(1e-12));
    CHECK(p.ret == doctest::Approx(pts[0].ret).epsilon(1e-12));
  }
}

TEST_CASE("sampled max Sharpe approaches the grid optimum") {
  const auto mu = mu_of({0.10, 0.05});
  const auto cov = cov_of(diag({0.01, 0.04}));
  double grid_best = -1e300;
  for (int k = 0; k <= 1000; ++k) {
    const double w1 = k / 1000.0;
    const double r = w1 * 0.10 + (1 - w1) * 0.05;
    const double s = std::sqrt(w1 * w1 * 0.01 + (1 - w1) * (1 - w1) * 0.04);
    grid_best = std::max(grid_best, r / s);
  }
  const FrontierPoint best = max_sharpe(sample_frontier(mu, cov, 10000, 42));
  CHECK(std::abs(best.sharpe - grid_best) <= 0.05);
  CHECK(best.sharpe <= grid_best + 1e-3);
}

TEST_CASE("max_sharpe examples and tie-breaking") {
  const auto a = point(0.1, 1.0, {1, 0});
  CHECK(max_sharpe({a}).weights == a.weights);
  CHECK(max_sharpe({a, point(0.1, 2.0, {0, 1})}).sharpe == 2.0);
  CHECK(max_sharpe({point(0.2, 1.0, {1, 0}), point(0.1, 1.0, {0, 1})}).risk == 0.1);
  CHECK(max_sharpe({point(0.1, 1.0, {0, 1}), point(0.1, 1.0, {1, 0})}).weights == WeightVector({0, 1}));
  CHECK_THROWS_AS(max_sharpe({}), Error);
  CHECK_THROWS_AS(max_sharpe({point(0.0, 0.0, {1, 0})}), Error);
}

TEST_CASE("max_sharpe is invariant to the order of points") {
  const auto pts = sample_frontier(mu_of({0.1, 0.07, 0.03}), cov_of(diag({0.02, 0.03, 0.01})), 300, 5);
  const FrontierPoint ref = max_sharpe(pts);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    auto shuffled = pts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(max_sharpe(shuffled).weights == ref.weights);
  }
}

TEST_CASE("binomial counts") {
  CHECK(binomial(15, 5) == 3003);
  CHECK(binomial(5, 5) == 1);
  CHECK(binomial(5, 0) == 1);
  CHECK(binomial(3, 4) == 0);
  CHECK(binomial(60, 30) == 118264581564861424ULL);
  CHECK(binomial(200, 100) == UINT64_MAX);
}

TEST_CASE("select_best_subset examples") {
  std::mt19937_64 rng(17);
  const auto fifteen = testing::make_returns(testing::random_matrix(40, 15, rng, -0.02, 0.02));
  CHECK(select_best_subset(fifteen, 5, 10, 1).subsets_examined == 3003);

  const auto three = testing::make_returns(testing::random_matrix(40, 3, rng, -0.02, 0.02));
  const auto all = select_best_subset(three, 3, 50, 1);
  CHECK(all.subsets_examined == 1);
  CHECK(all.tickers == three.tickers);

  // Dominant asset: high drift, every asset has the same noise level.
  Matrix m = testing::random_matrix(200, 3, rng, -0.01, 0.01);
  for (std::size_t t = 0; t < 200; ++t) m(t, 0) += 0.5 / 252.0;
  const auto pick = select_best_subset(testing::make_returns(m), 1, 10, 3);
  CHECK(pick.columns == std::vector<std::size_t>{0});
  CHECK_THROWS_AS(select_best_subset(three, 4, 10, 1), Error);
  CHECK_THROWS_AS(select_best_subset(three, 0, 10, 1), Error);
}

TEST_CASE("discrete_allocation examples") {
  const auto exact = discrete_allocation(WeightVector({1.0}), {10.0}, 100.0);
  CHECK(exact.shares == std::vector<long long>{10});
  CHECK(exact.leftover == doctest::Approx(0.0));
  const auto two = discrete_allocation(WeightVector({0.5, 0.5}), {50.0, 30.0}, 100.0);
  CHECK(two.shares == std::vector<long long>{1, 1});
  CHECK(two.leftover == doctest::Approx(20.0));
  CHECK_THROWS_AS(discrete_allocation(WeightVector({1.0}), {0.0}, 100.0), Error);
  CHECK_THROWS_AS(discrete_allocation(WeightVector({1.0}), {10.0}, -1.0), Error);
}

TEST_CASE("discrete_allocation conserves the budget on random instances") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> price(1.0, 500.0), budget(0.0, 20000.0), raw(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 8);
    Vector w(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = raw(rng) + 1e-3;
      p[i] = price(rng);
    }
    const double b = budget(rng);
    const auto plan = discrete_allocation(WeightVector::normalized(w), p, b);
    double spent = 0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(plan.shares[i] >= 0);
      spent += static_cast<double>(plan.shares[i]) * p[i];
    }
    CHECK(plan.leftover >= -1e-9 * std::max(1.0, b));
    CHECK(std::abs(spent + plan.leftover - b) <= 1e-9 * std::max(1.0, b));
    // Greedy stops only when nothing else fits.
    for (std::size_t i = 0; i < n; ++i) CHECK(p[i] > plan.leftover - 1e-9 * std::max(1.0, b));
  }
}

TEST_CASE("floor stage is monotone in the budget") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> price(1.0, 100.0), raw(0.0, 1.0), budget(0.0, 5000.0);
  for (int trial = 0; trial < 200; ++trial) {
    Vector w{raw(rng) + 0.01, raw(rng) + 0.01, raw(rng) + 0.01};
    const WeightVector wv = WeightVector::normalized(w);
    const Vector p{price(rng), price(rng), price(rng)};
    const double lo = budget(rng);
    const double hi = lo + budget(rng);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::floor(wv[i] * lo / p[i]) <= std::floor(wv[i] * hi / p[i]));
    }
    // Spending can only grow by at most the extra cash plus one share.
    const auto a = discrete_allocation(wv, p, lo);
    const auto b = discrete_allocation(wv, p, hi);
    CHECK(b.budget - b.leftover >= a.budget - a.leftover - *std::max_element(p.begin(), p.end()));
  }
}

TEST_CASE("greedy top-up can reduce a holding when the budget grows") {
  // A larger budget makes the pricier asset affordable, which then wins the
  // deficit comparison and changes the greedy path.
  const WeightVector w({0.5, 0.5});
  const auto small = discrete_allocation(w, {60.0, 45.0}, 100.0);
  const auto large = discrete_allocation(w, {60.0, 45.0}, 110.0);
  CHECK(small.shares == std::vector<long long>{0, 2});
  CHECK(large.shares == std::vector<long long>{1, 1});
}

TEST_CASE("frontier_tsv and allocation_json layout") {
  const auto pts = sample_frontier(mu_of({0.1, 0.05}), cov_of(diag({0.01, 0.04})), 3, 1);
  const std::string tsv = frontier_tsv(pts);
  CHECK(tsv.rfind("risk\treturn\tsharpe\tw_1\tw_2\n", 0) == 0);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 4);

  const auto plan = discrete_allocation(WeightVector({0.5, 0.5}), {50.0, 30.0}, 100.0, {"AAPL", "MSFT"});
  const auto j = nlohmann::json::parse(allocation_json(plan));
  CHECK(j["AAPL"] == 1);
  CHECK(j["MSFT"] == 1);
  CHECK(j["leftover"].get<double>() == doctest::Approx(20.0));
}

TEST_CASE("every frontier point satisfies sharpe * risk = return") {
  std::mt19937_64 rng(30);
  const auto r = testing::make_returns(testing::random_matrix(80, 5, rng, -0.02, 0.03));
  for (const auto& p : sample_frontier(expected_returns(r), covariance(r), 2000, 4)) {
    CHECK(on_simplex(p.weights.span()));
    CHECK(std::abs(p.sharpe * p.risk - p.ret) <= 1e-9);
  }
}
