#include "dynalloc/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"
#include "dynalloc/kernels.hpp"
#include "json.hpp"

namespace dynalloc::analytics {

namespace {

void require_rows(const market::ReturnMatrix& r, std::size_t n) {
  if (r.rows() < n) {
    throw Error("need at least " + std::to_string(n) + " return rows, have " +
                std::to_string(r.rows()));
  }
}

CovMatrix sub_covariance(const CovMatrix& full, std::span<const std::size_t> cols) {
  CovMatrix out;
  out.cov = Matrix(cols.size(), cols.size());
  for (std::size_t a = 0; a < cols.size(); ++a) {
    out.tickers.push_back(full.tickers[cols[a]]);
    for (std::size_t b = 0; b < cols.size(); ++b) out.cov(a, b) = full.cov(cols[a], cols[b]);
  }
  return out;
}

ExpectedReturns sub_returns(const ExpectedReturns& full, std::span<const std::size_t> cols) {
  ExpectedReturns out;
  for (std::size_t c : cols) {
    out.tickers.push_back(full.tickers[c]);
    out.mu.push_back(full.mu[c]);
  }
  return out;
}

// Advances `idx` to the next k-combination of {0..n-1} in lexicographic order.
bool next_combination(std::vector<std::size_t>& idx, std::size_t n) {
  const std::size_t k = idx.size();
  for (std::size_t pos = k; pos-- > 0;) {
    if (idx[pos] < n - k + pos) {
      ++idx[pos];
      for (std::size_t j = pos + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

bool better(const FrontierPoint& a, const FrontierPoint& b) {
  if (a.sharpe != b.sharpe) return a.sharpe > b.sharpe;
  if (a.risk != b.risk) return a.risk < b.risk;
  return a.weights < b.weights;
}

}  // namespace

ExpectedReturns expected_returns(const market::ReturnMatrix& returns, int periods_per_year) {
  require_rows(returns, 2);
  if (periods_per_year <= 0) throw Error("periods_per_year must be positive");
  ExpectedReturns out{returns.tickers, Vector(returns.assets(), 0.0)};
  for (std::size_t t = 0; t < returns.rows(); ++t) {
    kernels::axpy(out.mu, 1.0, returns.returns.row(t));
  }
  const double scale = static_cast<double>(periods_per_year) / static_cast<double>(returns.rows());
  for (double& m : out.mu) m *= scale;
  return out;
}

CovMatrix covariance(const market::ReturnMatrix& returns, int periods_per_year) {
  require_rows(returns, 2);
  if (periods_per_year <= 0) throw Error("periods_per_year must be positive");
  const std::size_t T = returns.rows();
  const std::size_t N = returns.assets();

  Vector mean(N, 0.0);
  for (std::size_t t = 0; t < T; ++t) kernels::axpy(mean, 1.0, returns.returns.row(t));
  for (double& m : mean) m /= static_cast<double>(T);

  CovMatrix out{returns.tickers, Matrix(N, N)};
  kernels::active().centered_crossprod(returns.returns.data(), T, N, mean.data(), out.cov.data());

  const double scale = static_cast<double>(periods_per_year) / static_cast<double>(T - 1);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i; j < N; ++j) {
      const double v = 0.5 * (out.cov(i, j) + out.cov(j, i)) * scale;
      out.cov(i, j) = v;
      out.cov(j, i) = v;
    }
  }
  return out;
}

double portfolio_return(const ExpectedReturns& mu, const WeightVector& w) {
  if (mu.mu.size() != w.size()) throw Error("dimension mismatch between weights and returns");
  return kernels::dot(w.span(), mu.mu);
}

double portfolio_risk(const CovMatrix& cov, const WeightVector& w) {
  if (cov.dim() != w.size() || cov.cov.cols() != w.size()) {
    throw Error("dimension mismatch between weights and covariance");
  }
  double var = kernels::active().quad_form(cov.cov.data(), w.values().data(), w.size());
  if (var < 0.0) {
    if (var < -1e-12) throw Error("negative portfolio variance: covariance is not PSD");
    var = 0.0;
  }
  return std::sqrt(var);
}

FrontierPoint evaluate(const ExpectedReturns& mu, const CovMatrix& cov, WeightVector w) {
  FrontierPoint p;
  p.risk = portfolio_risk(cov, w);
  p.ret = portfolio_return(mu, w);
  p.sharpe = p.risk > 0.0 ? p.ret / p.risk : 0.0;
  p.weights = std::move(w);
  return p;
}

std::vector<FrontierPoint> sample_frontier(const ExpectedReturns& mu, const CovMatrix& cov,
                                           std::size_t n_samples, std::uint64_t seed) {
  const std::size_t N = mu.mu.size();
  if (N < 2) throw Error("frontier needs at least 2 assets");
  if (n_samples == 0) throw Error("n_samples must be positive");
  if (cov.dim() != N) throw Error("dimension mismatch between returns and covariance");

  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> expo(1.0);
  std::vector<FrontierPoint> points;
  points.reserve(n_samples);
  Vector draw(N);
  for (std::size_t s = 0; s < n_samples; ++s) {
    double sum = 0.0;
    do {
      sum = 0.0;
      for (double& g : draw) {
        g = expo(rng);
        sum += g;
      }
    } while (!(sum > 0.0));
    Vector w(N);
    for (std::size_t i = 0; i < N; ++i) w[i] = draw[i] / sum;
    points.push_back(evaluate(mu, cov, WeightVector(std::move(w))));
  }
  return points;
}

FrontierPoint max_sharpe(const std::vector<FrontierPoint>& points) {
  if (points.empty()) throw Error("max_sharpe of an empty list");
  const FrontierPoint* best = nullptr;
  for (const auto& p : points) {
    if (!(p.risk > 0.0)) continue;
    if (!best || better(p, *best)) best = &p;
  }
  if (!best) throw ZeroVolatilityError("all frontier points have zero risk");
  return *best;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // acc * (n - k + i) is divisible by i at every step.
    const std::uint64_t factor = n - k + i;
    if (acc > kMax / factor) return kMax;
    acc = acc * factor / i;
  }
  return acc;
}

SubsetSelection select_best_subset(const market::ReturnMatrix& returns, std::size_t k,
                                   std::size_t n_samples, std::uint64_t seed,
                                   int periods_per_year) {
  const std::size_t N = returns.assets();
  if (k == 0) throw Error("subset size must be positive");
  if (k > N) throw Error("subset size " + std::to_string(k) + " exceeds universe size " +
                         std::to_string(N));
  if (binomial(N, k) > kMaxSubsets) {
    throw Error("C(" + std::to_string(N) + ", " + std::to_string(k) +
                ") exceeds the subset enumeration limit");
  }

  // Sub-universe moments are sub-blocks of the full-universe moments.
  const ExpectedReturns mu = expected_returns(returns, periods_per_year);
  const CovMatrix cov = covariance(returns, periods_per_year);

  SubsetSelection result;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  bool have_best = false;
  do {
    ++result.subsets_examined;
    const ExpectedReturns sub_mu = sub_returns(mu, idx);
    const CovMatrix sub_cov = sub_covariance(cov, idx);
    FrontierPoint best;
    if (k == 1) {
      best = evaluate(sub_mu, sub_cov, WeightVector::one_hot(1, 0));
      if (!(best.risk > 0.0)) continue;
    } else {
      try {
        best = max_sharpe(sample_frontier(sub_mu, sub_cov, n_samples, seed));
      } catch (const ZeroVolatilityError&) {
        continue;
      }
    }
    if (!have_best || best.sharpe > result.best.sharpe) {
      result.best = std::move(best);
      result.columns = idx;
      have_best = true;
    }
  } while (next_combination(idx, N));

  if (!have_best) throw ZeroVolatilityError("every subset has zero risk");
  for (std::size_t c : result.columns) result.tickers.push_back(returns.tickers[c]);
  return result;
}

AllocationPlan discrete_allocation(const WeightVector& w, const Vector& latest_prices,
                                   double budget, const std::vector<std::string>& tickers) {
  const std::size_t N = w.size();
  if (latest_prices.size() != N) throw Error("dimension mismatch between weights and prices");
  if (!tickers.empty() && tickers.size() != N) throw Error("dimension mismatch between weights and tickers");
  if (!(budget > 0.0) || !std::isfinite(budget)) throw Error("budget must be positive");
  for (double p : latest_prices) {
    if (!(p > 0.0) || !std::isfinite(p)) throw Error("prices must be positive");
  }

  AllocationPlan plan;
  plan.budget = budget;
  plan.tickers = tickers;
  if (plan.tickers.empty()) {
    for (std::size_t i = 0; i < N; ++i) plan.tickers.push_back("asset_" + std::to_string(i + 1));
  }
  plan.shares.assign(N, 0);
  double spent = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    plan.shares[i] = static_cast<long long>(std::floor(w[i] * budget / latest_prices[i]));
    spent += static_cast<double>(plan.shares[i]) * latest_prices[i];
  }

  while (true) {
    const double remaining = budget - spent;
    std::size_t pick = N;
    double best_deficit = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (latest_prices[i] > remaining) continue;
      const double deficit = w[i] * budget - static_cast<double>(plan.shares[i]) * latest_prices[i];
      if (pick == N || deficit > best_deficit) {
        pick = i;
        best_deficit = deficit;
      }
    }
    if (pick == N) break;
    ++plan.shares[pick];
    spent += latest_prices[pick];
  }

  // Recompute from the final counts so the identity holds without drift.
  spent = 0.0;
  for (std::size_t i = 0; i < N; ++i) spent += static_cast<double>(plan.shares[i]) * latest_prices[i];
  plan.leftover = budget - spent;
  if (plan.leftover < 0.0) plan.leftover = 0.0;
  return plan;
}

std::string frontier_tsv(const std::vector<FrontierPoint>& points) {
  std::ostringstream os;
  os << "risk\treturn\tsharpe";
  const std::size_t N = points.empty() ? 0 : points.front().weights.size();
  for (std::size_t i = 0; i < N; ++i) os << "\tw_" << (i + 1);
  os << '\n';
  for (const auto& p : points) {
    os << format_double(p.risk) << '\t' << format_double(p.ret) << '\t' << format_double(p.sharpe);
    for (double v : p.weights) os << '\t' << format_double(v);
    os << '\n';
  }
  return os.str();
}

std::string allocation_json(const AllocationPlan& plan) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < plan.tickers.size(); ++i) j[plan.tickers[i]] = plan.shares[i];
  j["leftover"] = plan.leftover;
  return j.dump(2) + "\n";
}

}  // namespace dynalloc::analytics
