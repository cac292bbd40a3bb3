#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dynalloc/analytics.hpp"
#include "dynalloc/backtest.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"
#include "dynalloc/market_data.hpp"
#include "dynalloc/ppo.hpp"
#include "dynalloc/sharpe_trainer.hpp"
#include "json.hpp"

namespace dynalloc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing upstream artifact: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string matrix_tsv(const std::vector<std::string>& header, const std::vector<std::string>& row_labels,
                       const Matrix& m, std::string_view label_name) {
  std::ostringstream os;
  os << label_name;
  for (const auto& h : header) os << '\t' << h;
  os << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    os << row_labels[r];
    for (std::size_t c = 0; c < m.cols(); ++c) os << '\t' << format_double(m(r, c));
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> date_labels(const std::vector<market::Date>& dates) {
  std::vector<std::string> out;
  for (const auto& d : dates) out.push_back(market::format_date(d));
  return out;
}

// Loaded, cleaned and split data shared by every command.
struct Pipeline {
  market::PriceTable prices;
  market::ReturnMatrix returns;
  market::SplitSizes sizes{};
  market::Split split;

  // Price rows covering return rows [first, first + count), plus `history`
  // earlier rows.
  market::PriceTable price_segment(std::size_t first, std::size_t count, std::size_t history) const {
    if (history > first) throw Error("not enough history before the segment for the strategy warmup");
    return prices.slice(first - history, count + 1 + history);
  }
};

Pipeline load(const RunConfig& cfg) {
  Pipeline p;
  p.prices = market::clean(market::load_prices(cfg.data, cfg.tickers));
  p.returns = market::to_returns(p.prices);
  p.split = market::chrono_split(p.returns, cfg.split);
  p.sizes = market::split_sizes(p.returns.rows(), cfg.split);
  return p;
}

ordered_json point_json(const analytics::FrontierPoint& pt, const std::vector<std::string>& tickers) {
  ordered_json w = ordered_json::object();
  for (std::size_t i = 0; i < tickers.size(); ++i) w[tickers[i]] = pt.weights[i];
  return {{"risk", pt.risk}, {"return", pt.ret}, {"sharpe", pt.sharpe}, {"weights", w}};
}

void cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  const Pipeline p = load(cfg);
  write_file(cfg.out / "prices_clean.csv", market::to_csv(p.prices));
  write_file(cfg.out / "returns.tsv",
             matrix_tsv(p.returns.tickers, date_labels(p.returns.dates), p.returns.returns, "date"));

  if (cfg.rolling_window <= p.returns.rows()) {
    const auto stats = market::rolling_stats(p.returns, cfg.rolling_window);
    const auto end_dates = date_labels(std::vector<market::Date>(
        p.returns.dates.begin() + static_cast<std::ptrdiff_t>(cfg.rolling_window - 1), p.returns.dates.end()));
    write_file(cfg.out / "rolling_mean.tsv", matrix_tsv(p.returns.tickers, end_dates, stats.means, "date"));
    write_file(cfg.out / "rolling_std.tsv", matrix_tsv(p.returns.tickers, end_dates, stats.stds, "date"));
  }
  if (cfg.seasonal_period >= 2 && 2 * cfg.seasonal_period <= p.returns.rows()) {
    const auto adj = market::seasonal_adjust(p.returns, cfg.seasonal_period);
    write_file(cfg.out / "returns_seasonal.tsv",
               matrix_tsv(adj.tickers, date_labels(adj.dates), adj.returns, "date"));
  }

  auto seg = [](const market::ReturnMatrix& r) {
    return ordered_json{{"rows", r.rows()},
                        {"start", market::format_date(r.dates.front())},
                        {"end", market::format_date(r.dates.back())}};
  };
  ordered_json j{{"tickers", p.prices.tickers},
                 {"price_rows", p.prices.rows()},
                 {"return_rows", p.returns.rows()},
                 {"train", seg(p.split.train)},
                 {"validation", seg(p.split.validation)},
                 {"test", seg(p.split.test)}};
  write_file(cfg.out / "split.json", j.dump(2) + "\n");
  log << "ingest: " << p.prices.rows() << " price rows, " << p.prices.assets() << " tickers; split "
      << p.sizes.train << "/" << p.sizes.validation << "/" << p.sizes.test << "\n";
}

void cmd_frontier(const RunConfig& cfg, std::ostream& log) {
  const Pipeline p = load(cfg);
  const auto mu = analytics::expected_returns(p.split.train, cfg.periods_per_year);
  const auto cov = analytics::covariance(p.split.train, cfg.periods_per_year);
  const auto points =
      analytics::sample_frontier(mu, cov, cfg.frontier_samples, derive_seed(cfg.seed, "frontier"));
  const auto best = analytics::max_sharpe(points);
  write_file(cfg.out / "frontier.tsv", analytics::frontier_tsv(points));
  write_file(cfg.out / "covariance.tsv", matrix_tsv(cov.tickers, cov.tickers, cov.cov, "ticker"));
  ordered_json er = ordered_json::object();
  for (std::size_t i = 0; i < mu.tickers.size(); ++i) er[mu.tickers[i]] = mu.mu[i];
  ordered_json j{{"expected_returns", er}, {"max_sharpe", point_json(best, mu.tickers)}};
  write_file(cfg.out / "max_sharpe.json", j.dump(2) + "\n");
  log << "frontier: " << points.size() << " samples; max Sharpe " << best.sharpe << " at risk "
      << best.risk << ", return " << best.ret << "\n";
}

void cmd_select(const RunConfig& cfg, std::ostream& log) {
  if (cfg.subset_k == 0) throw Error("subset_k must be set (>= 1) for select");
  const Pipeline p = load(cfg);
  const auto sel = analytics::select_best_subset(p.split.train, cfg.subset_k, cfg.subset_samples,
                                                 derive_seed(cfg.seed, "select"), cfg.periods_per_year);
  ordered_json j{{"k", cfg.subset_k},
                 {"subsets_examined", sel.subsets_examined},
                 {"tickers", sel.tickers},
                 {"best", point_json(sel.best, sel.tickers)}};
  write_file(cfg.out / "selection.json", j.dump(2) + "\n");
  log << "select: examined " << sel.subsets_examined << " subsets; best {";
  for (std::size_t i = 0; i < sel.tickers.size(); ++i) log << (i ? ", " : "") << sel.tickers[i];
  log << "} Sharpe " << sel.best.sharpe << "\n";
}

void cmd_allocate(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.budget) throw Error("budget must be set for allocate");
  const Pipeline p = load(cfg);
  std::vector<std::size_t> cols(p.returns.assets());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
  if (fs::exists(cfg.out / "selection.json")) {
    const auto sel = nlohmann::json::parse(read_file(cfg.out / "selection.json"));
    cols.clear();
    for (const auto& t : sel.at("tickers")) {
      const auto it = std::find(p.returns.tickers.begin(), p.returns.tickers.end(), t.get<std::string>());
      if (it == p.returns.tickers.end()) throw Error("selection.json names unknown ticker " + t.get<std::string>());
      cols.push_back(static_cast<std::size_t>(it - p.returns.tickers.begin()));
    }
  }
  const auto train = p.split.train.select(cols);
  WeightVector w = WeightVector::uniform(1);
  if (cols.size() > 1) {
    const auto mu = analytics::expected_returns(train, cfg.periods_per_year);
    const auto cov = analytics::covariance(train, cfg.periods_per_year);
    w = analytics::max_sharpe(analytics::sample_frontier(mu, cov, cfg.frontier_samples,
                                                         derive_seed(cfg.seed, "allocate")))
            .weights;
  }
  // Prices at the close of the training segment.
  const std::size_t price_row = p.sizes.train;
  Vector latest;
  for (std::size_t c : cols) latest.push_back(p.prices.close(price_row, c));
  const auto plan = analytics::discrete_allocation(w, latest, *cfg.budget, train.tickers);
  write_file(cfg.out / "allocation.json", analytics::allocation_json(plan));
  log << "allocate: prices as of " << market::format_date(p.prices.dates[price_row]) << ";";
  for (std::size_t i = 0; i < plan.tickers.size(); ++i) log << " " << plan.tickers[i] << "=" << plan.shares[i];
  log << "; leftover " << plan.leftover << "\n";
}

double validation_sharpe(const sharpe::SharpePolicy& policy, const Pipeline& p, const RunConfig& cfg) {
  const auto seg = p.price_segment(p.sizes.train, p.sizes.validation, policy.lookback);
  backtest::BacktestOptions opts;
  opts.mu_cost = cfg.env.mu_cost;
  opts.periods_per_year = cfg.periods_per_year;
  const auto r = backtest::run_strategy(backtest::sharpe_policy_strategy(policy, cfg.rebalance_interval),
                                        seg, opts);
  return r.metrics.sharpe.value_or(0.0);
}

void cmd_train_sharpe(const RunConfig& cfg, std::ostream& log) {
  const Pipeline p = load(cfg);
  std::vector<double> grid = cfg.sharpe_alpha_grid;
  if (grid.empty()) grid.push_back(cfg.sharpe.alpha);
  const std::uint64_t seed = derive_seed(cfg.seed, "sharpe");

  std::optional<sharpe::TrainResult> best;
  double best_val = 0.0;
  double best_alpha = grid.front();
  ordered_json trials = ordered_json::array();
  for (double alpha : grid) {
    sharpe::SharpeTrainConfig tc = cfg.sharpe;
    tc.alpha = alpha;
    tc.lookback = cfg.env.lookback;
    auto result = sharpe::train(p.split.train, tc, seed);
    const double val = validation_sharpe(result.policy, p, cfg);
    trials.push_back({{"alpha", alpha}, {"train_sharpe", result.final_objective}, {"validation_sharpe", val}});
    log << "train-sharpe: alpha " << alpha << " epochs " << result.history.size() << " train L_T "
        << result.final_objective << " validation Sharpe " << val << "\n";
    if (!best || val > best_val) {
      best_val = val;
      best_alpha = alpha;
      best = std::move(result);
    }
  }
  sharpe::save(best->policy, cfg.out / "sharpe_policy.json");
  write_file(cfg.out / "sharpe_history.tsv", sharpe::history_tsv(best->history));
  write_file(cfg.out / "sharpe_validation.json",
             ordered_json{{"selected_alpha", best_alpha}, {"trials", trials}}.dump(2) + "\n");
}

void cmd_train_ppo(const RunConfig& cfg, std::ostream& log) {
  const Pipeline p = load(cfg);
  const auto data = rl::make_env_data(p.split.train, &p.prices);
  auto result = rl::train_ppo(data, cfg.env, cfg.ppo, derive_seed(cfg.seed, "ppo"));
  rl::save(result.policy, cfg.out / "ppo");
  write_file(cfg.out / "ppo_history.tsv", rl::history_tsv(result.history));
  if (!result.history.empty()) {
    log << "train-ppo: " << result.history.size() << " iterations; final mean episode reward "
        << result.history.back().mean_episode_reward << "\n";
  } else {
    log << "train-ppo: 0 iterations\n";
  }
}

backtest::StrategyRef make_strategy(std::string_view name, const RunConfig& cfg, const Pipeline& p) {
  using backtest::StrategyKind;
  switch (backtest::parse_kind(name)) {
    case StrategyKind::equal_weight:
      return backtest::equal_weight_strategy(p.prices.assets(), cfg.rebalance_interval);
    case StrategyKind::mean_variance:
      return backtest::mean_variance_strategy(p.split.train, cfg.frontier_samples,
                                              derive_seed(cfg.seed, "frontier"), cfg.periods_per_year,
                                              cfg.rebalance_interval);
    case StrategyKind::buy_and_hold:
      return backtest::buy_and_hold_strategy(WeightVector::uniform(p.prices.assets()));
    case StrategyKind::sharpe_policy: {
      const auto path = cfg.out / "sharpe_policy.json";
      if (!fs::exists(path)) throw Error("missing upstream artifact: " + path.string() + " (run train-sharpe)");
      return backtest::sharpe_policy_strategy(sharpe::load_sharpe_policy(path), cfg.rebalance_interval);
    }
    case StrategyKind::drl_ppo: {
      const auto dir = cfg.out / "ppo";
      if (!fs::exists(dir / "actor.json")) {
        throw Error("missing upstream artifact: " + (dir / "actor.json").string() + " (run train-ppo)");
      }
      return backtest::ppo_strategy(rl::load_ppo_policy(dir));
    }
  }
  throw Error("unknown strategy");
}

void cmd_backtest(const RunConfig& cfg, std::ostream& log) {
  const Pipeline p = load(cfg);
  std::vector<backtest::StrategyRef> strategies;
  std::size_t warmup = 0;
  for (const auto& name : cfg.strategies) {
    strategies.push_back(make_strategy(name, cfg, p));
    warmup = std::max(warmup, strategies.back().warmup());
  }
  const std::size_t test_first = p.sizes.train + p.sizes.validation;
  const auto seg = p.price_segment(test_first, p.sizes.test, warmup);
  backtest::BacktestOptions opts;
  opts.mu_cost = cfg.env.mu_cost;
  opts.initial_wealth = cfg.env.initial_wealth;
  opts.periods_per_year = cfg.periods_per_year;
  opts.start_row = warmup;
  opts.benchmark = backtest::equal_weight_strategy(p.prices.assets(), cfg.rebalance_interval);
  for (const auto& s : strategies) {
    const auto report = backtest::run_strategy(s, seg, opts);
    write_file(cfg.out / ("report_" + report.strategy + ".json"), backtest::report_json(report));
    write_file(cfg.out / ("equity_" + report.strategy + ".tsv"), backtest::equity_tsv(report));
    log << "backtest: " << report.strategy << " final wealth " << report.equity.back() << ", ann_return "
        << report.metrics.ann_return << ", sharpe "
        << (report.metrics.sharpe ? format_double(*report.metrics.sharpe) : std::string("NA")) << "\n";
  }
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
  std::vector<backtest::BacktestReport> reports;
  for (const auto& name : cfg.strategies) {
    reports.push_back(backtest::report_from_json(read_file(cfg.out / ("report_" + name + ".json"))));
  }
  if (reports.empty()) throw Error("no strategies to report");
  const auto table = backtest::compare_report(reports);
  const std::string tsv = backtest::comparison_tsv(table);
  write_file(cfg.out / "comparison.tsv", tsv);
  write_file(cfg.out / "comparison.json", backtest::comparison_json(table));
  log << tsv;
}

const std::map<std::string_view, std::function<void(const RunConfig&, std::ostream&)>>& table() {
  static const std::map<std::string_view, std::function<void(const RunConfig&, std::ostream&)>> t = {
      {"ingest", cmd_ingest},           {"frontier", cmd_frontier},   {"select", cmd_select},
      {"allocate", cmd_allocate},       {"train-sharpe", cmd_train_sharpe},
      {"train-ppo", cmd_train_ppo},     {"backtest", cmd_backtest},   {"report", cmd_report},
  };
  return t;
}

}  // namespace

const std::vector<std::string_view>& command_names() {
  static const std::vector<std::string_view> names = {"ingest",       "frontier",  "select",   "allocate",
                                                      "train-sharpe", "train-ppo", "backtest", "report"};
  return names;
}

void dispatch(std::string_view command, const RunConfig& cfg, std::ostream& log) {
  const auto it = table().find(command);
  if (it == table().end()) throw Error("unknown command '" + std::string(command) + "'");
  fs::create_directories(cfg.out);
  write_file(cfg.out / "resolved_config.txt", cfg.to_text());
  it->second(cfg, log);
}

}  // namespace dynalloc::cli
