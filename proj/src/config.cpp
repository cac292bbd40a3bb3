#include "dynalloc/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "dynalloc/backtest.hpp"
#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"

namespace dynalloc {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    std::size_t comma = v.find(',', start);
    if (comma == std::string_view::npos) comma = v.size();
    const auto item = trim(v.substr(start, comma - start));
    if (!item.empty()) out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error("invalid value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw Error("invalid value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("invalid value for " + std::string(key) + ": '" + std::string(v) + "'");
}

std::vector<std::size_t> to_sizes(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(v)) out.push_back(to_int<std::size_t>(key, item));
  return out;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += format_double(xs[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += xs[i];
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

struct Field {
  std::string_view key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DYNALLOC_DOUBLE(name, member)                                                       \
  Field{name, [](RunConfig& c, std::string_view v) { c.member = to_double(name, v); },     \
        [](const RunConfig& c) { return format_double(c.member); }}
#define DYNALLOC_SIZE(name, member)                                                         \
  Field{name,                                                                               \
        [](RunConfig& c, std::string_view v) { c.member = to_int<std::size_t>(name, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"data", [](RunConfig& c, std::string_view v) { c.data = std::string(v); },
            [](const RunConfig& c) { return c.data.string(); }},
      Field{"tickers", [](RunConfig& c, std::string_view v) { c.tickers = split_list(v); },
            [](const RunConfig& c) { return join(c.tickers); }},
      DYNALLOC_DOUBLE("train_frac", split.train_frac),
      DYNALLOC_DOUBLE("val_frac", split.val_frac),
      Field{"periods_per_year",
            [](RunConfig& c, std::string_view v) { c.periods_per_year = to_int<int>("periods_per_year", v); },
            [](const RunConfig& c) { return std::to_string(c.periods_per_year); }},
      Field{"seed", [](RunConfig& c, std::string_view v) { c.seed = to_int<std::uint64_t>("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"out", [](RunConfig& c, std::string_view v) { c.out = std::string(v); },
            [](const RunConfig& c) { return c.out.string(); }},
      DYNALLOC_SIZE("frontier_samples", frontier_samples),
      DYNALLOC_SIZE("subset_k", subset_k),
      DYNALLOC_SIZE("subset_samples", subset_samples),
      Field{"budget",
            [](RunConfig& c, std::string_view v) {
              if (v.empty()) {
                c.budget.reset();
              } else {
                c.budget = to_double("budget", v);
              }
            },
            [](const RunConfig& c) { return c.budget ? format_double(*c.budget) : std::string(); }},
      DYNALLOC_SIZE("rolling_window", rolling_window),
      DYNALLOC_SIZE("seasonal_period", seasonal_period),
      DYNALLOC_DOUBLE("mu_cost", env.mu_cost),
      DYNALLOC_SIZE("lookback", env.lookback),
      DYNALLOC_SIZE("episode_len", env.episode_len),
      DYNALLOC_DOUBLE("initial_wealth", env.initial_wealth),
      DYNALLOC_SIZE("action_interval", env.action_interval),
      DYNALLOC_SIZE("rebalance_interval", rebalance_interval),
      Field{"strategies", [](RunConfig& c, std::string_view v) { c.strategies = split_list(v); },
            [](const RunConfig& c) { return join(c.strategies); }},
      DYNALLOC_DOUBLE("sharpe_alpha", sharpe.alpha),
      Field{"sharpe_alpha_grid",
            [](RunConfig& c, std::string_view v) {
              c.sharpe_alpha_grid.clear();
              for (const auto& item : split_list(v)) {
                c.sharpe_alpha_grid.push_back(to_double("sharpe_alpha_grid", item));
              }
            },
            [](const RunConfig& c) { return join(c.sharpe_alpha_grid); }},
      DYNALLOC_SIZE("sharpe_epochs", sharpe.epochs),
      DYNALLOC_SIZE("sharpe_period", sharpe.period),
      Field{"sharpe_hidden",
            [](RunConfig& c, std::string_view v) { c.sharpe.hidden = to_sizes("sharpe_hidden", v); },
            [](const RunConfig& c) { return join(c.sharpe.hidden); }},
      DYNALLOC_DOUBLE("sharpe_l1", sharpe.l1),
      DYNALLOC_DOUBLE("sharpe_l2", sharpe.l2),
      DYNALLOC_DOUBLE("sharpe_eps_vol", sharpe.eps_vol),
      Field{"sharpe_adam",
            [](RunConfig& c, std::string_view v) { c.sharpe.use_adam = to_bool("sharpe_adam", v); },
            [](const RunConfig& c) { return std::string(c.sharpe.use_adam ? "true" : "false"); }},
      DYNALLOC_SIZE("ppo_iterations", ppo.iterations),
      DYNALLOC_SIZE("ppo_episodes", ppo.episodes_per_iteration),
      DYNALLOC_DOUBLE("ppo_clip", ppo.clip_eps),
      DYNALLOC_DOUBLE("ppo_gamma", ppo.gamma),
      DYNALLOC_DOUBLE("ppo_lambda", ppo.lam),
      DYNALLOC_SIZE("ppo_epochs", ppo.update_epochs),
      DYNALLOC_SIZE("ppo_minibatch", ppo.minibatch),
      DYNALLOC_DOUBLE("ppo_lr", ppo.actor_lr),
      DYNALLOC_DOUBLE("ppo_critic_lr", ppo.critic_lr),
      DYNALLOC_DOUBLE("ppo_grad_clip", ppo.max_grad_norm),
      Field{"ppo_hidden",
            [](RunConfig& c, std::string_view v) { c.ppo.hidden = to_sizes("ppo_hidden", v); },
            [](const RunConfig& c) { return join(c.ppo.hidden); }},
  };
  return table;
}

#undef DYNALLOC_DOUBLE
#undef DYNALLOC_SIZE

}  // namespace

const std::vector<std::string_view>& config_keys() {
  static const std::vector<std::string_view> keys = [] {
    std::vector<std::string_view> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  throw Error("unknown config key '" + std::string(key) + "'");
}

std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    ++line_no;
    std::string_view line = text.substr(start, nl - start);
    start = nl + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

void RunConfig::validate() const {
  if (data.empty()) throw Error("missing required key: data");
  if (tickers.empty()) throw Error("missing required key: tickers");
  if (!std::filesystem::exists(data)) throw Error("data: file not found: " + data.string());
  {
    std::set<std::string> seen;
    for (const auto& t : tickers) {
      if (!seen.insert(t).second) throw Error("tickers: duplicate ticker " + t);
    }
  }
  split.validate();
  if (periods_per_year <= 0) throw Error("periods_per_year must be positive");
  if (frontier_samples == 0) throw Error("frontier_samples must be positive");
  if (subset_k > tickers.size()) throw Error("subset_k exceeds the number of tickers");
  if (subset_samples == 0) throw Error("subset_samples must be positive");
  if (budget && !(*budget > 0.0)) throw Error("budget must be positive");
  if (rolling_window < 2) throw Error("rolling_window must be at least 2");
  if (seasonal_period == 1) throw Error("seasonal_period must be 0 (off) or at least 2");
  env.validate();
  if (rebalance_interval < 1) throw Error("rebalance_interval must be at least 1");
  for (const auto& s : strategies) backtest::parse_kind(s);
  sharpe.validate();
  for (double a : sharpe_alpha_grid) {
    if (!(a > 0.0)) throw Error("sharpe_alpha_grid entries must be positive");
  }
  ppo.validate();
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << " = " << f.get(*this) << '\n';
  return os.str();
}

RunConfig validate_config(std::string_view file_text,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  for (const auto& [k, v] : parse_key_values(file_text)) apply_setting(cfg, k, v);
  for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dynalloc
