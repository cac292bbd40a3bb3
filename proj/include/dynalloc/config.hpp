#pragma once

// Flat `key = value` run configuration shared by every CLI command.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynalloc/market_data.hpp"
#include "dynalloc/ppo.hpp"
#include "dynalloc/rl_gym.hpp"
#include "dynalloc/sharpe_trainer.hpp"

namespace dynalloc {

struct RunConfig {
  std::filesystem::path data;
  std::vector<std::string> tickers;
  market::SplitSpec split;
  int periods_per_year = 252;
  std::uint64_t seed = 42;
  std::filesystem::path out = "out";

  std::size_t frontier_samples = 10000;
  std::size_t subset_k = 0;  // 0 skips subset selection
  std::size_t subset_samples = 2000;
  std::optional<double> budget;
  std::size_t rolling_window = 21;
  std::size_t seasonal_period = 21;

  rl::EnvConfig env;
  std::size_t rebalance_interval = 1;
  std::vector<std::string> strategies = {"equal_weight", "mean_variance", "buy_and_hold",
                                         "sharpe_policy", "drl_ppo"};

  sharpe::SharpeTrainConfig sharpe;
  std::vector<double> sharpe_alpha_grid;
  rl::PpoConfig ppo;

  /// Range checks against each module's invariants; throws naming the field.
  void validate() const;
  /// Every key, in schema order, as `key = value` lines.
  std::string to_text() const;
};

/// Keys accepted in config files and as `--<key>` CLI overrides.
const std::vector<std::string_view>& config_keys();

/// Sets one key; throws on unknown keys or unparseable values.
void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines ('#' starts a comment).
std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text);

/// Applies file settings then overrides, checks required keys and ranges.
RunConfig validate_config(std::string_view file_text,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Deterministic per-purpose seed derived from the top-level seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

}  // namespace dynalloc
