#pragma once

// Price ingestion, cleaning, return construction and chronological splits.

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dynalloc/linalg.hpp"

namespace dynalloc::market {

using Date = std::chrono::year_month_day;

/// Parses `YYYY-MM-DD`; throws dynalloc::Error on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Dated grid of prices, one column per ticker. Missing cells are NaN until
/// clean() has run.
struct PriceTable {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  Matrix close;
  std::optional<Matrix> high;
  std::optional<Matrix> low;

  std::size_t rows() const noexcept { return dates.size(); }
  std::size_t assets() const noexcept { return tickers.size(); }

  /// Rows [first, first + count).
  PriceTable slice(std::size_t first, std::size_t count) const;
  Vector latest_close() const;
};

/// Simple returns; row t spans the source price rows (t, t + 1) and carries
/// the later date.
struct ReturnMatrix {
  std::vector<Date> dates;
  std::vector<std::string> tickers;
  Matrix returns;

  std::size_t rows() const noexcept { return returns.rows(); }
  std::size_t assets() const noexcept { return returns.cols(); }

  ReturnMatrix slice(std::size_t first, std::size_t count) const;
  ReturnMatrix select(std::span<const std::size_t> cols) const;
};

struct SplitSpec {
  double train_frac = 0.70;
  double val_frac = 0.15;

  /// Throws if the fractions leave no room for a test segment.
  void validate() const;
};

struct Split {
  ReturnMatrix train;
  ReturnMatrix validation;
  ReturnMatrix test;
};

struct RollingStats {
  Matrix means;
  Matrix stds;
};

/// Reads a `Date,<ticker>...` CSV and keeps the requested columns in the
/// requested order. Empty cells become NaN. Companion `<stem>_high<ext>` and
/// `<stem>_low<ext>` files are attached when both exist beside `path`.
PriceTable load_prices(const std::filesystem::path& path, const std::vector<std::string>& tickers);

/// Parses CSV text already in memory; `source` labels error messages.
PriceTable parse_prices_csv(std::string_view text, const std::vector<std::string>& tickers,
                            std::string_view source = "<memory>");

/// Forward-fills interior gaps per ticker and drops leading rows that are
/// still incomplete.
PriceTable clean(const PriceTable& raw);

/// Checks the cleaned-table invariants; throws with the first violation.
void validate(const PriceTable& prices);

ReturnMatrix to_returns(const PriceTable& prices);

/// Segment sizes for T rows: floor(train*T), floor(val*T), remainder.
struct SplitSizes {
  std::size_t train, validation, test;
};
SplitSizes split_sizes(std::size_t rows, const SplitSpec& spec);
Split chrono_split(const ReturnMatrix& data, const SplitSpec& spec);

RollingStats rolling_stats(const ReturnMatrix& series, std::size_t window);

/// Additive seasonal adjustment with phase = row index mod period.
ReturnMatrix seasonal_adjust(const ReturnMatrix& series, std::size_t period);

/// Writes the close grid back out in the input CSV layout.
std::string to_csv(const PriceTable& prices);

}  // namespace dynalloc::market
