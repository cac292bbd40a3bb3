#include "dynalloc/market_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dynalloc/error.hpp"
#include "dynalloc/format.hpp"

namespace dynalloc::market {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_missing_token(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null";
}

double parse_price(std::string_view cell, std::string_view source, std::size_t line_no) {
  if (is_missing_token(cell)) return kMissing;
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
    throw Error(std::string(source) + ":" + std::to_string(line_no) + ": unparseable number '" +
                std::string(cell) + "'");
  }
  return value;
}

void forward_fill(Matrix& m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double last = kMissing;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (std::isnan(m(r, c))) {
        m(r, c) = last;
      } else {
        last = m(r, c);
      }
    }
  }
}

bool row_complete(const Matrix& m, std::size_t r) {
  return std::none_of(m.row(r).begin(), m.row(r).end(), [](double v) { return std::isnan(v); });
}

void check_positive(const Matrix& m, const std::vector<std::string>& tickers, std::string_view what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (!std::isfinite(v)) {
        throw Error("non-finite " + std::string(what) + " price for " + tickers[c]);
      }
      if (v <= 0.0) {
        throw Error("non-positive price for " + tickers[c] + " (" + std::string(what) + ")");
      }
    }
  }
}

std::filesystem::path companion_path(const std::filesystem::path& path, std::string_view suffix) {
  std::filesystem::path p = path;
  p.replace_filename(path.stem().string() + std::string(suffix) + path.extension().string());
  return p;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open price file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

Date parse_date(std::string_view text) {
  text = trim(text);
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  const bool shape = text.size() == 10 && text[4] == '-' && text[7] == '-';
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    return ec == std::errc{} && ptr == text.data() + pos + len;
  };
  if (!shape || !num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) {
    throw Error("unparseable date '" + std::string(text) + "'");
  }
  const Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw Error("unparseable date '" + std::string(text) + "'");
  return date;
}

std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

PriceTable PriceTable::slice(std::size_t first, std::size_t count) const {
  PriceTable out;
  out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                   dates.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.tickers = tickers;
  out.close = close.slice_rows(first, count);
  if (high) out.high = high->slice_rows(first, count);
  if (low) out.low = low->slice_rows(first, count);
  return out;
}

Vector PriceTable::latest_close() const {
  if (rows() == 0) throw Error("price table is empty");
  const auto r = close.row(rows() - 1);
  return {r.begin(), r.end()};
}

ReturnMatrix ReturnMatrix::slice(std::size_t first, std::size_t count) const {
  ReturnMatrix out;
  out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                   dates.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.tickers = tickers;
  out.returns = returns.slice_rows(first, count);
  return out;
}

ReturnMatrix ReturnMatrix::select(std::span<const std::size_t> cols) const {
  ReturnMatrix out;
  out.dates = dates;
  for (std::size_t c : cols) out.tickers.push_back(tickers.at(c));
  out.returns = returns.select_cols(cols);
  return out;
}

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error("train_frac must lie in (0, 1)");
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw Error("val_frac must lie in (0, 1)");
  if (train_frac + val_frac >= 1.0) throw Error("no test segment");
}

PriceTable parse_prices_csv(std::string_view text, const std::vector<std::string>& tickers,
                            std::string_view source) {
  if (tickers.empty()) throw Error("no tickers requested");

  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = trim(text.substr(start, nl - start));
      if (!line.empty()) lines.push_back(line);
      start = nl + 1;
    }
  }
  if (lines.empty()) throw Error(std::string(source) + ": empty file");

  const auto header = split_fields(lines.front());
  if (header.empty() || (header[0] != "Date" && header[0] != "date")) {
    throw Error(std::string(source) + ": first header column must be 'Date'");
  }
  std::unordered_map<std::string_view, std::size_t> column_of;
  for (std::size_t c = 1; c < header.size(); ++c) column_of.emplace(header[c], c);

  std::vector<std::size_t> wanted;
  for (const auto& t : tickers) {
    auto it = column_of.find(t);
    if (it == column_of.end()) {
      throw Error(std::string(source) + ": missing ticker column '" + t + "'");
    }
    wanted.push_back(it->second);
  }

  struct Row {
    Date date;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw Error(std::string(source) + ":" + std::to_string(li + 1) + ": expected " +
                  std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    Row row;
    try {
      row.date = parse_date(fields[0]);
    } catch (const Error& e) {
      throw Error(std::string(source) + ":" + std::to_string(li + 1) + ": " + e.what());
    }
    for (std::size_t c : wanted) row.values.push_back(parse_price(fields[c], source, li + 1));
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].date == rows[i - 1].date) {
      throw Error(std::string(source) + ": duplicate date " + format_date(rows[i].date));
    }
  }

  PriceTable table;
  table.tickers = tickers;
  table.close = Matrix(rows.size(), tickers.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    table.dates.push_back(rows[r].date);
    std::copy(rows[r].values.begin(), rows[r].values.end(), table.close.row(r).begin());
  }
  return table;
}

PriceTable load_prices(const std::filesystem::path& path, const std::vector<std::string>& tickers) {
  if (tickers.empty()) throw Error("no tickers requested");
  if (!std::filesystem::exists(path)) throw Error("missing file: " + path.string());
  PriceTable table = parse_prices_csv(read_file(path), tickers, path.string());

  const auto high_path = companion_path(path, "_high");
  const auto low_path = companion_path(path, "_low");
  if (std::filesystem::exists(high_path) && std::filesystem::exists(low_path)) {
    for (const auto& [companion, slot] :
         {std::pair{high_path, &table.high}, std::pair{low_path, &table.low}}) {
      PriceTable extra = parse_prices_csv(read_file(companion), tickers, companion.string());
      if (extra.dates != table.dates) {
        throw Error(companion.string() + ": dates do not match " + path.string());
      }
      *slot = std::move(extra.close);
    }
  }
  return table;
}

PriceTable clean(const PriceTable& raw) {
  if (raw.rows() == 0 || raw.assets() == 0) throw Error("price table is empty");

  for (std::size_t c = 0; c < raw.assets(); ++c) {
    bool seen = false;
    for (std::size_t r = 0; r < raw.rows() && !seen; ++r) seen = !std::isnan(raw.close(r, c));
    if (!seen) throw Error("ticker " + raw.tickers[c] + " has no observations");
  }

  PriceTable filled = raw;
  forward_fill(filled.close);
  if (filled.high) forward_fill(*filled.high);
  if (filled.low) forward_fill(*filled.low);

  std::size_t first = 0;
  while (first < filled.rows()) {
    const bool ok = row_complete(filled.close, first) &&
                    (!filled.high || row_complete(*filled.high, first)) &&
                    (!filled.low || row_complete(*filled.low, first));
    if (ok) break;
    ++first;
  }
  if (first == filled.rows()) throw Error("no complete rows after forward fill");

  PriceTable out = filled.slice(first, filled.rows() - first);
  validate(out);
  return out;
}

void validate(const PriceTable& prices) {
  if (prices.close.rows() != prices.rows() || prices.close.cols() != prices.assets()) {
    throw Error("close matrix shape does not match dates x tickers");
  }
  for (std::size_t i = 1; i < prices.rows(); ++i) {
    if (!(prices.dates[i - 1] < prices.dates[i])) throw Error("dates are not strictly increasing");
  }
  check_positive(prices.close, prices.tickers, "close");
  for (const auto* extra : {&prices.high, &prices.low}) {
    if (!*extra) continue;
    if ((*extra)->rows() != prices.rows() || (*extra)->cols() != prices.assets()) {
      throw Error("high/low matrix shape does not match close");
    }
    check_positive(**extra, prices.tickers, extra == &prices.high ? "high" : "low");
  }
}

ReturnMatrix to_returns(const PriceTable& prices) {
  if (prices.rows() < 2) throw Error("need at least 2 price rows to form returns");
  ReturnMatrix out;
  out.tickers = prices.tickers;
  out.dates.assign(prices.dates.begin() + 1, prices.dates.end());
  out.returns = Matrix(prices.rows() - 1, prices.assets());
  for (std::size_t t = 0; t + 1 < prices.rows(); ++t) {
    for (std::size_t i = 0; i < prices.assets(); ++i) {
      out.returns(t, i) = prices.close(t + 1, i) / prices.close(t, i) - 1.0;
    }
  }
  return out;
}

SplitSizes split_sizes(std::size_t rows, const SplitSpec& spec) {
  spec.validate();
  const auto train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(rows)));
  const auto val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(rows)));
  const std::size_t used = std::min(rows, train + val);
  return {train, val, rows - used};
}

Split chrono_split(const ReturnMatrix& data, const SplitSpec& spec) {
  if (data.rows() < 3) throw Error("need at least 3 rows to split");
  const SplitSizes s = split_sizes(data.rows(), spec);
  if (s.train == 0 || s.validation == 0 || s.test == 0) throw Error("empty split");
  return {data.slice(0, s.train), data.slice(s.train, s.validation),
          data.slice(s.train + s.validation, s.test)};
}

RollingStats rolling_stats(const ReturnMatrix& series, std::size_t window) {
  const std::size_t T = series.rows();
  if (window < 2 || window > T) {
    throw Error("rolling window " + std::to_string(window) + " out of range [2, " +
                std::to_string(T) + "]");
  }
  const std::size_t N = series.assets();
  const std::size_t out_rows = T - window + 1;
  RollingStats out{Matrix(out_rows, N), Matrix(out_rows, N)};
  const double n = static_cast<double>(window);
  for (std::size_t k = 0; k < out_rows; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      double mean = 0.0;
      for (std::size_t r = k; r < k + window; ++r) mean += series.returns(r, i);
      mean /= n;
      double ss = 0.0;
      for (std::size_t r = k; r < k + window; ++r) {
        const double d = series.returns(r, i) - mean;
        ss += d * d;
      }
      out.means(k, i) = mean;
      out.stds(k, i) = std::sqrt(ss / (n - 1.0));
    }
  }
  return out;
}

ReturnMatrix seasonal_adjust(const ReturnMatrix& series, std::size_t period) {
  const std::size_t T = series.rows();
  if (period < 2 || 2 * period > T) {
    throw Error("seasonal period " + std::to_string(period) + " out of range [2, " +
                std::to_string(T / 2) + "]");
  }
  ReturnMatrix out = series;
  const std::size_t N = series.assets();
  std::vector<double> phase_sum(period);
  std::vector<std::size_t> phase_count(period);
  for (std::size_t i = 0; i < N; ++i) {
    std::fill(phase_sum.begin(), phase_sum.end(), 0.0);
    std::fill(phase_count.begin(), phase_count.end(), 0);
    double total = 0.0;
    for (std::size_t r = 0; r < T; ++r) {
      phase_sum[r % period] += series.returns(r, i);
      ++phase_count[r % period];
      total += series.returns(r, i);
    }
    // Centering on the count-weighted mean keeps the column mean fixed even
    // when T is not a multiple of the period.
    const double overall = total / static_cast<double>(T);
    for (std::size_t r = 0; r < T; ++r) {
      const std::size_t p = r % period;
      const double seasonal = phase_sum[p] / static_cast<double>(phase_count[p]) - overall;
      out.returns(r, i) = series.returns(r, i) - seasonal;
    }
  }
  return out;
}

std::string to_csv(const PriceTable& prices) {
  std::string out = "Date";
  for (const auto& t : prices.tickers) out += "," + t;
  out += "\n";
  for (std::size_t r = 0; r < prices.rows(); ++r) {
    out += format_date(prices.dates[r]);
    for (std::size_t c = 0; c < prices.assets(); ++c) {
      out += ",";
      if (!std::isnan(prices.close(r, c))) out += format_double(prices.close(r, c));
    }
    out += "\n";
  }
  return out;
}

}  // namespace dynalloc::market
