#include "mcoh/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "mcoh/csv.hpp"
#include "mcoh/errors.hpp"
#include "mcoh/rng.hpp"

namespace mcoh {

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

void validate_panel(const PricePanel& panel) {
  if (panel.size() == 0 || panel.days() == 0)
    throw data_error("empty panel after filtering");
  for (int t = 1; t < panel.days(); ++t)
    if (!(panel.dates[t - 1] < panel.dates[t]))
      throw data_error("dates not strictly increasing at '" + panel.dates[t] + "'");
  std::set<std::string> seen(panel.tickers.begin(), panel.tickers.end());
  if (static_cast<int>(seen.size()) != panel.size())
    throw data_error("duplicate tickers in panel");
  if (!(panel.prices.array() > 0.0).all())
    throw data_error("non-positive price in panel");
  if (!panel.prices.allFinite())
    throw data_error("non-finite price in panel");
}

PricePanel from_long_table(const csv::Table& table, WarningLog* warnings) {
  // date -> ticker -> close
  std::map<std::string, std::map<std::string, double>> cells;
  std::set<std::string> tickers;
  for (const auto& row : table.rows) {
    const std::string& date = row[0];
    const std::string& ticker = row[1];
    const double close = csv::parse_double(row[2], "close for " + ticker + " " + date);
    auto [it, inserted] = cells[date].emplace(ticker, close);
    if (!inserted)
      throw data_error("duplicate entry for " + ticker + " on " + date);
    tickers.insert(ticker);
  }

  std::vector<std::string> dates;
  dates.reserve(cells.size());
  for (const auto& [date, _] : cells) dates.push_back(date);

  std::vector<std::string> kept;
  for (const auto& ticker : tickers) {
    const bool full = std::all_of(cells.begin(), cells.end(), [&](const auto& kv) {
      return kv.second.count(ticker) > 0;
    });
    if (full) {
      kept.push_back(ticker);
    } else if (warnings) {
      warnings->add("dropped ticker " + ticker + ": incomplete history");
    }
  }

  PricePanel panel;
  panel.dates = std::move(dates);
  panel.tickers = kept;
  panel.prices.resize(static_cast<int>(kept.size()), static_cast<int>(panel.dates.size()));
  for (int t = 0; t < panel.days(); ++t) {
    const auto& by_ticker = cells.at(panel.dates[t]);
    for (int i = 0; i < panel.size(); ++i)
      panel.prices(i, t) = by_ticker.at(panel.tickers[i]);
  }
  return panel;
}

PricePanel from_wide_table(const csv::Table& table, WarningLog* warnings) {
  const int n_cols = static_cast<int>(table.header.size());
  if (n_cols < 2) throw data_error("wide panel needs a date column plus tickers");

  // Sort rows by date; duplicate dates are malformed input.
  std::vector<int> order(table.rows.size());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = static_cast<int>(r);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return table.rows[a][0] < table.rows[b][0];
  });
  for (std::size_t r = 1; r < order.size(); ++r)
    if (table.rows[order[r - 1]][0] == table.rows[order[r]][0])
      throw data_error("duplicate date '" + table.rows[order[r]][0] + "'");

  const int n_days = static_cast<int>(order.size());
  std::vector<std::string> dates(n_days);
  for (int t = 0; t < n_days; ++t) dates[t] = table.rows[order[t]][0];

  std::vector<std::string> tickers;
  Eigen::MatrixXd prices(n_cols - 1, n_days);
  int kept = 0;
  for (int c = 1; c < n_cols; ++c) {
    bool complete = true;
    for (int t = 0; t < n_days && complete; ++t)
      complete = !table.rows[order[t]][c].empty();
    if (!complete) {
      if (warnings)
        warnings->add("dropped ticker " + table.header[c] + ": incomplete history");
      continue;
    }
    for (int t = 0; t < n_days; ++t)
      prices(kept, t) = csv::parse_double(table.rows[order[t]][c],
                                          table.header[c] + " on " + dates[t]);
    tickers.push_back(table.header[c]);
    ++kept;
  }
  PricePanel panel;
  panel.dates = std::move(dates);
  panel.tickers = std::move(tickers);
  panel.prices = prices.topRows(kept);
  return panel;
}

}  // namespace

PricePanel load_prices(const std::filesystem::path& path, PanelLayout layout,
                       WarningLog* warnings) {
  const csv::Table table = csv::read_file(path);
  if (table.header.empty() || lower(table.header[0]) != "date")
    throw data_error(path.string() + ": first column must be 'date'");

  if (layout == PanelLayout::detect) {
    const bool is_long = table.header.size() == 3 &&
                         lower(table.header[1]) == "ticker" &&
                         lower(table.header[2]) == "close";
    layout = is_long ? PanelLayout::long_form : PanelLayout::wide;
  }

  PricePanel panel = layout == PanelLayout::long_form
                         ? from_long_table(table, warnings)
                         : from_wide_table(table, warnings);
  validate_panel(panel);
  return panel;
}

void save_panel(const PricePanel& panel, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  out << "date";
  for (const auto& ticker : panel.tickers) out << ',' << ticker;
  out << '\n';
  for (int t = 0; t < panel.days(); ++t) {
    out << panel.dates[t];
    for (int i = 0; i < panel.size(); ++i)
      out << ',' << csv::format_double(panel.prices(i, t));
    out << '\n';
  }
}

ReturnMatrix log_returns(const PricePanel& panel) {
  if (panel.days() < 2) throw data_error("need at least 2 dates for returns");
  ReturnMatrix result;
  result.tickers = panel.tickers;
  const auto logs = panel.prices.array().log();
  result.returns = (logs.rightCols(panel.days() - 1) - logs.leftCols(panel.days() - 1)).matrix();
  return result;
}

std::vector<WindowRange> sliding_windows(int return_cols, const WindowSpec& spec) {
  if (spec.width < 2) throw config_error("window width must be >= 2");
  if (spec.step < 1) throw config_error("window step must be >= 1");
  if (spec.width > return_cols)
    throw data_error("window width " + std::to_string(spec.width) +
                     " exceeds " + std::to_string(return_cols) + " return columns");
  const int count = (return_cols - spec.width) / spec.step + 1;
  std::vector<WindowRange> windows(count);
  for (int w = 0; w < count; ++w)
    windows[w] = WindowRange{w, w * spec.step, spec.width};
  return windows;
}

std::vector<WindowRange> sliding_windows(const ReturnMatrix& returns,
                                         const WindowSpec& spec) {
  return sliding_windows(returns.cols(), spec);
}

CorrMatrix correlation_matrix(const ReturnMatrix& returns,
                              const WindowRange& window, WarningLog* warnings) {
  const int n = returns.size();
  const int width = window.width;
  if (width < 2) throw config_error("correlation window must span >= 2 columns");
  if (window.begin < 0 || window.begin + width > returns.cols())
    throw data_error("window out of range");

  const Eigen::MatrixXd slice = returns.returns.middleCols(window.begin, width);
  const Eigen::VectorXd mean = slice.rowwise().mean();
  Eigen::MatrixXd centered = slice.colwise() - mean;
  const Eigen::VectorXd variance = centered.array().square().rowwise().mean();

  std::vector<bool> degenerate(n, false);
  for (int i = 0; i < n; ++i) {
    const double sd = std::sqrt(variance(i));
    if (sd > 0.0) {
      centered.row(i) /= sd;
    } else {
      degenerate[i] = true;
      centered.row(i).setZero();
      if (warnings)
        warnings->add("window " + std::to_string(window.index) +
                      ": zero variance for " + returns.tickers[i] +
                      "; correlations set to 0");
    }
  }

  CorrMatrix corr;
  corr.window_index = window.index;
  corr.values.noalias() = centered * centered.transpose() / static_cast<double>(width);
  corr.values = corr.values.cwiseMax(-1.0).cwiseMin(1.0);
  corr.values.diagonal().setOnes();
  return corr;
}

CouplingMatrix coupling_matrix(const CorrMatrix& corr) {
  CouplingMatrix coupling;
  coupling.window_index = corr.window_index;
  coupling.values = (2.0 * (1.0 + corr.values.array())).sqrt().matrix();
  coupling.values.diagonal().setConstant(2.0);
  return coupling;
}

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

std::string next_date(std::string date) {
  static const int lengths[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  int y = std::stoi(date.substr(0, 4));
  int m = std::stoi(date.substr(5, 2));
  int d = std::stoi(date.substr(8, 2));
  const int in_month = (m == 2 && leap(y)) ? 29 : lengths[m - 1];
  if (++d > in_month) {
    d = 1;
    if (++m > 12) { m = 1; ++y; }
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
  return buf;
}

}  // namespace

PricePanel synthetic_market_blocks(std::span<const BlockSpec> blocks, int n_noise,
                                   int days, std::uint64_t seed) {
  int n = n_noise;
  for (const auto& block : blocks) {
    if (block.count < 0) throw config_error("block count must be >= 0");
    if (block.loading < 0.0 || block.loading >= 1.0)
      throw config_error("block loading must be in [0, 1)");
    n += block.count;
  }
  if (n_noise < 0) throw config_error("noise count must be >= 0");
  if (days < 2) throw config_error("days must be >= 2");
  if (n == 0) throw config_error("market must contain at least one stock");

  const int horizon = days - 1;
  constexpr double kDailyScale = 0.01;

  auto engine = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd rets(n, horizon);
  std::vector<std::string> tickers;
  tickers.reserve(n);
  int row = 0;
  char name[16];
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double lam = blocks[b].loading;
    const double resid = std::sqrt(1.0 - lam * lam);
    Eigen::VectorXd factor(horizon);
    for (int t = 0; t < horizon; ++t) factor(t) = gauss(engine);
    for (int j = 0; j < blocks[b].count; ++j) {
      for (int t = 0; t < horizon; ++t)
        rets(row, t) = lam * factor(t) + resid * gauss(engine);
      std::snprintf(name, sizeof(name), "B%zuS%03d", b, j);
      tickers.emplace_back(name);
      ++row;
    }
  }
  for (int j = 0; j < n_noise; ++j) {
    for (int t = 0; t < horizon; ++t) rets(row, t) = gauss(engine);
    std::snprintf(name, sizeof(name), "NS%03d", j);
    tickers.emplace_back(name);
    ++row;
  }
  rets *= kDailyScale;

  PricePanel panel;
  panel.tickers = std::move(tickers);
  panel.dates.resize(days);
  panel.dates[0] = "2000-01-03";
  for (int t = 1; t < days; ++t) panel.dates[t] = next_date(panel.dates[t - 1]);
  panel.prices.resize(n, days);
  panel.prices.col(0).setConstant(100.0);
  for (int t = 0; t < horizon; ++t)
    panel.prices.col(t + 1) = panel.prices.col(t).array() * rets.col(t).array().exp();
  return panel;
}

PricePanel synthetic_market(int n_block, int n_noise, double block_loading,
                            int days, std::uint64_t seed) {
  const BlockSpec block{n_block, block_loading};
  return synthetic_market_blocks(std::span<const BlockSpec>(&block, 1), n_noise,
                                 days, seed);
}

}  // namespace mcoh
