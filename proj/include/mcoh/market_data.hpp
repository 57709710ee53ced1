#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mcoh/warnings.hpp"

namespace mcoh {

// Rectangular close-price panel: one row per ticker, one column per trading
// date. Prices strictly positive, dates strictly increasing, tickers unique.
struct PricePanel {
  std::vector<std::string> dates;
  std::vector<std::string> tickers;
  Eigen::MatrixXd prices;  // tickers x dates

  int size() const { return static_cast<int>(tickers.size()); }
  int days() const { return static_cast<int>(dates.size()); }
};

// Daily log returns, one column fewer than the source panel.
struct ReturnMatrix {
  std::vector<std::string> tickers;
  Eigen::MatrixXd returns;  // tickers x (days - 1)

  int size() const { return static_cast<int>(tickers.size()); }
  int cols() const { return static_cast<int>(returns.cols()); }
};

struct WindowSpec {
  int width = 62;
  int step = 1;
};

// Half-open column range [begin, begin + width) into a ReturnMatrix.
struct WindowRange {
  int index = 0;
  int begin = 0;
  int width = 0;
};

// Equal-time cross-correlation of the window-normalized returns.
// Symmetric, unit diagonal, entries clamped to [-1, 1].
struct CorrMatrix {
  Eigen::MatrixXd values;
  int window_index = -1;
};

// Elementwise sqrt(2 (1 + R)): symmetric, entries in [0, 2], diagonal 2.
struct CouplingMatrix {
  Eigen::MatrixXd values;
  int window_index = -1;

  int size() const { return static_cast<int>(values.rows()); }
};

enum class PanelLayout { detect, wide, long_form };

// Loads a close-price table. Wide form: a "date" column plus one column per
// ticker. Long form: exactly the columns date,ticker,close. Tickers without
// a price on every date are dropped and reported through `warnings`.
PricePanel load_prices(const std::filesystem::path& path,
                       PanelLayout layout = PanelLayout::detect,
                       WarningLog* warnings = nullptr);

// Writes the canonical wide-form panel CSV.
void save_panel(const PricePanel& panel, const std::filesystem::path& path);

ReturnMatrix log_returns(const PricePanel& panel);

// Contiguous windows of `spec.width` return columns advancing by
// `spec.step`: floor((cols - width) / step) + 1 of them.
std::vector<WindowRange> sliding_windows(int return_cols, const WindowSpec& spec);
std::vector<WindowRange> sliding_windows(const ReturnMatrix& returns,
                                         const WindowSpec& spec);

// Normalizes each stock inside the window (window mean and population
// standard deviation), then averages elementwise products. A zero-variance
// stock gets an all-zero off-diagonal row/column and a warning instead of
// failing the window.
CorrMatrix correlation_matrix(const ReturnMatrix& returns,
                              const WindowRange& window,
                              WarningLog* warnings = nullptr);

CouplingMatrix coupling_matrix(const CorrMatrix& corr);

// One-factor block market: members share a common factor with the given
// loading, the rest are independent noise. Returns integrate from 100 at
// 1% daily scale. Deterministic in (arguments, seed).
PricePanel synthetic_market(int n_block, int n_noise, double block_loading,
                            int days, std::uint64_t seed);

// General form: several independent factor blocks plus noise stocks.
struct BlockSpec {
  int count = 0;
  double loading = 0.0;
};

PricePanel synthetic_market_blocks(std::span<const BlockSpec> blocks,
                                   int n_noise, int days, std::uint64_t seed);

}  // namespace mcoh
