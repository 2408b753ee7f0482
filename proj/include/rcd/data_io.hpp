#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rcd/common.hpp"

namespace rcd {

/// Adjusted-close prices, one row per date. All cells strictly positive.
struct PricePanel {
    std::vector<std::string> dates;  // ISO-8601, strictly increasing
    std::vector<std::string> assets;
    MatrixXd prices;                 // dates x assets
    std::size_t dropped_rows = 0;    // rows removed during ingestion
};

/// Simple returns; row t is the return from dates[t-1] to dates[t] of the source panel.
struct ReturnPanel {
    std::vector<std::string> dates;
    std::vector<std::string> assets;
    MatrixXd returns;  // dates x assets

    Index rows() const { return returns.rows(); }
    Index cols() const { return returns.cols(); }

    /// Rows [begin, end) as a new panel.
    ReturnPanel slice(Index begin, Index end) const;
    /// Index of the last row whose date is <= `date`, or -1.
    Index last_index_on_or_before(const std::string& date) const;
};

PricePanel parse_price_csv(const std::string& text);
PricePanel load_price_csv(const std::filesystem::path& path);

ReturnPanel to_returns(const PricePanel& panel);

/// Inverse of to_returns given the first price row.
PricePanel prices_from_returns(const ReturnPanel& returns, const VectorXd& first_prices,
                               const std::string& first_date);

/// Same CSV shape as the price file (`date,<asset>...`), 17 significant digits.
void write_return_csv(const ReturnPanel& panel, const std::filesystem::path& path);
void write_price_csv(const PricePanel& panel, const std::filesystem::path& path);
ReturnPanel load_return_csv(const std::filesystem::path& path);

/// Accepts YYYY-MM-DD (also YYYY/MM/DD) and returns the canonical YYYY-MM-DD form.
std::string normalize_iso_date(const std::string& raw);

}  // namespace rcd
