#include "rcd/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

namespace rcd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::string normalize_iso_date(const std::string& raw) {
    const std::string s = trim(raw);
    int y = 0, m = 0, d = 0;
    char sep1 = 0, sep2 = 0;
    if (s.size() != 10) throw InputError("unparsable date: '" + raw + "'");
    std::istringstream in(s);
    in >> y >> sep1 >> m >> sep2 >> d;
    if (!in || (sep1 != '-' && sep1 != '/') || sep1 != sep2)
        throw InputError("unparsable date: '" + raw + "'");
    static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12 || d < 1) throw InputError("invalid date: '" + raw + "'");
    const int dim = kDays[m - 1] + ((m == 2 && is_leap(y)) ? 1 : 0);
    if (d > dim) throw InputError("invalid date: '" + raw + "'");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

ReturnPanel ReturnPanel::slice(Index begin, Index end) const {
    if (begin < 0 || end > rows() || begin > end) throw InputError("ReturnPanel::slice out of range");
    ReturnPanel out;
    out.assets = assets;
    out.dates.assign(dates.begin() + begin, dates.begin() + end);
    out.returns = returns.middleRows(begin, end - begin);
    return out;
}

Index ReturnPanel::last_index_on_or_before(const std::string& date) const {
    const auto it = std::upper_bound(dates.begin(), dates.end(), date);
    return static_cast<Index>(it - dates.begin()) - 1;
}

PricePanel parse_price_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("malformed header: empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "date")
        throw InputError("malformed header: expected 'date,<asset_1>,...'");
    std::set<std::string> seen_assets;
    for (std::size_t j = 1; j < header.size(); ++j) {
        if (header[j].empty()) throw InputError("malformed header: empty asset name");
        if (!seen_assets.insert(header[j]).second)
            throw InputError("malformed header: duplicate asset '" + header[j] + "'");
    }
    const std::size_t d = header.size() - 1;

    struct Row {
        std::string date;
        std::vector<double> px;
    };
    std::vector<Row> rows;
    std::set<std::string> seen_dates;
    std::size_t dropped = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        std::string date;
        try {
            date = normalize_iso_date(cells.empty() ? std::string{} : cells[0]);
        } catch (const InputError&) {
            ++dropped;
            continue;
        }
        if (!seen_dates.insert(date).second) throw InputError("duplicate dates: " + date);
        if (cells.size() != d + 1) {
            ++dropped;
            continue;
        }
        Row row{date, std::vector<double>(d)};
        bool ok = true;
        for (std::size_t j = 0; j < d && ok; ++j)
            ok = parse_double(cells[j + 1], row.px[j]) && row.px[j] > 0.0;
        if (!ok) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw InputError("fewer than 2 valid rows");
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });

    PricePanel panel;
    panel.assets.assign(header.begin() + 1, header.end());
    panel.prices.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        panel.dates.push_back(rows[t].date);
        for (std::size_t j = 0; j < d; ++j)
            panel.prices(static_cast<Index>(t), static_cast<Index>(j)) = rows[t].px[j];
    }
    panel.dropped_rows = dropped;
    if (dropped > 0) spdlog::info("price ingestion dropped {} row(s)", dropped);
    return panel;
}

PricePanel load_price_csv(const std::filesystem::path& path) { return parse_price_csv(read_file(path)); }

ReturnPanel to_returns(const PricePanel& panel) {
    const Index T = panel.prices.rows();
    if (T < 2) throw InputError("to_returns: need at least 2 dates");
    ReturnPanel out;
    out.assets = panel.assets;
    out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    out.returns = (panel.prices.bottomRows(T - 1).array() / panel.prices.topRows(T - 1).array() - 1.0).matrix();
    return out;
}

PricePanel prices_from_returns(const ReturnPanel& returns, const VectorXd& first_prices,
                               const std::string& first_date) {
    if (first_prices.size() != returns.cols()) throw InputError("prices_from_returns: dimension mismatch");
    PricePanel p;
    p.assets = returns.assets;
    p.dates.push_back(first_date);
    p.dates.insert(p.dates.end(), returns.dates.begin(), returns.dates.end());
    p.prices.resize(returns.rows() + 1, returns.cols());
    p.prices.row(0) = first_prices.transpose();
    for (Index t = 0; t < returns.rows(); ++t)
        p.prices.row(t + 1) = p.prices.row(t).array() * (1.0 + returns.returns.row(t).array());
    return p;
}

namespace {

void write_matrix_csv(const std::vector<std::string>& dates, const std::vector<std::string>& assets,
                      const MatrixXd& values, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write file: " + path.string());
    out << "date";
    for (const auto& a : assets) out << ',' << a;
    out << '\n';
    for (Index t = 0; t < values.rows(); ++t) {
        out << dates[static_cast<std::size_t>(t)];
        for (Index j = 0; j < values.cols(); ++j) out << ',' << format_double(values(t, j));
        out << '\n';
    }
}

}  // namespace

void write_return_csv(const ReturnPanel& panel, const std::filesystem::path& path) {
    write_matrix_csv(panel.dates, panel.assets, panel.returns, path);
}

void write_price_csv(const PricePanel& panel, const std::filesystem::path& path) {
    write_matrix_csv(panel.dates, panel.assets, panel.prices, path);
}

ReturnPanel load_return_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InputError("malformed header: empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "date") throw InputError("malformed header in " + path.string());
    ReturnPanel out;
    out.assets.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw InputError("ragged row in " + path.string());
        std::vector<double> r(out.assets.size());
        for (std::size_t j = 0; j < r.size(); ++j)
            if (!parse_double(cells[j + 1], r[j]) || r[j] <= -1.0)
                throw InputError("invalid return value in " + path.string() + " at " + cells[0]);
        const std::string date = normalize_iso_date(cells[0]);
        if (!out.dates.empty() && date <= out.dates.back())
            throw InputError("return dates not strictly increasing at " + date);
        out.dates.push_back(date);
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw InputError("no rows in " + path.string());
    out.returns.resize(static_cast<Index>(rows.size()), static_cast<Index>(out.assets.size()));
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t j = 0; j < rows[t].size(); ++j)
            out.returns(static_cast<Index>(t), static_cast<Index>(j)) = rows[t][j];
    return out;
}

}  // namespace rcd
