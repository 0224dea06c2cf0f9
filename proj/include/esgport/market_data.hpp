#pragma once

/**
 * @file market_data.hpp
 * @brief Price and ESG ingestion, universe join, and daily return statistics.
 *
 * Prices are adjusted closes, one row per ETF and one column per trading
 * day. Inputs are read either in wide form (`date,<T1>,<T2>,...`) or in long
 * form (`date,ticker,adj_close` or the Yahoo layout with `fund symbol` and
 * `adjusted close` columns); the form is detected from the header.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "esgport/csv.hpp"
#include "esgport/date.hpp"
#include "esgport/error.hpp"

namespace esgport {

/// Aligned adjusted-close matrix, ETFs x trading days. Immutable once built.
class PriceTable {
public:
    PriceTable() = default;

    PriceTable(std::vector<std::string> symbols, std::vector<Date> dates, Eigen::MatrixXd prices)
        : symbols_(std::move(symbols)), dates_(std::move(dates)), prices_(std::move(prices)) {
        if (prices_.rows() != static_cast<Eigen::Index>(symbols_.size()) ||
            prices_.cols() != static_cast<Eigen::Index>(dates_.size()))
            throw Error(ErrorKind::DimensionMismatch, "price matrix must be |symbols| x |dates|");
        for (std::size_t t = 1; t < dates_.size(); ++t)
            if (!(dates_[t - 1] < dates_[t]))
                throw Error(ErrorKind::DuplicateDate, "dates must be strictly increasing at " + dates_[t].to_string());
        std::set<std::string> seen;
        for (const auto& s : symbols_)
            if (!seen.insert(s).second) throw Error(ErrorKind::DuplicateTicker, s);
        for (Eigen::Index i = 0; i < prices_.rows(); ++i)
            for (Eigen::Index t = 0; t < prices_.cols(); ++t)
                if (!std::isfinite(prices_(i, t)) || prices_(i, t) <= 0.0)
                    throw Error(ErrorKind::BadNumber, "price for " + symbols_[i] + " on " + dates_[t].to_string() +
                                                          " must be finite and positive");
    }

    const std::vector<std::string>& symbols() const { return symbols_; }
    const std::vector<Date>& dates() const { return dates_; }
    const Eigen::MatrixXd& prices() const { return prices_; }
    std::size_t size() const { return symbols_.size(); }
    std::size_t length() const { return dates_.size(); }

    std::optional<std::size_t> index_of(const std::string& symbol) const {
        auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
        if (it == symbols_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - symbols_.begin());
    }

    std::vector<double> series(std::size_t row) const {
        std::vector<double> out(dates_.size());
        for (std::size_t t = 0; t < out.size(); ++t) out[t] = prices_(static_cast<Eigen::Index>(row), t);
        return out;
    }

    std::vector<double> series(const std::string& symbol) const {
        auto row = index_of(symbol);
        if (!row) throw Error(ErrorKind::MissingColumn, "no prices for " + symbol);
        return series(*row);
    }

    /// Rows for the given symbols, in the order given.
    PriceTable select(const std::vector<std::string>& symbols) const {
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(symbols.size()), prices_.cols());
        for (std::size_t k = 0; k < symbols.size(); ++k) {
            auto row = index_of(symbols[k]);
            if (!row) throw Error(ErrorKind::MissingColumn, "no prices for " + symbols[k]);
            sub.row(static_cast<Eigen::Index>(k)) = prices_.row(static_cast<Eigen::Index>(*row));
        }
        return PriceTable(symbols, dates_, std::move(sub));
    }

    friend bool operator==(const PriceTable& a, const PriceTable& b) {
        return a.symbols_ == b.symbols_ && a.dates_ == b.dates_ && a.prices_.rows() == b.prices_.rows() &&
               a.prices_.cols() == b.prices_.cols() && (a.prices_.array() == b.prices_.array()).all();
    }

private:
    std::vector<std::string> symbols_;
    std::vector<Date> dates_;
    Eigen::MatrixXd prices_;
};

/// Per-ETF ESG score in [0, 10]. A ticker absent from the map has no record;
/// a recorded score of 0 is a real score.
class EsgTable {
public:
    EsgTable() = default;

    void insert(const std::string& ticker, double score) {
        if (!std::isfinite(score) || score < 0.0 || score > 10.0)
            throw Error(ErrorKind::ScoreOutOfRange, ticker + " has score " + csv::format_double(score));
        if (!entries_.emplace(ticker, score).second) throw Error(ErrorKind::DuplicateTicker, ticker);
    }

    std::optional<double> score(const std::string& ticker) const {
        auto it = entries_.find(ticker);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& ticker) const { return entries_.count(ticker) != 0; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::map<std::string, double>& entries() const { return entries_; }

    friend bool operator==(const EsgTable&, const EsgTable&) = default;

private:
    std::map<std::string, double> entries_;
};

/// Simple daily returns with their first two moments.
struct ReturnsPanel {
    std::vector<std::string> symbols;
    std::vector<Date> dates; ///< date of each return (the later day of the pair)
    Eigen::MatrixXd returns; ///< ETF x day
    Eigen::VectorXd meanDaily;
    Eigen::MatrixXd covDaily;
};

struct PriceLoadOptions {
    /// Trading days kept; nullopt keeps everything.
    std::optional<DateRange> window = default_window();
    /// ETFs with fewer native (pre-fill) observations than this fraction of
    /// the window's trading days are dropped.
    double minCoverage = 0.95;
};

namespace detail {

inline double parse_price(const std::string& cell, const std::string& context) {
    auto value = csv::parse_double(cell);
    if (!value) throw Error(ErrorKind::BadNumber, "'" + cell + "' (" + context + ")");
    if (!std::isfinite(*value) || *value <= 0.0)
        throw Error(ErrorKind::BadNumber, "price must be positive, got '" + cell + "' (" + context + ")");
    return *value;
}

using Observations = std::map<std::string, std::map<Date, double>>;

inline void record(Observations& obs, std::vector<std::string>& order, const std::string& ticker, Date date,
                   double price) {
    auto [it, inserted] = obs.try_emplace(ticker);
    if (inserted) order.push_back(ticker);
    if (!it->second.emplace(date, price).second)
        throw Error(ErrorKind::DuplicateDate, ticker + " on " + date.to_string());
}

} // namespace detail

inline PriceTable load_prices(const std::string& path, const PriceLoadOptions& options = {}) {
    auto table = csv::read_file(path);
    if (table.header.empty()) throw Error(ErrorKind::EmptyInput, path);
    if (!(options.minCoverage >= 0.0 && options.minCoverage <= 1.0))
        throw Error(ErrorKind::InvalidConfig, "minimum coverage must lie in [0, 1]");

    auto date_col = table.column({"date", "price_date", "timestamp"});
    if (!date_col) throw Error(ErrorKind::MissingColumn, "no date column in " + path);
    auto ticker_col = table.column({"ticker", "symbol", "fund_symbol"});

    detail::Observations obs;
    std::vector<std::string> order;
    auto in_window = [&](Date d) { return !options.window || options.window->contains(d); };

    if (ticker_col) {
        auto price_col = table.column({"adj_close", "adjusted_close", "adj_close_price", "adjclose"});
        if (!price_col) throw Error(ErrorKind::MissingColumn, "long-form prices need an adjusted close column");
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto& row = table.rows[r];
            auto need = std::max({*date_col, *ticker_col, *price_col});
            if (row.size() <= need)
                throw Error(ErrorKind::BadNumber, "row " + std::to_string(r + 2) + " has too few fields");
            auto date = Date::parse_or_throw(row[*date_col]);
            const auto& cell = row[*price_col];
            if (csv::trim(cell).empty() || !in_window(date)) continue;
            const auto& ticker = row[*ticker_col];
            if (ticker.empty()) throw Error(ErrorKind::MissingColumn, "empty ticker on row " + std::to_string(r + 2));
            detail::record(obs, order, ticker, date, detail::parse_price(cell, ticker + " " + row[*date_col]));
        }
    } else {
        std::set<std::string> seen;
        std::vector<std::size_t> columns;
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (c == *date_col) continue;
            if (table.header[c].empty()) throw Error(ErrorKind::MissingColumn, "blank ticker in header");
            if (!seen.insert(table.header[c]).second) throw Error(ErrorKind::DuplicateTicker, table.header[c]);
            columns.push_back(c);
        }
        for (std::size_t c : columns) {
            obs.try_emplace(table.header[c]);
            order.push_back(table.header[c]);
        }
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto& row = table.rows[r];
            if (row.size() <= *date_col)
                throw Error(ErrorKind::BadDate, "row " + std::to_string(r + 2) + " has no date");
            auto date = Date::parse_or_throw(row[*date_col]);
            if (!in_window(date)) continue;
            for (std::size_t c : columns) {
                if (c >= row.size() || csv::trim(row[c]).empty()) continue;
                detail::record(obs, order, table.header[c], date,
                               detail::parse_price(row[c], table.header[c] + " " + row[*date_col]));
            }
        }
    }

    std::set<Date> all_dates;
    for (const auto& [ticker, series] : obs)
        for (const auto& [d, p] : series) all_dates.insert(d);
    if (all_dates.empty()) throw Error(ErrorKind::EmptyResult, "no prices inside the window in " + path);

    std::vector<std::string> kept;
    for (const auto& ticker : order) {
        double coverage = static_cast<double>(obs[ticker].size()) / static_cast<double>(all_dates.size());
        if (!obs[ticker].empty() && coverage >= options.minCoverage) kept.push_back(ticker);
    }
    if (kept.empty()) throw Error(ErrorKind::EmptyResult, "every ETF fell below the coverage threshold");

    std::set<Date> kept_dates;
    for (const auto& ticker : kept)
        for (const auto& [d, p] : obs[ticker]) kept_dates.insert(d);
    std::vector<Date> dates(kept_dates.begin(), kept_dates.end());

    Eigen::MatrixXd prices(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(dates.size()));
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& series = obs[kept[i]];
        auto row = static_cast<Eigen::Index>(i);
        std::optional<double> last;
        std::size_t first_seen = dates.size();
        for (std::size_t t = 0; t < dates.size(); ++t) {
            auto it = series.find(dates[t]);
            if (it != series.end()) {
                last = it->second;
                if (first_seen == dates.size()) first_seen = t;
            }
            prices(row, static_cast<Eigen::Index>(t)) = last.value_or(0.0);
        }
        for (std::size_t t = 0; t < first_seen; ++t)
            prices(row, static_cast<Eigen::Index>(t)) = prices(row, static_cast<Eigen::Index>(first_seen));
    }
    return PriceTable(std::move(kept), std::move(dates), std::move(prices));
}

/// Canonical wide form; values use the shortest round-trip representation.
inline void write_prices(const PriceTable& table, const std::string& path) {
    csv::Writer out(path);
    std::vector<std::string> header{"date"};
    header.insert(header.end(), table.symbols().begin(), table.symbols().end());
    out.row(header);
    for (std::size_t t = 0; t < table.length(); ++t) {
        std::vector<std::string> row{table.dates()[t].to_string()};
        for (std::size_t i = 0; i < table.size(); ++i)
            row.push_back(csv::format_double(table.prices()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t))));
        out.row(row);
    }
}

/// Reads `ticker,esg_score`; other columns are ignored. Rows with an empty
/// score cell carry no record.
inline EsgTable load_esg(const std::string& path) {
    auto table = csv::read_file(path);
    EsgTable esg;
    if (table.header.empty()) return esg;
    auto ticker_col = table.column({"ticker", "symbol", "fund_symbol"});
    if (!ticker_col) throw Error(ErrorKind::MissingColumn, "no ticker column in " + path);
    auto score_col = table.column({"esg_score", "esg", "esg_rating", "msci_esg_quality_score"});
    if (!score_col) throw Error(ErrorKind::MissingColumn, "no esg_score column in " + path);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() <= std::max(*ticker_col, *score_col) || csv::trim(row[*score_col]).empty()) continue;
        auto score = csv::parse_double(row[*score_col]);
        if (!score) throw Error(ErrorKind::BadNumber, "'" + row[*score_col] + "' for " + row[*ticker_col]);
        esg.insert(row[*ticker_col], *score);
    }
    return esg;
}

inline void write_esg(const EsgTable& esg, const std::string& path) {
    csv::Writer out(path);
    out.row({"ticker", "esg_score"});
    for (const auto& [ticker, score] : esg.entries()) out.row({ticker, csv::format_double(score)});
}

/// Restricts both tables to tickers present in each. Price row order is kept.
inline std::pair<PriceTable, EsgTable> join_universe(const PriceTable& prices, const EsgTable& esg) {
    std::vector<std::string> common;
    EsgTable joined;
    for (const auto& symbol : prices.symbols()) {
        if (auto score = esg.score(symbol)) {
            common.push_back(symbol);
            joined.insert(symbol, *score);
        }
    }
    if (common.empty()) throw Error(ErrorKind::EmptyIntersection, "no priced ETF has an ESG record");
    return {prices.select(common), std::move(joined)};
}

inline ReturnsPanel compute_returns(const PriceTable& prices) {
    if (prices.length() < 2) throw Error(ErrorKind::TooShort, "returns need at least 2 dates");
    const auto n = static_cast<Eigen::Index>(prices.size());
    const auto days = static_cast<Eigen::Index>(prices.length()) - 1;

    ReturnsPanel panel;
    panel.symbols = prices.symbols();
    panel.dates.assign(prices.dates().begin() + 1, prices.dates().end());
    panel.returns.resize(n, days);
    const auto& p = prices.prices();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index t = 0; t < days; ++t) panel.returns(i, t) = p(i, t + 1) / p(i, t) - 1.0;

    panel.meanDaily.resize(n);
    Eigen::MatrixXd centered(n, days);
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Eigen::Index t = 0; t < days; ++t) sum += panel.returns(i, t);
        panel.meanDaily(i) = sum / static_cast<double>(days);
        for (Eigen::Index t = 0; t < days; ++t) centered(i, t) = panel.returns(i, t) - panel.meanDaily(i);
    }

    // Explicit loops keep each entry a function of its two rows only, so
    // adding or removing other ETFs never perturbs it.
    panel.covDaily = Eigen::MatrixXd::Zero(n, n);
    if (days > 1) {
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                double acc = 0.0;
                for (Eigen::Index t = 0; t < days; ++t) acc += centered(i, t) * centered(j, t);
                panel.covDaily(i, j) = panel.covDaily(j, i) = acc / static_cast<double>(days - 1);
            }
        }
    }
    return panel;
}

} // namespace esgport
