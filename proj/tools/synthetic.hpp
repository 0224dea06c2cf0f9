#pragma once

// Seeded synthetic ETF market: one-factor daily returns, a few missing cells
// to exercise the fill policy, and ESG scores for a subset of tickers.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "esgport/csv.hpp"
#include "esgport/date.hpp"
#include "esgport/random.hpp"

namespace esgport::synthetic {

struct Options {
    std::size_t etfs = 200;
    std::size_t days = 300;
    std::size_t esgRecords = 200; ///< the first tickers in a seeded shuffle get scores
    Date start{2020, 10, 1};
    double missingRate = 0.01;
    double zeroEsgRate = 0.05;
    std::uint64_t seed = 2021;
};

struct Market {
    std::vector<std::string> tickers;
    std::vector<Date> dates;
    std::vector<std::vector<double>> prices; ///< [etf][day]; NaN = missing
    std::vector<std::pair<std::string, double>> esg;
};

inline double standard_normal(Rng& rng) {
    double u1 = uniform_unit(rng), u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::string ticker_name(std::size_t i) {
    char buffer[16];
    std::snprintf(buffer, sizeof buffer, "ETF%04zu", i + 1);
    return buffer;
}

inline Market generate(const Options& o) {
    Rng rng(derive_seed(o.seed, 0));
    Market m;
    Date d = o.start;
    if (d.is_weekend()) d = d.next_business_day();
    for (std::size_t t = 0; t < o.days; ++t, d = d.next_business_day()) m.dates.push_back(d);

    std::vector<double> factor(o.days);
    for (auto& f : factor) f = 0.008 * standard_normal(rng);

    for (std::size_t i = 0; i < o.etfs; ++i) {
        m.tickers.push_back(ticker_name(i));
        const double alpha = -0.0004 + 0.0016 * uniform_unit(rng);
        const double beta = 0.2 + 1.2 * uniform_unit(rng);
        const double idio = 0.003 + 0.015 * uniform_unit(rng);
        double price = 20.0 + 180.0 * uniform_unit(rng);
        std::vector<double> row(o.days);
        for (std::size_t t = 0; t < o.days; ++t) {
            if (t > 0) price *= 1.0 + alpha + beta * factor[t] + idio * standard_normal(rng);
            price = std::round(price * 1e4) / 1e4;
            row[t] = price;
        }
        for (std::size_t t = 0; t < o.days; ++t)
            if (uniform_unit(rng) < o.missingRate) row[t] = std::nan("");
        m.prices.push_back(std::move(row));
    }

    std::vector<std::size_t> order(o.etfs);
    for (std::size_t i = 0; i < o.etfs; ++i) order[i] = i;
    for (std::size_t i = o.etfs; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t k = 0; k < std::min(o.esgRecords, o.etfs); ++k) {
        double score = uniform_unit(rng) < o.zeroEsgRate ? 0.0 : std::round(1000.0 * uniform_unit(rng)) / 100.0;
        m.esg.emplace_back(m.tickers[order[k]], score);
    }
    std::sort(m.esg.begin(), m.esg.end());
    return m;
}

inline void write_prices_wide(const Market& m, const std::string& path) {
    csv::Writer out(path);
    std::vector<std::string> header{"date"};
    header.insert(header.end(), m.tickers.begin(), m.tickers.end());
    out.row(header);
    for (std::size_t t = 0; t < m.dates.size(); ++t) {
        std::vector<std::string> row{m.dates[t].to_string()};
        for (const auto& series : m.prices) row.push_back(std::isnan(series[t]) ? "" : csv::format_double(series[t]));
        out.row(row);
    }
}

inline void write_esg(const Market& m, const std::string& path) {
    csv::Writer out(path);
    out.row({"ticker", "esg_score"});
    for (const auto& [ticker, score] : m.esg) out.row({ticker, csv::format_double(score)});
}

} // namespace esgport::synthetic
