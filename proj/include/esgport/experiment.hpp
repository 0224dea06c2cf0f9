#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "esgport/error.hpp"
#include "esgport/forecast.hpp"
#include "esgport/market_data.hpp"
#include "esgport/optimizer.hpp"
#include "esgport/parallel.hpp"
#include "esgport/random.hpp"

namespace esgport::experiment {

/// One randomised market with both optimiser results.
struct RunRecord {
    std::size_t runIndex = 0; ///< 1-based, as tabulated
    std::vector<std::string> marketSymbols;
    std::optional<optimizer::Portfolio> mv;
    std::optional<optimizer::Portfolio> esgMv;
    std::optional<std::string> error; ///< set when the run failed; the batch continues

    bool ok() const { return !error && mv && esgMv; }
};

/// Mean percentage change ESG-MV relative to MV. A metric is nullopt when
/// some MV value is zero and the change is undefined.
struct DeltaSummary {
    std::optional<double> sharpeDeltaPct;
    std::optional<double> riskDeltaPct;
    std::optional<double> returnDeltaPct;
    std::optional<double> esgDeltaPct;
    std::size_t runs = 0;
};

/// Uniform sample of n tickers without replacement, returned sorted.
///
/// Each ticker gets a pseudo-random key from (seed, ticker) and the n
/// smallest keys are taken. A ticker's key does not depend on the rest of
/// the universe, so adding a ticker that is not selected leaves the sample
/// unchanged.
inline std::vector<std::string> sample_market(const std::vector<std::string>& universe, std::size_t n,
                                              std::uint64_t seed) {
    if (n > universe.size())
        throw Error(ErrorKind::InvalidConfig, "market size " + std::to_string(n) + " exceeds universe of " +
                                                  std::to_string(universe.size()));
    if (n == 0) throw Error(ErrorKind::InvalidConfig, "market size must be >= 1");
    std::vector<std::pair<std::uint64_t, std::string>> keyed;
    keyed.reserve(universe.size());
    for (const auto& ticker : universe) keyed.emplace_back(derive_seed(seed, hash_string(ticker)), ticker);
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(n), keyed.end());
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.push_back(keyed[k].second);
    std::sort(out.begin(), out.end());
    return out;
}

/// Forest seed for one ticker; independent of which other tickers exist.
inline std::uint64_t ticker_seed(std::uint64_t seed, const std::string& ticker) {
    return derive_seed(seed, hash_string(ticker));
}

/// Appends a recursive forest forecast of `lag.horizon` business days to
/// every listed ETF. Other ETFs are dropped from the result.
inline PriceTable extend_with_forecasts(const PriceTable& prices, const std::vector<std::string>& symbols,
                                        const forecast::LagConfig& lag, const forecast::ForestConfig& forest) {
    lag.validate();
    std::vector<Date> dates = prices.dates();
    for (std::size_t h = 0; h < lag.horizon; ++h) dates.push_back(dates.back().next_business_day());

    Eigen::MatrixXd extended(static_cast<Eigen::Index>(symbols.size()), static_cast<Eigen::Index>(dates.size()));
    parallel_for(
        symbols.size(),
        [&](std::size_t k) {
            auto history = prices.series(symbols[k]);
            auto config = forest;
            config.seed = ticker_seed(forest.seed, symbols[k]);
            config.threads = 1;
            auto model = forecast::fit_forest(forecast::make_supervised(history, lag), config, lag);
            auto result = forecast::forecast_horizon(model, history, lag.horizon);
            const auto row = static_cast<Eigen::Index>(k);
            for (std::size_t t = 0; t < history.size(); ++t) extended(row, static_cast<Eigen::Index>(t)) = history[t];
            for (std::size_t h = 0; h < lag.horizon; ++h)
                extended(row, static_cast<Eigen::Index>(history.size() + h)) = result.pointForecast[h];
        },
        forest.threads);
    return PriceTable(symbols, std::move(dates), std::move(extended));
}

struct ExperimentConfig {
    std::size_t runs = 12;
    std::size_t marketSize = 100;
    std::uint64_t seedBase = 0;
    double riskFree = 0.0;
    optimizer::SolverConfig solver;
    /// Optimise on history plus forest forecasts; off = history only.
    bool includeForecast = true;
    forecast::LagConfig lag;
    forecast::ForestConfig forest;
    unsigned threads = 0;
};

/// Optimises one market with both objectives under the same solver seed.
inline RunRecord run_market(const PriceTable& prices, const EsgTable& esg, std::vector<std::string> symbols,
                            std::size_t run_index, double risk_free, const optimizer::SolverConfig& solver) {
    RunRecord record;
    record.runIndex = run_index;
    record.marketSymbols = std::move(symbols);
    try {
        auto panel = compute_returns(prices.select(record.marketSymbols));
        auto market = optimizer::annualize(panel, esg, risk_free);
        record.mv = optimizer::optimize_mv(market, solver);
        record.esgMv = optimizer::optimize_esg_mv(market, solver);
    } catch (const std::exception& e) {
        record.mv.reset();
        record.esgMv.reset();
        record.error = e.what();
    }
    return record;
}

/// Runs `config.runs` randomised markets. Run k (1-based) samples its market
/// and seeds its solver with seedBase + k - 1. Records come back ordered by
/// run index.
inline std::vector<RunRecord> run_experiment(const PriceTable& prices, const EsgTable& esg,
                                             const ExperimentConfig& config) {
    if (config.runs < 1) throw Error(ErrorKind::InvalidConfig, "runs must be >= 1");
    std::vector<std::vector<std::string>> markets(config.runs);
    for (std::size_t k = 0; k < config.runs; ++k)
        markets[k] = sample_market(prices.symbols(), config.marketSize, config.seedBase + k);

    PriceTable source = prices;
    if (config.includeForecast) {
        std::vector<std::string> needed;
        for (const auto& m : markets) needed.insert(needed.end(), m.begin(), m.end());
        std::sort(needed.begin(), needed.end());
        needed.erase(std::unique(needed.begin(), needed.end()), needed.end());
        auto forest = config.forest;
        forest.threads = config.threads;
        source = extend_with_forecasts(prices, needed, config.lag, forest);
    }

    std::vector<RunRecord> records(config.runs);
    parallel_for(
        config.runs,
        [&](std::size_t k) {
            auto solver = config.solver;
            solver.seed = config.seedBase + k;
            solver.threads = 1;
            records[k] = run_market(source, esg, markets[k], k + 1, config.riskFree, solver);
        },
        config.threads);
    return records;
}

inline DeltaSummary aggregate_deltas(const std::vector<RunRecord>& records) {
    DeltaSummary summary;
    std::vector<const RunRecord*> usable;
    for (const auto& r : records)
        if (r.ok()) usable.push_back(&r);
    summary.runs = usable.size();
    if (usable.empty()) return summary;

    auto mean_change = [&](auto metric) -> std::optional<double> {
        double total = 0.0;
        for (const auto* r : usable) {
            const double base = metric(*r->mv), alt = metric(*r->esgMv);
            if (base == 0.0 || !std::isfinite(base) || !std::isfinite(alt)) return std::nullopt;
            total += 100.0 * (alt - base) / base;
        }
        return total / static_cast<double>(usable.size());
    };
    summary.sharpeDeltaPct = mean_change([](const optimizer::Portfolio& p) { return p.sharpe; });
    summary.riskDeltaPct = mean_change([](const optimizer::Portfolio& p) { return p.riskAnnual; });
    summary.returnDeltaPct = mean_change([](const optimizer::Portfolio& p) { return p.returnAnnual; });
    summary.esgDeltaPct = mean_change([](const optimizer::Portfolio& p) { return p.esgMean; });
    return summary;
}

} // namespace esgport::experiment
