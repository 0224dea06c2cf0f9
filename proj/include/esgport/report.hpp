#pragma once

/**
 * @file report.hpp
 * @brief CSV outputs for forecasts, scaled-error metrics, optimisation
 *        results, per-ETF weights and delta summaries.
 *
 * Numbers are written with the shortest round-trip representation so that
 * identical inputs give byte-identical files. Percent columns are scaled by
 * 100 here and nowhere else.
 */

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "esgport/csv.hpp"
#include "esgport/date.hpp"
#include "esgport/experiment.hpp"
#include "esgport/forecast.hpp"
#include "esgport/market_data.hpp"
#include "esgport/metrics.hpp"
#include "esgport/optimizer.hpp"

namespace esgport::report {

inline std::string num(double v) { return csv::format_double(v); }

inline std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : "undefined"; }

// --- forecasts -------------------------------------------------------------

inline const std::vector<std::string> kForecastHeader{"ticker", "date", "point", "low", "high"};

inline void append_forecast_rows(csv::Writer& out, const std::string& ticker, const std::vector<Date>& dates,
                                 const forecast::ForecastResult& result) {
    for (std::size_t h = 0; h < result.size(); ++h)
        out.row({ticker, dates[h].to_string(), num(result.pointForecast[h]), num(result.intervalLow[h]),
                 num(result.intervalHigh[h])});
}

/// Business days following `last`.
inline std::vector<Date> forecast_dates(Date last, std::size_t horizon) {
    std::vector<Date> dates;
    for (std::size_t h = 0; h < horizon; ++h) dates.push_back(last = last.next_business_day());
    return dates;
}

// --- metrics ---------------------------------------------------------------

inline const std::vector<std::string> kMetricsHeader{"ticker", "model", "mase", "rmsse", "ci_low", "ci_high"};

struct MetricsRow {
    std::string ticker;
    std::string model;
    metrics::ScaledErrorReport errors;
    double ciLow = 0.0;
    double ciHigh = 0.0;
};

/// Interval reported beside a model's scaled errors: the per-step ensemble
/// bounds averaged over the test range.
inline std::pair<double, double> mean_interval(const forecast::ForecastResult& result) {
    double lo = 0.0, hi = 0.0;
    for (std::size_t j = 0; j < result.size(); ++j) {
        lo += result.intervalLow[j];
        hi += result.intervalHigh[j];
    }
    const auto n = static_cast<double>(std::max<std::size_t>(result.size(), 1));
    return {lo / n, hi / n};
}

inline void append_metrics_row(csv::Writer& out, const MetricsRow& row) {
    out.row({row.ticker, row.model, num(row.errors.mase), num(row.errors.rmsse), num(row.ciLow), num(row.ciHigh)});
}

// --- optimisation results --------------------------------------------------

inline const std::vector<std::string> kResultsHeader{"run",        "model",    "sharpe",    "risk_pct",
                                                     "return_pct", "mean_esg", "objective", "converged"};

inline std::vector<std::string> result_fields(std::size_t run, optimizer::Objective model,
                                              const optimizer::Portfolio& p) {
    return {std::to_string(run),       optimizer::to_string(model), num(p.sharpe),   num(100.0 * p.riskAnnual),
            num(100.0 * p.returnAnnual), num(p.esgMean),             num(p.objectiveValue),
            p.converged ? "true" : "false"};
}

/// Two rows per successful run; failed runs are left out.
inline void write_results(const std::string& path, const std::vector<experiment::RunRecord>& records) {
    csv::Writer out(path);
    out.row(kResultsHeader);
    for (const auto& r : records) {
        if (!r.ok()) continue;
        out.row(result_fields(r.runIndex, optimizer::Objective::Sharpe, *r.mv));
        out.row(result_fields(r.runIndex, optimizer::Objective::EsgSharpe, *r.esgMv));
    }
}

struct ResultRow {
    std::size_t run = 0;
    std::string model;
    double sharpe = 0.0, riskPct = 0.0, returnPct = 0.0, meanEsg = 0.0, objective = 0.0;
    bool converged = false;
};

inline std::vector<ResultRow> read_results(const std::string& path) {
    auto table = csv::read_file(path);
    if (table.header.empty()) throw Error(ErrorKind::EmptyInput, path);
    std::vector<std::size_t> cols;
    for (const auto& name : kResultsHeader) {
        auto c = table.column({name});
        if (!c) throw Error(ErrorKind::MissingColumn, name + " in " + path);
        cols.push_back(*c);
    }
    std::vector<ResultRow> rows;
    for (const auto& fields : table.rows) {
        if (fields.size() < table.header.size()) throw Error(ErrorKind::BadNumber, "short row in " + path);
        auto number = [&](std::size_t k) {
            auto v = csv::parse_double(fields[cols[k]]);
            if (!v) throw Error(ErrorKind::BadNumber, "'" + fields[cols[k]] + "' in " + path);
            return *v;
        };
        ResultRow row;
        row.run = static_cast<std::size_t>(number(0));
        row.model = fields[cols[1]];
        row.sharpe = number(2);
        row.riskPct = number(3);
        row.returnPct = number(4);
        row.meanEsg = number(5);
        row.objective = number(6);
        row.converged = fields[cols[7]] == "true";
        rows.push_back(row);
    }
    return rows;
}

/// Rebuilds run records (statistics only, no weights) from result rows.
inline std::vector<experiment::RunRecord> records_from_rows(const std::vector<ResultRow>& rows) {
    std::map<std::size_t, experiment::RunRecord> by_run;
    for (const auto& row : rows) {
        optimizer::Portfolio p;
        p.sharpe = row.sharpe;
        p.riskAnnual = row.riskPct / 100.0;
        p.returnAnnual = row.returnPct / 100.0;
        p.esgMean = row.meanEsg;
        p.objectiveValue = row.objective;
        p.converged = row.converged;
        auto& record = by_run[row.run];
        record.runIndex = row.run;
        if (row.model == "MV") record.mv = p;
        else if (row.model == "ESG-MV") record.esgMv = p;
        else throw Error(ErrorKind::BadNumber, "unknown model '" + row.model + "'");
    }
    std::vector<experiment::RunRecord> out;
    for (auto& [run, record] : by_run) out.push_back(std::move(record));
    return out;
}

/// Fixed-width text rendering in the layout of the run comparison table.
inline std::string format_results_table(const std::vector<experiment::RunRecord>& records) {
    std::ostringstream out;
    out << std::left << std::setw(5) << "Run" << std::setw(8) << "Model" << std::right << std::setw(10) << "Sharpe"
        << std::setw(10) << "Risk%" << std::setw(10) << "Return%" << std::setw(10) << "MeanESG" << '\n';
    for (const auto& r : records) {
        if (!r.ok()) {
            out << std::left << std::setw(5) << r.runIndex << "failed: " << r.error.value_or("incomplete") << '\n';
            continue;
        }
        for (auto [model, p] : {std::pair{"MV", &*r.mv}, std::pair{"ESG-MV", &*r.esgMv}}) {
            out << std::left << std::setw(5) << (std::string(model) == "MV" ? std::to_string(r.runIndex) : "")
                << std::setw(8) << model << std::right << std::setw(10) << csv::format_fixed(p->sharpe, 3)
                << std::setw(10) << csv::format_fixed(100.0 * p->riskAnnual, 3) << std::setw(10)
                << csv::format_fixed(100.0 * p->returnAnnual, 3) << std::setw(10) << csv::format_fixed(p->esgMean, 3)
                << '\n';
        }
    }
    return out.str();
}

// --- weights ---------------------------------------------------------------

inline const std::vector<std::string> kWeightsHeader{"ticker", "esg_score", "mv_weight_pct", "esg_mv_weight_pct"};

/// Per-ETF weights of one run, ascending by ESG score then ticker.
inline void write_weights(const std::string& path, const experiment::RunRecord& record, const EsgTable& esg) {
    if (!record.ok()) throw Error(ErrorKind::InvalidConfig, "run " + std::to_string(record.runIndex) + " failed");
    std::vector<std::tuple<double, std::string, std::size_t>> order;
    for (std::size_t i = 0; i < record.marketSymbols.size(); ++i) {
        auto score = esg.score(record.marketSymbols[i]);
        if (!score) throw Error(ErrorKind::MissingEsg, record.marketSymbols[i]);
        order.emplace_back(*score, record.marketSymbols[i], i);
    }
    std::sort(order.begin(), order.end());
    csv::Writer out(path);
    out.row(kWeightsHeader);
    for (const auto& [score, ticker, i] : order) {
        const auto k = static_cast<Eigen::Index>(i);
        out.row({ticker, num(score), num(100.0 * record.mv->weights(k)), num(100.0 * record.esgMv->weights(k))});
    }
}

// --- summary ---------------------------------------------------------------

inline const std::vector<std::string> kSummaryHeader{"runs", "sharpe_delta_pct", "risk_delta_pct", "return_delta_pct",
                                                     "esg_delta_pct"};

inline void write_summary(const std::string& path, const experiment::DeltaSummary& s) {
    csv::Writer out(path);
    out.row(kSummaryHeader);
    out.row({std::to_string(s.runs), opt_num(s.sharpeDeltaPct), opt_num(s.riskDeltaPct), opt_num(s.returnDeltaPct),
             opt_num(s.esgDeltaPct)});
}

inline std::string format_summary(const experiment::DeltaSummary& s) {
    auto pct = [](const std::optional<double>& v) { return v ? csv::format_fixed(*v, 2) + "%" : "undefined"; };
    std::ostringstream out;
    out << "runs: " << s.runs << '\n'
        << "mean Sharpe change:      " << pct(s.sharpeDeltaPct) << '\n'
        << "mean risk change:        " << pct(s.riskDeltaPct) << '\n'
        << "mean return change:      " << pct(s.returnDeltaPct) << '\n'
        << "mean ESG score change:   " << pct(s.esgDeltaPct) << '\n';
    return out.str();
}

} // namespace esgport::report
