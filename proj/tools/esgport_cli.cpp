// esgport: ingest ETF prices and ESG scores, forecast adjusted closes with a
// random forest, and compare maximum-Sharpe against ESG-weighted-Sharpe
// allocations over randomised markets.
//
// Exit codes: 0 success, 1 error, 2 completed with per-ETF or per-run
// failures (listed in manifest.json).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "esgport/esgport.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace esgport;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::MissingFile, path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof buffer);
        EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

std::string utc_now() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buffer;
}

/// Records configuration, input digests and failures next to every output set.
class Manifest {
public:
    explicit Manifest(std::string command) {
        doc_["tool"] = "esgport";
        doc_["version"] = kVersion;
        doc_["command"] = std::move(command);
        doc_["started_at"] = utc_now();
        doc_["config"] = json::object();
        doc_["inputs"] = json::array();
        doc_["outputs"] = json::array();
        doc_["failures"] = json::array();
    }

    json& config() { return doc_["config"]; }

    void input(const std::string& path) {
        doc_["inputs"].push_back({{"path", path}, {"sha256", sha256_file(path)}, {"bytes", fs::file_size(path)}});
    }

    void output(const std::string& path) { doc_["outputs"].push_back(path); }
    void failure(const std::string& what, const std::string& why) {
        doc_["failures"].push_back({{"item", what}, {"reason", why}});
    }
    bool partial() const { return !doc_["failures"].empty(); }

    void write(const std::string& dir) {
        doc_["finished_at"] = utc_now();
        doc_["status"] = partial() ? "partial" : "ok";
        std::ofstream out(dir + "/manifest.json", std::ios::trunc);
        out << doc_.dump(2) << '\n';
    }

private:
    json doc_;
};

/// Flags shared across subcommands.
struct Options {
    std::string prices;
    std::string esg;
    std::string dataset;
    std::string out = "out";
    std::string window;
    double minCoverage = 0.95;
    std::uint64_t seed = 0;
    double riskFree = 0.0;
    std::size_t trees = 10000;
    std::size_t lags = 20;
    std::size_t horizon = 42;
    std::size_t minLeaf = 2;
    std::size_t maxDepth = 0;
    double featureFraction = 1.0 / 3.0;
    std::size_t runs = 12;
    std::size_t marketSize = 100;
    std::size_t multistarts = 8;
    std::size_t maxIterations = 500;
    double tolerance = 1e-9;
    std::string ticker = "all";
    std::string tickers;
    std::string results;
    bool noForecast = false;
    unsigned threads = 0;
};

std::string prices_path(const Options& o) {
    if (!o.prices.empty()) return o.prices;
    if (!o.dataset.empty()) return o.dataset + "/prices.csv";
    throw Error(ErrorKind::MissingFile, "pass --prices or --dataset");
}

std::string esg_path(const Options& o) {
    if (!o.esg.empty()) return o.esg;
    if (!o.dataset.empty()) return o.dataset + "/esg.csv";
    throw Error(ErrorKind::MissingFile, "pass --esg or --dataset");
}

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, path);
}

PriceLoadOptions load_options(const Options& o, bool default_window) {
    PriceLoadOptions options;
    options.minCoverage = o.minCoverage;
    if (!o.window.empty()) options.window = DateRange::parse(o.window);
    else if (!default_window) options.window.reset();
    return options;
}

forecast::LagConfig lag_config(const Options& o) { return {o.lags, o.horizon}; }

forecast::ForestConfig forest_config(const Options& o) {
    forecast::ForestConfig config;
    config.nTrees = o.trees;
    config.minLeaf = o.minLeaf;
    if (o.maxDepth > 0) config.maxDepth = o.maxDepth;
    config.featureFraction = o.featureFraction;
    config.seed = o.seed;
    config.threads = o.threads;
    return config;
}

optimizer::SolverConfig solver_config(const Options& o) {
    optimizer::SolverConfig config;
    config.maxIterations = o.maxIterations;
    config.tolerance = o.tolerance;
    config.multistarts = o.multistarts;
    config.seed = o.seed;
    config.threads = o.threads;
    return config;
}

json config_json(const Options& o) {
    return {{"prices", o.prices},       {"esg", o.esg},
            {"dataset", o.dataset},     {"out", o.out},
            {"window", o.window},       {"min_coverage", o.minCoverage},
            {"seed", o.seed},           {"risk_free", o.riskFree},
            {"trees", o.trees},         {"lags", o.lags},
            {"horizon", o.horizon},     {"min_leaf", o.minLeaf},
            {"max_depth", o.maxDepth},  {"feature_fraction", o.featureFraction},
            {"runs", o.runs},           {"market_size", o.marketSize},
            {"multistarts", o.multistarts}, {"max_iterations", o.maxIterations},
            {"tolerance", o.tolerance}, {"ticker", o.ticker},
            {"tickers", o.tickers},     {"results", o.results},
            {"no_forecast", o.noForecast}};
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto& field : csv::split(text))
        if (!field.empty()) out.push_back(field);
    return out;
}

int finish(Manifest& manifest, const Options& o) {
    manifest.write(o.out);
    return manifest.partial() ? kExitPartial : 0;
}

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o) {
    const auto price_file = prices_path(o), esg_file = esg_path(o);
    require_file(price_file);
    require_file(esg_file);
    fs::create_directories(o.out);
    Manifest manifest("ingest");
    manifest.config() = config_json(o);
    manifest.input(price_file);
    manifest.input(esg_file);

    auto prices = load_prices(price_file, load_options(o, true));
    auto esg = load_esg(esg_file);
    auto [universe, scores] = join_universe(prices, esg);

    write_prices(universe, o.out + "/prices.csv");
    write_esg(scores, o.out + "/esg.csv");
    manifest.output(o.out + "/prices.csv");
    manifest.output(o.out + "/esg.csv");
    manifest.config()["priced_etfs"] = prices.size();
    manifest.config()["esg_records"] = esg.size();
    manifest.config()["retained_etfs"] = universe.size();

    std::cout << prices.size() << " priced ETFs, " << esg.size() << " ESG records, " << universe.size()
              << " retained over " << universe.length() << " trading days (" << universe.dates().front().to_string()
              << " to " << universe.dates().back().to_string() << ")\n";
    return finish(manifest, o);
}

int cmd_forecast(const Options& o) {
    const auto price_file = prices_path(o);
    require_file(price_file);
    fs::create_directories(o.out);
    Manifest manifest("forecast");
    manifest.config() = config_json(o);
    manifest.input(price_file);

    auto prices = load_prices(price_file, load_options(o, false));
    std::vector<std::string> tickers =
        o.ticker == "all" ? prices.symbols() : split_list(o.ticker);
    for (const auto& t : tickers)
        if (!prices.index_of(t)) throw Error(ErrorKind::MissingColumn, "no prices for " + t);

    const auto lag = lag_config(o);
    const auto forest = forest_config(o);
    const auto dates = report::forecast_dates(prices.dates().back(), lag.horizon);

    csv::Writer forecasts(o.out + "/forecast.csv");
    forecasts.row(report::kForecastHeader);
    csv::Writer metrics_out(o.out + "/metrics.csv");
    metrics_out.row(report::kMetricsHeader);
    csv::Writer predictions(o.out + "/test_predictions.csv");
    predictions.row({"ticker", "date", "actual", "rf", "rf_low", "rf_high", "naive"});

    std::vector<std::string> extended_symbols;
    std::vector<std::vector<double>> extended_rows;

    for (const auto& ticker : tickers) {
        try {
            auto series = prices.series(ticker);
            auto config = forest;
            config.seed = experiment::ticker_seed(o.seed, ticker);

            // held-out evaluation on the last fifth
            auto [train, test] = forecast::split_train_test(series);
            auto eval_model = forecast::fit_forest(forecast::make_supervised(train, lag), config, lag);
            auto rf_test = forecast::predict_test_with_bounds(eval_model, train, test);
            auto naive_test = forecast::naive_predict_test(train, test);
            for (std::size_t j = 0; j < test.size(); ++j)
                predictions.row({ticker, prices.dates()[train.size() + j].to_string(), report::num(test[j]),
                                 report::num(rf_test.pointForecast[j]), report::num(rf_test.intervalLow[j]),
                                 report::num(rf_test.intervalHigh[j]), report::num(naive_test[j])});

            auto rf_errors = metrics::scaled_errors(test, rf_test.pointForecast, train);
            auto naive_errors = metrics::scaled_errors(test, naive_test, train);
            if (!rf_errors || !naive_errors) {
                manifest.failure(ticker, "undefined scaled error: constant training series");
            } else {
                auto [lo, hi] = report::mean_interval(rf_test);
                report::append_metrics_row(metrics_out, {ticker, "RF", *rf_errors, lo, hi});
                double naive_lo = 0.0;
                for (double v : naive_test) naive_lo += v;
                naive_lo /= static_cast<double>(naive_test.size());
                report::append_metrics_row(metrics_out, {ticker, "Naive", *naive_errors, naive_lo, naive_lo});
                std::cout << ticker << ": RF MASE " << csv::format_fixed(rf_errors->mase, 4) << " RMSSE "
                          << csv::format_fixed(rf_errors->rmsse, 4)
                          << (rf_errors->beats_naive() ? " (beats naive)" : " (does not beat naive)") << '\n';
            }

            // production forecast from the full history
            auto model = forecast::fit_forest(forecast::make_supervised(series, lag), config, lag);
            auto result = forecast::forecast_horizon(model, series, lag.horizon);
            report::append_forecast_rows(forecasts, ticker, dates, result);
            series.insert(series.end(), result.pointForecast.begin(), result.pointForecast.end());
            extended_symbols.push_back(ticker);
            extended_rows.push_back(std::move(series));
        } catch (const Error& e) {
            manifest.failure(ticker, e.what());
        }
    }

    if (!extended_symbols.empty()) {
        auto all_dates = prices.dates();
        all_dates.insert(all_dates.end(), dates.begin(), dates.end());
        Eigen::MatrixXd matrix(static_cast<Eigen::Index>(extended_rows.size()),
                               static_cast<Eigen::Index>(all_dates.size()));
        for (std::size_t i = 0; i < extended_rows.size(); ++i)
            for (std::size_t t = 0; t < all_dates.size(); ++t)
                matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = extended_rows[i][t];
        write_prices(PriceTable(extended_symbols, all_dates, std::move(matrix)), o.out + "/extended_prices.csv");
        manifest.output(o.out + "/extended_prices.csv");
    }
    for (auto name : {"forecast.csv", "metrics.csv", "test_predictions.csv"}) manifest.output(o.out + "/" + name);
    return finish(manifest, o);
}

int cmd_optimize(const Options& o) {
    const auto price_file = prices_path(o), esg_file = esg_path(o);
    require_file(price_file);
    require_file(esg_file);
    fs::create_directories(o.out);
    Manifest manifest("optimize");
    manifest.config() = config_json(o);
    manifest.input(price_file);
    manifest.input(esg_file);

    auto [prices, esg] = join_universe(load_prices(price_file, load_options(o, false)), load_esg(esg_file));
    std::vector<std::string> symbols;
    if (!o.tickers.empty()) symbols = split_list(o.tickers);
    else if (o.marketSize > 0 && o.marketSize < prices.size())
        symbols = experiment::sample_market(prices.symbols(), o.marketSize, o.seed);
    else symbols = prices.symbols();

    auto record = experiment::run_market(prices, esg, symbols, 1, o.riskFree, solver_config(o));
    if (!record.ok()) throw Error(ErrorKind::DegenerateMarket, record.error.value_or("optimisation failed"));
    report::write_results(o.out + "/results.csv", {record});
    report::write_weights(o.out + "/weights.csv", record, esg);
    manifest.output(o.out + "/results.csv");
    manifest.output(o.out + "/weights.csv");
    std::cout << report::format_results_table({record});
    for (auto* p : {&*record.mv, &*record.esgMv})
        if (p->nonPositiveSharpe) std::cout << "warning: optimum has a non-positive Sharpe ratio\n";
    return finish(manifest, o);
}

int cmd_experiment(const Options& o) {
    const auto price_file = prices_path(o), esg_file = esg_path(o);
    require_file(price_file);
    require_file(esg_file);
    fs::create_directories(o.out);
    Manifest manifest("experiment");
    manifest.config() = config_json(o);
    manifest.input(price_file);
    manifest.input(esg_file);

    auto [prices, esg] = join_universe(load_prices(price_file, load_options(o, false)), load_esg(esg_file));
    if (o.marketSize > prices.size())
        throw Error(ErrorKind::InvalidConfig, "market size " + std::to_string(o.marketSize) + " exceeds universe of " +
                                                  std::to_string(prices.size()));

    experiment::ExperimentConfig config;
    config.runs = o.runs;
    config.marketSize = o.marketSize;
    config.seedBase = o.seed;
    config.riskFree = o.riskFree;
    config.solver = solver_config(o);
    config.includeForecast = !o.noForecast;
    config.lag = lag_config(o);
    config.forest = forest_config(o);
    config.threads = o.threads;

    auto records = experiment::run_experiment(prices, esg, config);
    auto summary = experiment::aggregate_deltas(records);

    report::write_results(o.out + "/results.csv", records);
    report::write_summary(o.out + "/summary.csv", summary);
    manifest.output(o.out + "/results.csv");
    manifest.output(o.out + "/summary.csv");
    for (const auto& r : records) {
        if (!r.ok()) {
            manifest.failure("run " + std::to_string(r.runIndex), r.error.value_or("incomplete"));
            continue;
        }
        auto path = o.out + "/weights_run_" + std::to_string(r.runIndex) + ".csv";
        report::write_weights(path, r, esg);
        manifest.output(path);
    }
    std::cout << report::format_results_table(records) << '\n' << report::format_summary(summary);
    return finish(manifest, o);
}

int cmd_report(const Options& o) {
    require_file(o.results);
    auto records = report::records_from_rows(report::read_results(o.results));
    auto summary = experiment::aggregate_deltas(records);
    std::cout << report::format_results_table(records) << '\n' << report::format_summary(summary);
    if (!o.out.empty() && o.out != "-") {
        fs::create_directories(o.out);
        report::write_summary(o.out + "/summary.csv", summary);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"ESG-aware portfolio optimisation with random-forest price forecasts"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    auto add_inputs = [&](CLI::App* cmd) {
        cmd->add_option("--prices", o.prices, "price CSV (wide or long form)");
        cmd->add_option("--esg", o.esg, "ESG CSV with ticker,esg_score");
        cmd->add_option("--dataset", o.dataset, "directory holding prices.csv and esg.csv");
        cmd->add_option("--window", o.window, "trading-day window <start>:<end>");
        cmd->add_option("--min-coverage", o.minCoverage, "drop ETFs with less native coverage")->capture_default_str();
    };
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", o.out, "output directory")->capture_default_str();
        cmd->add_option("--seed", o.seed, "base seed for all randomness")->capture_default_str();
        cmd->add_option("--threads", o.threads, "worker threads (0 = all cores); results do not depend on it");
    };
    auto add_forest = [&](CLI::App* cmd) {
        cmd->add_option("--trees", o.trees, "trees per forest")->capture_default_str();
        cmd->add_option("--lags", o.lags, "lagged closes used as features")->capture_default_str();
        cmd->add_option("--horizon", o.horizon, "trading days to forecast")->capture_default_str();
        cmd->add_option("--min-leaf", o.minLeaf, "minimum rows per leaf")->capture_default_str();
        cmd->add_option("--max-depth", o.maxDepth, "tree depth cap (0 = none)")->capture_default_str();
        cmd->add_option("--feature-fraction", o.featureFraction, "lags sampled per split")->capture_default_str();
    };
    auto add_solver = [&](CLI::App* cmd) {
        cmd->add_option("--risk-free", o.riskFree, "annual risk-free return as a fraction")->capture_default_str();
        cmd->add_option("--multistarts", o.multistarts, "solver starting points")->capture_default_str();
        cmd->add_option("--max-iterations", o.maxIterations, "iterations per start")->capture_default_str();
        cmd->add_option("--tolerance", o.tolerance, "objective-change tolerance")->capture_default_str();
    };

    auto* ingest = app.add_subcommand("ingest", "join prices with ESG scores and write a canonical dataset");
    add_inputs(ingest);
    add_common(ingest);

    auto* fc = app.add_subcommand("forecast", "evaluate and forecast adjusted closes with a random forest");
    add_inputs(fc);
    add_common(fc);
    add_forest(fc);
    fc->add_option("--ticker", o.ticker, "ticker, comma list, or 'all'")->capture_default_str();

    auto* opt = app.add_subcommand("optimize", "MV and ESG-MV weights for one market");
    add_inputs(opt);
    add_common(opt);
    add_solver(opt);
    opt->add_option("--tickers", o.tickers, "comma-separated market (default: whole universe)");
    opt->add_option("--market-size", o.marketSize, "sample this many ETFs when --tickers is absent");
    o.marketSize = 0;

    auto* exp = app.add_subcommand("experiment", "randomised-market comparison of MV and ESG-MV");
    add_inputs(exp);
    add_common(exp);
    add_forest(exp);
    add_solver(exp);
    exp->add_option("--runs", o.runs, "number of random markets")->capture_default_str();
    exp->add_option("--market-size", o.marketSize, "ETFs per market");
    exp->add_flag("--no-forecast", o.noForecast, "optimise on history only");

    auto* rep = app.add_subcommand("report", "summarise an experiment results CSV");
    rep->add_option("--results", o.results, "results.csv written by experiment")->required();
    rep->add_option("--out", o.out, "directory for summary.csv ('-' for none)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (exp->parsed() && exp->count("--market-size") == 0) o.marketSize = 100;
    if (rep->parsed() && rep->count("--out") == 0) o.out = "-";

    try {
        if (ingest->parsed()) return cmd_ingest(o);
        if (fc->parsed()) return cmd_forecast(o);
        if (opt->parsed()) return cmd_optimize(o);
        if (exp->parsed()) return cmd_experiment(o);
        if (rep->parsed()) return cmd_report(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
