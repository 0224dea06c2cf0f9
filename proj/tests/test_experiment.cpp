#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "esgport/experiment.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace esgport;
using namespace esgport::experiment;

namespace {

std::vector<std::string> universe_of(std::size_t n) {
    std::vector<std::string> u;
    for (std::size_t i = 0; i < n; ++i) u.push_back(synthetic::ticker_name(i));
    return u;
}

/// Small synthetic market loaded through the normal ingestion path.
std::pair<PriceTable, EsgTable> small_market(std::size_t etfs, std::size_t days, std::uint64_t seed) {
    synthetic::Options o;
    o.etfs = etfs;
    o.esgRecords = etfs;
    o.days = days;
    o.seed = seed;
    auto m = synthetic::generate(o);
    oracle::TempDir dir("market");
    synthetic::write_prices_wide(m, dir.file("p.csv"));
    synthetic::write_esg(m, dir.file("e.csv"));
    return join_universe(load_prices(dir.file("p.csv")), load_esg(dir.file("e.csv")));
}

optimizer::Portfolio stats(double sharpe, double risk, double ret, double esg) {
    optimizer::Portfolio p;
    p.sharpe = sharpe;
    p.riskAnnual = risk;
    p.returnAnnual = ret;
    p.esgMean = esg;
    return p;
}

RunRecord record(std::size_t run, optimizer::Portfolio mv, optimizer::Portfolio esg) {
    RunRecord r;
    r.runIndex = run;
    r.mv = mv;
    r.esgMv = esg;
    return r;
}

bool same(const optimizer::Portfolio& a, const optimizer::Portfolio& b) {
    return (a.weights.array() == b.weights.array()).all() && a.sharpe == b.sharpe && a.riskAnnual == b.riskAnnual &&
           a.returnAnnual == b.returnAnnual && a.esgMean == b.esgMean && a.objectiveValue == b.objectiveValue;
}

} // namespace

TEST(SampleMarket, WholeUniverse) {
    auto u = universe_of(7);
    EXPECT_EQ(sample_market(u, 7, 3), u);
}

TEST(SampleMarket, DeterministicDistinctSorted) {
    auto u = universe_of(1358);
    auto a = sample_market(u, 100, 0), b = sample_market(u, 100, 0);
    EXPECT_EQ(a, b);
    EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 100u);
    EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
    EXPECT_NE(a, sample_market(u, 100, 1));
}

TEST(SampleMarket, TooLarge) {
    auto u = universe_of(5);
    try {
        sample_market(u, 6, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
    }
}

TEST(SampleMarket, RoughlyUniform) {
    // each of 20 tickers should appear in about 5/20 of 4000 draws
    auto u = universe_of(20);
    std::map<std::string, int> counts;
    for (std::uint64_t s = 0; s < 4000; ++s)
        for (const auto& t : sample_market(u, 5, s)) ++counts[t];
    for (const auto& [t, c] : counts) {
        EXPECT_GT(c, 850) << t;
        EXPECT_LT(c, 1150) << t;
    }
}

TEST(SampleMarket, UnselectedAdditionChangesNothing) {
    auto u = universe_of(300);
    auto base = sample_market(u, 50, 9);
    for (int extra = 0; extra < 20; ++extra) {
        auto bigger = u;
        bigger.push_back("NEW" + std::to_string(extra));
        auto sample = sample_market(bigger, 50, 9);
        if (std::find(sample.begin(), sample.end(), bigger.back()) == sample.end()) {
            EXPECT_EQ(sample, base);
        }
    }
}

TEST(AggregateDeltas, IdenticalPortfoliosGiveZero) {
    auto p = stats(2.0, 0.1, 0.2, 5.0);
    auto s = aggregate_deltas({record(1, p, p), record(2, p, p)});
    EXPECT_EQ(*s.sharpeDeltaPct, 0.0);
    EXPECT_EQ(*s.riskDeltaPct, 0.0);
    EXPECT_EQ(*s.returnDeltaPct, 0.0);
    EXPECT_EQ(*s.esgDeltaPct, 0.0);
    EXPECT_EQ(s.runs, 2u);
}

TEST(AggregateDeltas, MeanOfPerRunChanges) {
    auto s = aggregate_deltas({record(1, stats(2.0, 0.1, 0.2, 5), stats(1.8, 0.1, 0.2, 5)),
                               record(2, stats(1.0, 0.1, 0.2, 5), stats(0.8, 0.1, 0.2, 5))});
    EXPECT_NEAR(*s.sharpeDeltaPct, -15.0, 1e-12);
}

TEST(AggregateDeltas, ReproducesPublishedTwelveRunSummary) {
    // Sharpe, risk %, return %, mean ESG for each run: MV then ESG-MV
    const double table[12][2][4] = {
        {{2.174, 11.486, 31.218, 5.204}, {1.981, 10.062, 26.182, 7.131}},
        {{2.031, 6.265, 18.974, 5.725}, {2.863, 5.440, 21.823, 7.208}},
        {{2.475, 9.441, 29.617, 5.899}, {2.213, 8.687, 25.470, 7.878}},
        {{1.933, 8.751, 23.166, 1.715}, {1.283, 5.836, 13.736, 5.787}},
        {{1.831, 9.447, 23.545, 5.903}, {1.623, 6.613, 16.981, 7.537}},
        {{3.277, 9.430, 37.156, 6.375}, {3.039, 7.503, 29.052, 7.294}},
        {{1.679, 12.03, 26.445, 3.584}, {1.330, 7.332, 16.004, 6.069}},
        {{1.589, 12.58, 26.242, 3.044}, {1.097, 6.234, 13.086, 6.375}},
        {{2.120, 5.550, 18.017, 6.179}, {1.990, 6.140, 18.465, 7.307}},
        {{3.172, 6.482, 26.813, 5.555}, {2.955, 6.420, 25.218, 7.252}},
        {{1.920, 4.841, 15.546, 4.300}, {1.541, 4.775, 13.607, 6.483}},
        {{2.294, 7.709, 23.933, 2.662}, {1.554, 4.475, 13.203, 6.238}},
    };
    std::vector<RunRecord> records;
    for (std::size_t k = 0; k < 12; ++k) {
        const auto& mv = table[k][0];
        const auto& esg = table[k][1];
        records.push_back(record(k + 1, stats(mv[0], mv[1] / 100, mv[2] / 100, mv[3]),
                                 stats(esg[0], esg[1] / 100, esg[2] / 100, esg[3])));
    }
    auto s = aggregate_deltas(records);
    EXPECT_NEAR(*s.sharpeDeltaPct, -12.29, 0.005);
    EXPECT_NEAR(*s.riskDeltaPct, -20.0, 0.05);
    EXPECT_NEAR(*s.returnDeltaPct, -21.32, 0.005);
    EXPECT_NEAR(*s.esgDeltaPct, 65.72, 0.005);
}

TEST(AggregateDeltas, ZeroBaselineIsUndefined) {
    auto s = aggregate_deltas({record(1, stats(1.0, 0.1, 0.2, 0.0), stats(0.9, 0.1, 0.2, 4.0))});
    EXPECT_TRUE(s.sharpeDeltaPct.has_value());
    EXPECT_FALSE(s.esgDeltaPct.has_value());
}

TEST(AggregateDeltas, FailedRunsAreSkipped) {
    RunRecord failed;
    failed.runIndex = 2;
    failed.error = "boom";
    auto s = aggregate_deltas({record(1, stats(2, 0.1, 0.2, 5), stats(1, 0.1, 0.2, 5)), failed});
    EXPECT_EQ(s.runs, 1u);
    EXPECT_NEAR(*s.sharpeDeltaPct, -50.0, 1e-12);
}

TEST(RunExperiment, SingleRunOverWholeSmallUniverse) {
    auto [prices, esg] = small_market(3, 120, 1);
    ExperimentConfig c;
    c.runs = 1;
    c.marketSize = 3;
    c.includeForecast = false;
    auto records = run_experiment(prices, esg, c);
    ASSERT_EQ(records.size(), 1u);
    ASSERT_TRUE(records[0].ok());
    EXPECT_EQ(records[0].runIndex, 1u);
    EXPECT_EQ(records[0].marketSymbols, prices.symbols());
}

TEST(RunExperiment, RepeatableWithForecasts) {
    auto [prices, esg] = small_market(30, 150, 2);
    ExperimentConfig c;
    c.runs = 12;
    c.marketSize = 10;
    c.forest.nTrees = 20;
    c.lag.lags = 5;
    c.lag.horizon = 10;
    auto a = run_experiment(prices, esg, c);
    auto b = run_experiment(prices, esg, c);
    ASSERT_EQ(a.size(), 12u);
    for (std::size_t k = 0; k < a.size(); ++k) {
        ASSERT_TRUE(a[k].ok()) << a[k].error.value_or("");
        EXPECT_EQ(a[k].runIndex, k + 1);
        EXPECT_EQ(a[k].marketSymbols, b[k].marketSymbols);
        EXPECT_TRUE(same(*a[k].mv, *b[k].mv));
        EXPECT_TRUE(same(*a[k].esgMv, *b[k].esgMv));
    }
}

TEST(RunExperiment, TradeOffDirectionPerRun) {
    auto [prices, esg] = small_market(40, 200, 3);
    ExperimentConfig c;
    c.runs = 6;
    c.marketSize = 15;
    c.includeForecast = false;
    for (const auto& r : run_experiment(prices, esg, c)) {
        ASSERT_TRUE(r.ok());
        EXPECT_GE(r.mv->sharpe, r.esgMv->sharpe - 1e-6);
        if (r.mv->sharpe > 0 && r.esgMv->sharpe > 0) {
            EXPECT_GE(r.esgMv->esgMean, r.mv->esgMean - 1e-6);
        }
    }
}

TEST(RunExperiment, UnusedEtfDoesNotAlterRecords) {
    auto [prices, esg] = small_market(25, 120, 4);
    ExperimentConfig c;
    c.runs = 4;
    c.marketSize = 8;
    c.forest.nTrees = 10;
    c.lag.lags = 5;
    c.lag.horizon = 5;
    auto base = run_experiment(prices, esg, c);

    // a copy of the first ETF under a fresh ticker that no run samples
    std::vector<std::string> symbols = prices.symbols();
    std::string fresh;
    for (int attempt = 0; attempt < 100 && fresh.empty(); ++attempt) {
        auto candidate = symbols;
        candidate.push_back("NEW" + std::to_string(attempt));
        bool sampled = false;
        for (std::size_t k = 0; k < c.runs; ++k) {
            auto picked = sample_market(candidate, c.marketSize, c.seedBase + k);
            sampled = sampled || std::find(picked.begin(), picked.end(), candidate.back()) != picked.end();
        }
        if (!sampled) fresh = candidate.back();
    }
    ASSERT_FALSE(fresh.empty());
    symbols.push_back(fresh);
    Eigen::MatrixXd m(prices.prices().rows() + 1, prices.prices().cols());
    m.topRows(prices.prices().rows()) = prices.prices();
    m.row(m.rows() - 1) = prices.prices().row(0);
    PriceTable bigger(symbols, prices.dates(), m);
    EsgTable bigger_esg = esg;
    bigger_esg.insert(fresh, 5.0);

    auto after = run_experiment(bigger, bigger_esg, c);
    for (std::size_t k = 0; k < base.size(); ++k) {
        EXPECT_EQ(base[k].marketSymbols, after[k].marketSymbols);
        EXPECT_TRUE(same(*base[k].mv, *after[k].mv));
        EXPECT_TRUE(same(*base[k].esgMv, *after[k].esgMv));
    }
}

TEST(RunExperiment, SolverFailureIsRecordedNotThrown) {
    // a flat-priced universe has zero risk and zero return everywhere
    std::vector<Date> dates;
    Date d(2021, 1, 4);
    for (int t = 0; t < 30; ++t, d = d.next_business_day()) dates.push_back(d);
    PriceTable flat({"A", "B"}, dates, Eigen::MatrixXd::Constant(2, 30, 10.0));
    EsgTable esg;
    esg.insert("A", 1.0);
    esg.insert("B", 2.0);
    ExperimentConfig c;
    c.runs = 2;
    c.marketSize = 2;
    c.includeForecast = false;
    auto records = run_experiment(flat, esg, c);
    ASSERT_EQ(records.size(), 2u);
    for (const auto& r : records) {
        EXPECT_FALSE(r.ok());
        EXPECT_TRUE(r.error.has_value());
    }
}
