#include <fstream>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "esgport/market_data.hpp"
#include "oracles.hpp"

using namespace esgport;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an esgport::Error";
    return ErrorKind::InvalidConfig;
}

PriceLoadOptions unrestricted() {
    PriceLoadOptions o;
    o.window.reset();
    o.minCoverage = 0.0;
    return o;
}

} // namespace

TEST(LoadPrices, ThreeRowWideFixture) {
    oracle::TempDir dir("prices");
    write_text(dir.file("p.csv"), "date,AAA\n2020-01-02,10\n2020-01-03,11\n2020-01-06,12\n");
    auto table = load_prices(dir.file("p.csv"), unrestricted());
    ASSERT_EQ(table.size(), 1u);
    ASSERT_EQ(table.length(), 3u);
    EXPECT_EQ(table.symbols()[0], "AAA");
    EXPECT_EQ(table.dates()[0], Date(2020, 1, 2));
    EXPECT_EQ(table.dates()[2], Date(2020, 1, 6));
    EXPECT_EQ(table.prices()(0, 0), 10.0);
    EXPECT_EQ(table.prices()(0, 1), 11.0);
    EXPECT_EQ(table.prices()(0, 2), 12.0);
}

TEST(LoadPrices, YahooLayoutUsesAdjustedClose) {
    oracle::TempDir dir("yahoo");
    write_text(dir.file("p.csv"),
               "Date,fund symbol,open,close,adjusted close,low,high,volume\n"
               "2021-11-29,AAA,25.0,25.02,25.01,24.99,25.03,1000\n"
               "2021-11-29,SPY,460,464.6,460.1,458,466,90000000\n"
               "2021-11-30,AAA,25.01,25.03,25.02,25.00,25.04,1100\n"
               "2021-11-30,SPY,462,455.5,451.2,454,464,110000000\n");
    auto table = load_prices(dir.file("p.csv"));
    ASSERT_EQ(table.size(), 2u);
    EXPECT_EQ(table.symbols()[0], "AAA");
    EXPECT_EQ(table.prices()(0, 1), 25.02);
    EXPECT_EQ(table.prices()(1, 0), 460.1);
}

TEST(LoadPrices, LongFormCanonicalHeader) {
    oracle::TempDir dir("long");
    write_text(dir.file("p.csv"), "date,ticker,adj_close\n2020-01-03,B,2\n2020-01-02,A,1\n2020-01-03,A,1.5\n"
                                  "2020-01-02,B,2.5\n");
    auto table = load_prices(dir.file("p.csv"), unrestricted());
    EXPECT_EQ(table.symbols(), (std::vector<std::string>{"B", "A"}));
    EXPECT_EQ(table.prices()(0, 0), 2.5);
    EXPECT_EQ(table.prices()(1, 1), 1.5);
}

TEST(LoadPrices, DistinctErrors) {
    oracle::TempDir dir("errors");
    EXPECT_EQ(kind_of([&] { load_prices(dir.file("absent.csv")); }), ErrorKind::MissingFile);

    write_text(dir.file("empty.csv"), "");
    EXPECT_EQ(kind_of([&] { load_prices(dir.file("empty.csv")); }), ErrorKind::EmptyInput);

    write_text(dir.file("date.csv"), "date,A\n2020-13-01,1\n");
    EXPECT_EQ(kind_of([&] { load_prices(dir.file("date.csv"), unrestricted()); }), ErrorKind::BadDate);

    write_text(dir.file("num.csv"), "date,A\n2020-01-02,abc\n");
    EXPECT_EQ(kind_of([&] { load_prices(dir.file("num.csv"), unrestricted()); }), ErrorKind::BadNumber);

    write_text(dir.file("window.csv"), "date,A\n1999-01-04,1\n");
    EXPECT_EQ(kind_of([&] { load_prices(dir.file("window.csv")); }), ErrorKind::EmptyResult);

    write_text(dir.file("dup.csv"), "date,A,A\n2020-01-02,1,2\n");
    EXPECT_EQ(kind_of([&] { load_prices(dir.file("dup.csv"), unrestricted()); }), ErrorKind::DuplicateTicker);
}

TEST(LoadPrices, DefaultWindowRestrictsDates) {
    oracle::TempDir dir("window");
    write_text(dir.file("p.csv"), "date,A\n2011-11-29,1\n2011-11-30,2\n2021-11-30,3\n2021-12-01,4\n");
    auto table = load_prices(dir.file("p.csv"));
    ASSERT_EQ(table.length(), 2u);
    EXPECT_EQ(table.dates().front(), Date(2011, 11, 30));
    EXPECT_EQ(table.dates().back(), Date(2021, 11, 30));
}

TEST(LoadPrices, CoverageFilterAndFill) {
    oracle::TempDir dir("fill");
    // B has 3/4 native coverage and is dropped at 0.95; C has gaps at both ends.
    write_text(dir.file("p.csv"), "date,A,B,C\n"
                                  "2020-01-02,1,5,\n"
                                  "2020-01-03,2,,7\n"
                                  "2020-01-06,3,6,8\n"
                                  "2020-01-07,4,7,\n");
    PriceLoadOptions o;
    o.window.reset();
    o.minCoverage = 0.5;
    auto table = load_prices(dir.file("p.csv"), o);
    ASSERT_EQ(table.symbols(), (std::vector<std::string>{"A", "B", "C"}));
    EXPECT_EQ(table.series("B"), (std::vector<double>{5, 5, 6, 7}));
    EXPECT_EQ(table.series("C"), (std::vector<double>{7, 7, 8, 8}));

    o.minCoverage = 0.95;
    auto strict = load_prices(dir.file("p.csv"), o);
    EXPECT_EQ(strict.symbols(), (std::vector<std::string>{"A"}));
}

TEST(LoadPrices, CanonicalRoundTripIsBitExact) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> price(0.01, 5000.0);
    oracle::TempDir dir("roundtrip");
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<std::string> symbols;
        for (int i = 0; i < 4 + trial; ++i) symbols.push_back("T" + std::to_string(i));
        std::vector<Date> dates;
        Date d(2015, 3, 2);
        for (int t = 0; t < 30; ++t, d = d.next_business_day()) dates.push_back(d);
        Eigen::MatrixXd m(static_cast<Eigen::Index>(symbols.size()), 30);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index t = 0; t < m.cols(); ++t) m(i, t) = price(rng);
        PriceTable table(symbols, dates, m);
        write_prices(table, dir.file("c.csv"));
        EXPECT_EQ(load_prices(dir.file("c.csv"), unrestricted()), table);
    }
}

TEST(LoadEsg, ReadsScoresAndIgnoresExtraColumns) {
    oracle::TempDir dir("esg");
    write_text(dir.file("e.csv"), "ticker,fund_name,esg_score,environment\nWBIG,Some Fund,9.38,7\nSDP,Other,0,1\n");
    auto esg = load_esg(dir.file("e.csv"));
    EXPECT_EQ(esg.size(), 2u);
    EXPECT_EQ(*esg.score("WBIG"), 9.38);
    EXPECT_EQ(*esg.score("SDP"), 0.0);
}

TEST(LoadEsg, EmptyFileGivesEmptyTable) {
    oracle::TempDir dir("esg_empty");
    write_text(dir.file("e.csv"), "");
    EXPECT_TRUE(load_esg(dir.file("e.csv")).empty());
}

TEST(LoadEsg, Errors) {
    oracle::TempDir dir("esg_err");
    write_text(dir.file("range.csv"), "ticker,esg_score\nX,11\n");
    EXPECT_EQ(kind_of([&] { load_esg(dir.file("range.csv")); }), ErrorKind::ScoreOutOfRange);
    write_text(dir.file("dup.csv"), "ticker,esg_score\nX,1\nX,2\n");
    EXPECT_EQ(kind_of([&] { load_esg(dir.file("dup.csv")); }), ErrorKind::DuplicateTicker);
    write_text(dir.file("col.csv"), "ticker,rating\nX,1\n");
    EXPECT_EQ(kind_of([&] { load_esg(dir.file("col.csv")); }), ErrorKind::MissingColumn);
}

namespace {

PriceTable small_table(const std::vector<std::string>& symbols) {
    std::vector<Date> dates{Date(2020, 1, 2), Date(2020, 1, 3), Date(2020, 1, 6)};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(symbols.size()), 3);
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) << 10.0 + i, 11.0 + 2 * i, 12.0 + i;
    return PriceTable(symbols, dates, m);
}

EsgTable esg_for(const std::vector<std::pair<std::string, double>>& entries) {
    EsgTable esg;
    for (const auto& [t, s] : entries) esg.insert(t, s);
    return esg;
}

} // namespace

TEST(JoinUniverse, Intersection) {
    auto [prices, esg] = join_universe(small_table({"A", "B", "C"}), esg_for({{"B", 1}, {"C", 2}, {"D", 3}}));
    EXPECT_EQ(prices.symbols(), (std::vector<std::string>{"B", "C"}));
    EXPECT_EQ(esg.size(), 2u);
    EXPECT_FALSE(esg.contains("D"));
}

TEST(JoinUniverse, CountsAndZeroScoresRetained) {
    auto [prices, esg] =
        join_universe(small_table({"A", "B", "C", "D", "E"}), esg_for({{"A", 0.0}, {"C", 5}, {"E", 9.38}}));
    EXPECT_EQ(prices.size(), 3u);
    EXPECT_EQ(esg.size(), 3u);
    EXPECT_EQ(*esg.score("A"), 0.0);
}

TEST(JoinUniverse, DisjointIsAnError) {
    EXPECT_EQ(kind_of([&] { join_universe(small_table({"A"}), esg_for({{"B", 1}})); }),
              ErrorKind::EmptyIntersection);
}

TEST(JoinUniverse, Idempotent) {
    auto once = join_universe(small_table({"A", "B", "C"}), esg_for({{"B", 1}, {"C", 2}, {"D", 3}}));
    auto twice = join_universe(once.first, once.second);
    EXPECT_EQ(twice.first, once.first);
    EXPECT_EQ(twice.second, once.second);
}

TEST(ComputeReturns, ConstantSeries) {
    PriceTable t({"A"}, {Date(2020, 1, 2), Date(2020, 1, 3), Date(2020, 1, 6)}, Eigen::MatrixXd::Constant(1, 3, 7.0));
    auto panel = compute_returns(t);
    EXPECT_TRUE((panel.returns.array() == 0.0).all());
    EXPECT_EQ(panel.covDaily(0, 0), 0.0);
}

TEST(ComputeReturns, SingleReturn) {
    Eigen::MatrixXd m(1, 2);
    m << 100, 110;
    auto panel = compute_returns(PriceTable({"A"}, {Date(2020, 1, 2), Date(2020, 1, 3)}, m));
    ASSERT_EQ(panel.returns.cols(), 1);
    EXPECT_NEAR(panel.returns(0, 0), 0.10, 1e-15);
    EXPECT_EQ(panel.dates.front(), Date(2020, 1, 3));
}

TEST(ComputeReturns, PerfectlyAnticorrelatedPair) {
    // returns A = [+1%, -1%], B = [-1%, +1%]; means 0;
    // sample covariance = (0.01*-0.01 + -0.01*0.01) / (2 - 1) = -2e-4
    Eigen::MatrixXd m(2, 3);
    m << 100, 101, 99.99, 100, 99, 99.99;
    auto panel = compute_returns(PriceTable({"A", "B"}, {Date(2020, 1, 2), Date(2020, 1, 3), Date(2020, 1, 6)}, m));
    EXPECT_NEAR(panel.covDaily(0, 1), -2e-4, 1e-15);
    EXPECT_EQ(panel.covDaily(0, 1), panel.covDaily(1, 0));
    const double corr = panel.covDaily(0, 1) / std::sqrt(panel.covDaily(0, 0) * panel.covDaily(1, 1));
    EXPECT_NEAR(corr, -1.0, 1e-12);
}

TEST(ComputeReturns, TooFewDates) {
    PriceTable t({"A"}, {Date(2020, 1, 2)}, Eigen::MatrixXd::Constant(1, 1, 1.0));
    EXPECT_EQ(kind_of([&] { compute_returns(t); }), ErrorKind::TooShort);
}

TEST(ComputeReturnsProperty, CovarianceSymmetricPsdAndRowsIndependent) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> shock(0.0, 0.02);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + trial % 9, days = 3 + (trial * 7) % 40;
        std::vector<std::string> symbols;
        for (int i = 0; i < n; ++i) symbols.push_back("S" + std::to_string(i));
        std::vector<Date> dates;
        Date d(2018, 1, 2);
        for (int t = 0; t < days; ++t, d = d.next_business_day()) dates.push_back(d);
        Eigen::MatrixXd m(n, days);
        for (int i = 0; i < n; ++i) {
            m(i, 0) = 50.0;
            for (int t = 1; t < days; ++t) m(i, t) = m(i, t - 1) * (1.0 + shock(rng));
        }
        PriceTable table(symbols, dates, m);
        auto panel = compute_returns(table);
        EXPECT_TRUE(panel.covDaily.isApprox(panel.covDaily.transpose(), 0.0));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(panel.covDaily);
        EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-10);
        for (int i = 0; i < n; ++i)
            for (int t = 0; t + 1 < days; ++t) EXPECT_EQ(panel.returns(i, t), m(i, t + 1) / m(i, t) - 1.0);

        // dropping the first ETF leaves every other row untouched
        std::vector<std::string> rest(symbols.begin() + 1, symbols.end());
        auto reduced = compute_returns(table.select(rest));
        for (int i = 1; i < n; ++i) {
            EXPECT_TRUE((reduced.returns.row(i - 1).array() == panel.returns.row(i).array()).all());
            for (int j = 1; j < n; ++j) EXPECT_EQ(reduced.covDaily(i - 1, j - 1), panel.covDaily(i, j));
        }
    }
}
