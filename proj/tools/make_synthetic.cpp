// Writes a seeded synthetic ETF market (prices.csv, esg.csv) to a directory.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
    esgport::synthetic::Options options;
    std::string out = ".";
    std::string start = options.start.to_string();

    CLI::App app{"Generate a synthetic ETF price and ESG dataset"};
    app.add_option("--etfs", options.etfs, "number of ETFs")->capture_default_str();
    app.add_option("--days", options.days, "number of trading days")->capture_default_str();
    app.add_option("--esg-records", options.esgRecords, "ETFs that receive an ESG score")->capture_default_str();
    app.add_option("--start", start, "first trading day")->capture_default_str();
    app.add_option("--missing-rate", options.missingRate, "fraction of blank price cells")->capture_default_str();
    app.add_option("--seed", options.seed, "generator seed")->capture_default_str();
    app.add_option("--out", out, "output directory")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        options.start = esgport::Date::parse_or_throw(start);
        std::filesystem::create_directories(out);
        auto market = esgport::synthetic::generate(options);
        esgport::synthetic::write_prices_wide(market, out + "/prices.csv");
        esgport::synthetic::write_esg(market, out + "/esg.csv");
        std::cout << "wrote " << market.tickers.size() << " ETFs x " << market.dates.size() << " days, "
                  << market.esg.size() << " ESG records to " << out << '\n';
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
