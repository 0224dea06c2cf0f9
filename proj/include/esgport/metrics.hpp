#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "esgport/error.hpp"

namespace esgport::metrics {

/// Scaled forecast errors against the in-sample one-step naive forecast.
struct ScaledErrorReport {
    double mase = 0.0;
    double rmsse = 0.0;
    double naiveDenominator = 0.0;
    std::vector<double> testErrors; ///< actual - predicted

    /// Scaled errors below one beat the average one-step naive forecast.
    bool beats_naive() const { return mase < 1.0; }
};

/// Mean absolute one-step difference of the training series. Returns nullopt
/// when the series is constant: scaled errors are then undefined.
inline std::optional<double> naive_denominator(std::span<const double> train) {
    if (train.size() < 2) throw Error(ErrorKind::TooShort, "naive denominator needs at least 2 training values");
    double sum = 0.0;
    for (std::size_t t = 1; t < train.size(); ++t) sum += std::abs(train[t] - train[t - 1]);
    if (sum == 0.0) return std::nullopt;
    return sum / static_cast<double>(train.size() - 1);
}

/// Nullopt signals an undefined scaled error (constant training series).
inline std::optional<ScaledErrorReport> scaled_errors(std::span<const double> actual,
                                                      std::span<const double> predicted,
                                                      std::span<const double> train) {
    if (actual.size() != predicted.size())
        throw Error(ErrorKind::DimensionMismatch, "actual and predicted lengths differ");
    if (actual.empty()) throw Error(ErrorKind::TooShort, "scaled errors need at least one test point");
    auto denom = naive_denominator(train);
    if (!denom) return std::nullopt;

    ScaledErrorReport report;
    report.naiveDenominator = *denom;
    report.testErrors.resize(actual.size());
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t j = 0; j < actual.size(); ++j) {
        double e = actual[j] - predicted[j];
        double q = e / *denom;
        report.testErrors[j] = e;
        abs_sum += std::abs(q);
        sq_sum += q * q;
    }
    const auto n = static_cast<double>(actual.size());
    report.mase = abs_sum / n;
    report.rmsse = std::sqrt(sq_sum / n);
    return report;
}

inline std::optional<double> mase(std::span<const double> actual, std::span<const double> predicted,
                                  std::span<const double> train) {
    auto report = scaled_errors(actual, predicted, train);
    if (!report) return std::nullopt;
    return report->mase;
}

inline std::optional<double> rmsse(std::span<const double> actual, std::span<const double> predicted,
                                   std::span<const double> train) {
    auto report = scaled_errors(actual, predicted, train);
    if (!report) return std::nullopt;
    return report->rmsse;
}

} // namespace esgport::metrics
