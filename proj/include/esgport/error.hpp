#pragma once

#include <stdexcept>
#include <string>

namespace esgport {

enum class ErrorKind {
    MissingFile,
    EmptyInput,
    BadDate,
    BadNumber,
    EmptyResult,
    MissingColumn,
    DuplicateTicker,
    DuplicateDate,
    ScoreOutOfRange,
    EmptyIntersection,
    TooShort,
    InvalidConfig,
    DimensionMismatch,
    NotPositiveSemidefinite,
    DegenerateMarket,
    MissingEsg,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::EmptyInput: return "empty input";
    case ErrorKind::BadDate: return "unparseable date";
    case ErrorKind::BadNumber: return "non-numeric value";
    case ErrorKind::EmptyResult: return "empty result after filtering";
    case ErrorKind::MissingColumn: return "missing column";
    case ErrorKind::DuplicateTicker: return "duplicate ticker";
    case ErrorKind::DuplicateDate: return "duplicate date";
    case ErrorKind::ScoreOutOfRange: return "score out of range";
    case ErrorKind::EmptyIntersection: return "empty intersection";
    case ErrorKind::TooShort: return "series too short";
    case ErrorKind::InvalidConfig: return "invalid configuration";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::NotPositiveSemidefinite: return "covariance not positive semidefinite";
    case ErrorKind::DegenerateMarket: return "degenerate market";
    case ErrorKind::MissingEsg: return "missing ESG score";
    }
    return "unknown error";
}

/// Every failure raised by the library carries a kind so callers can
/// distinguish, say, a bad date from a missing file without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + (detail.empty() ? "" : ": " + detail)),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace esgport
