#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "esgport/error.hpp"

namespace esgport {

/// Calendar date stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days days) : days_(days.time_since_epoch().count()) {}
    constexpr Date(int year, unsigned month, unsigned day)
        : Date(std::chrono::sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}}) {}

    /// Strict `YYYY-MM-DD`.
    static std::optional<Date> parse(std::string_view text) {
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
        auto digits = [&](std::size_t from, std::size_t count) -> std::optional<int> {
            int value = 0;
            for (std::size_t i = from; i < from + count; ++i) {
                if (text[i] < '0' || text[i] > '9') return std::nullopt;
                value = value * 10 + (text[i] - '0');
            }
            return value;
        };
        auto y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
        if (!y || !m || !d) return std::nullopt;
        std::chrono::year_month_day ymd{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                                        std::chrono::day{static_cast<unsigned>(*d)}};
        if (!ymd.ok()) return std::nullopt;
        return Date{std::chrono::sys_days{ymd}};
    }

    static Date parse_or_throw(std::string_view text) {
        auto date = parse(text);
        if (!date) throw Error(ErrorKind::BadDate, "'" + std::string(text) + "'");
        return *date;
    }

    std::chrono::sys_days sys_days() const { return std::chrono::sys_days{std::chrono::days{days_}}; }
    long days_since_epoch() const { return days_; }

    std::string to_string() const {
        std::chrono::year_month_day ymd{sys_days()};
        char buffer[16];
        std::snprintf(buffer, sizeof buffer, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buffer;
    }

    bool is_weekend() const {
        std::chrono::weekday wd{sys_days()};
        return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
    }

    /// Next Monday-to-Friday date strictly after this one.
    Date next_business_day() const {
        Date next{sys_days() + std::chrono::days{1}};
        while (next.is_weekend()) next = Date{next.sys_days() + std::chrono::days{1}};
        return next;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    long days_ = 0;
};

/// Closed interval of dates.
struct DateRange {
    Date first;
    Date last;

    bool contains(Date d) const { return first <= d && d <= last; }

    /// Parses `start:end`.
    static DateRange parse(std::string_view text) {
        auto colon = text.find(':');
        if (colon == std::string_view::npos)
            throw Error(ErrorKind::BadDate, "window must be <start>:<end>, got '" + std::string(text) + "'");
        DateRange range{Date::parse_or_throw(text.substr(0, colon)), Date::parse_or_throw(text.substr(colon + 1))};
        if (range.last < range.first)
            throw Error(ErrorKind::InvalidConfig, "window end precedes start");
        return range;
    }

    std::string to_string() const { return first.to_string() + ":" + last.to_string(); }
};

/// 2011-11-30 to 2021-11-30, the ten-year study window.
inline DateRange default_window() { return {Date{2011, 11, 30}, Date{2021, 11, 30}}; }

} // namespace esgport
