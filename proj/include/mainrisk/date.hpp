#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace mainrisk {

/// Calendar date held as days since 1970-01-01. Cheap to copy and compare;
/// all arithmetic goes through std::chrono's proleptic Gregorian calendar.
struct Date {
    int serial = 0;

    static Date from_ymd(int y, unsigned m, unsigned d) {
        const std::chrono::year_month_day ymd{std::chrono::year{y},
                                              std::chrono::month{m},
                                              std::chrono::day{d}};
        return Date{static_cast<int>(
            std::chrono::sys_days{ymd}.time_since_epoch().count())};
    }

    static Date jan1(int y) { return from_ymd(y, 1, 1); }

    /// Parses "YYYY-MM-DD". Returns nullopt for anything malformed or not a
    /// real calendar day.
    static std::optional<Date> parse(std::string_view s) {
        int y = 0;
        unsigned m = 0, d = 0;
        char trailing = 0;
        const std::string buf(s);
        if (std::sscanf(buf.c_str(), "%d-%u-%u%c", &y, &m, &d, &trailing) != 3) {
            return std::nullopt;
        }
        const std::chrono::year_month_day ymd{std::chrono::year{y},
                                              std::chrono::month{m},
                                              std::chrono::day{d}};
        if (!ymd.ok()) {
            return std::nullopt;
        }
        return from_ymd(y, m, d);
    }

    std::chrono::year_month_day ymd() const {
        return std::chrono::year_month_day{
            std::chrono::sys_days{std::chrono::days{serial}}};
    }

    int year() const { return static_cast<int>(ymd().year()); }
    unsigned month() const { return static_cast<unsigned>(ymd().month()); }
    unsigned day() const { return static_cast<unsigned>(ymd().day()); }

    Date add_days(int n) const { return Date{serial + n}; }

    /// Shifts by whole calendar years; Feb 29 clamps to Feb 28 when the
    /// target year is not a leap year.
    Date add_years(int n) const {
        std::chrono::year_month_day x = ymd();
        x += std::chrono::years{n};
        if (!x.ok()) {
            x = x.year() / x.month() / std::chrono::last;
        }
        return Date{static_cast<int>(
            std::chrono::sys_days{x}.time_since_epoch().count())};
    }

    std::string to_string() const {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", year(), month(), day());
        return buf;
    }

    friend auto operator<=>(const Date&, const Date&) = default;
};

/// Inclusive date span [start, end] used for data coverage checks.
struct DateRange {
    Date start;
    Date end;

    bool contains(Date d) const { return start <= d && d <= end; }
};

}  // namespace mainrisk
