#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace adcast {

using Date = std::chrono::sys_days;

/// Parses a strict ISO-8601 calendar date (YYYY-MM-DD). Throws ValidationError.
Date parse_date(std::string_view text);

std::string format_date(Date d);

/// Monday = 0 ... Sunday = 6.
int day_of_week(Date d);

/// 1-based ordinal day within the year.
int day_of_year(Date d);

int month_of(Date d);

int days_in_month(Date d);

Date first_of_month(Date d);

/// First day of the month `months` calendar months after the month of `d`.
Date add_months(Date d, int months);

inline Date add_days(Date d, long days) { return d + std::chrono::days{days}; }

inline long days_between(Date from, Date to) { return (to - from).count(); }

/// Half-open calendar range [first, last).
struct DateRange {
    Date first;
    Date last;

    long length() const { return days_between(first, last); }
    bool contains(Date d) const { return d >= first && d < last; }
    bool overlaps(const DateRange& o) const { return first < o.last && o.first < last; }
};

} // namespace adcast
