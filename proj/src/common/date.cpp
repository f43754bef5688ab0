#include "adcast/date.hpp"

#include "adcast/errors.hpp"

#include <cstdio>

namespace adcast {

using namespace std::chrono;

namespace {

bool parse_digits(std::string_view s, int& out) {
    if (s.empty()) return false;
    int v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

} // namespace

Date parse_date(std::string_view text) {
    int y = 0, m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_digits(text.substr(0, 4), y) ||
        !parse_digits(text.substr(5, 2), m) || !parse_digits(text.substr(8, 2), d)) {
        throw ValidationError("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw ValidationError("invalid calendar date '" + std::string(text) + "'");
    }
    return sys_days{ymd};
}

std::string format_date(Date d) {
    year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

int day_of_week(Date d) { return static_cast<int>(weekday{d}.iso_encoding()) - 1; }

int day_of_year(Date d) {
    year_month_day ymd{d};
    return static_cast<int>((d - sys_days{ymd.year() / January / 1}).count()) + 1;
}

int month_of(Date d) { return static_cast<int>(static_cast<unsigned>(year_month_day{d}.month())); }

int days_in_month(Date d) {
    year_month_day ymd{d};
    return static_cast<int>(static_cast<unsigned>(year_month_day_last{ymd.year() / ymd.month() / last}.day()));
}

Date first_of_month(Date d) {
    year_month_day ymd{d};
    return sys_days{ymd.year() / ymd.month() / 1};
}

Date add_months(Date d, int months) {
    year_month_day ymd{d};
    year_month ym = ymd.year() / ymd.month();
    ym += std::chrono::months{months};
    return sys_days{ym / 1};
}

} // namespace adcast
