#include "adcast/panel/panel.hpp"

#include "adcast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_set>

namespace adcast {

namespace {

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) != std::isnan(b[i])) return false;
        if (!std::isnan(a[i]) && a[i] != b[i]) return false;
    }
    return true;
}

bool same_series(const AdvertiserSeries& a, const AdvertiserSeries& b) {
    return a.advertiser_id == b.advertiser_id && a.category == b.category && a.start == b.start &&
           same_values(a.adcost, b.adcost) && same_values(a.adclicks, b.adclicks) &&
           same_values(a.impressions, b.impressions) && same_values(a.cpc, b.cpc) &&
           same_values(a.adbudget, b.adbudget) && same_values(a.lag7_cpc, b.lag7_cpc);
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

double parse_amount(std::string_view field, std::size_t line, const char* name) {
    if (field.empty()) return kMissing;
    double value = 0.0;
    const auto* begin = field.data();
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw ParseError(line, std::string("malformed ") + name + " '" + std::string(field) + "'");
    }
    if (value < 0.0) {
        throw ParseError(line, std::string("negative ") + name + " '" + std::string(field) + "'");
    }
    return value;
}

struct RawRow {
    double adcost;
    double adclicks;
    double impressions;
};

struct RawAdvertiser {
    std::string category;
    std::map<Date, RawRow> rows;
};

constexpr std::string_view kHeader = "advertiser_id,date,category,adcost,adclicks,impressions";

} // namespace

CalendarFrame CalendarFrame::from_range(Date start, std::size_t days) {
    CalendarFrame cal;
    cal.start = start;
    cal.dow.resize(days);
    cal.doy.resize(days);
    cal.month.resize(days);
    for (std::size_t i = 0; i < days; ++i) {
        const Date d = add_days(start, static_cast<long>(i));
        cal.dow[i] = day_of_week(d);
        cal.doy[i] = day_of_year(d);
        cal.month[i] = month_of(d);
    }
    return cal;
}

PanelDataset::PanelDataset(std::vector<AdvertiserSeries> advertisers) : advertisers_(std::move(advertisers)) {
    if (advertisers_.empty()) {
        calendar_ = CalendarFrame{};
        return;
    }
    const Date start = advertisers_.front().start;
    const std::size_t n = advertisers_.front().size();
    std::unordered_set<std::string> ids;
    for (const auto& s : advertisers_) {
        if (s.advertiser_id.empty()) throw ValidationError("advertiser with empty id");
        if (!ids.insert(s.advertiser_id).second) {
            throw ValidationError("duplicate advertiser id '" + s.advertiser_id + "'");
        }
        if (s.start != start || s.size() != n) {
            throw ValidationError("advertiser '" + s.advertiser_id + "' does not span the panel date range");
        }
        if (s.adclicks.size() != n || s.impressions.size() != n) {
            throw ValidationError("advertiser '" + s.advertiser_id + "' has channels of unequal length");
        }
        for (const auto* derived : {&s.cpc, &s.adbudget, &s.lag7_cpc}) {
            if (!derived->empty() && derived->size() != n) {
                throw ValidationError("advertiser '" + s.advertiser_id + "' has a derived channel of wrong length");
            }
        }
        categories_.insert(s.category);
    }
    calendar_ = CalendarFrame::from_range(start, n);
}

const AdvertiserSeries* PanelDataset::find(const std::string& advertiser_id) const {
    const auto idx = index_of(advertiser_id);
    return idx ? &advertisers_[*idx] : nullptr;
}

const AdvertiserSeries& PanelDataset::at(const std::string& advertiser_id) const {
    const auto* s = find(advertiser_id);
    if (s == nullptr) throw NotFoundError("unknown advertiser '" + advertiser_id + "'");
    return *s;
}

std::optional<std::size_t> PanelDataset::index_of(const std::string& advertiser_id) const {
    for (std::size_t i = 0; i < advertisers_.size(); ++i) {
        if (advertisers_[i].advertiser_id == advertiser_id) return i;
    }
    return std::nullopt;
}

std::size_t PanelDataset::offset_of(Date d) const {
    const long off = days_between(start(), d);
    if (off < 0 || off > static_cast<long>(n_days())) {
        throw ValidationError("date " + format_date(d) + " outside panel range");
    }
    return static_cast<std::size_t>(off);
}

bool PanelDataset::operator==(const PanelDataset& other) const {
    if (advertisers_.size() != other.advertisers_.size()) return false;
    for (std::size_t i = 0; i < advertisers_.size(); ++i) {
        if (!same_series(advertisers_[i], other.advertisers_[i])) return false;
    }
    return true;
}

PanelDataset ingest_csv(std::istream& source) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(source, line)) throw ParseError(1, "empty input, expected header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
    if (line != kHeader) throw ParseError(1, "unexpected header, expected '" + std::string(kHeader) + "'");

    std::map<std::string, RawAdvertiser> raw;
    std::vector<std::string> order;
    while (std::getline(source, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 6) {
            throw ParseError(line_no, "expected 6 fields, found " + std::to_string(fields.size()));
        }
        const std::string id(fields[0]);
        if (id.empty()) throw ParseError(line_no, "empty advertiser_id");
        Date date{};
        try {
            date = parse_date(fields[1]);
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
        RawRow row{parse_amount(fields[3], line_no, "adcost"), parse_amount(fields[4], line_no, "adclicks"),
                   parse_amount(fields[5], line_no, "impressions")};
        auto [it, inserted] = raw.try_emplace(id);
        if (inserted) {
            it->second.category = std::string(fields[2]);
            order.push_back(id);
        } else if (it->second.category != fields[2]) {
            throw ParseError(line_no, "advertiser '" + id + "' changes category");
        }
        if (!it->second.rows.emplace(date, row).second) {
            throw ValidationError("duplicate row for (" + id + ", " + format_date(date) + ")");
        }
    }
    if (raw.empty()) return PanelDataset{};

    Date first = raw.begin()->second.rows.begin()->first;
    Date last = first;
    for (const auto& [id, adv] : raw) {
        first = std::min(first, adv.rows.begin()->first);
        last = std::max(last, adv.rows.rbegin()->first);
    }
    const auto n = static_cast<std::size_t>(days_between(first, last) + 1);

    std::vector<AdvertiserSeries> series;
    series.reserve(order.size());
    for (const auto& id : order) {
        const auto& adv = raw.at(id);
        AdvertiserSeries s;
        s.advertiser_id = id;
        s.category = adv.category;
        s.start = first;
        s.adcost.assign(n, kMissing);
        s.adclicks.assign(n, kMissing);
        s.impressions.assign(n, kMissing);
        for (const auto& [date, row] : adv.rows) {
            const auto i = static_cast<std::size_t>(days_between(first, date));
            s.adcost[i] = row.adcost;
            s.adclicks[i] = row.adclicks;
            s.impressions[i] = row.impressions;
        }
        series.push_back(std::move(s));
    }
    return PanelDataset(std::move(series));
}

void write_csv(std::ostream& out, const PanelDataset& panel) {
    out << kHeader << '\n';
    char buf[64];
    auto put = [&](double v) {
        if (std::isnan(v)) return;
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (const auto& s : panel.advertisers()) {
        if (s.category.find(',') != std::string::npos || s.advertiser_id.find(',') != std::string::npos) {
            throw ValidationError("advertiser '" + s.advertiser_id + "': ids and categories may not contain commas");
        }
        for (std::size_t i = 0; i < s.size(); ++i) {
            out << s.advertiser_id << ',' << format_date(s.date(i)) << ',' << s.category << ',';
            put(s.adcost[i]);
            out << ',';
            put(s.adclicks[i]);
            out << ',';
            put(s.impressions[i]);
            out << '\n';
        }
    }
}

double missing_fraction(const AdvertiserSeries& series) {
    if (series.size() == 0) return 0.0;
    std::size_t missing = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (std::isnan(series.adcost[i]) || std::isnan(series.adclicks[i]) || std::isnan(series.impressions[i])) {
            ++missing;
        }
    }
    return static_cast<double>(missing) / static_cast<double>(series.size());
}

PanelDataset filter_missing(const PanelDataset& panel, double max_missing_frac) {
    if (max_missing_frac < 0.0 || max_missing_frac > 1.0) {
        throw ValidationError("max_missing_frac must lie in [0, 1]");
    }
    std::vector<AdvertiserSeries> kept;
    for (const auto& s : panel.advertisers()) {
        if (missing_fraction(s) <= max_missing_frac) kept.push_back(s);
    }
    if (kept.empty()) throw ValidationError("no advertisers survive the missing-value filter");
    return PanelDataset(std::move(kept));
}

std::vector<double> interpolate_linear(std::span<const double> values, const std::string& channel) {
    std::vector<double> out(values.begin(), values.end());
    std::size_t first = out.size();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isnan(out[i])) {
            first = i;
            break;
        }
    }
    if (first == out.size()) throw ValidationError("channel '" + channel + "' is entirely missing");
    for (std::size_t i = 0; i < first; ++i) out[i] = out[first];

    std::size_t prev = first;
    for (std::size_t i = first + 1; i < out.size(); ++i) {
        if (std::isnan(out[i])) continue;
        const std::size_t gap = i - prev;
        if (gap > 1) {
            const double slope = (out[i] - out[prev]) / static_cast<double>(gap);
            for (std::size_t k = 1; k < gap; ++k) out[prev + k] = out[prev] + slope * static_cast<double>(k);
        }
        prev = i;
    }
    for (std::size_t i = prev + 1; i < out.size(); ++i) out[i] = out[prev];
    return out;
}

AdvertiserSeries interpolate_linear(const AdvertiserSeries& series) {
    AdvertiserSeries out = series;
    out.adcost = interpolate_linear(series.adcost, "adcost");
    out.adclicks = interpolate_linear(series.adclicks, "adclicks");
    out.impressions = interpolate_linear(series.impressions, "impressions");
    if (!series.cpc.empty()) out.cpc = interpolate_linear(series.cpc, "cpc");
    return out;
}

AdvertiserSeries derive_cpc(AdvertiserSeries series) {
    const std::size_t n = series.size();
    series.cpc.assign(n, kMissing);
    bool any_clicks = false;
    for (std::size_t t = 0; t < n; ++t) {
        const double cost = series.adcost[t];
        const double clicks = series.adclicks[t];
        if (std::isnan(cost) || std::isnan(clicks)) {
            throw ValidationError("advertiser '" + series.advertiser_id + "': derive_cpc requires interpolated channels");
        }
        if (clicks > 0.0) {
            series.cpc[t] = cost / clicks;
            any_clicks = true;
        }
    }
    if (!any_clicks) throw ValidationError("advertiser '" + series.advertiser_id + "' has zero clicks on every day");
    series.cpc = interpolate_linear(series.cpc, "cpc");
    series.lag7_cpc.assign(n, kMissing);
    for (std::size_t t = kLagWarmup; t < n; ++t) series.lag7_cpc[t] = series.cpc[t - kLagWarmup];
    return series;
}

AdvertiserSeries extract_budget(AdvertiserSeries series) {
    const std::size_t n = series.size();
    series.adbudget.assign(n, kMissing);
    std::size_t t = 0;
    while (t < n) {
        const Date month_start = first_of_month(series.date(t));
        const Date next_month = add_months(month_start, 1);
        std::size_t end = t;
        double total = 0.0;
        while (end < n && series.date(end) < next_month) {
            if (std::isnan(series.adcost[end])) {
                throw ValidationError("advertiser '" + series.advertiser_id + "': adcost missing on " +
                                      format_date(series.date(end)));
            }
            total += series.adcost[end];
            ++end;
        }
        for (std::size_t k = t; k < end; ++k) series.adbudget[k] = total;
        t = end;
    }
    return series;
}

PanelDataset prepare_panel(const PanelDataset& raw, double max_missing_frac) {
    const PanelDataset filtered = filter_missing(raw, max_missing_frac);
    std::vector<AdvertiserSeries> out;
    out.reserve(filtered.size());
    for (const auto& s : filtered.advertisers()) {
        AdvertiserSeries clean = interpolate_linear(s);
        clean.cpc.clear();
        out.push_back(extract_budget(derive_cpc(std::move(clean))));
    }
    return PanelDataset(std::move(out));
}

} // namespace adcast
