#pragma once

#include "adcast/date.hpp"

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace adcast {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

/// Number of leading days whose 7-day lag is undefined.
inline constexpr std::size_t kLagWarmup = 7;

/// One advertiser's aligned daily channels. Missing observations are NaN.
struct AdvertiserSeries {
    std::string advertiser_id;
    std::string category;
    Date start{};
    std::vector<double> adcost;
    std::vector<double> adclicks;
    std::vector<double> impressions;
    std::vector<double> cpc;       // derived: adcost / adclicks
    std::vector<double> adbudget;  // derived: realized monthly cost, piecewise constant
    std::vector<double> lag7_cpc;  // derived: cpc shifted by 7, NaN during warm-up

    std::size_t size() const { return adcost.size(); }
    Date date(std::size_t i) const { return add_days(start, static_cast<long>(i)); }
    DateRange range() const { return {start, add_days(start, static_cast<long>(size()))}; }
};

/// Calendar encodings derived from a contiguous date index.
struct CalendarFrame {
    Date start{};
    std::vector<int> dow;    // Monday = 0
    std::vector<int> doy;    // 1..366
    std::vector<int> month;  // 1..12

    static CalendarFrame from_range(Date start, std::size_t days);
    std::size_t size() const { return dow.size(); }
};

/// Immutable collection of advertisers sharing one global date range.
class PanelDataset {
public:
    PanelDataset() = default;

    /// Validates that every series spans the same range, ids are unique and
    /// all channels share one length.
    explicit PanelDataset(std::vector<AdvertiserSeries> advertisers);

    const std::vector<AdvertiserSeries>& advertisers() const { return advertisers_; }
    const CalendarFrame& calendar() const { return calendar_; }
    const std::set<std::string>& categories() const { return categories_; }

    std::size_t size() const { return advertisers_.size(); }
    bool empty() const { return advertisers_.empty(); }
    Date start() const { return calendar_.start; }
    std::size_t n_days() const { return calendar_.size(); }
    DateRange range() const { return {start(), add_days(start(), static_cast<long>(n_days()))}; }

    /// nullptr when absent.
    const AdvertiserSeries* find(const std::string& advertiser_id) const;
    /// Throws NotFoundError when absent.
    const AdvertiserSeries& at(const std::string& advertiser_id) const;
    std::optional<std::size_t> index_of(const std::string& advertiser_id) const;

    /// Day offset of `d` within the panel range; throws ValidationError outside it.
    std::size_t offset_of(Date d) const;

    bool operator==(const PanelDataset& other) const;

private:
    std::vector<AdvertiserSeries> advertisers_;
    CalendarFrame calendar_;
    std::set<std::string> categories_;
};

/// Reads the `advertiser_id,date,category,adcost,adclicks,impressions` CSV.
/// Gaps inside and around each advertiser's observed span are inserted as
/// missing rows so that every series covers the union of all observed dates.
PanelDataset ingest_csv(std::istream& source);

/// Writes the ingestion schema; missing values are written as empty fields.
void write_csv(std::ostream& out, const PanelDataset& panel);

/// Fraction of days on which any raw channel (cost, clicks, impressions) is missing.
double missing_fraction(const AdvertiserSeries& series);

/// Drops advertisers whose missing fraction exceeds `max_missing_frac`.
PanelDataset filter_missing(const PanelDataset& panel, double max_missing_frac = 0.01);

/// Fills interior gaps by the straight line between the two nearest observed
/// points; leading/trailing gaps take the nearest observed value.
std::vector<double> interpolate_linear(std::span<const double> values, const std::string& channel = "series");

/// Interpolates every raw channel (and cpc, when present).
AdvertiserSeries interpolate_linear(const AdvertiserSeries& series);

/// cpc = adcost / adclicks; zero-click days are re-filled by interpolation.
/// Also fills lag7_cpc.
AdvertiserSeries derive_cpc(AdvertiserSeries series);

/// adbudget[t] = total adcost over the calendar month containing day t.
AdvertiserSeries extract_budget(AdvertiserSeries series);

/// filter_missing, then interpolation, cpc derivation and budget extraction.
PanelDataset prepare_panel(const PanelDataset& raw, double max_missing_frac = 0.01);

} // namespace adcast
