#pragma once

#include "aircast/timeseries.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aircast::trend {

/// Boxplot statistics. Without fencing the whiskers are the true extremes.
struct FiveNumberSummary {
    double min = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double max = 0.0;
    double iqr = 0.0;
    std::size_t count = 0;
    /// Values beyond the Tukey fences; empty unless fencing was requested.
    std::vector<double> outliers;

    friend bool operator==(const FiveNumberSummary&, const FiveNumberSummary&) = default;
};

struct BoxplotOptions {
    /// Clip whiskers at q1 - k*iqr / q3 + k*iqr and report the rest as outliers.
    bool fence_outliers = false;
    double fence_k = 1.5;
};

/// Quantile of already sorted values by linear interpolation at h = (n-1)p.
double quantile_sorted(std::span<const double> sorted, double p);

/// Throws EmptyInput on an empty sequence.
FiveNumberSummary five_number_summary(std::span<const double> values, const BoxplotOptions& options = {});

using HourProfile = std::array<std::optional<FiveNumberSummary>, 24>;
/// Monday first.
using WeekdayProfile = std::array<std::optional<FiveNumberSummary>, 7>;

inline constexpr std::array<std::string_view, 7> kWeekdayNames = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                                                  "Friday", "Saturday", "Sunday"};

HourProfile hour_of_day_profile(const TimeSeries& series, const BoxplotOptions& options = {});
WeekdayProfile day_of_week_profile(const TimeSeries& series, const BoxplotOptions& options = {});

struct CalendarGrid {
    std::map<Date, double> entries;
};

CalendarGrid calendar_daily_means(const TimeSeries& series);

enum class Season { LongDry, ShortRainy, ShortDry, LongRainy };

inline constexpr std::array<Season, 4> kSeasons = {Season::LongDry, Season::ShortRainy, Season::ShortDry,
                                                   Season::LongRainy};

std::string_view to_string(Season s);
/// Long dry Jun-Aug, short rainy Sep-Nov, short dry Dec-Feb, long rainy Mar-May.
Season season_of(int month);

struct SeasonMean {
    double mean = 0.0;
    std::size_t count = 0;
};

std::map<Season, SeasonMean> seasonal_means(const TimeSeries& series);

/// 24-hour PM2.5 guideline value in µg/m³.
inline constexpr double kWhoDailyGuideline = 15.0;

struct ExceedanceRow {
    Date date;
    double value = 0.0;
    bool exceeds = false;
};

struct ExceedanceReport {
    double threshold = kWhoDailyGuideline;
    std::vector<ExceedanceRow> rows;
    /// Share of days strictly above the threshold; absent for an empty grid.
    std::optional<double> fraction_exceeding;
};

ExceedanceReport who_exceedance(const CalendarGrid& grid, double threshold = kWhoDailyGuideline);

} // namespace aircast::trend
