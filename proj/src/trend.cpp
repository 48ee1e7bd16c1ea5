#include "aircast/trend.hpp"

#include "aircast/error.hpp"

#include <algorithm>
#include <cmath>

namespace aircast::trend {

namespace {

void require(const TimeSeries& series, Granularity g, std::string_view op) {
    if (series.granularity() != g) {
        throw GranularityError(std::string(op) + " needs a " + std::string(to_string(g)) + " series, got " +
                               std::string(to_string(series.granularity())));
    }
}

template <std::size_t N, class KeyFn>
std::array<std::optional<FiveNumberSummary>, N> grouped_profile(const TimeSeries& series, KeyFn key,
                                                               const BoxplotOptions& options) {
    std::array<std::vector<double>, N> groups;
    for (const auto& o : series.observations()) {
        groups[static_cast<std::size_t>(key(o.at))].push_back(o.value);
    }
    std::array<std::optional<FiveNumberSummary>, N> out;
    for (std::size_t i = 0; i < N; ++i) {
        if (!groups[i].empty()) {
            out[i] = five_number_summary(groups[i], options);
        }
    }
    return out;
}

} // namespace

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) {
        throw EmptyInput("quantile of an empty sequence");
    }
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

FiveNumberSummary five_number_summary(std::span<const double> values, const BoxplotOptions& options) {
    if (values.empty()) {
        throw EmptyInput("five-number summary of an empty sequence");
    }
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    FiveNumberSummary s;
    s.count = sorted.size();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    s.iqr = s.q3 - s.q1;
    s.min = sorted.front();
    s.max = sorted.back();
    if (options.fence_outliers) {
        const double low = s.q1 - options.fence_k * s.iqr;
        const double high = s.q3 + options.fence_k * s.iqr;
        const auto first_in = std::lower_bound(sorted.begin(), sorted.end(), low);
        const auto last_in = std::upper_bound(sorted.begin(), sorted.end(), high);
        // The quartiles always lie inside the fences, so [first_in, last_in) is non-empty.
        s.min = *first_in;
        s.max = *std::prev(last_in);
        s.outliers.assign(sorted.begin(), first_in);
        s.outliers.insert(s.outliers.end(), last_in, sorted.end());
    }
    return s;
}

HourProfile hour_of_day_profile(const TimeSeries& series, const BoxplotOptions& options) {
    require(series, Granularity::Hourly, "hour-of-day profile");
    if (series.empty()) {
        throw EmptySeries("hour-of-day profile of an empty series");
    }
    return grouped_profile<24>(series, local_hour, options);
}

WeekdayProfile day_of_week_profile(const TimeSeries& series, const BoxplotOptions& options) {
    require(series, Granularity::Daily, "day-of-week profile");
    if (series.empty()) {
        throw EmptySeries("day-of-week profile of an empty series");
    }
    return grouped_profile<7>(series, local_weekday, options);
}

CalendarGrid calendar_daily_means(const TimeSeries& series) {
    require(series, Granularity::Daily, "calendar daily means");
    CalendarGrid grid;
    for (const auto& o : series.observations()) {
        grid.entries.emplace(local_date(o.at), o.value);
    }
    return grid;
}

std::string_view to_string(Season s) {
    switch (s) {
    case Season::LongDry:
        return "long_dry";
    case Season::ShortRainy:
        return "short_rainy";
    case Season::ShortDry:
        return "short_dry";
    case Season::LongRainy:
        return "long_rainy";
    }
    return "long_dry";
}

Season season_of(int month) {
    if (month < 1 || month > 12) {
        throw RangeError("month " + std::to_string(month) + " outside 1..12");
    }
    if (month >= 6 && month <= 8) {
        return Season::LongDry;
    }
    if (month >= 9 && month <= 11) {
        return Season::ShortRainy;
    }
    if (month >= 3 && month <= 5) {
        return Season::LongRainy;
    }
    return Season::ShortDry;
}

std::map<Season, SeasonMean> seasonal_means(const TimeSeries& series) {
    require(series, Granularity::Daily, "seasonal means");
    if (series.empty()) {
        throw EmptySeries("seasonal means of an empty series");
    }
    std::map<Season, std::pair<double, std::size_t>> acc;
    for (const auto& o : series.observations()) {
        const int month = static_cast<int>(static_cast<unsigned>(local_date(o.at).month()));
        auto& [sum, count] = acc[season_of(month)];
        sum += o.value;
        ++count;
    }
    std::map<Season, SeasonMean> out;
    for (const auto& [season, a] : acc) {
        out[season] = SeasonMean{a.first / static_cast<double>(a.second), a.second};
    }
    return out;
}

ExceedanceReport who_exceedance(const CalendarGrid& grid, double threshold) {
    ExceedanceReport report;
    report.threshold = threshold;
    std::size_t above = 0;
    for (const auto& [date, value] : grid.entries) {
        const bool exceeds = value > threshold;
        above += exceeds ? 1 : 0;
        report.rows.push_back({date, value, exceeds});
    }
    if (!report.rows.empty()) {
        report.fraction_exceeding = static_cast<double>(above) / static_cast<double>(report.rows.size());
    }
    return report;
}

} // namespace aircast::trend
