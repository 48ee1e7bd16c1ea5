#pragma once

// Randomized synthetic year checked against brute-force regrouping.

#include "aircast/timeseries.hpp"
#include "aircast/trend.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <string>

namespace oracle {

struct TrendYearResult {
    /// Largest absolute difference over every compared statistic.
    double max_error = 0.0;
    /// Empty when every group matched in membership and count.
    std::string structural;
    std::size_t hourly_points = 0;
    std::size_t daily_points = 0;
};

namespace detail {

inline double summary_error(const aircast::trend::FiveNumberSummary& s, std::vector<double> group) {
    std::sort(group.begin(), group.end());
    double e = 0.0;
    e = std::max(e, std::abs(s.min - group.front()));
    e = std::max(e, std::abs(s.max - group.back()));
    e = std::max(e, std::abs(s.q1 - quantile(group, 0.25)));
    e = std::max(e, std::abs(s.median - quantile(group, 0.5)));
    e = std::max(e, std::abs(s.q3 - quantile(group, 0.75)));
    return e;
}

inline double mean_of(const std::vector<double>& v) {
    long double s = 0.0L;
    for (const double x : v) {
        s += x;
    }
    return static_cast<double>(s / static_cast<long double>(v.size()));
}

inline std::int64_t day_key(std::int64_t t) { return local_days(t); }
inline int hour_key(std::int64_t t) { return local_hour(t); }
inline int weekday_key(std::int64_t t) { return local_weekday(t); }
inline int season_key(std::int64_t t) { return season_index(year_month(t).second); }

} // namespace detail

/// Hourly readings over local year 2021 with random gaps, aggregated by the
/// library and by direct regrouping of raw epoch seconds.
inline TrendYearResult check_trend_year(std::uint64_t seed) {
    using namespace aircast;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> value(0.0, 120.0);
    std::bernoulli_distribution keep(0.9);
    std::bernoulli_distribution outage(0.03);

    const Instant start = local_midnight(Date{std::chrono::year{2021}, std::chrono::January, std::chrono::day{1}});
    std::vector<Observation> obs;
    std::vector<std::pair<std::int64_t, double>> raw;
    for (std::int64_t h = 0; h < 365 * 24; ++h) {
        if (h % 24 == 0 && outage(rng)) {
            h += 23;
            continue;
        }
        if (!keep(rng)) {
            continue;
        }
        const std::int64_t t = start.epoch_seconds + h * kSecondsPerHour;
        const double v = value(rng);
        obs.push_back({Instant{t}, v});
        raw.emplace_back(t, v);
    }
    const TimeSeries hourly(Granularity::Hourly, obs);
    const TimeSeries daily = resample_mean(hourly, Granularity::Daily, 0.75);

    TrendYearResult r;
    r.hourly_points = hourly.size();
    r.daily_points = daily.size();
    std::ostringstream problems;

    const auto by_hour = regroup<int>(raw, detail::hour_key);
    const trend::HourProfile hours = trend::hour_of_day_profile(hourly);
    for (int h = 0; h < 24; ++h) {
        const auto& slot = hours[static_cast<std::size_t>(h)];
        const auto it = by_hour.find(h);
        if (!slot || it == by_hour.end() || slot->count != it->second.size()) {
            problems << "hour " << h << " count; ";
            continue;
        }
        r.max_error = std::max(r.max_error, detail::summary_error(*slot, it->second));
    }

    // Daily means straight from the raw readings, keeping days with at least 18 of 24 hours.
    const auto by_day = regroup<std::int64_t>(raw, detail::day_key);
    std::vector<std::pair<std::int64_t, double>> daily_raw;
    for (const auto& [d, values] : by_day) {
        if (values.size() >= 18) {
            daily_raw.emplace_back(d * 86400 - kOffset, detail::mean_of(values));
        }
    }
    const trend::CalendarGrid calendar = trend::calendar_daily_means(daily);
    if (calendar.entries.size() != daily_raw.size()) {
        problems << "calendar size " << calendar.entries.size() << " vs " << daily_raw.size() << "; ";
    } else {
        auto it = calendar.entries.begin();
        for (const auto& [t, m] : daily_raw) {
            const Date expect = local_date(Instant{t});
            if (it->first != expect) {
                problems << "calendar date mismatch; ";
                break;
            }
            r.max_error = std::max(r.max_error, std::abs(it->second - m));
            ++it;
        }
    }

    const auto by_weekday = regroup<int>(daily_raw, detail::weekday_key);
    const trend::WeekdayProfile weekdays = trend::day_of_week_profile(daily);
    for (int w = 0; w < 7; ++w) {
        const auto& slot = weekdays[static_cast<std::size_t>(w)];
        const auto it = by_weekday.find(w);
        if (!slot || it == by_weekday.end() || slot->count != it->second.size()) {
            problems << "weekday " << w << " count; ";
            continue;
        }
        r.max_error = std::max(r.max_error, detail::summary_error(*slot, it->second));
    }

    const auto by_season = regroup<int>(daily_raw, detail::season_key);
    const auto seasons = trend::seasonal_means(daily);
    if (seasons.size() != by_season.size()) {
        problems << "season count; ";
    }
    for (const auto& [s, values] : by_season) {
        const auto it = seasons.find(static_cast<trend::Season>(s));
        if (it == seasons.end() || it->second.count != values.size()) {
            problems << "season " << s << " membership; ";
            continue;
        }
        r.max_error = std::max(r.max_error, std::abs(it->second.mean - detail::mean_of(values)));
    }
    r.structural = problems.str();
    return r;
}

/// True when every month maps to the oracle season and each season has three months.
inline bool season_partition_exact() {
    int sizes[4] = {0, 0, 0, 0};
    for (int m = 1; m <= 12; ++m) {
        const int s = static_cast<int>(aircast::trend::season_of(m));
        if (s != season_index(m)) {
            return false;
        }
        ++sizes[s];
    }
    return sizes[0] == 3 && sizes[1] == 3 && sizes[2] == 3 && sizes[3] == 3;
}

} // namespace oracle
