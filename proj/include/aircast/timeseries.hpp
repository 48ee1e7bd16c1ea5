#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aircast {

/// A point in time, whole seconds since the Unix epoch (UTC).
struct Instant {
    std::int64_t epoch_seconds = 0;

    friend constexpr auto operator<=>(const Instant&, const Instant&) = default;
};

/// Kigali local time is UTC+2 all year round; every hour/day bucket uses it.
inline constexpr std::int64_t kLocalOffsetSeconds = 2 * 3600;
inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::int64_t kSecondsPerDay = 86400;

using Date = std::chrono::year_month_day;

Instant local_hour_start(Instant at);
Instant local_day_start(Instant at);
Date local_date(Instant at);
/// Hour of day in local time, 0..23.
int local_hour(Instant at);
/// Day of week in local time, 0 = Monday .. 6 = Sunday.
int local_weekday(Instant at);
/// Local midnight starting `date`.
Instant local_midnight(Date date);

/// Parses ISO-8601 `YYYY-MM-DD[T ]hh:mm[:ss[.fff]]` followed by `Z` or `±hh[:mm]`.
/// Timestamps without an explicit offset are rejected.
std::optional<Instant> parse_iso8601(std::string_view text);
/// Formats as `YYYY-MM-DDThh:mm:ss+02:00` (local time).
std::string format_iso8601(Instant at);
std::string format_date(Date date);
std::optional<Date> parse_date(std::string_view text);

enum class Granularity { Raw, Hourly, Daily };

std::string_view to_string(Granularity g);
std::optional<Granularity> parse_granularity(std::string_view text);
/// Bucket width in seconds; zero for Raw.
std::int64_t step_seconds(Granularity g);

struct Observation {
    Instant at;
    double value = 0.0;

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// Strictly time-ordered, finite-valued observations at a declared granularity.
/// Hourly and Daily series hold only instants aligned to local bucket starts.
class TimeSeries {
public:
    TimeSeries() = default;
    /// Throws PreconditionError if the ordering, finiteness or alignment invariant fails.
    TimeSeries(Granularity granularity, std::vector<Observation> observations);

    /// Consecutive observations one granularity step apart starting at `start`.
    static TimeSeries regular(Granularity granularity, Instant start, std::span<const double> values);

    Granularity granularity() const noexcept { return granularity_; }
    const std::vector<Observation>& observations() const noexcept { return observations_; }
    std::size_t size() const noexcept { return observations_.size(); }
    bool empty() const noexcept { return observations_.empty(); }
    const Observation& operator[](std::size_t i) const { return observations_[i]; }
    const Observation& front() const { return observations_.front(); }
    const Observation& back() const { return observations_.back(); }

    std::vector<double> values() const;
    /// Observations [first, last).
    TimeSeries slice(std::size_t first, std::size_t last) const;
    /// This series followed by `tail`; throws if `tail` does not start after back().
    TimeSeries concat(const TimeSeries& tail) const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

private:
    Granularity granularity_ = Granularity::Raw;
    std::vector<Observation> observations_;
};

/// Bucketed arithmetic mean. Buckets covering less than `min_coverage` of their
/// expected count are dropped; coverage only applies when the source has a
/// declared step (Hourly -> Daily), Raw sources keep any non-empty bucket.
TimeSeries resample_mean(const TimeSeries& series, Granularity target, double min_coverage);

/// First differences applied `d` times. Each output carries the later instant.
TimeSeries difference(const TimeSeries& series, std::size_t d);
std::vector<double> difference(std::span<const double> values, std::size_t d);

/// Undoes `difference`; `seeds` are the `d` values immediately preceding the
/// first differenced point, oldest first.
TimeSeries inverse_difference(const TimeSeries& diffed, std::span<const double> seeds, std::size_t d);
std::vector<double> inverse_difference(std::span<const double> diffed, std::span<const double> seeds,
                                       std::size_t d);

/// Linear fill of interior gaps spanning at most `max_gap` missing steps.
TimeSeries interpolate_gaps(const TimeSeries& series, std::size_t max_gap);

inline constexpr std::size_t kMinTrainLength = 10;

/// Trailing holdout expressed either as a fraction of the length or a count.
class SplitSpec {
public:
    static SplitSpec fraction(double f);
    static SplitSpec count(std::size_t n);

    bool is_fraction() const noexcept { return is_fraction_; }
    double fraction_value() const noexcept { return fraction_; }
    std::size_t count_value() const noexcept { return count_; }
    /// Number of trailing observations held out of a series of length `n`.
    std::size_t test_length(std::size_t n) const;
    std::string describe() const;

    friend bool operator==(const SplitSpec&, const SplitSpec&) = default;

private:
    bool is_fraction_ = true;
    double fraction_ = 0.2;
    std::size_t count_ = 0;
};

/// Throws SplitError unless the test part is non-empty and train keeps >= 10 points.
std::pair<TimeSeries, TimeSeries> split_holdout(const TimeSeries& series, const SplitSpec& spec);

} // namespace aircast
