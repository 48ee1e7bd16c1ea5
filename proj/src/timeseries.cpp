#include "aircast/timeseries.hpp"

#include "aircast/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace aircast {

namespace {

using std::chrono::days;
using std::chrono::floor;
using std::chrono::seconds;
using std::chrono::sys_days;
using std::chrono::sys_seconds;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

sys_days local_sys_days(Instant at) {
    return floor<days>(sys_seconds{seconds{at.epoch_seconds + kLocalOffsetSeconds}});
}

// Parses exactly `width` decimal digits at `pos`.
bool read_digits(std::string_view s, std::size_t& pos, std::size_t width, int& out) {
    if (pos + width > s.size()) {
        return false;
    }
    int value = 0;
    for (std::size_t i = 0; i < width; ++i) {
        const char c = s[pos + i];
        if (c < '0' || c > '9') {
            return false;
        }
        value = value * 10 + (c - '0');
    }
    pos += width;
    out = value;
    return true;
}

bool expect(std::string_view s, std::size_t& pos, char c) {
    if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
    }
    return false;
}

} // namespace

Instant local_hour_start(Instant at) {
    return Instant{floor_div(at.epoch_seconds, kSecondsPerHour) * kSecondsPerHour};
}

Instant local_day_start(Instant at) {
    const std::int64_t local = at.epoch_seconds + kLocalOffsetSeconds;
    return Instant{floor_div(local, kSecondsPerDay) * kSecondsPerDay - kLocalOffsetSeconds};
}

Date local_date(Instant at) { return Date{local_sys_days(at)}; }

int local_hour(Instant at) {
    const std::int64_t local = at.epoch_seconds + kLocalOffsetSeconds;
    return static_cast<int>((local - floor_div(local, kSecondsPerDay) * kSecondsPerDay) / kSecondsPerHour);
}

int local_weekday(Instant at) {
    const std::chrono::weekday wd{local_sys_days(at)};
    return static_cast<int>(wd.iso_encoding()) - 1;
}

Instant local_midnight(Date date) {
    const auto midnight = sys_days{date}.time_since_epoch();
    return Instant{std::chrono::duration_cast<seconds>(midnight).count() - kLocalOffsetSeconds};
}

std::optional<Instant> parse_iso8601(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    std::size_t pos = 0;
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    if (!read_digits(text, pos, 4, year) || !expect(text, pos, '-') || !read_digits(text, pos, 2, month) ||
        !expect(text, pos, '-') || !read_digits(text, pos, 2, day)) {
        return std::nullopt;
    }
    if (!expect(text, pos, 'T') && !expect(text, pos, ' ')) {
        return std::nullopt;
    }
    if (!read_digits(text, pos, 2, hour) || !expect(text, pos, ':') || !read_digits(text, pos, 2, minute)) {
        return std::nullopt;
    }
    if (expect(text, pos, ':')) {
        if (!read_digits(text, pos, 2, second)) {
            return std::nullopt;
        }
        if (expect(text, pos, '.')) {
            // Fractional seconds are truncated.
            const std::size_t start = pos;
            while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
                ++pos;
            }
            if (pos == start) {
                return std::nullopt;
            }
        }
    }
    std::int64_t offset = 0;
    if (expect(text, pos, 'Z')) {
        offset = 0;
    } else if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
        const int sign = text[pos] == '+' ? 1 : -1;
        ++pos;
        int oh = 0, om = 0;
        if (!read_digits(text, pos, 2, oh)) {
            return std::nullopt;
        }
        if (expect(text, pos, ':')) {
            if (!read_digits(text, pos, 2, om)) {
                return std::nullopt;
            }
        } else if (pos < text.size()) {
            if (!read_digits(text, pos, 2, om)) {
                return std::nullopt;
            }
        }
        if (oh > 14 || om > 59) {
            return std::nullopt;
        }
        offset = sign * (static_cast<std::int64_t>(oh) * 3600 + om * 60);
    } else {
        return std::nullopt;
    }
    if (pos != text.size()) {
        return std::nullopt;
    }
    if (hour > 23 || minute > 59 || second > 60) {
        return std::nullopt;
    }
    const Date date{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                    std::chrono::day{static_cast<unsigned>(day)}};
    if (!date.ok()) {
        return std::nullopt;
    }
    const std::int64_t day_seconds = std::chrono::duration_cast<seconds>(sys_days{date}.time_since_epoch()).count();
    return Instant{day_seconds + hour * 3600 + minute * 60 + second - offset};
}

std::string format_date(Date date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

std::optional<Date> parse_date(std::string_view text) {
    std::size_t pos = 0;
    int year = 0, month = 0, day = 0;
    if (!read_digits(text, pos, 4, year) || !expect(text, pos, '-') || !read_digits(text, pos, 2, month) ||
        !expect(text, pos, '-') || !read_digits(text, pos, 2, day) || pos != text.size()) {
        return std::nullopt;
    }
    const Date date{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                    std::chrono::day{static_cast<unsigned>(day)}};
    if (!date.ok()) {
        return std::nullopt;
    }
    return date;
}

std::string format_iso8601(Instant at) {
    const std::int64_t local = at.epoch_seconds + kLocalOffsetSeconds;
    const std::int64_t secs = local - floor_div(local, kSecondsPerDay) * kSecondsPerDay;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d+02:00", format_date(local_date(at)).c_str(),
                  static_cast<int>(secs / 3600), static_cast<int>((secs / 60) % 60), static_cast<int>(secs % 60));
    return buf;
}

std::string_view to_string(Granularity g) {
    switch (g) {
    case Granularity::Raw:
        return "raw";
    case Granularity::Hourly:
        return "hourly";
    case Granularity::Daily:
        return "daily";
    }
    return "raw";
}

std::optional<Granularity> parse_granularity(std::string_view text) {
    if (text == "raw") {
        return Granularity::Raw;
    }
    if (text == "hourly") {
        return Granularity::Hourly;
    }
    if (text == "daily") {
        return Granularity::Daily;
    }
    return std::nullopt;
}

std::int64_t step_seconds(Granularity g) {
    switch (g) {
    case Granularity::Hourly:
        return kSecondsPerHour;
    case Granularity::Daily:
        return kSecondsPerDay;
    case Granularity::Raw:
        break;
    }
    return 0;
}

namespace {

Instant bucket_start(Granularity g, Instant at) {
    switch (g) {
    case Granularity::Hourly:
        return local_hour_start(at);
    case Granularity::Daily:
        return local_day_start(at);
    case Granularity::Raw:
        break;
    }
    return at;
}

} // namespace

TimeSeries::TimeSeries(Granularity granularity, std::vector<Observation> observations)
    : granularity_(granularity), observations_(std::move(observations)) {
    for (std::size_t i = 0; i < observations_.size(); ++i) {
        const Observation& o = observations_[i];
        if (!std::isfinite(o.value)) {
            throw PreconditionError("time series value is not finite at index " + std::to_string(i));
        }
        if (i > 0 && !(observations_[i - 1].at < o.at)) {
            throw PreconditionError("time series instants not strictly increasing at index " + std::to_string(i));
        }
        if (granularity_ != Granularity::Raw && bucket_start(granularity_, o.at) != o.at) {
            throw PreconditionError("instant " + format_iso8601(o.at) + " is not aligned to the " +
                                    std::string(to_string(granularity_)) + " boundary");
        }
    }
}

TimeSeries TimeSeries::regular(Granularity granularity, Instant start, std::span<const double> values) {
    const std::int64_t step = step_seconds(granularity);
    if (step == 0) {
        throw GranularityError("regular series need an hourly or daily granularity");
    }
    std::vector<Observation> obs;
    obs.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        obs.push_back({Instant{start.epoch_seconds + static_cast<std::int64_t>(i) * step}, values[i]});
    }
    return TimeSeries(granularity, std::move(obs));
}

std::vector<double> TimeSeries::values() const {
    std::vector<double> out;
    out.reserve(observations_.size());
    for (const auto& o : observations_) {
        out.push_back(o.value);
    }
    return out;
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t last) const {
    last = std::min(last, observations_.size());
    first = std::min(first, last);
    TimeSeries out;
    out.granularity_ = granularity_;
    out.observations_.assign(observations_.begin() + static_cast<std::ptrdiff_t>(first),
                             observations_.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

TimeSeries TimeSeries::concat(const TimeSeries& tail) const {
    if (tail.granularity_ != granularity_) {
        throw GranularityError("cannot concatenate series of different granularity");
    }
    std::vector<Observation> obs = observations_;
    obs.insert(obs.end(), tail.observations_.begin(), tail.observations_.end());
    return TimeSeries(granularity_, std::move(obs));
}

TimeSeries resample_mean(const TimeSeries& series, Granularity target, double min_coverage) {
    if (static_cast<int>(target) <= static_cast<int>(series.granularity())) {
        throw GranularityError("resample target " + std::string(to_string(target)) + " is not coarser than " +
                               std::string(to_string(series.granularity())));
    }
    if (!(min_coverage >= 0.0 && min_coverage <= 1.0)) {
        throw RangeError("min_coverage must lie in [0, 1]");
    }
    double expected = 0.0;
    if (series.granularity() != Granularity::Raw) {
        expected = static_cast<double>(step_seconds(target) / step_seconds(series.granularity()));
    }

    std::vector<Observation> out;
    const auto& obs = series.observations();
    std::size_t i = 0;
    while (i < obs.size()) {
        const Instant bucket = bucket_start(target, obs[i].at);
        double sum = 0.0;
        std::size_t count = 0;
        while (i < obs.size() && bucket_start(target, obs[i].at) == bucket) {
            sum += obs[i].value;
            ++count;
            ++i;
        }
        if (expected > 0.0 && static_cast<double>(count) / expected < min_coverage) {
            continue;
        }
        out.push_back({bucket, sum / static_cast<double>(count)});
    }
    if (out.empty()) {
        throw EmptySeries("no " + std::string(to_string(target)) + " bucket met the coverage requirement");
    }
    return TimeSeries(target, std::move(out));
}

std::vector<double> difference(std::span<const double> values, std::size_t d) {
    if (values.size() <= d) {
        throw LengthError("series of length " + std::to_string(values.size()) + " cannot be differenced " +
                          std::to_string(d) + " times");
    }
    std::vector<double> out(values.begin(), values.end());
    for (std::size_t round = 0; round < d; ++round) {
        for (std::size_t i = 0; i + 1 < out.size(); ++i) {
            out[i] = out[i + 1] - out[i];
        }
        out.pop_back();
    }
    return out;
}

TimeSeries difference(const TimeSeries& series, std::size_t d) {
    const std::vector<double> diffed = difference(series.values(), d);
    std::vector<Observation> obs;
    obs.reserve(diffed.size());
    for (std::size_t i = 0; i < diffed.size(); ++i) {
        obs.push_back({series[i + d].at, diffed[i]});
    }
    return TimeSeries(series.granularity(), std::move(obs));
}

std::vector<double> inverse_difference(std::span<const double> diffed, std::span<const double> seeds,
                                       std::size_t d) {
    if (seeds.size() != d) {
        throw SeedError("inverse differencing of order " + std::to_string(d) + " needs " + std::to_string(d) +
                        " seeds, got " + std::to_string(seeds.size()));
    }
    // anchors[k] is the last value of the k-times differenced seed block.
    std::vector<double> level(seeds.begin(), seeds.end());
    std::vector<double> anchors(d);
    for (std::size_t k = 0; k < d; ++k) {
        anchors[k] = level.back();
        for (std::size_t i = 0; i + 1 < level.size(); ++i) {
            level[i] = level[i + 1] - level[i];
        }
        level.pop_back();
    }
    std::vector<double> out(diffed.begin(), diffed.end());
    for (std::size_t k = d; k-- > 0;) {
        double running = anchors[k];
        for (double& v : out) {
            running += v;
            v = running;
        }
    }
    return out;
}

TimeSeries inverse_difference(const TimeSeries& diffed, std::span<const double> seeds, std::size_t d) {
    const std::vector<double> restored = inverse_difference(diffed.values(), seeds, d);
    std::vector<Observation> obs;
    obs.reserve(restored.size());
    for (std::size_t i = 0; i < restored.size(); ++i) {
        obs.push_back({diffed[i].at, restored[i]});
    }
    return TimeSeries(diffed.granularity(), std::move(obs));
}

TimeSeries interpolate_gaps(const TimeSeries& series, std::size_t max_gap) {
    const std::int64_t step = step_seconds(series.granularity());
    if (step == 0) {
        throw GranularityError("gap interpolation needs an hourly or daily series");
    }
    const auto& obs = series.observations();
    std::vector<Observation> out;
    out.reserve(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (i > 0) {
            const Observation& a = obs[i - 1];
            const Observation& b = obs[i];
            const std::int64_t steps = (b.at.epoch_seconds - a.at.epoch_seconds) / step;
            const std::int64_t missing = steps - 1;
            if (missing >= 1 && static_cast<std::size_t>(missing) <= max_gap) {
                for (std::int64_t k = 1; k <= missing; ++k) {
                    const double frac = static_cast<double>(k) / static_cast<double>(steps);
                    out.push_back({Instant{a.at.epoch_seconds + k * step}, a.value + frac * (b.value - a.value)});
                }
            }
        }
        out.push_back(obs[i]);
    }
    return TimeSeries(series.granularity(), std::move(out));
}

SplitSpec SplitSpec::fraction(double f) {
    if (!(f > 0.0 && f < 1.0)) {
        throw SplitError("holdout fraction must lie in (0, 1)");
    }
    SplitSpec s;
    s.is_fraction_ = true;
    s.fraction_ = f;
    return s;
}

SplitSpec SplitSpec::count(std::size_t n) {
    if (n == 0) {
        throw SplitError("holdout count must be positive");
    }
    SplitSpec s;
    s.is_fraction_ = false;
    s.fraction_ = 0.0;
    s.count_ = n;
    return s;
}

std::size_t SplitSpec::test_length(std::size_t n) const {
    if (is_fraction_) {
        return static_cast<std::size_t>(std::llround(fraction_ * static_cast<double>(n)));
    }
    return count_;
}

std::string SplitSpec::describe() const {
    if (is_fraction_) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "fraction:%.17g", fraction_);
        return buf;
    }
    return "count:" + std::to_string(count_);
}

std::pair<TimeSeries, TimeSeries> split_holdout(const TimeSeries& series, const SplitSpec& spec) {
    const std::size_t n = series.size();
    const std::size_t test = spec.test_length(n);
    if (test == 0 || test > n) {
        throw SplitError("holdout of " + std::to_string(test) + " points is invalid for length " + std::to_string(n));
    }
    if (n - test < kMinTrainLength) {
        throw SplitError("training segment of " + std::to_string(n - test) + " points is shorter than " +
                         std::to_string(kMinTrainLength));
    }
    return {series.slice(0, n - test), series.slice(n - test, n)};
}

} // namespace aircast
