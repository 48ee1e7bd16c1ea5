#include "aircast/cli.hpp"

#include "aircast/arima.hpp"
#include "aircast/csv.hpp"
#include "aircast/error.hpp"
#include "aircast/evaluation.hpp"
#include "aircast/gp.hpp"
#include "aircast/trend.hpp"
#include "aircast/trend_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace aircast::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kDailyCoverage = 0.75;
constexpr std::size_t kDailyMaxGap = 3;
constexpr std::size_t kHourlyMaxGap = 6;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Runs `task(i)` for i in [0, n) on up to `jobs` threads and rethrows the
/// lowest-index failure afterwards, so error reporting does not depend on scheduling.
template <class Task>
void parallel_for(std::size_t n, std::size_t jobs, Task&& task) {
    std::vector<std::exception_ptr> failures(n);
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                task(i);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(n, std::max<std::size_t>(jobs, 1));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
}

std::size_t worker_count(const RunConfig& config) {
    if (config.jobs > 0) {
        return config.jobs;
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

void ensure_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    }
}

std::ofstream open_output(const fs::path& path) {
    ensure_directory(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out = open_output(path);
    out << text;
    if (!out.flush()) {
        throw IoError("failed writing " + path.string());
    }
}

template <class Json>
void write_json(const fs::path& path, const Json& j) {
    write_text(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::string extension(OutputFormat f) { return f == OutputFormat::Csv ? ".csv" : ".json"; }

bool station_selected(const RunConfig& config, const Station& station) {
    if (config.stations.empty()) {
        return true;
    }
    return std::any_of(config.stations.begin(), config.stations.end(),
                       [&](const std::string& s) { return Station(s) == station; });
}

std::vector<double> parse_number_list(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = std::min(text.find(',', pos), text.size());
        const std::string_view item = text.substr(pos, comma - pos);
        if (!item.empty()) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || ptr != item.data() + item.size()) {
                throw PreconditionError("not a number list: '" + std::string(text) + "'");
            }
            out.push_back(v);
        }
        pos = comma + 1;
    }
    return out;
}

// ---- series index -------------------------------------------------------

struct StationEntry {
    std::string name;
    std::string stem;
    std::size_t hourly_count = 0;
    std::size_t daily_count = 0;
};

fs::path hourly_path(const fs::path& root, const std::string& stem) {
    return root / "series" / (stem + "_hourly.csv");
}

fs::path daily_path(const fs::path& root, const std::string& stem) { return root / "series" / (stem + "_daily.csv"); }

/// The directory the ingest command wrote into: `--input` when given, else the output directory.
fs::path data_root(const RunConfig& config) {
    if (config.inputs.empty()) {
        return config.out;
    }
    fs::path p = config.inputs.front();
    if (p.filename() == "index.json") {
        return p.parent_path().parent_path();
    }
    return p;
}

std::vector<StationEntry> load_index(const fs::path& root, const RunConfig& config) {
    const fs::path path = root / "series" / "index.json";
    if (!fs::exists(path)) {
        throw IoError("no ingested series under " + root.string() + " (run `aircast ingest` first)");
    }
    const json j = read_json(path);
    std::vector<StationEntry> all;
    try {
        for (const auto& s : j.at("stations")) {
            all.push_back({s.at("name").get<std::string>(), s.at("stem").get<std::string>(),
                           s.at("hourly_count").get<std::size_t>(), s.at("daily_count").get<std::size_t>()});
        }
    } catch (const json::exception& e) {
        throw SchemaError("malformed series index " + path.string() + ": " + e.what());
    }
    std::vector<StationEntry> selected;
    for (auto& e : all) {
        if (station_selected(config, Station(e.name))) {
            selected.push_back(std::move(e));
        }
    }
    if (selected.empty()) {
        throw EmptySeries("no ingested station matches the station filter");
    }
    return selected;
}

/// Series used for modelling: the requested granularity with short gaps filled.
TimeSeries model_series(const fs::path& root, const StationEntry& entry, Granularity granularity) {
    if (granularity == Granularity::Hourly) {
        return interpolate_gaps(read_series_csv(hourly_path(root, entry.stem), Granularity::Hourly), kHourlyMaxGap);
    }
    if (granularity == Granularity::Daily) {
        return interpolate_gaps(read_series_csv(daily_path(root, entry.stem), Granularity::Daily), kDailyMaxGap);
    }
    throw GranularityError("forecasting needs hourly or daily granularity");
}

eval::ModelSettings model_settings(const RunConfig& config, std::string_view station) {
    eval::ModelSettings settings;
    settings.ann.train.seed = derive_seed(config.seed, Station(std::string(station)).key(), "ANN");
    return settings;
}

std::vector<std::string> canonical_models(const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& n : names) {
        std::string c = eval::canonical_model_name(n);
        if (std::find(out.begin(), out.end(), c) == out.end()) {
            out.push_back(std::move(c));
        }
    }
    if (out.empty()) {
        throw PreconditionError("no models selected");
    }
    return out;
}

Instant step_after(Instant at, Granularity g, std::size_t steps) {
    return Instant{at.epoch_seconds + step_seconds(g) * static_cast<std::int64_t>(steps)};
}

// ---- trend --------------------------------------------------------------

void write_table(const fs::path& base, OutputFormat format, const trend::Table& table) {
    const fs::path path = base.string() + extension(format);
    if (format == OutputFormat::Json) {
        write_json(path, table.to_json());
        return;
    }
    std::ofstream out = open_output(path);
    table.write_csv(out);
    if (!out.flush()) {
        throw IoError("failed writing " + path.string());
    }
}

template <std::size_t N>
std::optional<std::size_t> argmax_median(const std::array<std::optional<trend::FiveNumberSummary>, N>& profile) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < N; ++i) {
        if (profile[i] && (!best || profile[i]->median > profile[*best]->median)) {
            best = i;
        }
    }
    return best;
}

// ---- simulate -----------------------------------------------------------

void check_params(const std::string& station, const SimulationParams& p) {
    const auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!std::isfinite(p.alpha) || !finite(p.beta) || !finite(p.theta)) {
        throw PreconditionError(station + ": ARMA parameters must be finite");
    }
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) {
        throw PreconditionError(station + ": sigma must be positive");
    }
    if (!(p.diurnal_amplitude >= 0.0) || !(p.hourly_noise >= 0.0)) {
        throw PreconditionError(station + ": diurnal amplitude and hourly noise must be non-negative");
    }
    if (!arima::ar_is_stationary(p.beta)) {
        throw NonStationaryError(station + ": AR coefficients are not stationary");
    }
}

SimulationParams params_from_json(const json& j, SimulationParams p) {
    p.alpha = j.value("alpha", p.alpha);
    p.beta = j.value("beta", p.beta);
    p.theta = j.value("theta", p.theta);
    p.sigma = j.value("sigma", p.sigma);
    p.diurnal_amplitude = j.value("diurnal_amplitude", p.diurnal_amplitude);
    p.hourly_noise = j.value("hourly_noise", p.hourly_noise);
    return p;
}

/// Hourly readings whose daily means equal `daily` (before clamping at zero).
std::string simulate_station_rows(const std::string& station, const SimulationParams& p, std::span<const double> daily,
                                  Date start, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::array<double, 24> shape{};
    for (int h = 0; h < 24; ++h) {
        // Twin peaks at 07:00 and 19:00.
        shape[h] = std::cos(2.0 * std::numbers::pi * (h - 7) / 12.0);
    }
    const double shape_mean = std::accumulate(shape.begin(), shape.end(), 0.0) / 24.0;
    const std::string name = csv_field(station);
    const Instant origin = local_midnight(start);
    std::string rows;
    std::array<double, 24> eps{};
    for (std::size_t d = 0; d < daily.size(); ++d) {
        for (double& e : eps) {
            e = noise(rng) * p.hourly_noise;
        }
        const double eps_mean = std::accumulate(eps.begin(), eps.end(), 0.0) / 24.0;
        for (int h = 0; h < 24; ++h) {
            const double v = daily[d] + p.diurnal_amplitude * (shape[h] - shape_mean) + (eps[h] - eps_mean);
            const Instant at{origin.epoch_seconds + static_cast<std::int64_t>(d) * kSecondsPerDay +
                             h * kSecondsPerHour};
            rows += name;
            rows += ',';
            rows += format_iso8601(at);
            rows += ",PM25,";
            rows += format_number(std::max(0.0, v));
            rows += '\n';
        }
    }
    return rows;
}

} // namespace

// ---- public helpers -----------------------------------------------------

std::uint64_t derive_seed(std::uint64_t root, std::string_view station, std::string_view purpose) {
    return splitmix64(splitmix64(root ^ fnv1a(station)) ^ fnv1a(purpose));
}

std::map<std::string, SimulationParams> default_simulation_params() {
    // Means alpha / (1 - sum beta) between 30 and 45.
    const auto make = [](double alpha, std::vector<double> beta, std::vector<double> theta, double sigma) {
        double s = 0.0;
        for (const double b : beta) {
            s += b;
        }
        const double mean = alpha / (1.0 - s);
        return SimulationParams{alpha, std::move(beta), std::move(theta), sigma, 0.2 * mean, 0.075 * mean};
    };
    std::map<std::string, SimulationParams> out;
    out["Gitega"] = make(12.0, {0.7}, {}, 1.0);
    out["Rusororo"] = make(9.0, {0.75}, {}, 3.0);
    out["Gacuriro"] = make(16.0, {0.6}, {0.3}, 4.0);
    out["Kiyovu"] = make(10.0, {0.5, 0.25}, {}, 3.5);
    out["Rebero"] = make(6.0, {0.8}, {}, 2.5);
    out["Mount Kigali"] = make(13.5, {0.55}, {0.4}, 3.0);
    out["Kimihurura"] = make(14.0, {0.65}, {}, 3.0);
    out["Gikondo Mburabuturo"] = make(22.5, {0.5}, {0.2}, 5.0);
    out["Gikomero"] = make(7.0, {0.8}, {}, 2.0);
    return out;
}

SplitSpec parse_holdout(std::string_view text) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw PreconditionError("invalid --holdout '" + std::string(text) + "'");
    }
    if (v > 0.0 && v < 1.0) {
        return SplitSpec::fraction(v);
    }
    if (v >= 1.0 && v == std::floor(v) && text.find('.') == std::string_view::npos) {
        return SplitSpec::count(static_cast<std::size_t>(v));
    }
    throw PreconditionError("--holdout must be a fraction in (0,1) or a whole count, got '" + std::string(text) + "'");
}

TimeSeries read_series_csv(const fs::path& path, Granularity granularity) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "timestamp,value") {
        throw SchemaError(path.string() + ": expected header 'timestamp,value'");
    }
    std::vector<Observation> obs;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::size_t comma = line.find(',');
        const auto at = comma == std::string::npos ? std::nullopt : parse_iso8601(line.substr(0, comma));
        double v = 0.0;
        const char* first = line.data() + (comma == std::string::npos ? 0 : comma + 1);
        const char* last = line.data() + line.size();
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (!at || ec != std::errc{} || ptr != last) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
        }
        obs.push_back({*at, v});
    }
    try {
        return TimeSeries(granularity, std::move(obs));
    } catch (const PreconditionError& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_series_csv(const fs::path& path, const TimeSeries& series) {
    std::string text = "timestamp,value\n";
    for (const auto& o : series.observations()) {
        text += format_iso8601(o.at);
        text += ',';
        text += format_number(o.value);
        text += '\n';
    }
    write_text(path, text);
}

// ---- commands -----------------------------------------------------------

int cmd_ingest(const RunConfig& config) {
    if (config.inputs.empty()) {
        throw PreconditionError("ingest needs at least one --input file");
    }
    ColumnMapping mapping;
    std::vector<RawReading> readings;
    ordered_json report = ordered_json::object();
    report["pollutant"] = to_string(config.pollutant);
    report["inputs"] = ordered_json::array();
    std::size_t rows_read = 0;
    std::size_t rows_accepted = 0;
    std::vector<Station> seen;
    for (const auto& input : config.inputs) {
        ParsedReadings parsed = read_readings_file(input, mapping);
        json r = parsed.report;
        ordered_json entry = {{"path", input.string()}};
        for (const auto& [k, v] : r.items()) {
            entry[k] = v;
        }
        report["inputs"].push_back(std::move(entry));
        rows_read += parsed.report.rows_read;
        rows_accepted += parsed.report.rows_accepted;
        for (const Station& s : parsed.report.stations_seen) {
            if (std::find(seen.begin(), seen.end(), s) == seen.end()) {
                seen.push_back(s);
            }
        }
        readings.insert(readings.end(), std::make_move_iterator(parsed.readings.begin()),
                        std::make_move_iterator(parsed.readings.end()));
    }
    report["rows_read"] = rows_read;
    report["rows_accepted"] = rows_accepted;

    std::vector<Station> stations;
    for (const Station& s : seen) {
        if (station_selected(config, s)) {
            stations.push_back(s);
        }
    }
    std::sort(stations.begin(), stations.end());

    std::vector<std::optional<StationEntry>> entries(stations.size());
    parallel_for(stations.size(), worker_count(config), [&](std::size_t i) {
        TimeSeries raw;
        try {
            raw = build_station_series(readings, stations[i], config.pollutant);
        } catch (const EmptySeries&) {
            return; // station reported no readings of this pollutant
        }
        const TimeSeries hourly = resample_mean(raw, Granularity::Hourly, 0.0);
        TimeSeries daily(Granularity::Daily, {});
        try {
            daily = resample_mean(hourly, Granularity::Daily, kDailyCoverage);
        } catch (const EmptySeries&) {
        }
        const std::string stem = stations[i].file_stem();
        write_series_csv(hourly_path(config.out, stem), hourly);
        write_series_csv(daily_path(config.out, stem), daily);
        entries[i] = StationEntry{stations[i].name(), stem, hourly.size(), daily.size()};
    });

    ordered_json index = {{"pollutant", to_string(config.pollutant)},
                          {"daily_min_coverage", kDailyCoverage},
                          {"timezone", "UTC+02:00"},
                          {"stations", ordered_json::array()}};
    std::vector<std::string> written;
    for (const auto& e : entries) {
        if (!e) {
            continue;
        }
        index["stations"].push_back({{"name", e->name},
                                     {"stem", e->stem},
                                     {"hourly_count", e->hourly_count},
                                     {"daily_count", e->daily_count}});
        written.push_back(e->name);
    }
    report["stations_written"] = written;
    write_json(config.out / "ingest_report.json", report);
    if (written.empty()) {
        std::cerr << "aircast: no accepted " << to_string(config.pollutant) << " readings"
                  << (config.stations.empty() ? "" : " for the selected stations") << "\n";
        return kExitEmpty;
    }
    write_json(config.out / "series" / "index.json", index);
    std::cout << "ingested " << rows_accepted << " of " << rows_read << " rows for " << written.size()
              << " station(s) into " << (config.out / "series").string() << "\n";
    return kExitOk;
}

int cmd_trend(const RunConfig& config) {
    if (!std::isfinite(config.who_threshold) || config.who_threshold < 0.0) {
        throw PreconditionError("--who-threshold must be a non-negative number");
    }
    const fs::path root = data_root(config);
    const std::vector<StationEntry> stations = load_index(root, config);
    const fs::path dir = config.out / "trend";
    std::vector<ordered_json> summaries(stations.size());
    std::vector<double> medians(stations.size());

    parallel_for(stations.size(), worker_count(config), [&](std::size_t i) {
        const StationEntry& e = stations[i];
        const TimeSeries hourly = read_series_csv(hourly_path(root, e.stem), Granularity::Hourly);
        const TimeSeries daily = read_series_csv(daily_path(root, e.stem), Granularity::Daily);
        if (hourly.empty() || daily.empty()) {
            throw EmptySeries(e.name + ": series is empty after coverage filtering");
        }
        const auto hours = trend::hour_of_day_profile(hourly);
        const auto weekdays = trend::day_of_week_profile(daily);
        const auto calendar = trend::calendar_daily_means(daily);
        const auto seasons = trend::seasonal_means(daily);
        const auto exceedance = trend::who_exceedance(calendar, config.who_threshold);

        const fs::path base = dir / e.stem;
        write_table(base.string() + "_hour_of_day", config.format, trend::hour_profile_table(hours));
        write_table(base.string() + "_day_of_week", config.format, trend::weekday_profile_table(weekdays));
        write_table(base.string() + "_calendar", config.format, trend::calendar_table(calendar));
        write_table(base.string() + "_seasonal", config.format, trend::seasonal_table(seasons));
        write_table(base.string() + "_who_exceedance", config.format, trend::exceedance_table(exceedance));

        const std::vector<double> hv = hourly.values();
        const auto overall = trend::five_number_summary(hv);
        medians[i] = overall.median;
        ordered_json s = {{"station", e.name}, {"median_hourly", overall.median}};
        const auto peak_hour = argmax_median(hours);
        const auto peak_day = argmax_median(weekdays);
        s["peak_hour"] = peak_hour ? ordered_json(*peak_hour) : ordered_json(nullptr);
        s["peak_weekday"] = peak_day ? ordered_json(trend::kWeekdayNames[*peak_day]) : ordered_json(nullptr);
        ordered_json season_json = ordered_json::object();
        for (const auto& [season, m] : seasons) {
            season_json[std::string(trend::to_string(season))] = m.mean;
        }
        s["seasonal_means"] = std::move(season_json);
        s["who_threshold"] = exceedance.threshold;
        s["fraction_days_exceeding"] =
            exceedance.fraction_exceeding ? ordered_json(*exceedance.fraction_exceeding) : ordered_json(nullptr);
        summaries[i] = std::move(s);
    });

    std::vector<std::size_t> order(stations.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return medians[a] > medians[b]; });
    ordered_json ranking = ordered_json::array();
    for (std::size_t r = 0; r < order.size(); ++r) {
        ordered_json s = {{"rank", r + 1}};
        for (const auto& [k, v] : summaries[order[r]].items()) {
            s[k] = v;
        }
        ranking.push_back(std::move(s));
    }
    write_json(dir / "summary.json", ordered_json{{"ranked_by", "median hourly concentration, descending"},
                                                  {"stations", std::move(ranking)}});
    std::cout << "wrote trend tables for " << stations.size() << " station(s) to " << dir.string() << "\n";
    return kExitOk;
}

int cmd_forecast(const RunConfig& config) {
    if (config.horizon == 0) {
        throw PreconditionError("--horizon must be at least 1");
    }
    const std::vector<std::string> models = canonical_models(config.models);
    const fs::path root = data_root(config);
    const std::vector<StationEntry> stations = load_index(root, config);
    const fs::path dir = config.out / "forecast";
    std::vector<std::size_t> succeeded(stations.size(), 0);

    parallel_for(stations.size(), worker_count(config), [&](std::size_t i) {
        const StationEntry& e = stations[i];
        const TimeSeries series = model_series(root, e, config.granularity);
        const auto [train, test] = split_holdout(series, config.split);
        const eval::ModelSettings settings = model_settings(config, e.name);

        struct Track {
            std::string name;
            std::vector<double> means;
            std::vector<double> variances;
        };
        std::vector<Track> tracks;
        ordered_json status = ordered_json::object();
        for (const auto& name : models) {
            try {
                Track t{name, {}, {}};
                auto adapter = eval::make_adapter(name, settings);
                adapter->fit(train);
                if (auto* a = dynamic_cast<eval::ArimaAdapter*>(adapter.get())) {
                    t.means = arima::forecast(a->model(), train, config.horizon);
                } else if (auto* n = dynamic_cast<eval::AnnAdapter*>(adapter.get())) {
                    t.means = ann::forecast_recursive(n->net(), train, config.horizon);
                } else if (auto* g = dynamic_cast<eval::GpAdapter*>(adapter.get())) {
                    const gp::GpModel model = gp::restore(g->summary());
                    std::vector<double> future(config.horizon);
                    for (std::size_t h = 0; h < config.horizon; ++h) {
                        future[h] = model.train_inputs().back() + static_cast<double>(h + 1);
                    }
                    gp::Posterior post = gp::posterior(model, future);
                    t.means = std::move(post.means);
                    t.variances = std::move(post.variances);
                } else {
                    t.means.assign(config.horizon, adapter->predict_one(train));
                }
                write_json(dir / (e.stem + "_" + name + ".json"), adapter->describe());
                status[name] = "ok";
                tracks.push_back(std::move(t));
            } catch (const Error& ex) {
                status[name] = std::string("failed: ") + ex.what();
                std::cerr << "aircast: " << e.name << ": " << name << " failed: " << ex.what() << "\n";
            }
        }
        succeeded[i] = tracks.size();
        if (tracks.empty()) {
            return;
        }

        std::vector<std::string> stamps;
        std::vector<std::optional<double>> actual;
        for (std::size_t h = 0; h < config.horizon; ++h) {
            const Instant at = step_after(train.back().at, config.granularity, h + 1);
            stamps.push_back(format_iso8601(at));
            std::optional<double> a;
            for (const auto& o : test.observations()) {
                if (o.at == at) {
                    a = o.value;
                }
            }
            actual.push_back(a);
        }
        const fs::path path = dir / (e.stem + "_forecast" + extension(config.format));
        if (config.format == OutputFormat::Json) {
            ordered_json j = {{"station", e.name},
                              {"granularity", to_string(config.granularity)},
                              {"train_end", format_iso8601(train.back().at)},
                              {"horizon", config.horizon},
                              {"timestamps", stamps},
                              {"status", status}};
            ordered_json act = ordered_json::array();
            for (const auto& a : actual) {
                act.push_back(a ? ordered_json(*a) : ordered_json(nullptr));
            }
            j["actual"] = std::move(act);
            ordered_json tj = ordered_json::object();
            for (const auto& t : tracks) {
                tj[t.name] = {{"means", t.means}};
                if (!t.variances.empty()) {
                    tj[t.name]["variances"] = t.variances;
                }
            }
            j["tracks"] = std::move(tj);
            write_json(path, j);
        } else {
            std::string text = "timestamp,actual";
            for (const auto& t : tracks) {
                text += "," + t.name;
                if (!t.variances.empty()) {
                    text += "," + t.name + "_variance";
                }
            }
            text += '\n';
            for (std::size_t h = 0; h < config.horizon; ++h) {
                text += stamps[h] + "," + (actual[h] ? format_number(*actual[h]) : "");
                for (const auto& t : tracks) {
                    text += "," + format_number(t.means[h]);
                    if (!t.variances.empty()) {
                        text += "," + format_number(t.variances[h]);
                    }
                }
                text += '\n';
            }
            write_text(path, text);
        }
    });

    for (std::size_t i = 0; i < stations.size(); ++i) {
        if (succeeded[i] == 0) {
            std::cerr << "aircast: " << stations[i].name << ": no model succeeded\n";
            return kExitNoModel;
        }
    }
    std::cout << "wrote " << config.horizon << "-step forecasts for " << stations.size() << " station(s) to "
              << dir.string() << "\n";
    return kExitOk;
}

int cmd_evaluate(const RunConfig& config) {
    const std::vector<std::string> models = canonical_models(config.models);
    const fs::path root = data_root(config);
    const std::vector<StationEntry> stations = load_index(root, config);
    const fs::path dir = config.out / "evaluate";
    std::vector<eval::EvalReport> reports(stations.size());

    parallel_for(stations.size(), worker_count(config), [&](std::size_t i) {
        const StationEntry& e = stations[i];
        const TimeSeries series = model_series(root, e, config.granularity);
        const eval::ModelSettings settings = model_settings(config, e.name);
        std::vector<std::unique_ptr<eval::ForecastAdapter>> adapters;
        for (const auto& name : models) {
            adapters.push_back(eval::make_adapter(name, settings));
        }
        reports[i] = eval::compare_models(e.name, series, config.split, adapters);

        const eval::EvalReport& r = reports[i];
        std::string text = "timestamp,actual";
        std::vector<const eval::ModelResult*> ok;
        for (const auto& m : r.models) {
            if (m.ok) {
                ok.push_back(&m);
                text += "," + m.name;
            } else {
                std::cerr << "aircast: " << e.name << ": " << m.name << " failed: " << m.error << "\n";
            }
        }
        text += '\n';
        const std::vector<double> actual = series.slice(r.train_size, series.size()).values();
        for (std::size_t t = 0; t < r.test_instants.size(); ++t) {
            text += format_iso8601(r.test_instants[t]) + "," + format_number(actual[t]);
            for (const auto* m : ok) {
                text += "," + format_number(m->predictions[t]);
            }
            text += '\n';
        }
        write_text(dir / (e.stem + "_predictions.csv"), text);
    });

    {
        std::ofstream out = open_output(dir / "table.csv");
        eval::write_comparison_table(out, reports, models);
        if (!out.flush()) {
            throw IoError("failed writing " + (dir / "table.csv").string());
        }
    }
    json report = {{"protocol", eval::kEvaluationProtocol},
                   {"granularity", to_string(config.granularity)},
                   {"split", config.split.describe()},
                   {"seed", config.seed},
                   {"models", models},
                   {"stations", reports}};
    write_json(dir / "report.json", report);

    const bool any_ok = std::any_of(reports.begin(), reports.end(), [](const eval::EvalReport& r) {
        return std::any_of(r.models.begin(), r.models.end(), [](const eval::ModelResult& m) { return m.ok; });
    });
    if (!any_ok) {
        std::cerr << "aircast: no model succeeded on any station\n";
        return kExitNoModel;
    }
    std::cout << "wrote comparison table for " << stations.size() << " station(s) to "
              << (dir / "table.csv").string() << "\n";
    return kExitOk;
}

int cmd_simulate(const RunConfig& config) {
    if (config.days < kMinTrainLength + 1) {
        throw PreconditionError("--days must be at least " + std::to_string(kMinTrainLength + 1));
    }
    std::map<std::string, SimulationParams> params;
    if (config.params_file) {
        const json j = read_json(*config.params_file);
        if (!j.is_object()) {
            throw SchemaError("simulation parameter file must map station names to parameter objects");
        }
        const auto defaults = default_simulation_params();
        try {
            for (const auto& [name, value] : j.items()) {
                const auto it = defaults.find(name);
                params[name] = params_from_json(value, it == defaults.end() ? SimulationParams{} : it->second);
            }
        } catch (const json::exception& e) {
            throw SchemaError(std::string("malformed simulation parameters: ") + e.what());
        }
    } else {
        params = default_simulation_params();
    }
    std::vector<std::string> names;
    if (config.stations.empty()) {
        for (const auto& [name, p] : params) {
            names.push_back(name);
        }
    } else {
        for (const auto& s : config.stations) {
            const auto it = std::find_if(params.begin(), params.end(),
                                         [&](const auto& kv) { return Station(kv.first) == Station(s); });
            if (it == params.end()) {
                params[s] = SimulationParams{};
                names.push_back(s);
            } else {
                names.push_back(it->first);
            }
        }
    }
    // Roster order for the built-in stations, then the rest alphabetically.
    std::stable_sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) {
        const auto rank = [](const std::string& n) {
            const auto it = std::find(kKigaliStations.begin(), kKigaliStations.end(), n);
            return static_cast<std::size_t>(it - kKigaliStations.begin());
        };
        return rank(a) < rank(b);
    });
    for (const auto& name : names) {
        SimulationParams& p = params[name];
        if (config.alpha) {
            p.alpha = *config.alpha;
        }
        if (config.beta) {
            p.beta = *config.beta;
        }
        if (config.theta) {
            p.theta = *config.theta;
        }
        if (config.sigma) {
            p.sigma = *config.sigma;
        }
        check_params(name, p);
    }

    std::vector<std::string> chunks(names.size());
    parallel_for(names.size(), worker_count(config), [&](std::size_t i) {
        const std::string key = Station(names[i]).key();
        const SimulationParams& p = params[names[i]];
        const TimeSeries daily =
            arima::simulate_arma(p.alpha, p.beta, p.theta, p.sigma, config.days, derive_seed(config.seed, key, "arma"));
        chunks[i] = simulate_station_rows(names[i], p, daily.values(), config.start,
                                          derive_seed(config.seed, key, "hourly"));
    });

    std::string text = "station,timestamp,pollutant,value\n";
    for (const auto& c : chunks) {
        text += c;
    }
    const fs::path path = config.out / "simulated.csv";
    write_text(path, text);

    ordered_json meta = {{"seed", config.seed},
                         {"days", config.days},
                         {"start", format_date(config.start)},
                         {"stations", ordered_json::object()}};
    for (const auto& name : names) {
        const SimulationParams& p = params[name];
        meta["stations"][name] = {{"alpha", p.alpha},
                                  {"beta", p.beta},
                                  {"theta", p.theta},
                                  {"sigma", p.sigma},
                                  {"diurnal_amplitude", p.diurnal_amplitude},
                                  {"hourly_noise", p.hourly_noise}};
    }
    write_json(config.out / "simulated_params.json", meta);
    std::cout << "simulated " << names.size() << " station(s) x " << config.days << " days into " << path.string()
              << "\n";
    return kExitOk;
}

// ---- argument parsing ---------------------------------------------------

int run(int argc, const char* const* argv) {
    CLI::App app{"Air-pollution time-series toolkit", "aircast"};
    app.require_subcommand(1, 1);

    RunConfig config;
    std::vector<std::string> inputs;
    std::string out;
    std::string granularity = "daily";
    std::string holdout = "0.2";
    std::string format = "csv";
    std::string pollutant = "PM25";
    std::string start = "2020-01-01";
    std::string params_file;
    std::string beta;
    std::string theta;
    double alpha = 0.0;
    double sigma = 0.0;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "Output directory (default: $AIRCAST_OUT or ./aircast_out)");
        sub->add_option("--station", config.stations, "Restrict to these stations")->delimiter(',');
        sub->add_option("--seed", config.seed, "Root random seed")->capture_default_str();
        sub->add_option("--jobs", config.jobs, "Worker threads (0 = available parallelism)");
        sub->add_option("--pollutant", pollutant, "Pollutant to analyse")->capture_default_str();
    };
    const auto modelling = [&](CLI::App* sub) {
        sub->add_option("--granularity", granularity, "hourly or daily")->capture_default_str();
        sub->add_option("--models", config.models, "Comma-separated models: arima, ann, gp, naive")
            ->delimiter(',');
        sub->add_option("--holdout", holdout, "Trailing holdout: fraction in (0,1) or count")->capture_default_str();
    };
    const auto data_input = [&](CLI::App* sub) {
        sub->add_option("--input", inputs, "Directory written by `aircast ingest` (default: --out)");
    };

    CLI::App* ingest = app.add_subcommand("ingest", "Parse readings into cleaned hourly and daily series");
    common(ingest);
    ingest->add_option("--input", inputs, "Readings CSV (optionally .gz)")->required();
    ingest->add_option("--granularity", granularity, "Accepted for symmetry; both series are always written");

    CLI::App* trend = app.add_subcommand("trend", "Hour, weekday, calendar, season and guideline tables");
    common(trend);
    data_input(trend);
    trend->add_option("--who-threshold", config.who_threshold, "Daily guideline in ug/m3")->capture_default_str();
    trend->add_option("--format", format, "csv or json")->capture_default_str();

    CLI::App* forecast = app.add_subcommand("forecast", "Fit models on the training split and forecast ahead");
    common(forecast);
    data_input(forecast);
    modelling(forecast);
    forecast->add_option("--horizon", config.horizon, "Steps to forecast")->capture_default_str();
    forecast->add_option("--format", format, "csv or json")->capture_default_str();

    CLI::App* evaluate = app.add_subcommand("evaluate", "Rolling one-step RMSE/MAE comparison table");
    common(evaluate);
    data_input(evaluate);
    modelling(evaluate);

    CLI::App* simulate = app.add_subcommand("simulate", "Write a synthetic multi-station readings CSV");
    common(simulate);
    simulate->add_option("--days", config.days, "Days per station")->capture_default_str();
    simulate->add_option("--start", start, "First local date")->capture_default_str();
    simulate->add_option("--params", params_file, "JSON object of per-station ARMA parameters");
    auto* alpha_opt = simulate->add_option("--alpha", alpha, "Override the ARMA intercept");
    auto* beta_opt = simulate->add_option("--beta", beta, "Override AR coefficients, comma-separated");
    auto* theta_opt = simulate->add_option("--theta", theta, "Override MA coefficients, comma-separated");
    auto* sigma_opt = simulate->add_option("--sigma", sigma, "Override the innovation standard deviation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (!out.empty()) {
            config.out = out;
        } else if (const char* env = std::getenv("AIRCAST_OUT"); env != nullptr && *env != '\0') {
            config.out = env;
        }
        config.inputs.assign(inputs.begin(), inputs.end());
        const auto g = parse_granularity(granularity);
        if (!g) {
            throw PreconditionError("unknown granularity '" + granularity + "'");
        }
        config.granularity = *g;
        const auto p = parse_pollutant(pollutant);
        if (!p) {
            throw PreconditionError("unknown pollutant '" + pollutant + "'");
        }
        config.pollutant = *p;
        config.split = parse_holdout(holdout);
        if (format == "csv") {
            config.format = OutputFormat::Csv;
        } else if (format == "json") {
            config.format = OutputFormat::Json;
        } else {
            throw PreconditionError("--format must be csv or json");
        }
        const auto d = parse_date(start);
        if (!d) {
            throw PreconditionError("invalid --start date '" + start + "'");
        }
        config.start = *d;
        if (!params_file.empty()) {
            config.params_file = params_file;
        }
        if (alpha_opt->count() > 0) {
            config.alpha = alpha;
        }
        if (beta_opt->count() > 0) {
            config.beta = parse_number_list(beta);
        }
        if (theta_opt->count() > 0) {
            config.theta = parse_number_list(theta);
        }
        if (sigma_opt->count() > 0) {
            config.sigma = sigma;
        }

        if (ingest->parsed()) {
            return cmd_ingest(config);
        }
        if (trend->parsed()) {
            return cmd_trend(config);
        }
        if (forecast->parsed()) {
            return cmd_forecast(config);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(config);
        }
        return cmd_simulate(config);
    } catch (const IoError& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitIo;
    } catch (const EmptySeries& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitEmpty;
    } catch (const SchemaError& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitValidation;
    } catch (const PreconditionError& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NoConvergedModel& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitNoModel;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "aircast: " << e.what() << "\n";
        return kExitIo;
    }
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"aircast"};
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace aircast::cli
