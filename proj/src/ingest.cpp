#include "aircast/ingest.hpp"

#include "aircast/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <sstream>

#include <zlib.h>

namespace aircast {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

// Splits one CSV record. Quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') {
        text.remove_prefix(1);
    }
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ptr != end) {
        return std::nullopt;
    }
    if (ec == std::errc::result_out_of_range) {
        return std::numeric_limits<double>::infinity();
    }
    if (ec != std::errc{}) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::size_t> find_column(const std::vector<std::string>& header, std::string_view name) {
    const std::string wanted = lower(trim(name));
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (lower(trim(header[i])) == wanted) {
            return i;
        }
    }
    return std::nullopt;
}

} // namespace

std::string_view to_string(Pollutant p) {
    switch (p) {
    case Pollutant::PM25:
        return "PM25";
    case Pollutant::PM10:
        return "PM10";
    case Pollutant::SO2:
        return "SO2";
    case Pollutant::NO2:
        return "NO2";
    case Pollutant::CO:
        return "CO";
    }
    return "PM25";
}

std::optional<Pollutant> parse_pollutant(std::string_view text) {
    std::string key;
    for (const char c : trim(text)) {
        if (c != '.' && c != '_' && c != ' ' && c != '-') {
            key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    if (key == "PM25") {
        return Pollutant::PM25;
    }
    if (key == "PM10") {
        return Pollutant::PM10;
    }
    if (key == "SO2") {
        return Pollutant::SO2;
    }
    if (key == "NO2") {
        return Pollutant::NO2;
    }
    if (key == "CO") {
        return Pollutant::CO;
    }
    return std::nullopt;
}

Station::Station(std::string name) : name_(std::move(name)), key_(lower(name_)) {}

std::string Station::file_stem() const {
    std::string out;
    for (const char c : name_) {
        const auto u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) || c == '-' ? c : '_');
    }
    return out.empty() ? std::string("station") : out;
}

void to_json(nlohmann::json& j, const IngestReport& report) {
    nlohmann::json rejects = nlohmann::json::array();
    for (const auto& r : report.rejects) {
        rejects.push_back({{"line", r.line}, {"reason", r.reason}});
    }
    nlohmann::json stations = nlohmann::json::array();
    for (const auto& s : report.stations_seen) {
        stations.push_back(s.name());
    }
    j = nlohmann::json{{"rows_read", report.rows_read},
                       {"rows_accepted", report.rows_accepted},
                       {"rejects", std::move(rejects)},
                       {"stations_seen", std::move(stations)}};
}

void from_json(const nlohmann::json& j, IngestReport& report) {
    report.rows_read = j.at("rows_read").get<std::size_t>();
    report.rows_accepted = j.at("rows_accepted").get<std::size_t>();
    report.rejects.clear();
    for (const auto& r : j.at("rejects")) {
        report.rejects.push_back({r.at("line").get<std::size_t>(), r.at("reason").get<std::string>()});
    }
    report.stations_seen.clear();
    for (const auto& s : j.at("stations_seen")) {
        report.stations_seen.emplace_back(s.get<std::string>());
    }
}

ParsedReadings parse_readings(std::istream& input, const ColumnMapping& mapping) {
    if (!input) {
        throw IoError("input stream is not readable");
    }
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(input, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            header = split_csv_line(line);
            break;
        }
    }
    if (input.bad()) {
        throw IoError("failed reading CSV header");
    }
    if (header.empty()) {
        throw SchemaError("CSV input has no header row");
    }
    // UTF-8 byte order mark.
    if (header.front().rfind("\xEF\xBB\xBF", 0) == 0) {
        header.front().erase(0, 3);
    }

    const auto station_col = find_column(header, mapping.station);
    const auto time_col = find_column(header, mapping.timestamp);
    const auto value_col = find_column(header, mapping.value);
    const auto pollutant_col = find_column(header, mapping.pollutant);
    std::string missing;
    const auto note_missing = [&](bool present, const std::string& name) {
        if (!present) {
            missing += (missing.empty() ? "" : ", ") + name;
        }
    };
    note_missing(station_col.has_value(), mapping.station);
    note_missing(time_col.has_value(), mapping.timestamp);
    note_missing(value_col.has_value(), mapping.value);
    note_missing(pollutant_col.has_value() || mapping.default_pollutant.has_value(), mapping.pollutant);
    if (!missing.empty()) {
        throw SchemaError("CSV header lacks required column(s): " + missing);
    }

    ParsedReadings out;
    std::map<std::string, std::size_t> seen;
    while (std::getline(input, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        ++out.report.rows_read;
        const auto reject = [&](std::string reason) { out.report.rejects.push_back({line_no, std::move(reason)}); };

        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            reject("expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
            continue;
        }
        const std::string_view station_name = trim(fields[*station_col]);
        if (station_name.empty()) {
            reject("empty station");
            continue;
        }
        const auto at = parse_iso8601(fields[*time_col]);
        if (!at) {
            reject("unparseable timestamp");
            continue;
        }
        std::optional<Pollutant> pollutant = mapping.default_pollutant;
        if (pollutant_col) {
            pollutant = parse_pollutant(fields[*pollutant_col]);
            if (!pollutant) {
                reject("unknown pollutant");
                continue;
            }
        }
        const auto value = parse_double(fields[*value_col]);
        if (!value) {
            reject("unparseable value");
            continue;
        }
        if (!std::isfinite(*value)) {
            reject("non-finite value");
            continue;
        }
        if (*value < 0.0) {
            reject("negative concentration");
            continue;
        }
        Station station{std::string(station_name)};
        if (seen.emplace(station.key(), out.report.stations_seen.size()).second) {
            out.report.stations_seen.push_back(station);
        }
        out.readings.push_back({std::move(station), *at, *pollutant, *value});
        ++out.report.rows_accepted;
    }
    if (input.bad()) {
        throw IoError("failed reading CSV body");
    }
    return out;
}

ParsedReadings parse_readings(std::string_view text, const ColumnMapping& mapping) {
    std::istringstream stream{std::string(text)};
    return parse_readings(stream, mapping);
}

ParsedReadings read_readings_file(const std::filesystem::path& path, const ColumnMapping& mapping) {
    if (path.extension() == ".gz") {
        gzFile file = gzopen(path.string().c_str(), "rb");
        if (file == nullptr) {
            throw IoError("cannot open " + path.string());
        }
        std::string text;
        char buf[1 << 15];
        int n = 0;
        while ((n = gzread(file, buf, sizeof buf)) > 0) {
            text.append(buf, static_cast<std::size_t>(n));
        }
        const bool failed = n < 0;
        gzclose(file);
        if (failed) {
            throw IoError("corrupt gzip stream in " + path.string());
        }
        return parse_readings(std::string_view(text), mapping);
    }
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    return parse_readings(file, mapping);
}

TimeSeries build_station_series(std::span<const RawReading> readings, const Station& station, Pollutant pollutant) {
    std::map<Instant, std::pair<double, std::size_t>> buckets;
    for (const auto& r : readings) {
        if (r.station == station && r.pollutant == pollutant) {
            auto& [sum, count] = buckets[r.at];
            sum += r.value;
            ++count;
        }
    }
    if (buckets.empty()) {
        throw EmptySeries("no " + std::string(to_string(pollutant)) + " readings for station " + station.name());
    }
    std::vector<Observation> obs;
    obs.reserve(buckets.size());
    for (const auto& [at, acc] : buckets) {
        obs.push_back({at, acc.first / static_cast<double>(acc.second)});
    }
    return TimeSeries(Granularity::Raw, std::move(obs));
}

} // namespace aircast
