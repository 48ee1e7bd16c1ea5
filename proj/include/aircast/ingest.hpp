#pragma once

#include "aircast/timeseries.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace aircast {

enum class Pollutant { PM25, PM10, SO2, NO2, CO };

std::string_view to_string(Pollutant p);
/// Accepts the canonical names plus common spellings (`PM2.5`, `pm2_5`, ...).
std::optional<Pollutant> parse_pollutant(std::string_view text);

/// Monitoring station name. Spelling is preserved; equality ignores case.
class Station {
public:
    Station() = default;
    explicit Station(std::string name);

    const std::string& name() const noexcept { return name_; }
    /// Lower-cased name, used for comparisons and ordering.
    const std::string& key() const noexcept { return key_; }
    /// Name safe for use as a file stem (spaces and separators become `_`).
    std::string file_stem() const;

    friend bool operator==(const Station& a, const Station& b) { return a.key_ == b.key_; }
    friend auto operator<=>(const Station& a, const Station& b) { return a.key_ <=> b.key_; }

private:
    std::string name_;
    std::string key_;
};

/// The nine low-cost sensor stations deployed around Kigali.
inline constexpr std::array<std::string_view, 9> kKigaliStations = {
    "Gitega", "Rusororo", "Gacuriro", "Kiyovu", "Rebero", "Mount Kigali", "Kimihurura", "Gikondo Mburabuturo",
    "Gikomero"};

struct RawReading {
    Station station;
    Instant at;
    Pollutant pollutant = Pollutant::PM25;
    double value = 0.0;
};

struct RowReject {
    std::size_t line = 0;
    std::string reason;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_accepted = 0;
    std::vector<RowReject> rejects;
    std::vector<Station> stations_seen;
};

void to_json(nlohmann::json& j, const IngestReport& report);
void from_json(const nlohmann::json& j, IngestReport& report);

/// Header names for each logical column. Without a pollutant column every row
/// is attributed to `default_pollutant`.
struct ColumnMapping {
    std::string station = "station";
    std::string timestamp = "timestamp";
    std::string pollutant = "pollutant";
    std::string value = "value";
    std::optional<Pollutant> default_pollutant;
};

struct ParsedReadings {
    std::vector<RawReading> readings;
    IngestReport report;
};

/// Reads a CSV with a header row. Bad rows are recorded in the report and skipped.
/// Throws IoError on stream failure and SchemaError when required columns are missing.
ParsedReadings parse_readings(std::istream& input, const ColumnMapping& mapping = {});
ParsedReadings parse_readings(std::string_view text, const ColumnMapping& mapping = {});
/// As above, reading from disk; files ending in `.gz` are decompressed.
ParsedReadings read_readings_file(const std::filesystem::path& path, const ColumnMapping& mapping = {});

/// One station's readings of one pollutant, sorted, with duplicate instants
/// replaced by their mean. Throws EmptySeries if nothing matches.
TimeSeries build_station_series(std::span<const RawReading> readings, const Station& station, Pollutant pollutant);

} // namespace aircast
