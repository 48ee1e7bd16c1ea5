#pragma once

#include "aircast/ingest.hpp"
#include "aircast/timeseries.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aircast::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,
    kExitValidation = 2,
    kExitEmpty = 3,
    kExitNoModel = 4,
};

enum class OutputFormat { Csv, Json };

/// ARMA parameters and hourly texture for one simulated station.
struct SimulationParams {
    double alpha = 12.0;
    std::vector<double> beta{0.7};
    std::vector<double> theta;
    double sigma = 1.0;
    /// Peak deviation of the zero-sum twin-peak daily cycle.
    double diurnal_amplitude = 8.0;
    /// Standard deviation of the zero-sum hourly noise.
    double hourly_noise = 3.0;
};

struct RunConfig {
    std::vector<std::filesystem::path> inputs;
    std::vector<std::string> stations;
    Pollutant pollutant = Pollutant::PM25;
    Granularity granularity = Granularity::Daily;
    SplitSpec split = SplitSpec::fraction(0.2);
    std::vector<std::string> models{"ARIMA", "ANN", "GPR"};
    std::uint64_t seed = 42;
    std::filesystem::path out = "aircast_out";
    OutputFormat format = OutputFormat::Csv;
    double who_threshold = 15.0;
    std::size_t horizon = 7;
    /// Worker threads for per-station work; 0 means available parallelism.
    std::size_t jobs = 0;

    // simulate only
    std::size_t days = 1096;
    Date start{std::chrono::year{2020}, std::chrono::month{1}, std::chrono::day{1}};
    std::optional<std::filesystem::path> params_file;
    std::optional<double> alpha;
    std::optional<std::vector<double>> beta;
    std::optional<std::vector<double>> theta;
    std::optional<double> sigma;
};

/// Deterministic per-station, per-purpose seed derived from the root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view station, std::string_view purpose);

/// Built-in parameters for the nine roster stations. Gitega is AR(1) with beta 0.7 and sigma 1.
std::map<std::string, SimulationParams> default_simulation_params();

/// `0.2` style values are fractions, whole numbers of at least 1 are counts.
SplitSpec parse_holdout(std::string_view text);

/// Reads a `timestamp,value` file written by the ingest command.
TimeSeries read_series_csv(const std::filesystem::path& path, Granularity granularity);
void write_series_csv(const std::filesystem::path& path, const TimeSeries& series);

int cmd_ingest(const RunConfig& config);
int cmd_trend(const RunConfig& config);
int cmd_forecast(const RunConfig& config);
int cmd_evaluate(const RunConfig& config);
int cmd_simulate(const RunConfig& config);

/// Parses `argv` (program name first), dispatches, and maps failures to exit codes.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

} // namespace aircast::cli
