#pragma once

#include "aircast/trend.hpp"

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace aircast::trend {

/// Plot-ready table: one row per group, cells are numbers, strings, booleans or null.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::ordered_json>> rows;
    /// Extra top-level fields for the JSON form.
    nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

    void write_csv(std::ostream& out) const;
    /// {metadata..., "columns": [...], "rows": [{column: value}, ...]}
    nlohmann::ordered_json to_json() const;
};

Table hour_profile_table(const HourProfile& profile);
Table weekday_profile_table(const WeekdayProfile& profile);
Table calendar_table(const CalendarGrid& grid);
Table seasonal_table(const std::map<Season, SeasonMean>& means);
Table exceedance_table(const ExceedanceReport& report);

} // namespace aircast::trend
