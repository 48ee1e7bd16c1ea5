#include "aircast/trend_io.hpp"

#include "aircast/csv.hpp"

#include <ostream>

namespace aircast::trend {

namespace {

using Cell = nlohmann::ordered_json;

std::vector<Cell> summary_cells(const std::optional<FiveNumberSummary>& s) {
    if (!s) {
        return {0, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr};
    }
    return {s->count, s->min, s->q1, s->median, s->q3, s->max, s->iqr};
}

const std::vector<std::string> kSummaryColumns = {"count", "min", "q1", "median", "q3", "max", "iqr"};

std::string_view season_months(Season s) {
    switch (s) {
    case Season::LongDry:
        return "Jun-Aug";
    case Season::ShortRainy:
        return "Sep-Nov";
    case Season::ShortDry:
        return "Dec-Feb";
    case Season::LongRainy:
        return "Mar-May";
    }
    return "";
}

} // namespace

void Table::write_csv(std::ostream& out) const {
    for (std::size_t c = 0; c < columns.size(); ++c) {
        out << (c ? "," : "") << csv_field(columns[c]);
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) {
                out << ',';
            }
            const Cell& cell = row[c];
            if (cell.is_null()) {
                continue;
            }
            if (cell.is_number_float()) {
                out << format_number(cell.get<double>());
            } else if (cell.is_number()) {
                out << cell.dump();
            } else if (cell.is_boolean()) {
                out << (cell.get<bool>() ? "true" : "false");
            } else if (cell.is_string()) {
                out << csv_field(cell.get<std::string>());
            } else {
                out << csv_field(cell.dump());
            }
        }
        out << '\n';
    }
}

nlohmann::ordered_json Table::to_json() const {
    nlohmann::ordered_json j = metadata;
    j["columns"] = columns;
    nlohmann::ordered_json items = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        nlohmann::ordered_json item = nlohmann::ordered_json::object();
        for (std::size_t c = 0; c < row.size() && c < columns.size(); ++c) {
            item[columns[c]] = row[c];
        }
        items.push_back(std::move(item));
    }
    j["rows"] = std::move(items);
    return j;
}

Table hour_profile_table(const HourProfile& profile) {
    Table t;
    t.columns = {"hour"};
    t.columns.insert(t.columns.end(), kSummaryColumns.begin(), kSummaryColumns.end());
    t.metadata["timezone"] = "UTC+02:00";
    for (std::size_t h = 0; h < profile.size(); ++h) {
        std::vector<Cell> row{h};
        const auto cells = summary_cells(profile[h]);
        row.insert(row.end(), cells.begin(), cells.end());
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table weekday_profile_table(const WeekdayProfile& profile) {
    Table t;
    t.columns = {"weekday_index", "weekday"};
    t.columns.insert(t.columns.end(), kSummaryColumns.begin(), kSummaryColumns.end());
    t.metadata["week_starts"] = "Monday";
    t.metadata["timezone"] = "UTC+02:00";
    for (std::size_t d = 0; d < profile.size(); ++d) {
        std::vector<Cell> row{d, std::string(kWeekdayNames[d])};
        const auto cells = summary_cells(profile[d]);
        row.insert(row.end(), cells.begin(), cells.end());
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table calendar_table(const CalendarGrid& grid) {
    Table t;
    t.columns = {"date", "daily_mean"};
    for (const auto& [date, value] : grid.entries) {
        t.rows.push_back({format_date(date), value});
    }
    return t;
}

Table seasonal_table(const std::map<Season, SeasonMean>& means) {
    Table t;
    t.columns = {"season", "months", "mean", "count"};
    for (const Season s : kSeasons) {
        const auto it = means.find(s);
        if (it != means.end()) {
            t.rows.push_back({std::string(to_string(s)), std::string(season_months(s)), it->second.mean,
                              it->second.count});
        }
    }
    return t;
}

Table exceedance_table(const ExceedanceReport& report) {
    Table t;
    t.columns = {"date", "daily_mean", "threshold", "exceeds"};
    t.metadata["threshold"] = report.threshold;
    t.metadata["comparison"] = "daily_mean > threshold";
    t.metadata["fraction_exceeding"] =
        report.fraction_exceeding ? Cell(*report.fraction_exceeding) : Cell(nullptr);
    for (const auto& row : report.rows) {
        t.rows.push_back({format_date(row.date), row.value, report.threshold, row.exceeds});
    }
    return t;
}

} // namespace aircast::trend
