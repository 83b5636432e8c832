#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mainrisk/csv.hpp"
#include "mainrisk/date.hpp"
#include "mainrisk/records.hpp"

namespace mainrisk {

/// What goes into a feature matrix. Categorical vocabularies are frozen
/// once from training data and reused for every split so the column set
/// never drifts; unseen categories fall into the `other` column.
struct FeatureSpec {
    std::vector<int> break_windows_years = {1, 2, 3, 5};
    bool all_time_window = true;
    double nearby_radius_ft = 100.0;
    int lookback_years = 6;

    std::vector<std::string> soil_vocab;
    std::vector<std::string> rock_vocab;
    std::vector<std::string> zone_vocab;

    void validate() const {
        if (break_windows_years.empty() && !all_time_window) {
            throw std::invalid_argument("feature spec: no break windows");
        }
        int prev = 0;
        for (const int w : break_windows_years) {
            if (w <= prev) {
                throw std::invalid_argument(
                    "feature spec: windows must be positive and ascending");
            }
            prev = w;
        }
        if (!break_windows_years.empty() &&
            lookback_years < break_windows_years.back()) {
            throw std::invalid_argument(
                "feature spec: lookback must cover the largest finite window");
        }
        if (nearby_radius_ft <= 0.0) {
            throw std::invalid_argument("feature spec: radius must be positive");
        }
    }

    void freeze_vocabularies(const BlockTable& table) {
        std::set<std::string> soil, rock, zone;
        for (const auto& b : table.blocks) {
            if (!b.has_mains) {
                continue;
            }
            soil.insert(b.soil_type);
            rock.insert(b.rock_type);
            zone.insert(b.pressure_zone);
        }
        soil_vocab.assign(soil.begin(), soil.end());
        rock_vocab.assign(rock.begin(), rock.end());
        zone_vocab.assign(zone.begin(), zone.end());
    }

    std::string nearby_column_name() const {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "nearby_breaks_%gft", nearby_radius_ft);
        return buf;
    }

    std::vector<std::string> column_names() const {
        std::vector<std::string> cols = {"pipe_age", "install_year",
                                         "diameter_in", "road_rating"};
        for (const int w : break_windows_years) {
            cols.push_back("breaks_" + std::to_string(w) + "y");
        }
        if (all_time_window) {
            cols.push_back("breaks_all");
        }
        cols.push_back(nearby_column_name());
        cols.push_back("install_year_imputed");
        cols.push_back("diameter_imputed");
        for (const Material m : all_materials()) {
            cols.push_back(std::string("material=") + to_string(m));
        }
        for (const auto& v : soil_vocab) {
            cols.push_back("soil=" + v);
        }
        cols.push_back("soil=other");
        for (const auto& v : rock_vocab) {
            cols.push_back("rock=" + v);
        }
        cols.push_back("rock=other");
        for (const auto& v : zone_vocab) {
            cols.push_back("zone=" + v);
        }
        cols.push_back("zone=other");
        return cols;
    }
};

struct FeatureRow {
    BlockId block_id = 0;
    Date reference_date;
};

struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<FeatureRow> rows;
    std::vector<std::vector<double>> values;  // values[row][column]
    std::optional<std::vector<int>> labels;   // absent in deployment scoring

    size_t n_rows() const { return rows.size(); }

    int column_index(const std::string& name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            return -1;
        }
        return static_cast<int>(it - columns.begin());
    }

    std::vector<double> column(const std::string& name) const {
        const int idx = column_index(name);
        if (idx < 0) {
            throw std::invalid_argument("no such feature column: " + name);
        }
        std::vector<double> out;
        out.reserve(values.size());
        for (const auto& row : values) {
            out.push_back(row[idx]);
        }
        return out;
    }

    /// Row-wise concatenation; the column sets must match exactly.
    void append(const FeatureMatrix& other) {
        if (columns.empty()) {
            *this = other;
            return;
        }
        if (columns != other.columns) {
            throw std::invalid_argument("feature matrix column mismatch");
        }
        rows.insert(rows.end(), other.rows.begin(), other.rows.end());
        values.insert(values.end(), other.values.begin(), other.values.end());
        if (labels && other.labels) {
            labels->insert(labels->end(), other.labels->begin(),
                           other.labels->end());
        } else if (labels || other.labels) {
            throw std::invalid_argument("cannot mix labeled and unlabeled rows");
        }
    }
};

namespace detail {

inline void one_hot(std::vector<double>& row, const std::string& value,
                    const std::vector<std::string>& vocab) {
    size_t hit = vocab.size();  // the trailing `other` column
    for (size_t i = 0; i < vocab.size(); ++i) {
        if (vocab[i] == value) {
            hit = i;
            break;
        }
    }
    for (size_t i = 0; i <= vocab.size(); ++i) {
        row.push_back(i == hit ? 1.0 : 0.0);
    }
}

}  // namespace detail

/// Builds the unlabeled matrix for one reference date. Only events dated
/// strictly before the reference date contribute to any value.
inline FeatureMatrix build_features(const BlockTable& table,
                                    const FeatureSpec& spec, Date reference,
                                    const DateRange& coverage) {
    spec.validate();
    if (!coverage.contains(reference)) {
        throw std::invalid_argument("reference date " + reference.to_string() +
                                    " outside data coverage");
    }

    // City-wide break events before the reference date, for nearby counts.
    std::vector<std::pair<std::string, geo::Point2>> past_events;
    std::map<BlockId, std::set<std::string>> own_events;
    for (const auto& b : table.blocks) {
        for (const auto& brk : b.breaks) {
            if (brk.date < reference) {
                past_events.emplace_back(brk.event_id, brk.location);
                own_events[b.block_id].insert(brk.event_id);
            }
        }
    }

    FeatureMatrix m;
    m.columns = spec.column_names();
    const int ref_year = reference.year();
    for (const auto& b : table.blocks) {
        if (!b.has_mains) {
            continue;
        }
        std::vector<double> row;
        row.reserve(m.columns.size());
        row.push_back(static_cast<double>(ref_year - b.install_year));
        row.push_back(static_cast<double>(b.install_year));
        row.push_back(b.diameter_in);

        // Latest survey strictly before the reference year; 0 when unrated.
        int rating = 0;
        for (const auto& [year, r] : b.road_ratings) {
            if (year < ref_year) {
                rating = r;
            }
        }
        row.push_back(static_cast<double>(rating));

        for (const int w : spec.break_windows_years) {
            const Date window_start = reference.add_years(-w);
            int count = 0;
            for (const auto& brk : b.breaks) {
                if (brk.date >= window_start && brk.date < reference) {
                    ++count;
                }
            }
            row.push_back(static_cast<double>(count));
        }
        if (spec.all_time_window) {
            int count = 0;
            for (const auto& brk : b.breaks) {
                if (brk.date < reference) {
                    ++count;
                }
            }
            row.push_back(static_cast<double>(count));
        }

        const auto own_it = own_events.find(b.block_id);
        static const std::set<std::string> kNone;
        const auto& exclude =
            own_it == own_events.end() ? kNone : own_it->second;
        row.push_back(static_cast<double>(geo::breaks_within_radius(
            past_events, b.geometry, spec.nearby_radius_ft, exclude)));

        row.push_back(b.install_year_imputed ? 1.0 : 0.0);
        row.push_back(b.diameter_imputed ? 1.0 : 0.0);

        for (const Material mat : all_materials()) {
            row.push_back(mat == b.material ? 1.0 : 0.0);
        }
        detail::one_hot(row, b.soil_type, spec.soil_vocab);
        detail::one_hot(row, b.rock_type, spec.rock_vocab);
        detail::one_hot(row, b.pressure_zone, spec.zone_vocab);

        m.rows.push_back({b.block_id, reference});
        m.values.push_back(std::move(row));
    }
    return m;
}

/// 1 iff the block sees at least one main break in [reference, reference +
/// horizon years). Requires full label coverage; deployment scoring simply
/// never calls this.
inline std::vector<int> label_blocks(const BlockTable& table, Date reference,
                                     int horizon_years, Date data_end) {
    const Date horizon_end = reference.add_years(horizon_years);
    if (horizon_end > data_end.add_days(1)) {
        throw std::invalid_argument(
            "label horizon extends past data end " + data_end.to_string());
    }
    std::vector<int> labels;
    for (const auto& b : table.blocks) {
        if (!b.has_mains) {
            continue;
        }
        int y = 0;
        for (const auto& brk : b.breaks) {
            if (brk.date >= reference && brk.date < horizon_end) {
                y = 1;
                break;
            }
        }
        labels.push_back(y);
    }
    return labels;
}

inline void write_features_csv(const FeatureMatrix& m,
                               const std::filesystem::path& path) {
    csv::Writer w(path.string());
    std::vector<std::string> header = {"block_id", "reference_date"};
    header.insert(header.end(), m.columns.begin(), m.columns.end());
    if (m.labels) {
        header.push_back("label");
    }
    w.row(header);
    for (size_t i = 0; i < m.n_rows(); ++i) {
        std::vector<std::string> row = {std::to_string(m.rows[i].block_id),
                                        m.rows[i].reference_date.to_string()};
        for (const double v : m.values[i]) {
            row.push_back(csv::fmt_double(v));
        }
        if (m.labels) {
            row.push_back(std::to_string((*m.labels)[i]));
        }
        w.row(row);
    }
}

inline FeatureMatrix read_features_csv(const std::filesystem::path& path) {
    const auto t = csv::read_file(path.string());
    if (t.header.size() < 3 || t.header[0] != "block_id" ||
        t.header[1] != "reference_date") {
        throw std::invalid_argument("not a features csv: " + path.string());
    }
    FeatureMatrix m;
    const bool labeled = t.header.back() == "label";
    const size_t n_cols = t.header.size() - 2 - (labeled ? 1 : 0);
    m.columns.assign(t.header.begin() + 2, t.header.begin() + 2 + n_cols);
    if (labeled) {
        m.labels.emplace();
    }
    for (const auto& r : t.rows) {
        if (r.size() != t.header.size()) {
            throw std::invalid_argument("ragged features csv row");
        }
        const auto date = Date::parse(r[1]);
        if (!date) {
            throw std::invalid_argument("bad reference_date in features csv");
        }
        m.rows.push_back({std::stoll(r[0]), *date});
        std::vector<double> vals;
        vals.reserve(n_cols);
        for (size_t c = 0; c < n_cols; ++c) {
            vals.push_back(std::strtod(r[2 + c].c_str(), nullptr));
        }
        m.values.push_back(std::move(vals));
        if (labeled) {
            m.labels->push_back(std::stoi(r.back()));
        }
    }
    return m;
}

}  // namespace mainrisk
