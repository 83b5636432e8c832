#pragma once

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mainrisk/csv.hpp"
#include "mainrisk/date.hpp"
#include "mainrisk/records.hpp"

namespace mainrisk::ingest {

struct IngestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RejectRow {
    std::string file;
    long row = 0;  // physical row in the file; header is row 1
    std::string reason;
};

struct FileCounts {
    long accepted = 0;
    long rejected = 0;
};

struct IngestReport {
    std::vector<RejectRow> rejects;
    std::map<std::string, FileCounts> counts;  // keyed by file name
};

struct CoordinateBounds {
    double min_x = -1e9;
    double min_y = -1e9;
    double max_x = 1e9;
    double max_y = 1e9;

    bool contains(geo::Point2 p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
};

struct IngestOptions {
    std::optional<DateRange> date_range;  // unset: accept any parseable date
    CoordinateBounds bounds;
    std::vector<std::string> break_keywords = {"Main Break/Leak"};
    double max_reject_fraction = 0.10;
};

struct LoadResult {
    RawCity city;
    IngestReport report;
};

namespace detail {

inline std::optional<long long> parse_int(const std::string& s) {
    long long v = 0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end) {
        return std::nullopt;
    }
    return v;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) {
        return std::nullopt;
    }
    char* endp = nullptr;
    const double v = std::strtod(s.c_str(), &endp);
    if (endp != s.c_str() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

/// Geometry fields hold semicolon-separated "x y" vertex pairs in feet.
inline std::optional<std::vector<geo::Point2>> parse_vertices(
    const std::string& s) {
    std::vector<geo::Point2> pts;
    std::string pair;
    std::istringstream stream(s);
    while (std::getline(stream, pair, ';')) {
        std::istringstream ps(pair);
        double x = 0.0, y = 0.0;
        std::string extra;
        if (!(ps >> x >> y) || (ps >> extra)) {
            return std::nullopt;
        }
        pts.push_back({x, y});
    }
    if (pts.size() < 2) {
        return std::nullopt;
    }
    return pts;
}

inline std::string geometry_to_string(const geo::Polyline& line) {
    std::string out;
    for (const auto& p : line.vertices()) {
        if (!out.empty()) {
            out += ';';
        }
        out += csv::fmt_double(p.x);
        out += ' ';
        out += csv::fmt_double(p.y);
    }
    return out;
}

class FileLoader {
public:
    FileLoader(const std::filesystem::path& dir, const std::string& name,
               const std::vector<std::string>& expected_header,
               IngestReport& report, double max_reject_fraction)
        : name_(name), report_(report),
          max_reject_fraction_(max_reject_fraction) {
        const auto path = dir / name;
        if (!std::filesystem::exists(path)) {
            throw IngestError("missing input file: " + path.string());
        }
        table_ = csv::read_file(path.string());
        if (table_.header != expected_header) {
            std::string want;
            for (const auto& h : expected_header) {
                if (!want.empty()) want += ',';
                want += h;
            }
            throw IngestError("malformed header in " + name + " (expected: " +
                              want + ")");
        }
    }

    /// Runs `fn` over each data row. `fn` returns an error reason to reject
    /// the row, or an empty string to accept it.
    void for_each(const std::function<std::string(
                      const std::vector<std::string>&)>& fn) {
        auto& counts = report_.counts[name_];
        for (size_t i = 0; i < table_.rows.size(); ++i) {
            const long row = static_cast<long>(i) + 2;  // header is row 1
            const auto& fields = table_.rows[i];
            if (fields.size() != table_.header.size()) {
                reject(row, "wrong field count");
                continue;
            }
            const std::string reason = fn(fields);
            if (reason.empty()) {
                ++counts.accepted;
            } else {
                reject(row, reason);
            }
        }
        const long total = counts.accepted + counts.rejected;
        if (total > 0 && static_cast<double>(counts.rejected) >
                             max_reject_fraction_ * total) {
            throw IngestError("more than 10% rejected rows in " + name_);
        }
    }

    void fatal(const std::string& what) const {
        throw IngestError(name_ + ": " + what);
    }

private:
    void reject(long row, const std::string& reason) {
        report_.rejects.push_back({name_, row, reason});
        ++report_.counts[name_].rejected;
    }

    std::string name_;
    csv::Table table_;
    IngestReport& report_;
    double max_reject_fraction_;
};

}  // namespace detail

inline bool is_break_description(const std::string& description,
                                 const std::vector<std::string>& keywords) {
    for (const auto& kw : keywords) {
        if (!kw.empty() && description.find(kw) != std::string::npos) {
            return true;
        }
    }
    return false;
}

/// Loads and validates the six-file CSV dataset. Rows that violate their
/// record invariants are logged to the rejects report; structural problems
/// (missing file, bad header, duplicate primary key, >10% rejects in a
/// file) raise IngestError.
inline LoadResult load_raw_city(const std::filesystem::path& dir,
                                const IngestOptions& options = {}) {
    LoadResult out;
    RawCity& city = out.city;
    IngestReport& report = out.report;

    const int max_year =
        options.date_range ? options.date_range->end.year() : 2100;

    // blocks.csv
    {
        detail::FileLoader f(dir, "blocks.csv",
                             {"block_id", "street_id", "label", "geometry",
                              "soil_type", "rock_type", "pressure_zone"},
                             report, options.max_reject_fraction);
        std::set<BlockId> seen;
        f.for_each([&](const std::vector<std::string>& r) -> std::string {
            const auto block_id = detail::parse_int(r[0]);
            const auto street_id = detail::parse_int(r[1]);
            if (!block_id || !street_id) {
                return "block_id and street_id must be integers";
            }
            if (seen.contains(*block_id)) {
                f.fatal("duplicate block_id " + r[0]);
            }
            const auto vertices = detail::parse_vertices(r[3]);
            if (!vertices) {
                return "unparseable geometry";
            }
            for (const auto& p : *vertices) {
                if (!options.bounds.contains(p)) {
                    return "vertex outside configured bounding box";
                }
            }
            if (r[4].empty() || r[5].empty() || r[6].empty()) {
                return "empty soil/rock/pressure-zone category";
            }
            try {
                city.blocks.push_back(BlockRecord{*block_id, *street_id, r[2],
                                                  geo::Polyline(*vertices), {},
                                                  r[4], r[5], r[6]});
            } catch (const std::invalid_argument& e) {
                return e.what();
            }
            seen.insert(*block_id);
            return "";
        });
    }

    std::set<BlockId> block_ids;
    std::set<StreetId> street_ids;
    for (const auto& b : city.blocks) {
        block_ids.insert(b.block_id);
        street_ids.insert(b.street_id);
    }

    // mains.csv
    {
        detail::FileLoader f(
            dir, "mains.csv",
            {"main_id", "geometry", "diameter_in", "material", "install_year"},
            report, options.max_reject_fraction);
        std::set<std::string> seen;
        f.for_each([&](const std::vector<std::string>& r) -> std::string {
            if (r[0].empty()) {
                return "empty main_id";
            }
            if (seen.contains(r[0])) {
                f.fatal("duplicate main_id " + r[0]);
            }
            const auto vertices = detail::parse_vertices(r[1]);
            if (!vertices) {
                return "unparseable geometry";
            }
            for (const auto& p : *vertices) {
                if (!options.bounds.contains(p)) {
                    return "vertex outside configured bounding box";
                }
            }
            std::optional<double> diameter;
            if (!r[2].empty()) {
                diameter = detail::parse_double(r[2]);
                if (!diameter || *diameter <= 0.0) {
                    return "diameter must be a positive number";
                }
            }
            std::optional<Material> material;
            if (!r[3].empty()) {
                material = parse_material(r[3]);
                if (!material) {
                    return "unknown material token '" + r[3] + "'";
                }
            }
            std::optional<int> install_year;
            if (!r[4].empty()) {
                const auto y = detail::parse_int(r[4]);
                if (!y || *y < 1800 || *y > max_year) {
                    return "install_year out of range";
                }
                install_year = static_cast<int>(*y);
            }
            try {
                city.mains.push_back({r[0], geo::Polyline(*vertices), diameter,
                                      material, install_year});
            } catch (const std::invalid_argument& e) {
                return e.what();
            }
            seen.insert(r[0]);
            return "";
        });
    }

    std::set<std::string> main_ids;
    for (const auto& m : city.mains) {
        main_ids.insert(m.main_id);
    }

    // work_orders.csv
    {
        detail::FileLoader f(
            dir, "work_orders.csv",
            {"event_id", "date", "description", "main_id", "x", "y"}, report, options.max_reject_fraction);
        std::set<std::string> seen;
        f.for_each([&](const std::vector<std::string>& r) -> std::string {
            if (r[0].empty()) {
                return "empty event_id";
            }
            if (seen.contains(r[0])) {
                f.fatal("duplicate event_id " + r[0]);
            }
            const auto date = Date::parse(r[1]);
            if (!date) {
                return "unparseable date '" + r[1] + "'";
            }
            if (options.date_range && !options.date_range->contains(*date)) {
                return "date outside configured data range";
            }
            const bool has_main = !r[3].empty();
            const bool has_x = !r[4].empty();
            const bool has_y = !r[5].empty();
            if (has_x != has_y) {
                return "x and y must be given together";
            }
            if (has_main == has_x) {
                return "exactly one of main_id or coordinates required";
            }
            WorkOrder wo;
            wo.event_id = r[0];
            wo.date = *date;
            wo.description = r[2];
            wo.kind = is_break_description(r[2], options.break_keywords)
                          ? WorkKind::main_break
                          : WorkKind::other;
            if (has_main) {
                wo.main_id = r[3];
            } else {
                const auto x = detail::parse_double(r[4]);
                const auto y = detail::parse_double(r[5]);
                if (!x || !y) {
                    return "unparseable coordinates";
                }
                const geo::Point2 p{*x, *y};
                if (!options.bounds.contains(p)) {
                    return "coordinates outside configured bounding box";
                }
                wo.location = p;
            }
            seen.insert(r[0]);
            city.work_orders.push_back(std::move(wo));
            return "";
        });
    }

    // road_ratings.csv
    {
        detail::FileLoader f(dir, "road_ratings.csv",
                             {"block_id", "year", "rating"}, report, options.max_reject_fraction);
        std::set<std::pair<BlockId, int>> seen;
        std::map<BlockId, std::map<int, int>> ratings;
        f.for_each([&](const std::vector<std::string>& r) -> std::string {
            const auto block_id = detail::parse_int(r[0]);
            const auto year = detail::parse_int(r[1]);
            const auto rating = detail::parse_int(r[2]);
            if (!block_id || !year || !rating) {
                return "block_id, year, rating must be integers";
            }
            if (!block_ids.contains(*block_id)) {
                return "unknown block_id " + r[0];
            }
            if (*year < 1800 || *year > 2100) {
                return "survey year out of range";
            }
            if (*rating < 0 || *rating > 10) {
                return "rating must be in 0..10";
            }
            const auto key = std::make_pair(static_cast<BlockId>(*block_id),
                                            static_cast<int>(*year));
            if (seen.contains(key)) {
                f.fatal("duplicate rating for block " + r[0] + ", year " + r[1]);
            }
            seen.insert(key);
            ratings[key.first][key.second] = static_cast<int>(*rating);
            return "";
        });
        for (auto& b : city.blocks) {
            if (auto it = ratings.find(b.block_id); it != ratings.end()) {
                b.road_ratings = std::move(it->second);
            }
        }
    }

    // parcels.csv
    {
        detail::FileLoader f(dir, "parcels.csv", {"block_id", "first_tax_year"},
                             report, options.max_reject_fraction);
        f.for_each([&](const std::vector<std::string>& r) -> std::string {
            const auto block_id = detail::parse_int(r[0]);
            const auto year = detail::parse_int(r[1]);
            if (!block_id || !year) {
                return "block_id and first_tax_year must be integers";
            }
            if (!block_ids.contains(*block_id)) {
                return "unknown block_id " + r[0];
            }
            if (*year < 1800 || *year > max_year) {
                return "first_tax_year out of range";
            }
            city.parcels.push_back(
                {static_cast<BlockId>(*block_id), static_cast<int>(*year)});
            return "";
        });
    }

    // notebook.csv
    {
        detail::FileLoader f(dir, "notebook.csv",
                             {"street_id", "material", "diameter_in"}, report, options.max_reject_fraction);
        std::set<StreetId> seen;
        f.for_each([&](const std::vector<std::string>& r) -> std::string {
            const auto street_id = detail::parse_int(r[0]);
            if (!street_id) {
                return "street_id must be an integer";
            }
            if (!street_ids.contains(*street_id)) {
                return "unknown street_id " + r[0];
            }
            if (seen.contains(*street_id)) {
                f.fatal("duplicate notebook entry for street " + r[0]);
            }
            const auto material = parse_material(r[1]);
            if (!material) {
                return "unknown material token '" + r[1] + "'";
            }
            const auto diameter = detail::parse_double(r[2]);
            if (!diameter || *diameter <= 0.0) {
                return "diameter must be a positive number";
            }
            seen.insert(*street_id);
            city.notebook.push_back(
                {static_cast<StreetId>(*street_id), *material, *diameter});
            return "";
        });
    }

    // Canonical order: the RawCity must not depend on input row order.
    std::sort(city.blocks.begin(), city.blocks.end(),
              [](const auto& a, const auto& b) { return a.block_id < b.block_id; });
    std::sort(city.mains.begin(), city.mains.end(),
              [](const auto& a, const auto& b) { return a.main_id < b.main_id; });
    std::sort(city.work_orders.begin(), city.work_orders.end(),
              [](const auto& a, const auto& b) { return a.event_id < b.event_id; });
    std::sort(city.parcels.begin(), city.parcels.end());
    std::sort(city.notebook.begin(), city.notebook.end(),
              [](const auto& a, const auto& b) { return a.street_id < b.street_id; });
    return out;
}

/// Writes the city back out in normalized form. load_raw_city on the result
/// reproduces an identical RawCity.
inline void write_raw_city(const RawCity& city,
                           const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        csv::Writer w((dir / "blocks.csv").string());
        w.row({"block_id", "street_id", "label", "geometry", "soil_type",
               "rock_type", "pressure_zone"});
        for (const auto& b : city.blocks) {
            w.row({std::to_string(b.block_id), std::to_string(b.street_id),
                   b.label, detail::geometry_to_string(b.geometry), b.soil_type,
                   b.rock_type, b.pressure_zone});
        }
    }
    {
        csv::Writer w((dir / "mains.csv").string());
        w.row({"main_id", "geometry", "diameter_in", "material", "install_year"});
        for (const auto& m : city.mains) {
            w.row({m.main_id, detail::geometry_to_string(m.geometry),
                   m.diameter_in ? csv::fmt_double(*m.diameter_in) : "",
                   m.material ? to_string(*m.material) : "",
                   m.install_year ? std::to_string(*m.install_year) : ""});
        }
    }
    {
        csv::Writer w((dir / "work_orders.csv").string());
        w.row({"event_id", "date", "description", "main_id", "x", "y"});
        for (const auto& wo : city.work_orders) {
            w.row({wo.event_id, wo.date.to_string(), wo.description,
                   wo.main_id ? *wo.main_id : "",
                   wo.location ? csv::fmt_double(wo.location->x) : "",
                   wo.location ? csv::fmt_double(wo.location->y) : ""});
        }
    }
    {
        csv::Writer w((dir / "road_ratings.csv").string());
        w.row({"block_id", "year", "rating"});
        for (const auto& b : city.blocks) {
            for (const auto& [year, rating] : b.road_ratings) {
                w.row({std::to_string(b.block_id), std::to_string(year),
                       std::to_string(rating)});
            }
        }
    }
    {
        csv::Writer w((dir / "parcels.csv").string());
        w.row({"block_id", "first_tax_year"});
        for (const auto& p : city.parcels) {
            w.row({std::to_string(p.block_id), std::to_string(p.first_tax_year)});
        }
    }
    {
        csv::Writer w((dir / "notebook.csv").string());
        w.row({"street_id", "material", "diameter_in"});
        for (const auto& n : city.notebook) {
            w.row({std::to_string(n.street_id), to_string(n.material),
                   csv::fmt_double(n.diameter_in)});
        }
    }
}

inline void write_rejects_csv(const IngestReport& report,
                              const std::filesystem::path& path) {
    csv::Writer w(path.string());
    w.row({"file", "row", "reason"});
    for (const auto& r : report.rejects) {
        w.row({r.file, std::to_string(r.row), r.reason});
    }
}

/// Data coverage derived from work-order dates, widened to whole years.
inline DateRange derive_data_range(const RawCity& city) {
    if (city.work_orders.empty()) {
        throw IngestError("cannot derive data range: no work orders");
    }
    Date lo = city.work_orders.front().date;
    Date hi = lo;
    for (const auto& wo : city.work_orders) {
        lo = std::min(lo, wo.date);
        hi = std::max(hi, wo.date);
    }
    return {Date::jan1(lo.year()), Date::from_ymd(hi.year(), 12, 31)};
}

}  // namespace mainrisk::ingest
