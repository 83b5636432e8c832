#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mainrisk/date.hpp"
#include "mainrisk/geo.hpp"

namespace mainrisk {

using BlockId = std::int64_t;
using StreetId = std::int64_t;

enum class Material { cast_iron, ductile_iron, universal, other, unknown };

inline const char* to_string(Material m) {
    switch (m) {
        case Material::cast_iron: return "cast_iron";
        case Material::ductile_iron: return "ductile_iron";
        case Material::universal: return "universal";
        case Material::other: return "other";
        case Material::unknown: return "unknown";
    }
    return "unknown";
}

inline std::optional<Material> parse_material(const std::string& s) {
    if (s == "cast_iron") return Material::cast_iron;
    if (s == "ductile_iron") return Material::ductile_iron;
    if (s == "universal") return Material::universal;
    if (s == "other") return Material::other;
    if (s == "unknown") return Material::unknown;
    return std::nullopt;
}

inline const std::vector<Material>& all_materials() {
    static const std::vector<Material> k = {
        Material::cast_iron, Material::ductile_iron, Material::universal,
        Material::other, Material::unknown};
    return k;
}

enum class WorkKind { main_break, other };

struct WorkOrder {
    std::string event_id;
    Date date;
    WorkKind kind = WorkKind::other;
    std::string description;
    std::optional<std::string> main_id;      // exactly one of main_id /
    std::optional<geo::Point2> location;     // location is present

    friend bool operator==(const WorkOrder& a, const WorkOrder& b) {
        return a.event_id == b.event_id && a.date == b.date &&
               a.kind == b.kind && a.description == b.description &&
               a.main_id == b.main_id && a.location == b.location;
    }
};

struct MainSegment {
    std::string main_id;
    geo::Polyline geometry;
    std::optional<double> diameter_in;
    std::optional<Material> material;
    std::optional<int> install_year;

    friend bool operator==(const MainSegment& a, const MainSegment& b) {
        return a.main_id == b.main_id && a.geometry == b.geometry &&
               a.diameter_in == b.diameter_in && a.material == b.material &&
               a.install_year == b.install_year;
    }
};

struct BlockRecord {
    BlockId block_id = 0;
    StreetId street_id = 0;
    std::string label;  // street + house range, e.g. "E Hampton Ave, 900-934"
    geo::Polyline geometry;
    std::map<int, int> road_ratings;  // survey year -> 0..10 (0 = unrated)
    std::string soil_type;
    std::string rock_type;
    std::string pressure_zone;

    friend bool operator==(const BlockRecord& a, const BlockRecord& b) {
        return a.block_id == b.block_id && a.street_id == b.street_id &&
               a.label == b.label && a.geometry == b.geometry &&
               a.road_ratings == b.road_ratings && a.soil_type == b.soil_type &&
               a.rock_type == b.rock_type && a.pressure_zone == b.pressure_zone;
    }
};

struct ParcelRecord {
    BlockId block_id = 0;
    int first_tax_year = 0;

    friend auto operator<=>(const ParcelRecord&, const ParcelRecord&) = default;
};

struct NotebookEntry {
    StreetId street_id = 0;
    Material material = Material::unknown;
    double diameter_in = 0.0;

    friend bool operator==(const NotebookEntry&, const NotebookEntry&) = default;
};

/// Validated in-memory form of every ingested record. All vectors are kept
/// sorted by primary key so the structure is independent of input row order.
struct RawCity {
    std::vector<BlockRecord> blocks;     // by block_id
    std::vector<MainSegment> mains;      // by main_id
    std::vector<WorkOrder> work_orders;  // by event_id
    std::vector<ParcelRecord> parcels;   // by (block_id, first_tax_year)
    std::vector<NotebookEntry> notebook; // by street_id

    friend bool operator==(const RawCity& a, const RawCity& b) {
        return a.blocks == b.blocks && a.mains == b.mains &&
               a.work_orders == b.work_orders && a.parcels == b.parcels &&
               a.notebook == b.notebook;
    }
};

struct BlockBreak {
    std::string event_id;
    Date date;
    geo::Point2 location;
};

/// Per-block state after main assignment, aggregation and imputation.
struct BlockInfo {
    BlockId block_id = 0;
    StreetId street_id = 0;
    std::string label;
    geo::Polyline geometry;
    std::map<int, int> road_ratings;
    std::string soil_type;
    std::string rock_type;
    std::string pressure_zone;

    std::vector<std::string> main_ids;  // assigned, sorted
    double main_length_ft = 0.0;

    int install_year = 0;
    bool install_year_imputed = false;  // true when the global-median fallback fired
    Material material = Material::unknown;
    double diameter_in = 0.0;
    bool diameter_imputed = false;

    bool has_mains = false;  // blocks without mains are kept but not modeled

    std::vector<BlockBreak> breaks;  // sorted by (date, event_id)
};

struct BlockTable {
    std::vector<BlockInfo> blocks;  // sorted by block_id

    const BlockInfo* find(BlockId id) const {
        auto it = std::lower_bound(
            blocks.begin(), blocks.end(), id,
            [](const BlockInfo& b, BlockId k) { return b.block_id < k; });
        if (it == blocks.end() || it->block_id != id) {
            return nullptr;
        }
        return &*it;
    }
};

}  // namespace mainrisk
