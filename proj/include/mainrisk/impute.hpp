#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mainrisk/ingest.hpp"
#include "mainrisk/records.hpp"

namespace mainrisk::ingest {

/// Era rule plus notebook lookup. Installation year decides directly before
/// 1920 (cast iron) and after 1960 (ductile iron); the 1920..1960 band,
/// boundary years included, consults the street's field-notebook entry and
/// falls back to `unknown`.
inline Material impute_material(int install_year,
                                const std::optional<Material>& notebook_entry) {
    if (install_year < 1920) {
        return Material::cast_iron;
    }
    if (install_year > 1960) {
        return Material::ductile_iron;
    }
    return notebook_entry.value_or(Material::unknown);
}

namespace detail {

/// Working state per block while the imputation chain runs.
struct Pending {
    std::optional<int> install_year;
    std::optional<Material> material;
    std::optional<double> diameter;
    double main_length = 0.0;
};

inline std::optional<Material> majority_material_by_length(
    const std::vector<std::pair<Material, double>>& votes) {
    if (votes.empty()) {
        return std::nullopt;
    }
    std::map<Material, double> weight;
    bool any_weight = false;
    for (const auto& [m, w] : votes) {
        weight[m] += w;
        any_weight = any_weight || w > 0.0;
    }
    if (!any_weight) {
        // All votes weightless (main-less donors): count one each.
        for (const auto& [m, w] : votes) {
            weight[m] += 1.0;
        }
    }
    Material best = weight.begin()->first;
    double best_w = weight.begin()->second;
    for (const auto& [m, w] : weight) {
        if (w > best_w) {  // ties keep the smaller enum value
            best = m;
            best_w = w;
        }
    }
    return best;
}

}  // namespace detail

/// Fills any attribute still missing on a block from siblings on the same
/// street that resolved it: earliest year, majority material by summed
/// assigned-main length, smallest diameter. Donor values are collected
/// before anything is filled, so propagation is not transitive.
inline void propagate_street_values(
    const std::vector<detail::Pending*>& street_blocks) {
    std::optional<int> year;
    std::vector<std::pair<Material, double>> material_votes;
    std::optional<double> diameter;
    for (const auto* p : street_blocks) {
        if (p->install_year) {
            year = year ? std::min(*year, *p->install_year) : *p->install_year;
        }
        if (p->material) {
            material_votes.emplace_back(*p->material, p->main_length);
        }
        if (p->diameter) {
            diameter = diameter ? std::min(*diameter, *p->diameter) : *p->diameter;
        }
    }
    const auto material = detail::majority_material_by_length(material_votes);
    for (auto* p : street_blocks) {
        if (!p->install_year && year) {
            p->install_year = year;
        }
        if (!p->material && material) {
            p->material = material;
        }
        if (!p->diameter && diameter) {
            p->diameter = diameter;
        }
    }
}

/// Aggregates assigned mains onto blocks (earliest install year, majority
/// material by length, smallest diameter) and resolves break-typed work
/// orders to blocks. No imputation yet: attributes stay absent where the
/// mains are silent.
struct AggregationState {
    BlockTable table;
    std::vector<detail::Pending> pending;  // parallel to table.blocks
};

inline AggregationState aggregate_to_blocks(const RawCity& raw,
                                            const geo::MainAssignment& assignment,
                                            IngestReport& report) {
    AggregationState state;
    auto& blocks = state.table.blocks;
    blocks.reserve(raw.blocks.size());
    std::map<BlockId, size_t> index;
    for (const auto& b : raw.blocks) {
        index[b.block_id] = blocks.size();
        blocks.push_back(BlockInfo{.block_id = b.block_id,
                                   .street_id = b.street_id,
                                   .label = b.label,
                                   .geometry = b.geometry,
                                   .road_ratings = b.road_ratings,
                                   .soil_type = b.soil_type,
                                   .rock_type = b.rock_type,
                                   .pressure_zone = b.pressure_zone,
                                   .main_ids = {},
                                   .breaks = {}});
        state.pending.emplace_back();
    }

    // Mains onto blocks.
    std::map<std::string, const MainSegment*> mains_by_id;
    for (const auto& m : raw.mains) {
        mains_by_id[m.main_id] = &m;
    }
    std::map<BlockId, std::vector<const MainSegment*>> block_mains;
    for (const auto& [main_id, block_id] : assignment.assigned) {
        block_mains[block_id].push_back(mains_by_id.at(main_id));
    }
    for (auto& [block_id, mains] : block_mains) {
        auto& info = blocks[index.at(block_id)];
        auto& pending = state.pending[index.at(block_id)];
        std::vector<std::pair<Material, double>> votes;
        for (const auto* m : mains) {
            info.main_ids.push_back(m->main_id);
            const double len = m->geometry.length();
            info.main_length_ft += len;
            pending.main_length += len;
            if (m->install_year) {
                pending.install_year =
                    pending.install_year
                        ? std::min(*pending.install_year, *m->install_year)
                        : *m->install_year;
            }
            if (m->diameter_in) {
                pending.diameter = pending.diameter
                                       ? std::min(*pending.diameter, *m->diameter_in)
                                       : *m->diameter_in;
            }
            if (m->material) {
                votes.emplace_back(*m->material, len);
            }
        }
        pending.material = detail::majority_material_by_length(votes);
        info.has_mains = true;
        std::sort(info.main_ids.begin(), info.main_ids.end());
    }

    // Break events onto blocks: main_id -> assigned block, coordinates ->
    // nearest block line (ties toward the smaller block id).
    for (const auto& wo : raw.work_orders) {
        if (wo.kind != WorkKind::main_break) {
            continue;
        }
        BlockId target = 0;
        geo::Point2 location{};
        if (wo.main_id) {
            auto it = mains_by_id.find(*wo.main_id);
            if (it == mains_by_id.end()) {
                report.rejects.push_back({"work_orders.csv", 0,
                                          "event " + wo.event_id +
                                              " references unknown main_id " +
                                              *wo.main_id});
                continue;
            }
            const geo::BlockId* assigned = assignment.find(*wo.main_id);
            if (!assigned) {
                report.rejects.push_back(
                    {"work_orders.csv", 0,
                     "event " + wo.event_id + " references main " + *wo.main_id +
                         " which is not assigned to any block"});
                continue;
            }
            target = *assigned;
            location =
                geo::point_at(it->second->geometry, it->second->geometry.length() / 2);
        } else {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& b : blocks) {
                const double d =
                    geo::point_to_polyline_distance(*wo.location, b.geometry);
                if (d < best) {
                    best = d;
                    target = b.block_id;
                }
            }
            location = *wo.location;
        }
        blocks[index.at(target)].breaks.push_back(
            {wo.event_id, wo.date, location});
    }
    for (auto& b : blocks) {
        std::sort(b.breaks.begin(), b.breaks.end(),
                  [](const BlockBreak& x, const BlockBreak& y) {
                      return std::tie(x.date, x.event_id) <
                             std::tie(y.date, y.event_id);
                  });
    }
    return state;
}

/// Runs the full imputation chain on an aggregated table:
///   install_year: mains -> earliest parcel tax year -> street propagation
///                 -> global median (flagged);
///   material:     mains -> era rule / notebook -> street propagation
///                 -> unknown;
///   diameter:     mains -> notebook -> street propagation -> global median
///                 (flagged).
inline void impute_block_table(AggregationState& state,
                               const std::vector<ParcelRecord>& parcels,
                               const std::vector<NotebookEntry>& notebook) {
    auto& blocks = state.table.blocks;
    auto& pending = state.pending;

    std::map<BlockId, int> earliest_tax_year;
    for (const auto& p : parcels) {
        auto it = earliest_tax_year.find(p.block_id);
        if (it == earliest_tax_year.end() || p.first_tax_year < it->second) {
            earliest_tax_year[p.block_id] = p.first_tax_year;
        }
    }
    std::map<StreetId, const NotebookEntry*> notebook_by_street;
    for (const auto& n : notebook) {
        notebook_by_street[n.street_id] = &n;
    }

    // Stage 2: parcel tax-year substitution for install year.
    for (size_t i = 0; i < blocks.size(); ++i) {
        if (!pending[i].install_year) {
            if (auto it = earliest_tax_year.find(blocks[i].block_id);
                it != earliest_tax_year.end()) {
                pending[i].install_year = it->second;
            }
        }
    }

    // Material and diameter from the notebook once a year is known.
    auto apply_notebook = [&](size_t i) {
        const auto* entry_ptr = [&]() -> const NotebookEntry* {
            auto it = notebook_by_street.find(blocks[i].street_id);
            return it == notebook_by_street.end() ? nullptr : it->second;
        }();
        if (!pending[i].material && pending[i].install_year) {
            std::optional<Material> nb;
            if (entry_ptr) {
                nb = entry_ptr->material;
            }
            const Material m = impute_material(*pending[i].install_year, nb);
            if (m != Material::unknown) {
                pending[i].material = m;
            }
        }
        if (!pending[i].diameter && entry_ptr) {
            pending[i].diameter = entry_ptr->diameter_in;
        }
    };
    for (size_t i = 0; i < blocks.size(); ++i) {
        apply_notebook(i);
    }

    // Stage 3: street propagation of whatever resolved without it.
    std::map<StreetId, std::vector<detail::Pending*>> by_street;
    for (size_t i = 0; i < blocks.size(); ++i) {
        by_street[blocks[i].street_id].push_back(&pending[i]);
    }
    for (auto& [street, members] : by_street) {
        propagate_street_values(members);
    }
    // Propagated years can unlock the era rule for blocks that had no year
    // at notebook time.
    for (size_t i = 0; i < blocks.size(); ++i) {
        apply_notebook(i);
    }

    // Stage 4: global medians, flagged.
    std::vector<int> years;
    std::vector<double> diameters;
    for (const auto& p : pending) {
        if (p.install_year) {
            years.push_back(*p.install_year);
        }
        if (p.diameter) {
            diameters.push_back(*p.diameter);
        }
    }
    std::sort(years.begin(), years.end());
    std::sort(diameters.begin(), diameters.end());
    const int median_year = years.empty() ? 1940 : years[years.size() / 2];
    const double median_diameter =
        diameters.empty() ? 8.0 : diameters[diameters.size() / 2];

    for (size_t i = 0; i < blocks.size(); ++i) {
        auto& b = blocks[i];
        auto& p = pending[i];
        if (!p.install_year) {
            p.install_year = median_year;
            b.install_year_imputed = true;
        }
        if (!p.material) {
            const auto nb = notebook_by_street.find(b.street_id);
            std::optional<Material> entry;
            if (nb != notebook_by_street.end()) {
                entry = nb->second->material;
            }
            p.material = impute_material(*p.install_year, entry);
        }
        if (!p.diameter) {
            p.diameter = median_diameter;
            b.diameter_imputed = true;
        }
        b.install_year = *p.install_year;
        b.material = *p.material;
        b.diameter_in = *p.diameter;
    }
}

/// Full pipeline from validated records to the modeling table.
inline BlockTable build_block_table(const RawCity& raw, double buffer_halfwidth,
                                    IngestReport& report,
                                    geo::MainAssignment* assignment_out = nullptr) {
    std::vector<std::pair<std::string, geo::Polyline>> mains;
    mains.reserve(raw.mains.size());
    for (const auto& m : raw.mains) {
        mains.emplace_back(m.main_id, m.geometry);
    }
    std::vector<std::pair<geo::BlockId, geo::Polyline>> blocks;
    blocks.reserve(raw.blocks.size());
    for (const auto& b : raw.blocks) {
        blocks.emplace_back(b.block_id, b.geometry);
    }
    const auto assignment =
        geo::assign_mains_to_blocks(mains, blocks, buffer_halfwidth);
    for (const auto& main_id : assignment.unmapped) {
        report.rejects.push_back(
            {"mains.csv", 0, "main " + main_id + " overlaps no block buffer"});
    }
    auto state = aggregate_to_blocks(raw, assignment, report);
    impute_block_table(state, raw.parcels, raw.notebook);
    if (assignment_out) {
        *assignment_out = assignment;
    }
    return std::move(state.table);
}

inline void write_block_table_csv(const BlockTable& table,
                                  const std::filesystem::path& path) {
    csv::Writer w(path.string());
    w.row({"block_id", "street_id", "label", "install_year",
           "install_year_imputed", "material", "diameter_in",
           "diameter_imputed", "soil_type", "rock_type", "pressure_zone",
           "has_mains", "main_count", "main_length_ft", "break_count",
           "road_ratings"});
    for (const auto& b : table.blocks) {
        std::string ratings;
        for (const auto& [year, rating] : b.road_ratings) {
            if (!ratings.empty()) {
                ratings += ';';
            }
            ratings += std::to_string(year) + ":" + std::to_string(rating);
        }
        w.row({std::to_string(b.block_id), std::to_string(b.street_id), b.label,
               std::to_string(b.install_year),
               b.install_year_imputed ? "1" : "0", to_string(b.material),
               csv::fmt_double(b.diameter_in), b.diameter_imputed ? "1" : "0",
               b.soil_type, b.rock_type, b.pressure_zone,
               b.has_mains ? "1" : "0", std::to_string(b.main_ids.size()),
               csv::fmt_double(b.main_length_ft),
               std::to_string(b.breaks.size()), ratings});
    }
}

}  // namespace mainrisk::ingest
