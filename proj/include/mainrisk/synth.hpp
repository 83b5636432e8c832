#pragma once

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mainrisk/ingest.hpp"
#include "mainrisk/records.hpp"

namespace mainrisk::synth {

/// Deterministic city generator with a known logistic break process.
/// Self-excitation (the past-break weight) is the strongest signal by
/// construction; age, diameter deficit and inferior material contribute.
struct SynthParams {
    int streets = 50;
    int blocks_per_street = 10;
    int years = 12;
    int start_year = 2004;
    std::uint64_t seed = 42;

    /// Fraction of mains whose recorded diameter/material/install year are
    /// blanked, mimicking sparse shapefile coverage.
    double blank_fraction = 0.98;

    double target_base_rate_3y = 0.09;

    // Hazard weights. A NaN intercept derives from the target base rate,
    // centered for the expected contribution of the other terms.
    double w_intercept = std::numeric_limits<double>::quiet_NaN();
    double w_per_past_break = 1.5;
    double w_per_age_decade = 0.12;
    double w_per_inch_deficit = 0.35;
    double w_material_cast_iron = 0.35;
    double w_material_universal = 1.1;
    double reference_diameter_in = 8.0;
    int past_break_cap = 2;
    /// Self-excitation looks back this many years; older breaks stop
    /// raising the hazard, so recent-window counts carry the most signal
    /// and stale all-time counts mislead.
    int excitation_window_years = 2;
    /// A run of harsh winters opens the simulation: storm breaks hit every
    /// block with the same flat probability, independent of pipe quality.
    /// They age out of every recency window, so they degrade all-time break
    /// counts into a noisy signal while windowed counts stay clean.
    int harsh_era_years = 3;
    double storm_break_probability = 0.5;

    double parcel_coverage = 0.9;
    double notebook_coverage = 0.9;

    void validate() const {
        if (streets < 1 || blocks_per_street < 1) {
            throw std::invalid_argument("synth: grid dimensions must be >= 1");
        }
        if (years < 1) {
            throw std::invalid_argument("synth: years must be >= 1");
        }
        if (blank_fraction < 0.0 || blank_fraction > 1.0) {
            throw std::invalid_argument("synth: blank fraction must be in [0,1]");
        }
        if (!(target_base_rate_3y > 0.0 && target_base_rate_3y < 0.95)) {
            throw std::invalid_argument("synth: base rate out of range");
        }
    }

    double intercept() const {
        if (!std::isnan(w_intercept)) {
            return w_intercept;
        }
        // Annual probability whose 3-year complement hits the target rate,
        // shifted down by the expected value of the non-intercept terms.
        // The expectations mirror the generator's distributions: mean pipe
        // age ~7.4 decades mid-simulation, mean diameter deficit 1.04 in,
        // ~54% cast iron, ~16% universal, and a recency window's worth of
        // expected past breaks. All-zero weights shift nothing.
        const double annual = 1.0 - std::pow(1.0 - target_base_rate_3y, 1.0 / 3.0);
        const double expected_static =
            w_per_age_decade * 7.4 + w_per_inch_deficit * 1.04 +
            w_material_cast_iron * 0.54 + w_material_universal * 0.18 +
            w_per_past_break * excitation_window_years * annual;
        return std::log(annual / (1.0 - annual)) - expected_static;
    }
};

struct TruthHazard {
    BlockId block_id = 0;
    int year = 0;
    double hazard = 0.0;
};

struct BlockTruth {
    BlockId block_id = 0;
    int install_year = 0;
    Material material = Material::unknown;
    double diameter_in = 0.0;
    std::vector<std::string> main_ids;
};

struct SynthCity {
    RawCity raw;
    std::vector<BlockTruth> truth;     // by block_id, parallel to raw.blocks
    std::vector<TruthHazard> hazards;  // filled by simulate_breaks
    std::vector<std::pair<BlockId, Date>> break_log;  // generating block per break
    DateRange range;
};

namespace detail {

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::string main_name(int n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "M%05d", n);
    return buf;
}

inline std::string event_name(int n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "WO%06d", n);
    return buf;
}

}  // namespace detail

inline constexpr double kBlockLengthFt = 300.0;
inline constexpr double kStreetSpacingFt = 200.0;
inline constexpr double kMainOffsetFt = 4.0;

/// Grid city: horizontal streets of equal-length blocks, one or two mains
/// tracing each block a few feet off the street line. Attribute truth
/// follows the era rules in reverse so the imputation chain can recover
/// what the blanking removed.
inline SynthCity generate_city(const SynthParams& params) {
    params.validate();
    std::mt19937_64 rng(detail::mix(params.seed, 1));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    static const std::vector<std::string> kSoils = {"clay",  "loam", "muck",
                                                    "sand",  "silt", "till"};
    static const std::vector<std::string> kRocks = {"dolostone", "limestone",
                                                    "shale", "siltstone"};

    SynthCity city;
    city.range = {Date::jan1(params.start_year),
                  Date::from_ymd(params.start_year + params.years - 1, 12, 31)};

    int main_counter = 0;
    for (int s = 0; s < params.streets; ++s) {
        const StreetId street_id = s + 1;
        const double y = kStreetSpacingFt * s;
        // Mains went in by construction campaigns, roughly one per decade.
        const int street_year =
            1870 + 10 * static_cast<int>(unif(rng) * 14.0);  // 1870..2000
        // Small mains are a wide minority tier; mid-size dominates.
        const double du = unif(rng);
        const double street_diameter =
            du < 0.12 ? 4 : (du < 0.40 ? 6 : (du < 0.75 ? 8 : (du < 0.92 ? 10 : 12)));
        const Material band_material =
            unif(rng) < 0.5 ? Material::universal : Material::cast_iron;
        const Material street_material =
            street_year < 1920
                ? Material::cast_iron
                : (street_year > 1960 ? Material::ductile_iron : band_material);
        const std::string soil = kSoils[static_cast<size_t>(unif(rng) * kSoils.size())];
        const std::string rock = kRocks[static_cast<size_t>(unif(rng) * kRocks.size())];

        for (int b = 0; b < params.blocks_per_street; ++b) {
            const BlockId block_id = static_cast<BlockId>(s) *
                                         params.blocks_per_street + b + 1;
            const double x0 = kBlockLengthFt * b;
            const double x1 = x0 + kBlockLengthFt;

            const int install_year = street_year;
            const Material material = street_material;
            const double diameter = street_diameter;

            BlockRecord block{block_id,
                              street_id,
                              "Street " + std::to_string(street_id) + " Ave, " +
                                  std::to_string(b * 100) + "-" +
                                  std::to_string(b * 100 + 99),
                              geo::Polyline({{x0, y}, {x1, y}}),
                              {},
                              soil,
                              rock,
                              "Z" + std::to_string(1 + (4 * b) /
                                                           params.blocks_per_street)};

            // City-wide surveys run every fourth year and miss some blocks;
            // a few entries are explicit zeros for unrated road segments.
            for (int yr = params.start_year;
                 yr < params.start_year + params.years; ++yr) {
                if ((yr - params.start_year) % 4 != 1) {
                    continue;
                }
                const double u = unif(rng);
                if (u < 0.45) {
                    block.road_ratings[yr] =
                        1 + static_cast<int>(unif(rng) * 10.0);
                } else if (u < 0.5) {
                    block.road_ratings[yr] = 0;
                }
            }
            city.raw.blocks.push_back(std::move(block));

            BlockTruth truth{block_id, install_year, material, diameter, {}};

            const int n_mains = unif(rng) < 0.3 ? 2 : 1;
            const double offset = unif(rng) < 0.5 ? kMainOffsetFt : -kMainOffsetFt;
            std::vector<std::pair<double, double>> spans;
            if (n_mains == 1) {
                spans = {{x0, x1}};
            } else {
                const double cut = x0 + kBlockLengthFt * (0.3 + 0.4 * unif(rng));
                spans = {{x0, cut}, {cut, x1}};
            }
            for (const auto& [a, b2] : spans) {
                MainSegment main{detail::main_name(++main_counter),
                                 geo::Polyline({{a, y + offset}, {b2, y + offset}}),
                                 diameter, material, install_year};
                if (unif(rng) < params.blank_fraction) {
                    main.diameter_in.reset();
                    main.material.reset();
                    main.install_year.reset();
                }
                truth.main_ids.push_back(main.main_id);
                city.raw.mains.push_back(std::move(main));
            }

            if (unif(rng) < params.parcel_coverage) {
                const int n_parcels = 1 + static_cast<int>(unif(rng) * 3.0);
                for (int p = 0; p < n_parcels; ++p) {
                    city.raw.parcels.push_back(
                        {block_id,
                         install_year + static_cast<int>(unif(rng) * 4.0)});
                }
            }
            city.truth.push_back(std::move(truth));
        }

        // Field notebooks exist for streets of every era; the era rule only
        // consults them for 1920..1960 installs, but the diameter fallback
        // chain reads them unconditionally.
        if (unif(rng) < params.notebook_coverage) {
            city.raw.notebook.push_back(
                {street_id, street_material, street_diameter});
        }
    }

    std::sort(city.raw.mains.begin(), city.raw.mains.end(),
              [](const auto& a, const auto& b) { return a.main_id < b.main_id; });
    std::sort(city.raw.parcels.begin(), city.raw.parcels.end());
    return city;
}

/// Year-by-year Bernoulli draws per block from the logistic hazard; every
/// break lands at a seeded point along the block line. Also sprinkles
/// non-break work orders so the description keyword filter earns its keep.
inline void simulate_breaks(SynthCity& city, const SynthParams& params) {
    params.validate();
    std::mt19937_64 rng(detail::mix(params.seed, 2));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double intercept = params.intercept();
    std::vector<std::vector<int>> break_years(city.truth.size());
    int event_counter = 0;
    city.hazards.clear();
    city.hazards.reserve(city.truth.size() * params.years);
    city.break_log.clear();

    for (int year = params.start_year; year < params.start_year + params.years;
         ++year) {
        const int days_in_year = Date::jan1(year + 1).serial - Date::jan1(year).serial;
        for (size_t i = 0; i < city.truth.size(); ++i) {
            const auto& truth = city.truth[i];
            const auto& block = city.raw.blocks[i];
            int recent_breaks = 0;
            for (const int y : break_years[i]) {
                if (y >= year - params.excitation_window_years) {
                    ++recent_breaks;
                }
            }
            const double age_decades =
                static_cast<double>(year - truth.install_year) / 10.0;
            const double deficit =
                std::max(0.0, params.reference_diameter_in - truth.diameter_in);
            double material_term = 0.0;
            if (truth.material == Material::cast_iron) {
                material_term = params.w_material_cast_iron;
            } else if (truth.material == Material::universal) {
                material_term = params.w_material_universal;
            }
            const double z =
                intercept +
                params.w_per_past_break *
                    std::min(recent_breaks, params.past_break_cap) +
                params.w_per_age_decade * age_decades +
                params.w_per_inch_deficit * deficit + material_term;
            const double base_hazard =
                std::clamp(1.0 / (1.0 + std::exp(-z)), 0.001, 0.95);
            const double storm =
                year - params.start_year < params.harsh_era_years
                    ? params.storm_break_probability
                    : 0.0;
            // Combined chance of at least one break this year.
            const double hazard =
                std::clamp(1.0 - (1.0 - base_hazard) * (1.0 - storm), 0.001, 0.95);
            city.hazards.push_back({truth.block_id, year, hazard});

            if (unif(rng) < hazard) {
                WorkOrder wo;
                wo.event_id = detail::event_name(++event_counter);
                wo.date = Date::jan1(year).add_days(
                    static_cast<int>(unif(rng) * days_in_year));
                wo.description = "Main Break/Leak";
                wo.kind = WorkKind::main_break;
                if (unif(rng) < 0.2) {
                    // By main reference; ingest resolves it to this block
                    // through the buffered-overlap assignment.
                    wo.main_id = truth.main_ids.front();
                } else {
                    wo.location = geo::point_at(
                        block.geometry, unif(rng) * block.geometry.length());
                }
                city.break_log.emplace_back(truth.block_id, wo.date);
                city.raw.work_orders.push_back(std::move(wo));
                break_years[i].push_back(year);
            }
        }

        // Non-break maintenance noise.
        const int n_other = std::max(1, static_cast<int>(city.truth.size()) / 100);
        for (int j = 0; j < n_other; ++j) {
            const size_t i = static_cast<size_t>(unif(rng) * city.truth.size());
            WorkOrder wo;
            wo.event_id = detail::event_name(++event_counter);
            wo.date = Date::jan1(year).add_days(
                static_cast<int>(unif(rng) * days_in_year));
            wo.description = unif(rng) < 0.5 ? "Hydrant Flush" : "Valve Repair";
            wo.kind = WorkKind::other;
            wo.location = geo::point_at(
                city.raw.blocks[i].geometry,
                unif(rng) * city.raw.blocks[i].geometry.length());
            city.raw.work_orders.push_back(std::move(wo));
        }
    }
    std::sort(city.raw.work_orders.begin(), city.raw.work_orders.end(),
              [](const auto& a, const auto& b) { return a.event_id < b.event_id; });
}

inline SynthCity make_city(const SynthParams& params) {
    SynthCity city = generate_city(params);
    simulate_breaks(city, params);
    return city;
}

inline void write_truth_hazards_csv(const SynthCity& city,
                                    const std::filesystem::path& path) {
    csv::Writer w(path.string());
    w.row({"block_id", "year", "hazard"});
    for (const auto& h : city.hazards) {
        w.row({std::to_string(h.block_id), std::to_string(h.year),
               csv::fmt_double(h.hazard)});
    }
}

/// Emits the full ingest CSV family plus the ground-truth hazard table.
inline void write_city(const SynthCity& city, const std::filesystem::path& dir) {
    ingest::write_raw_city(city.raw, dir);
    write_truth_hazards_csv(city, dir / "truth_hazards.csv");
}

}  // namespace mainrisk::synth
