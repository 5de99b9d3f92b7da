#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "fleetwise/dataset.hpp"
#include "fleetwise/fatigue.hpp"

namespace fleetwise {

/// Structural surrogate parameters for one turbine. resonance_shift moves
/// the first natural frequency (and with it the acceleration response),
/// damping and noise_scale multiply their baseline values.
struct TurbineSpec {
    std::string id;
    double resonance_shift = 0.0;
    double damping = 1.0;
    double noise_scale = 1.0;
};

/// Synthetic-farm configuration. The three turbines share identical
/// environmental (SCADA / wave) statistics; only the structural response
/// differs, which is what makes the MP02 analog drift out of domain.
struct FarmSpec {
    std::uint64_t seed = 1;
    std::size_t months = 24;
    std::size_t rows_per_month = 120;

    double sea_scale = 1.0;           // sea-state severity multiplier
    double wave_wind_coupling = 0.85; // how tightly Hs tracks wind speed

    std::size_t series_samples = 1200;  // 10-minute moment series
    double series_dt = 0.5;             // seconds
    std::size_t spectrum_bins = 128;
    SnParams sn{1.0, 3.0, 1e7};

    TurbineSpec fleet_leader{"FL", 0.0, 1.0, 1.0};
    TurbineSpec mp01{"MP01", 0.03, 1.0, 1.0};
    TurbineSpec mp02{"MP02", 0.20, 1.0, 1.0};

    void validate() const;
    const TurbineSpec& turbine(std::size_t slot) const;

    std::string to_json() const;
    static FarmSpec from_json(const std::string& text);
    void save(const std::string& path) const;
    static FarmSpec load(const std::string& path);
};

struct FarmData {
    Dataset fleet_leader;
    Dataset mp01;
    Dataset mp02;

    const Dataset& by_slot(std::size_t slot) const;
};

/// Generate the full synthetic farm: wind field -> rotor state -> structural
/// response -> bending-moment series -> DEM labels through the fatigue
/// module. Fully deterministic per seed; every (turbine, row) draws from
/// its own substream.
FarmData synth_farm(const FarmSpec& spec);

/// Re-derive the emitted 10-minute moment series for one row and channel
/// (0 = DEM_tl / side-to-side, 1 = DEM_tn / fore-aft). The stored labels
/// equal dem(rainflow_count(series)) exactly.
LoadSeries synth_moment_series(const FarmSpec& spec, std::size_t turbine_slot,
                               std::size_t row, int channel);

/// Epoch seconds of the first 10-minute interval of calendar month
/// `month_offset` counted from 2018-01.
std::int64_t farm_month_start(std::size_t month_offset);

}  // namespace fleetwise
