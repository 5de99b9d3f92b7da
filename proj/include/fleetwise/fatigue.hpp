#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fleetwise {

/// Bending-moment time series, MNm, regularly sampled.
struct LoadSeries {
    std::vector<double> samples;
    double dt = 1.0;  // seconds

    double duration() const { return dt * static_cast<double>(samples.size()); }
};

/// One closed (count 1) or residual half (count 0.5) load cycle.
struct Cycle {
    double range;
    double count;
};

/// Binned cycle spectrum. Only occupied bins are stored, sorted by range.
/// Each bin's range value is the count-weighted mean of its member cycles.
struct CycleSpectrum {
    struct Bin {
        double range;  // representative range, MNm
        double count;  // cycles (half cycles contribute 0.5)
    };
    std::vector<Bin> bins;
    std::size_t n_bins = 0;  // binning resolution used

    double total_count() const;
    bool empty() const { return bins.empty(); }
};

/// Linear S-N curve N = k * S^(-m), plus the equivalent cycle count.
struct SnParams {
    double k = 1.0;
    double m = 3.0;
    double n_eq = 1e7;
};

/// Reduce a series to its turning points (first/last samples kept when they
/// extend the excursion).
std::vector<double> turning_points(std::span<const double> samples);

/// Four-point rainflow on the turning-point sequence. Closed cycles count 1,
/// the unclosed residue contributes half cycles.
std::vector<Cycle> rainflow_cycles(std::span<const double> samples);

/// Rainflow count binned into n_bins equal-width range bins over
/// [0, max range]. A constant series yields an empty spectrum.
CycleSpectrum rainflow_count(const LoadSeries& series, std::size_t n_bins = 128);

/// Damage equivalent moment: (sum_i n_i * M_i^m / N_eq)^(1/m).
double dem(const CycleSpectrum& spectrum, const SnParams& sn);

/// Miner-Palmgren damage: sum_i n_i / (k * M_i^(-m)).
double miner_damage(const CycleSpectrum& spectrum, const SnParams& sn);

/// Single-column CSV ingestion, header "t_s,moment_MNm".
LoadSeries load_series_csv(const std::string& path);

}  // namespace fleetwise
