#include "fleetwise/fatigue.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fleetwise/errors.hpp"

namespace fleetwise {

double CycleSpectrum::total_count() const {
    double total = 0.0;
    for (const auto& bin : bins) total += bin.count;
    return total;
}

std::vector<double> turning_points(std::span<const double> samples) {
    std::vector<double> tp;
    if (samples.empty()) return tp;
    tp.push_back(samples[0]);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        double v = samples[i];
        if (v == tp.back()) continue;
        if (tp.size() >= 2) {
            double prev = tp[tp.size() - 2];
            double last = tp.back();
            // Drop the middle point while the excursion keeps extending.
            if ((last > prev && v >= last) || (last < prev && v <= last)) {
                tp.back() = v;
                continue;
            }
        }
        tp.push_back(v);
    }
    if (tp.size() == 1) tp.clear();  // constant series: no excursion at all
    return tp;
}

std::vector<Cycle> rainflow_cycles(std::span<const double> samples) {
    std::vector<double> stack;
    std::vector<Cycle> cycles;
    auto tp = turning_points(samples);
    for (double point : tp) {
        stack.push_back(point);
        while (stack.size() >= 4) {
            std::size_t n = stack.size();
            double r1 = std::abs(stack[n - 3] - stack[n - 4]);
            double r2 = std::abs(stack[n - 2] - stack[n - 3]);
            double r3 = std::abs(stack[n - 1] - stack[n - 2]);
            if (r2 <= r1 && r2 <= r3) {
                cycles.push_back({r2, 1.0});
                stack.erase(stack.end() - 3, stack.end() - 1);
            } else {
                break;
            }
        }
    }
    // Residue: unclosed half cycles.
    for (std::size_t i = 1; i < stack.size(); ++i) {
        cycles.push_back({std::abs(stack[i] - stack[i - 1]), 0.5});
    }
    return cycles;
}

CycleSpectrum rainflow_count(const LoadSeries& series, std::size_t n_bins) {
    if (series.samples.size() < 2) {
        throw ValidationError("rainflow_count: series needs at least 2 samples");
    }
    if (n_bins == 0) throw ValidationError("rainflow_count: n_bins must be >= 1");
    for (double v : series.samples) {
        if (!std::isfinite(v)) {
            throw ValidationError("rainflow_count: non-finite sample");
        }
    }

    CycleSpectrum spectrum;
    spectrum.n_bins = n_bins;
    auto cycles = rainflow_cycles(series.samples);
    if (cycles.empty()) return spectrum;

    double max_range = 0.0;
    for (const auto& c : cycles) max_range = std::max(max_range, c.range);
    if (max_range <= 0.0) return spectrum;

    // Accumulate count and count-weighted range per bin; the representative
    // range of a bin is the weighted mean of what actually landed in it.
    std::vector<double> counts(n_bins, 0.0);
    std::vector<double> weighted(n_bins, 0.0);
    double width = max_range / static_cast<double>(n_bins);
    for (const auto& c : cycles) {
        auto idx = static_cast<std::size_t>(c.range / width);
        if (idx >= n_bins) idx = n_bins - 1;  // max range lands in the top bin
        counts[idx] += c.count;
        weighted[idx] += c.count * c.range;
    }
    for (std::size_t i = 0; i < n_bins; ++i) {
        if (counts[i] > 0.0) {
            spectrum.bins.push_back({weighted[i] / counts[i], counts[i]});
        }
    }
    return spectrum;
}

double dem(const CycleSpectrum& spectrum, const SnParams& sn) {
    if (sn.m <= 0.0 || sn.n_eq <= 0.0) {
        throw ValidationError("dem: S-N slope and N_eq must be positive");
    }
    if (spectrum.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& bin : spectrum.bins) {
        acc += bin.count * std::pow(bin.range, sn.m);
    }
    return std::pow(acc / sn.n_eq, 1.0 / sn.m);
}

double miner_damage(const CycleSpectrum& spectrum, const SnParams& sn) {
    if (sn.k <= 0.0 || sn.m <= 0.0) {
        throw ValidationError("miner_damage: S-N parameters must be positive");
    }
    double damage = 0.0;
    for (const auto& bin : spectrum.bins) {
        // n_i / (k * S^(-m)) == n_i * S^m / k
        damage += bin.count * std::pow(bin.range, sn.m) / sn.k;
    }
    return damage;
}

LoadSeries load_series_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open load series file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty load series file: " + path);

    LoadSeries series;
    double prev_t = 0.0;
    bool have_prev = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string t_field, m_field;
        if (!std::getline(ss, t_field, ',') || !std::getline(ss, m_field, ',')) {
            throw IoError(path + ":" + std::to_string(line_no) + ": malformed row");
        }
        double t = 0.0, m = 0.0;
        try {
            t = std::stod(t_field);
            m = std::stod(m_field);
        } catch (const std::exception&) {
            throw IoError(path + ":" + std::to_string(line_no) + ": unparseable cell");
        }
        if (have_prev) series.dt = t - prev_t;
        prev_t = t;
        have_prev = true;
        series.samples.push_back(m);
    }
    if (series.samples.size() < 2) {
        throw ValidationError("load series needs at least 2 samples: " + path);
    }
    return series;
}

}  // namespace fleetwise
