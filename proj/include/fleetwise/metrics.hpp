#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fleetwise/bnn.hpp"
#include "fleetwise/dataset.hpp"

namespace fleetwise {

struct PointErrors {
    double mae = 0.0;
    double rmse = 0.0;
    double percent_error = 0.0;      // mean abs percent deviation
    std::size_t excluded_rows = 0;   // zero labels skipped by percent_error
};

/// MAE, RMSE and mean absolute percentage error for one output channel.
PointErrors point_errors(std::span<const double> pred,
                         std::span<const double> label);

/// Mean Gaussian log-density of the labels over rows, forward runs and
/// channels: (1/N)(1/N_f) sum log N(y; mu_y, sigma_y).
double expected_log_likelihood(const PredictiveSampleSet& samples,
                               const Table& labels);

/// Law-of-total-variance ledger per (row, channel). The total is computed
/// analytically as E[sigma_y^2] + V(mu_y) so aleatory + epistemic == total
/// holds exactly; variances are population (divide by N_f).
struct UncertaintyDecomposition {
    std::size_t rows = 0;
    std::size_t channels = 0;
    std::vector<double> expected_y;     // == expected_mu under this convention
    std::vector<double> total_var;
    std::vector<double> aleatory_var;
    std::vector<double> epistemic_var;
    std::vector<double> expected_mu;
    std::vector<double> cov_mu;         // sd(mu) / |E[mu]|; NaN when undefined
    std::vector<std::uint8_t> cov_defined;

    double at(const std::vector<double>& field, std::size_t r,
              std::size_t c) const {
        return field[r * channels + c];
    }
};

UncertaintyDecomposition decompose(const PredictiveSampleSet& samples);

/// Draw-based total-variance estimator: per (row, channel) population
/// variance of y_hat = mu_y + sigma_y * zeta over the N_f draws. Kept
/// separate from decompose() as a Monte Carlo cross-check.
std::vector<double> draw_total_variance(const PredictiveSampleSet& samples,
                                        std::uint64_t seed);

/// Per test row, the minimum Euclidean distance to any training row.
/// Inputs are expected in the training scaler's z-score space.
std::vector<double> min_euclidean_distance(const Table& test,
                                           const Table& train);

// Small reusable statistics helpers.
double mean_of(std::span<const double> v);
double spearman_rank_correlation(std::span<const double> a,
                                 std::span<const double> b);

struct BoxStats {
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double w2_5 = 0.0;
    double w97_5 = 0.0;
};

/// Box-plot statistics: quartile box, 2.5/97.5 percentile whiskers.
BoxStats box_stats(std::span<const double> values);

}  // namespace fleetwise
