#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fleetwise/bnn.hpp"
#include "fleetwise/dataset.hpp"
#include "fleetwise/metrics.hpp"
#include "fleetwise/nnet_train.hpp"

namespace fleetwise {

/// Calendar month counter (years * 12 + month) for an epoch timestamp, UTC.
std::int64_t month_index_of(std::int64_t epoch_seconds);

/// Optional overrides on top of the per-group training defaults, for
/// desk-scale runs.
struct TrainOverrides {
    std::optional<std::size_t> max_epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> learning_rate;
    std::optional<std::vector<std::size_t>> hidden;
    std::optional<double> sigma_fixed;
    std::optional<double> prior_std;
    std::optional<std::size_t> patience;
    std::optional<double> min_delta;
};

TrainConfig resolve_dnn_config(const TrainOverrides& o, std::uint64_t seed);
TrainConfig resolve_bnn_config(int config_id, const TrainOverrides& o,
                               std::uint64_t seed);

/// A trained fleet-leader model bundled with the scalers and input
/// configuration it was fitted under.
struct FleetBnn {
    BnnNet net;
    Scaler input_scaler;
    Scaler label_scaler;
    InputConfig config;
};

struct FleetDnn {
    DenseNet net;
    Scaler input_scaler;
    Scaler label_scaler;
    InputConfig config;
    TrainHistory history;
};

FleetDnn train_fleet_dnn(const Dataset& train, int config_id,
                         const TrainOverrides& overrides, std::uint64_t seed);

struct FleetBnnResult {
    FleetBnn model;
    TrainHistory history;
    WeightStatHistory weight_stats;
};

FleetBnnResult train_fleet_bnn(const Dataset& train, int config_id,
                               HeadKind head, const TrainOverrides& overrides,
                               std::uint64_t seed);

/// Z-scored input table for a dataset under the model's scaler.
Table scaled_inputs(const Scaler& input_scaler, const InputConfig& config,
                    const Dataset& ds);

/// Predictive ensemble in physical label units (scaled inputs in, unscaled
/// mu/sigma out).
PredictiveSampleSet ensemble_physical(const FleetBnn& model, const Dataset& ds,
                                      std::size_t n_f, std::uint64_t seed);

/// Point predictions of a deterministic model in physical units.
Table predict_physical(const FleetDnn& model, const Dataset& ds);

// Input-configuration sweep ---------------------------------------------------

struct SweepOptions {
    std::uint64_t seed = 0;
    double test_fraction = 0.25;
    std::size_t n_f = 500;  // forward runs for the BNN metric
    TrainOverrides dnn;
    TrainOverrides bnn;
};

struct SweepEntry {
    int config_id = 0;
    std::string kind;                       // "dnn" or "bnn"
    std::vector<double> dnn_percent_error;  // per channel (dnn only)
    double bnn_expected_ll = 0.0;           // bnn only
};

struct SweepResult {
    std::vector<SweepEntry> entries;
};

SweepResult input_sweep(const Dataset& ds, const std::vector<int>& config_ids,
                        const std::vector<std::string>& kinds,
                        const SweepOptions& options);

// Data-collection-period study ---------------------------------------------------

struct PeriodOptions {
    std::uint64_t seed = 0;
    int config_id = 10;  // SCADA + accelerometer (LAT-077)
    double test_fraction = 0.25;
    std::size_t n_f = 500;
    TrainOverrides bnn;
};

struct PeriodEntry {
    int months = 0;
    std::size_t rows_used = 0;
    double mean_expected_ll = 0.0;
    double mean_cov_mu = 0.0;
    bool skipped = false;
};

struct PeriodStudyResult {
    std::vector<PeriodEntry> entries;
};

/// One BNN per collection period, all evaluated on a common test set drawn
/// from the full dataset.
PeriodStudyResult period_study(const Dataset& ds,
                               const std::vector<int>& period_months,
                               const PeriodOptions& options);

// Farm-wide deployment ------------------------------------------------------------

struct DemHistogram {
    std::vector<double> edges;        // n_bins + 1
    std::vector<double> probability;  // sums to 1
    std::vector<double> mean_cov_mu;  // NaN for empty bins
};

/// Expected-DEM histogram with per-bin mean model uncertainty.
DemHistogram dem_histogram(std::span<const double> expected_dem,
                           std::span<const double> cov_mu, std::size_t n_bins);

struct MarginalSummary {
    std::string column;
    double mean = 0.0;
    double stddev = 0.0;
    double q5 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

struct ChannelReport {
    std::string name;
    BoxStats cov_mu_stats;
    std::optional<double> expected_ll;
    DemHistogram histogram;
};

struct UncertaintyReport {
    std::string turbine_id;
    std::size_t rows = 0;
    std::size_t n_f = 0;
    std::vector<double> expected_y;  // rows x channels
    std::vector<double> cov_mu;      // rows x channels
    std::vector<double> r_min;       // per row
    std::vector<ChannelReport> channels;
    BoxStats r_min_stats;
    std::optional<double> expected_ll;  // mean over channels
    double mean_cov_mu = 0.0;           // finite entries only
    double mean_r_min = 0.0;
    std::vector<MarginalSummary> input_marginals;
};

/// Deploy a trained fleet-leader BNN to a list of turbines: N_f forward
/// runs per row, uncertainty decomposition, CoV, minimum Euclidean distance
/// to the training reference, expected log-likelihood when labels exist.
std::vector<UncertaintyReport> deploy_farm(const FleetBnn& model,
                                           const std::vector<Dataset>& turbines,
                                           const Dataset& train_reference,
                                           std::size_t n_f, std::uint64_t seed,
                                           std::size_t histogram_bins = 20);

// Model-kind comparison ---------------------------------------------------------

struct CompareOptions {
    std::uint64_t seed = 0;
    int config_id = 10;
    double test_fraction = 0.25;
    std::size_t n_f = 500;
    TrainOverrides dnn;
    TrainOverrides bnn;
};

struct CompareEntry {
    std::string dataset;  // "fl_test" or a turbine id
    // kind -> per-channel percent error (dnn, epistemic_bnn)
    std::map<std::string, std::vector<double>> percent_error;
    // kind -> mean CoV over rows/channels (epistemic_bnn, aleatoric_bnn)
    std::map<std::string, double> mean_cov_mu;
};

struct CompareResult {
    std::vector<std::string> kinds;
    std::vector<CompareEntry> entries;
};

/// DNN vs epistemic BNN point accuracy plus epistemic/aleatoric model
/// uncertainty, trained on the fleet leader and deployed without
/// fine-tuning.
CompareResult compare_models(const Dataset& train, const Dataset& test,
                             const std::vector<Dataset>& turbines,
                             const std::vector<std::string>& kinds,
                             const CompareOptions& options);

// Writers -------------------------------------------------------------------------

void write_report_json(const UncertaintyReport& report, const std::string& path);
void write_report_csvs(const UncertaintyReport& report,
                       const std::string& path_prefix);
void write_sweep_files(const SweepResult& sweep, const std::string& path_prefix);
void write_period_files(const PeriodStudyResult& periods,
                        const std::string& path_prefix);
void write_compare_files(const CompareResult& cmp,
                         const std::string& path_prefix);

}  // namespace fleetwise
