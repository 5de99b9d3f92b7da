#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fleetwise/dense_net.hpp"
#include "fleetwise/rng.hpp"
#include "fleetwise/train.hpp"

namespace fleetwise {

/// Smallest admissible posterior standard deviation.
inline constexpr double kSigmaFloor = 1e-6;

/// Aleatoric-head output sigma floor (normalized label units).
inline constexpr double kHeadSigmaFloor = 0.02;

/// Forward runs used for predictive statistics unless overridden.
inline constexpr std::size_t kDefaultForwardRuns = 10000;

double softplus(double x);
double softplus_inverse(double y);

/// Mean-field Gaussian over one scalar parameter; sigma = softplus(rho)
/// floored at kSigmaFloor.
struct GaussianPosterior {
    double mu = 0.0;
    double rho = -5.0;

    double sigma() const;
};

struct Gaussian {
    double mean = 0.0;
    double std = 1.0;
};

/// Closed-form KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)), nats.
double gaussian_kl(const GaussianPosterior& q, const Gaussian& p);

enum class SamplingMode { SharedEps, Flipout };
enum class HeadKind { Aleatoric, Epistemic };

/// Dense layer whose weights and biases are Gaussian posteriors.
struct VariationalLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<GaussianPosterior> w;  // out * in, row-major
    std::vector<GaussianPosterior> b;  // out
    Gaussian prior;
    Activation act = Activation::ReLU;
};

/// One concrete weight realization of a variational layer.
struct RealizedLayer {
    std::vector<double> w;
    std::vector<double> b;
};

/// Reparameterized draw: theta = mu + sigma * eps with eps ~ N(0,1).
RealizedLayer sample_weights(const VariationalLayer& layer, Rng& rng);

/// Sum of elementwise KL against the layer prior.
double gaussian_kl(const VariationalLayer& layer);

/// One (mu_y, sigma_y) realization per output channel.
struct StochasticOutput {
    std::vector<double> mu;
    std::vector<double> sigma;
};

/// N_f forward realizations of the output distribution parameters per row.
struct PredictiveSampleSet {
    std::size_t n_rows = 0;
    std::size_t n_f = 0;
    std::size_t channels = 0;
    std::vector<double> mu;     // [(row * n_f + k) * channels + c]
    std::vector<double> sigma;  // same layout

    double mu_at(std::size_t row, std::size_t k, std::size_t c) const {
        return mu[(row * n_f + k) * channels + c];
    }
    double sigma_at(std::size_t row, std::size_t k, std::size_t c) const {
        return sigma[(row * n_f + k) * channels + c];
    }
};

/// Posterior statistics of one tracked parameter over training epochs.
struct WeightStatHistory {
    std::size_t layer = 0;
    std::size_t index = 0;
    bool bias = true;
    struct Record {
        double mu;
        double sd;
        double cov;  // sd / |mu|
    };
    std::vector<Record> epochs;
};

/// Variational Bayesian feed-forward network. The aleatoric head emits
/// (mu_y, sigma_y) per channel via softplus on the raw sigma output; the
/// epistemic head emits mu_y only and carries a fixed output sigma.
class BnnNet {
public:
    BnnNet() = default;

    static BnnNet make(std::size_t input_width,
                       const std::vector<std::size_t>& hidden,
                       std::size_t channels, HeadKind head, Rng& rng,
                       double prior_std = 1.0, double sigma_fixed = 1e-3,
                       SamplingMode mode = SamplingMode::Flipout);

    std::size_t input_width() const;
    std::size_t channels() const { return channels_; }
    HeadKind head() const { return head_; }
    double sigma_fixed() const { return sigma_fixed_; }
    SamplingMode sampling_mode() const { return mode_; }
    void set_sampling_mode(SamplingMode mode) { mode_ = mode; }

    const std::vector<VariationalLayer>& layers() const { return layers_; }
    std::vector<VariationalLayer>& layers() { return layers_; }

    /// Sum of KL over every posterior in the network.
    double total_kl() const;

    /// One stochastic forward realization (full weight draw).
    StochasticOutput forward_sample(std::span<const double> x, Rng& rng) const;

    /// Mean-parameter forward pass (eps = 0 everywhere).
    StochasticOutput forward_mean(std::span<const double> x) const;

    std::size_t parameter_count() const;  // mu and rho for every weight/bias
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);

    std::string to_json() const;
    static BnnNet from_json(const std::string& text);
    void save(const std::string& path) const;
    static BnnNet load(const std::string& path);

private:
    std::vector<VariationalLayer> layers_;
    HeadKind head_ = HeadKind::Aleatoric;
    std::size_t channels_ = 0;
    double sigma_fixed_ = 1e-3;
    SamplingMode mode_ = SamplingMode::Flipout;
};

/// Negative ELBO estimate from a single weight sample:
/// kl_weight * KL + sum over batch rows/channels of the Gaussian NLL.
/// The same seed freezes the eps draws, which makes the value
/// finite-difference friendly.
double elbo_loss(const BnnNet& net, const LabeledTable& batch,
                 std::uint64_t seed, double kl_weight);

/// elbo_loss plus its analytic gradient wrt (mu, rho) of every posterior.
double elbo_loss_and_grad(const BnnNet& net, const LabeledTable& batch,
                          std::uint64_t seed, double kl_weight,
                          std::vector<double>& grad);

struct BnnTrainOptions {
    /// Parameter tracked for the weight-statistics history.
    std::size_t track_layer = 0;
    std::size_t track_index = 0;
    bool track_bias = true;
};

struct BnnTrainResult {
    BnnNet net;
    TrainHistory history;
    WeightStatHistory weight_stats;
};

/// Minibatch negative-ELBO training (one weight sample per step, KL scaled
/// by 1/N_train so the per-row batch loss is an unbiased minibatch estimate
/// of the full objective). Early stopping monitors the training loss.
BnnTrainResult bnn_train(const BnnNet& net, const LabeledTable& train,
                         const TrainConfig& cfg,
                         const BnnTrainOptions& options = {});

/// N_f independent weight draws per row; draw (row, k) comes from its own
/// counter-derived substream, so results are schedule independent.
PredictiveSampleSet predictive_ensemble(const BnnNet& net, const Table& rows,
                                        std::size_t n_f, std::uint64_t seed);

/// Bayesian-network training defaults per input configuration group
/// (Adam, 1024-sample batches, 2000 epochs, patience 30 on training loss).
TrainConfig bnn_default_config(int input_config_id);
std::vector<std::size_t> bnn_default_hidden(int input_config_id);

}  // namespace fleetwise
