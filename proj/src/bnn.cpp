#include "fleetwise/bnn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "fleetwise/errors.hpp"
#include "fleetwise/optimizer.hpp"

namespace fleetwise {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Stream keys for the per-step substreams.
constexpr std::uint64_t kKeyWeightEps = 0xb1;
constexpr std::uint64_t kKeyBiasEps = 0xb2;
constexpr std::uint64_t kKeyFlipSign = 0xb3;
constexpr std::uint64_t kKeyEnsemble = 0xb4;
constexpr std::uint64_t kKeyShuffle = 0xb5;

}  // namespace

double softplus(double x) {
    // log(1 + e^x), stable on both tails.
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
    if (y <= 0.0) throw ValidationError("softplus_inverse needs y > 0");
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

double GaussianPosterior::sigma() const {
    return std::max(softplus(rho), kSigmaFloor);
}

double gaussian_kl(const GaussianPosterior& q, const Gaussian& p) {
    if (p.std <= 0.0) throw ValidationError("prior std must be positive");
    double sq = q.sigma();
    double d = q.mu - p.mean;
    return std::log(p.std / sq) + (sq * sq + d * d) / (2.0 * p.std * p.std) - 0.5;
}

double gaussian_kl(const VariationalLayer& layer) {
    double total = 0.0;
    for (const auto& q : layer.w) total += gaussian_kl(q, layer.prior);
    for (const auto& q : layer.b) total += gaussian_kl(q, layer.prior);
    return total;
}

RealizedLayer sample_weights(const VariationalLayer& layer, Rng& rng) {
    RealizedLayer real;
    real.w.resize(layer.w.size());
    real.b.resize(layer.b.size());
    for (std::size_t i = 0; i < layer.w.size(); ++i) {
        real.w[i] = layer.w[i].mu + layer.w[i].sigma() * rng.gaussian();
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
        real.b[i] = layer.b[i].mu + layer.b[i].sigma() * rng.gaussian();
    }
    return real;
}

// BnnNet ----------------------------------------------------------------------

BnnNet BnnNet::make(std::size_t input_width,
                    const std::vector<std::size_t>& hidden,
                    std::size_t channels, HeadKind head, Rng& rng,
                    double prior_std, double sigma_fixed, SamplingMode mode) {
    if (input_width == 0 || channels == 0) {
        throw ValidationError("network widths must be positive");
    }
    if (prior_std <= 0.0) throw ValidationError("prior std must be positive");
    if (head == HeadKind::Epistemic && sigma_fixed <= 0.0) {
        throw ValidationError("sigma_fixed must be positive");
    }

    BnnNet net;
    net.head_ = head;
    net.channels_ = channels;
    net.sigma_fixed_ = sigma_fixed;
    net.mode_ = mode;

    std::size_t out_width = head == HeadKind::Aleatoric ? 2 * channels : channels;
    std::vector<std::size_t> widths = hidden;
    widths.push_back(out_width);

    // Posteriors start near-deterministic: mu from fan-in uniform, sigma at
    // 5% of the prior scale.
    double rho0 = softplus_inverse(0.05 * prior_std);
    std::size_t in = input_width;
    for (std::size_t l = 0; l < widths.size(); ++l) {
        VariationalLayer layer;
        layer.in = in;
        layer.out = widths[l];
        layer.prior = {0.0, prior_std};
        layer.act = (l + 1 == widths.size()) ? Activation::Identity
                                             : Activation::ReLU;
        double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
        layer.w.resize(layer.out * layer.in);
        for (auto& q : layer.w) q = {rng.uniform(-bound, bound), rho0};
        layer.b.assign(layer.out, GaussianPosterior{0.0, rho0});
        net.layers_.push_back(std::move(layer));
        in = widths[l];
    }
    return net;
}

std::size_t BnnNet::input_width() const {
    return layers_.empty() ? 0 : layers_.front().in;
}

double BnnNet::total_kl() const {
    double total = 0.0;
    for (const auto& layer : layers_) total += gaussian_kl(layer);
    return total;
}

namespace {

/// Map raw network outputs to head parameters.
StochasticOutput head_outputs(HeadKind head, std::size_t channels,
                              double sigma_fixed,
                              std::span<const double> raw) {
    StochasticOutput out;
    out.mu.resize(channels);
    out.sigma.resize(channels);
    if (head == HeadKind::Aleatoric) {
        for (std::size_t c = 0; c < channels; ++c) {
            out.mu[c] = raw[2 * c];
            out.sigma[c] = std::max(softplus(raw[2 * c + 1]), kHeadSigmaFloor);
        }
    } else {
        for (std::size_t c = 0; c < channels; ++c) {
            out.mu[c] = raw[c];
            out.sigma[c] = sigma_fixed;
        }
    }
    return out;
}

std::vector<double> dense_forward(const std::vector<double>& w,
                                  const std::vector<double>& b, std::size_t in,
                                  std::size_t out_n,
                                  std::span<const double> x) {
    std::vector<double> z(out_n);
    for (std::size_t o = 0; o < out_n; ++o) {
        double acc = b[o];
        const double* wrow = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wrow[i] * x[i];
        z[o] = acc;
    }
    return z;
}

}  // namespace

StochasticOutput BnnNet::forward_sample(std::span<const double> x,
                                        Rng& rng) const {
    if (x.size() != input_width()) {
        throw ValidationError("forward_sample: input width mismatch");
    }
    std::vector<double> a(x.begin(), x.end());
    for (const auto& layer : layers_) {
        RealizedLayer real = sample_weights(layer, rng);
        auto z = dense_forward(real.w, real.b, layer.in, layer.out, a);
        a.resize(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            a[o] = apply_activation(layer.act, z[o]);
        }
    }
    return head_outputs(head_, channels_, sigma_fixed_, a);
}

StochasticOutput BnnNet::forward_mean(std::span<const double> x) const {
    if (x.size() != input_width()) {
        throw ValidationError("forward_mean: input width mismatch");
    }
    std::vector<double> a(x.begin(), x.end());
    for (const auto& layer : layers_) {
        std::vector<double> z(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            double acc = layer.b[o].mu;
            const GaussianPosterior* wrow = layer.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) acc += wrow[i].mu * a[i];
            z[o] = acc;
        }
        a.resize(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            a[o] = apply_activation(layer.act, z[o]);
        }
    }
    return head_outputs(head_, channels_, sigma_fixed_, a);
}

std::size_t BnnNet::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += 2 * (layer.w.size() + layer.b.size());
    return n;
}

std::vector<double> BnnNet::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& layer : layers_) {
        for (const auto& q : layer.w) flat.push_back(q.mu);
        for (const auto& q : layer.w) flat.push_back(q.rho);
        for (const auto& q : layer.b) flat.push_back(q.mu);
        for (const auto& q : layer.b) flat.push_back(q.rho);
    }
    return flat;
}

void BnnNet::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw ValidationError("set_parameters: size mismatch");
    }
    std::size_t pos = 0;
    for (auto& layer : layers_) {
        for (auto& q : layer.w) q.mu = flat[pos++];
        for (auto& q : layer.w) q.rho = flat[pos++];
        for (auto& q : layer.b) q.mu = flat[pos++];
        for (auto& q : layer.b) q.rho = flat[pos++];
    }
}

// Batch objective -----------------------------------------------------------

namespace {

/// Frozen eps draws for one optimization step.
struct StepNoise {
    // per layer
    std::vector<std::vector<double>> eps_w;
    std::vector<std::vector<double>> eps_b;

    static StepNoise draw(const BnnNet& net, std::uint64_t seed) {
        StepNoise noise;
        const auto& layers = net.layers();
        noise.eps_w.resize(layers.size());
        noise.eps_b.resize(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            Rng rw = Rng::substream(seed, kKeyWeightEps, l);
            noise.eps_w[l].resize(layers[l].w.size());
            for (double& e : noise.eps_w[l]) e = rw.gaussian();
            Rng rb = Rng::substream(seed, kKeyBiasEps, l);
            noise.eps_b[l].resize(layers[l].b.size());
            for (double& e : noise.eps_b[l]) e = rb.gaussian();
        }
        return noise;
    }
};

/// Gradient wrt (mu, rho) of every posterior, same layout as parameters().
struct BnnGrads {
    std::vector<std::vector<double>> w_mu, w_rho, b_mu, b_rho;

    explicit BnnGrads(const BnnNet& net) {
        const auto& layers = net.layers();
        w_mu.resize(layers.size());
        w_rho.resize(layers.size());
        b_mu.resize(layers.size());
        b_rho.resize(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            w_mu[l].assign(layers[l].w.size(), 0.0);
            w_rho[l].assign(layers[l].w.size(), 0.0);
            b_mu[l].assign(layers[l].b.size(), 0.0);
            b_rho[l].assign(layers[l].b.size(), 0.0);
        }
    }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        for (std::size_t l = 0; l < w_mu.size(); ++l) {
            flat.insert(flat.end(), w_mu[l].begin(), w_mu[l].end());
            flat.insert(flat.end(), w_rho[l].begin(), w_rho[l].end());
            flat.insert(flat.end(), b_mu[l].begin(), b_mu[l].end());
            flat.insert(flat.end(), b_rho[l].begin(), b_rho[l].end());
        }
        return flat;
    }
};

double sigma_grad(const GaussianPosterior& q) {
    // d sigma / d rho; zero below the floor.
    return softplus(q.rho) > kSigmaFloor ? sigmoid(q.rho) : 0.0;
}

/// Negative log-likelihood over the batch under one weight sample, with
/// gradient accumulation. Handles both sampling modes.
class BatchPass {
public:
    BatchPass(const BnnNet& net, const StepNoise& noise)
        : net_(net), noise_(noise) {
        const auto& layers = net.layers();
        delta_w_.resize(layers.size());
        dsig_w_.resize(layers.size());
        realized_b_.resize(layers.size());
        dsig_b_.resize(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& layer = layers[l];
            delta_w_[l].resize(layer.w.size());
            dsig_w_[l].resize(layer.w.size());
            for (std::size_t i = 0; i < layer.w.size(); ++i) {
                delta_w_[l][i] = layer.w[i].sigma() * noise.eps_w[l][i];
                dsig_w_[l][i] = sigma_grad(layer.w[i]);
            }
            realized_b_[l].resize(layer.b.size());
            dsig_b_[l].resize(layer.b.size());
            for (std::size_t i = 0; i < layer.b.size(); ++i) {
                realized_b_[l][i] =
                    layer.b[i].mu + layer.b[i].sigma() * noise.eps_b[l][i];
                dsig_b_[l][i] = sigma_grad(layer.b[i]);
            }
        }
    }

    /// Returns sum over rows and channels of the Gaussian NLL; accumulates
    /// d(nll_sum)/d(params) into grads (nullptr to skip).
    double run(const LabeledTable& batch, std::uint64_t seed, BnnGrads* grads) {
        double nll_sum = 0.0;
        const auto& layers = net_.layers();
        bool flipout = net_.sampling_mode() == SamplingMode::Flipout;

        // Buffers reused across rows.
        std::vector<std::vector<double>> inputs(layers.size());
        std::vector<std::vector<double>> pre(layers.size());
        std::vector<std::vector<double>> sign_in(layers.size());
        std::vector<std::vector<double>> sign_out(layers.size());
        for (std::size_t l = 0; l < layers.size(); ++l) {
            inputs[l].resize(layers[l].in);
            pre[l].resize(layers[l].out);
            sign_in[l].resize(layers[l].in);
            sign_out[l].resize(layers[l].out);
        }
        std::size_t max_width = layers.front().in;
        for (const auto& layer : layers) {
            max_width = std::max(max_width, layer.out);
        }
        std::vector<double> a(max_width), dout(layers.back().out);
        std::vector<double> delta(max_width), prev(max_width);

        for (std::size_t r = 0; r < batch.rows(); ++r) {
            auto x = batch.x.row(r);
            std::copy(x.begin(), x.end(), a.begin());

            if (flipout) {
                for (std::size_t l = 0; l < layers.size(); ++l) {
                    Rng rs = Rng::substream(seed, kKeyFlipSign, l, r);
                    for (double& s : sign_in[l]) s = rs.uniform() < 0.5 ? -1.0 : 1.0;
                    for (double& s : sign_out[l]) s = rs.uniform() < 0.5 ? -1.0 : 1.0;
                }
            }

            // Forward.
            for (std::size_t l = 0; l < layers.size(); ++l) {
                const auto& layer = layers[l];
                std::copy_n(a.begin(), layer.in, inputs[l].begin());
                for (std::size_t o = 0; o < layer.out; ++o) {
                    double acc = realized_b_[l][o];
                    const GaussianPosterior* wrow = layer.w.data() + o * layer.in;
                    const double* drow = delta_w_[l].data() + o * layer.in;
                    if (flipout) {
                        double pert = 0.0;
                        for (std::size_t i = 0; i < layer.in; ++i) {
                            acc += wrow[i].mu * a[i];
                            pert += drow[i] * a[i] * sign_in[l][i];
                        }
                        acc += pert * sign_out[l][o];
                    } else {
                        for (std::size_t i = 0; i < layer.in; ++i) {
                            acc += (wrow[i].mu + drow[i]) * a[i];
                        }
                    }
                    pre[l][o] = acc;
                }
                for (std::size_t o = 0; o < layer.out; ++o) {
                    a[o] = apply_activation(layer.act, pre[l][o]);
                }
            }

            // Head NLL and gradient wrt raw outputs.
            auto label = batch.y.row(r);
            std::size_t channels = net_.channels();
            if (net_.head() == HeadKind::Aleatoric) {
                for (std::size_t c = 0; c < channels; ++c) {
                    double mu = a[2 * c];
                    double raw = a[2 * c + 1];
                    double sp = softplus(raw);
                    double sig = std::max(sp, kHeadSigmaFloor);
                    double res = label[c] - mu;
                    nll_sum += kHalfLog2Pi + std::log(sig) +
                               0.5 * res * res / (sig * sig);
                    dout[2 * c] = -res / (sig * sig);
                    double dsig = 1.0 / sig - res * res / (sig * sig * sig);
                    dout[2 * c + 1] =
                        sp > kHeadSigmaFloor ? dsig * sigmoid(raw) : 0.0;
                }
            } else {
                double sig = net_.sigma_fixed();
                for (std::size_t c = 0; c < channels; ++c) {
                    double res = label[c] - a[c];
                    nll_sum += kHalfLog2Pi + std::log(sig) +
                               0.5 * res * res / (sig * sig);
                    dout[c] = -res / (sig * sig);
                }
            }
            if (grads == nullptr) continue;

            // Backward.
            std::copy(dout.begin(), dout.end(), delta.begin());
            for (std::size_t l = layers.size(); l-- > 0;) {
                const auto& layer = layers[l];
                for (std::size_t o = 0; o < layer.out; ++o) {
                    delta[o] *= activation_grad(layer.act, pre[l][o]);
                }
                const auto& in = inputs[l];
                for (std::size_t o = 0; o < layer.out; ++o) {
                    double d = delta[o];
                    grads->b_mu[l][o] += d;
                    grads->b_rho[l][o] +=
                        d * noise_.eps_b[l][o] * dsig_b_[l][o];
                    double* gw_mu = grads->w_mu[l].data() + o * layer.in;
                    double* gw_rho = grads->w_rho[l].data() + o * layer.in;
                    const double* eps = noise_.eps_w[l].data() + o * layer.in;
                    const double* dsig = dsig_w_[l].data() + o * layer.in;
                    if (flipout) {
                        double dflip = d * sign_out[l][o];
                        for (std::size_t i = 0; i < layer.in; ++i) {
                            gw_mu[i] += d * in[i];
                            gw_rho[i] += dflip * in[i] * sign_in[l][i] * eps[i] *
                                         dsig[i];
                        }
                    } else {
                        for (std::size_t i = 0; i < layer.in; ++i) {
                            gw_mu[i] += d * in[i];
                            gw_rho[i] += d * in[i] * eps[i] * dsig[i];
                        }
                    }
                }
                if (l == 0) break;
                std::fill_n(prev.begin(), layer.in, 0.0);
                const double* drow_base = delta_w_[l].data();
                for (std::size_t o = 0; o < layer.out; ++o) {
                    double d = delta[o];
                    const GaussianPosterior* wrow = layer.w.data() + o * layer.in;
                    const double* drow = drow_base + o * layer.in;
                    if (flipout) {
                        double dflip = d * sign_out[l][o];
                        for (std::size_t i = 0; i < layer.in; ++i) {
                            prev[i] += wrow[i].mu * d + drow[i] * sign_in[l][i] * dflip;
                        }
                    } else {
                        for (std::size_t i = 0; i < layer.in; ++i) {
                            prev[i] += (wrow[i].mu + drow[i]) * d;
                        }
                    }
                }
                delta.swap(prev);
            }
        }
        return nll_sum;
    }

private:
    const BnnNet& net_;
    const StepNoise& noise_;
    std::vector<std::vector<double>> delta_w_;
    std::vector<std::vector<double>> dsig_w_;
    std::vector<std::vector<double>> realized_b_;
    std::vector<std::vector<double>> dsig_b_;
};

void add_kl_grads(const BnnNet& net, double scale, BnnGrads& grads) {
    const auto& layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        double inv_var = 1.0 / (layer.prior.std * layer.prior.std);
        for (std::size_t i = 0; i < layer.w.size(); ++i) {
            const auto& q = layer.w[i];
            double sq = q.sigma();
            grads.w_mu[l][i] += scale * (q.mu - layer.prior.mean) * inv_var;
            grads.w_rho[l][i] +=
                scale * (-1.0 / sq + sq * inv_var) * sigma_grad(q);
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i) {
            const auto& q = layer.b[i];
            double sq = q.sigma();
            grads.b_mu[l][i] += scale * (q.mu - layer.prior.mean) * inv_var;
            grads.b_rho[l][i] +=
                scale * (-1.0 / sq + sq * inv_var) * sigma_grad(q);
        }
    }
}

void check_batch(const BnnNet& net, const LabeledTable& batch) {
    if (batch.rows() == 0) throw ValidationError("empty batch");
    if (batch.x.rows != batch.y.rows) {
        throw ValidationError("inputs and labels disagree on row count");
    }
    if (batch.x.cols != net.input_width() || batch.y.cols != net.channels()) {
        throw ValidationError("table width does not match the network");
    }
}

double objective(const BnnNet& net, const LabeledTable& batch,
                 std::uint64_t seed, double kl_coeff, double nll_scale,
                 BnnGrads* grads) {
    check_batch(net, batch);
    StepNoise noise = StepNoise::draw(net, seed);
    BatchPass pass(net, noise);
    BnnGrads local(net);
    double nll = pass.run(batch, seed, grads ? &local : nullptr);
    double loss = nll_scale * nll + kl_coeff * net.total_kl();
    if (!std::isfinite(loss)) {
        throw NumericalError("non-finite negative ELBO");
    }
    if (grads) {
        for (std::size_t l = 0; l < local.w_mu.size(); ++l) {
            for (std::size_t i = 0; i < local.w_mu[l].size(); ++i) {
                grads->w_mu[l][i] += nll_scale * local.w_mu[l][i];
                grads->w_rho[l][i] += nll_scale * local.w_rho[l][i];
            }
            for (std::size_t i = 0; i < local.b_mu[l].size(); ++i) {
                grads->b_mu[l][i] += nll_scale * local.b_mu[l][i];
                grads->b_rho[l][i] += nll_scale * local.b_rho[l][i];
            }
        }
        add_kl_grads(net, kl_coeff, *grads);
    }
    return loss;
}

}  // namespace

double elbo_loss(const BnnNet& net, const LabeledTable& batch,
                 std::uint64_t seed, double kl_weight) {
    return objective(net, batch, seed, kl_weight, 1.0, nullptr);
}

double elbo_loss_and_grad(const BnnNet& net, const LabeledTable& batch,
                          std::uint64_t seed, double kl_weight,
                          std::vector<double>& grad) {
    BnnGrads grads(net);
    double loss = objective(net, batch, seed, kl_weight, 1.0, &grads);
    grad = grads.flatten();
    return loss;
}

// Training --------------------------------------------------------------------

namespace {

WeightStatHistory::Record tracked_record(const BnnNet& net,
                                         const BnnTrainOptions& options) {
    const auto& layers = net.layers();
    std::size_t l = std::min(options.track_layer, layers.size() - 1);
    const auto& pool = options.track_bias ? layers[l].b : layers[l].w;
    std::size_t i = std::min(options.track_index, pool.size() - 1);
    const auto& q = pool[i];
    double sd = q.sigma();
    double denom = std::abs(q.mu);
    double cov = denom > 0.0 ? sd / denom : std::numeric_limits<double>::infinity();
    return {q.mu, sd, cov};
}

}  // namespace

BnnTrainResult bnn_train(const BnnNet& net, const LabeledTable& train,
                         const TrainConfig& cfg,
                         const BnnTrainOptions& options) {
    cfg.validate();
    check_batch(net, train);

    BnnTrainResult result{net, {}, {}};
    result.weight_stats.layer = options.track_layer;
    result.weight_stats.index = options.track_index;
    result.weight_stats.bias = options.track_bias;
    if (cfg.max_epochs == 0) return result;

    const double kl_scale = 1.0 / static_cast<double>(train.rows());
    AdamOptimizer optimizer(cfg.optimizer);
    std::vector<double> params = result.net.parameters();
    std::vector<double> best_params = params;
    double best_monitor = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(train.rows());
    std::iota(order.begin(), order.end(), 0);
    std::uint64_t step = 0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng = Rng::substream(cfg.seed, kKeyShuffle, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            LabeledTable batch;
            batch.x.cols = train.x.cols;
            batch.y.cols = train.y.cols;
            batch.x.rows = batch.y.rows = end - start;
            for (std::size_t i = start; i < end; ++i) {
                auto xr = train.x.row(order[i]);
                auto yr = train.y.row(order[i]);
                batch.x.v.insert(batch.x.v.end(), xr.begin(), xr.end());
                batch.y.v.insert(batch.y.v.end(), yr.begin(), yr.end());
            }

            ++step;
            std::uint64_t step_seed =
                Rng::substream(cfg.seed, 0x57e9u, step).next_u64();
            BnnGrads grads(result.net);
            double nll_scale = 1.0 / static_cast<double>(batch.rows());
            double loss;
            try {
                loss = objective(result.net, batch, step_seed, kl_scale,
                                 nll_scale, &grads);
            } catch (const NumericalError&) {
                throw NumericalError("training aborted: non-finite loss at epoch " +
                                     std::to_string(epoch));
            }
            auto flat = grads.flatten();
            optimizer.step(params, flat);
            result.net.set_parameters(params);
            epoch_loss += loss;
            ++n_batches;
        }
        epoch_loss /= static_cast<double>(n_batches);

        result.history.epochs.push_back({epoch_loss, std::nullopt});
        result.history.stopped_epoch = epoch;
        result.weight_stats.epochs.push_back(
            tracked_record(result.net, options));

        if (epoch_loss < best_monitor - cfg.early_stop.min_delta) {
            best_monitor = epoch_loss;
            best_params = params;
            best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
            if (since_best >= cfg.early_stop.patience) break;
        }
    }

    result.net.set_parameters(best_params);
    result.history.best_epoch = best_epoch;
    return result;
}

PredictiveSampleSet predictive_ensemble(const BnnNet& net, const Table& rows,
                                        std::size_t n_f, std::uint64_t seed) {
    if (n_f < 1) throw ValidationError("predictive_ensemble: N_f must be >= 1");
    if (rows.cols != net.input_width()) {
        throw ValidationError("predictive_ensemble: input width mismatch");
    }
    PredictiveSampleSet set;
    set.n_rows = rows.rows;
    set.n_f = n_f;
    set.channels = net.channels();
    set.mu.resize(rows.rows * n_f * set.channels);
    set.sigma.resize(rows.rows * n_f * set.channels);

    // Reusable workspace: posterior moments flattened once, realized weights
    // and ping-pong activations reused across draws.
    const auto& layers = net.layers();
    std::vector<std::vector<double>> mu_w(layers.size()), sd_w(layers.size());
    std::vector<std::vector<double>> mu_b(layers.size()), sd_b(layers.size());
    std::vector<std::vector<double>> rw(layers.size());
    std::vector<std::vector<double>> rb(layers.size());
    std::size_t max_width = net.input_width();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        mu_w[l].resize(layer.w.size());
        sd_w[l].resize(layer.w.size());
        for (std::size_t i = 0; i < layer.w.size(); ++i) {
            mu_w[l][i] = layer.w[i].mu;
            sd_w[l][i] = layer.w[i].sigma();
        }
        mu_b[l].resize(layer.b.size());
        sd_b[l].resize(layer.b.size());
        for (std::size_t i = 0; i < layer.b.size(); ++i) {
            mu_b[l][i] = layer.b[i].mu;
            sd_b[l][i] = layer.b[i].sigma();
        }
        rw[l].resize(layer.w.size());
        rb[l].resize(layer.b.size());
        max_width = std::max(max_width, layer.out);
    }
    std::vector<double> a(max_width), next(max_width);

    for (std::size_t r = 0; r < rows.rows; ++r) {
        auto x = rows.row(r);
        for (std::size_t k = 0; k < n_f; ++k) {
            Rng rng = Rng::substream(seed, kKeyEnsemble, r, k);
            for (std::size_t l = 0; l < layers.size(); ++l) {
                for (std::size_t i = 0; i < rw[l].size(); ++i) {
                    rw[l][i] = mu_w[l][i] + sd_w[l][i] * rng.gaussian();
                }
                for (std::size_t i = 0; i < rb[l].size(); ++i) {
                    rb[l][i] = mu_b[l][i] + sd_b[l][i] * rng.gaussian();
                }
            }
            std::copy(x.begin(), x.end(), a.begin());
            for (std::size_t l = 0; l < layers.size(); ++l) {
                const auto& layer = layers[l];
                for (std::size_t o = 0; o < layer.out; ++o) {
                    double acc = rb[l][o];
                    const double* wrow = rw[l].data() + o * layer.in;
                    for (std::size_t i = 0; i < layer.in; ++i) {
                        acc += wrow[i] * a[i];
                    }
                    next[o] = apply_activation(layer.act, acc);
                }
                std::swap(a, next);
            }
            std::size_t base = (r * n_f + k) * set.channels;
            if (net.head() == HeadKind::Aleatoric) {
                for (std::size_t c = 0; c < set.channels; ++c) {
                    set.mu[base + c] = a[2 * c];
                    set.sigma[base + c] =
                        std::max(softplus(a[2 * c + 1]), kHeadSigmaFloor);
                }
            } else {
                for (std::size_t c = 0; c < set.channels; ++c) {
                    set.mu[base + c] = a[c];
                    set.sigma[base + c] = net.sigma_fixed();
                }
            }
        }
    }
    return set;
}

// Serialization -----------------------------------------------------------------

std::string BnnNet::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "bnn";
    j["head"] = head_ == HeadKind::Aleatoric ? "aleatoric" : "epistemic";
    j["channels"] = channels_;
    j["sigma_fixed"] = sigma_fixed_;
    j["sampling_mode"] =
        mode_ == SamplingMode::Flipout ? "flipout" : "shared_eps";
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : layers_) {
        nlohmann::json lj;
        lj["in"] = layer.in;
        lj["out"] = layer.out;
        lj["activation"] =
            layer.act == Activation::ReLU ? "relu" : "identity";
        lj["prior_std"] = layer.prior.std;
        auto pack = [](const std::vector<GaussianPosterior>& qs, bool mu) {
            std::vector<double> v;
            v.reserve(qs.size());
            for (const auto& q : qs) v.push_back(mu ? q.mu : q.rho);
            return v;
        };
        lj["w_mu"] = pack(layer.w, true);
        lj["w_rho"] = pack(layer.w, false);
        lj["b_mu"] = pack(layer.b, true);
        lj["b_rho"] = pack(layer.b, false);
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j.dump(2);
}

BnnNet BnnNet::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw IoError(std::string("bad model json: ") + e.what());
    }
    if (j.value("schema_version", 0) != 1 || j.value("kind", "") != "bnn") {
        throw ValidationError("unsupported bnn model schema");
    }
    BnnNet net;
    std::string head = j.at("head").get<std::string>();
    net.head_ = head == "aleatoric" ? HeadKind::Aleatoric : HeadKind::Epistemic;
    net.channels_ = j.at("channels").get<std::size_t>();
    net.sigma_fixed_ = j.at("sigma_fixed").get<double>();
    net.mode_ = j.at("sampling_mode").get<std::string>() == "flipout"
                    ? SamplingMode::Flipout
                    : SamplingMode::SharedEps;
    std::size_t expected_in = 0;
    for (const auto& lj : j.at("layers")) {
        VariationalLayer layer;
        layer.in = lj.at("in").get<std::size_t>();
        layer.out = lj.at("out").get<std::size_t>();
        layer.act = lj.at("activation").get<std::string>() == "relu"
                        ? Activation::ReLU
                        : Activation::Identity;
        layer.prior = {0.0, lj.at("prior_std").get<double>()};
        auto w_mu = lj.at("w_mu").get<std::vector<double>>();
        auto w_rho = lj.at("w_rho").get<std::vector<double>>();
        auto b_mu = lj.at("b_mu").get<std::vector<double>>();
        auto b_rho = lj.at("b_rho").get<std::vector<double>>();
        if (w_mu.size() != layer.in * layer.out || w_rho.size() != w_mu.size() ||
            b_mu.size() != layer.out || b_rho.size() != layer.out) {
            throw ValidationError("bnn model layer size mismatch");
        }
        if (expected_in != 0 && layer.in != expected_in) {
            throw ValidationError("bnn model layer dims do not chain");
        }
        expected_in = layer.out;
        layer.w.resize(w_mu.size());
        for (std::size_t i = 0; i < w_mu.size(); ++i) {
            layer.w[i] = {w_mu[i], w_rho[i]};
        }
        layer.b.resize(b_mu.size());
        for (std::size_t i = 0; i < b_mu.size(); ++i) {
            layer.b[i] = {b_mu[i], b_rho[i]};
        }
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

void BnnNet::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path);
    out << to_json() << "\n";
}

BnnNet BnnNet::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return from_json(text);
}

// Defaults --------------------------------------------------------------------

TrainConfig bnn_default_config(int input_config_id) {
    double lr;
    if (input_config_id >= 1 && input_config_id <= 5) {
        lr = 3e-4;
    } else if (input_config_id == 6) {
        lr = 3.5e-4;
    } else if (input_config_id >= 7 && input_config_id <= 10) {
        lr = 2e-4;
    } else if (input_config_id >= 11 && input_config_id <= 12) {
        lr = 3e-4;
    } else {
        throw ValidationError("input configuration id must be 1..12");
    }
    TrainConfig cfg;
    cfg.optimizer = {OptimizerKind::Adam, lr};
    cfg.batch_size = 1024;
    cfg.max_epochs = 2000;
    cfg.early_stop = {Monitor::TrainingLoss, 30, 1e-4};
    return cfg;
}

std::vector<std::size_t> bnn_default_hidden(int input_config_id) {
    if (input_config_id >= 1 && input_config_id <= 6) return {31, 64, 32};
    if (input_config_id >= 7 && input_config_id <= 12) return {32, 64, 32};
    throw ValidationError("input configuration id must be 1..12");
}

}  // namespace fleetwise
