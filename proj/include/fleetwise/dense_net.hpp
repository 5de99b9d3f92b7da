#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fleetwise/rng.hpp"

namespace fleetwise {

enum class Activation { ReLU, Identity };

double apply_activation(Activation act, double z);
/// Derivative wrt the pre-activation; the ReLU subgradient at 0 is 0.
double activation_grad(Activation act, double z);

/// One fully connected layer, weights row-major (out x in).
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out * in
    std::vector<double> b;  // out
    Activation act = Activation::ReLU;
};

/// Per-row activations recorded during a forward pass, for backprop.
struct ForwardCache {
    std::vector<std::vector<double>> inputs;  // activation entering layer l
    std::vector<std::vector<double>> pre;     // pre-activation of layer l
    std::vector<double> output;
};

/// Gradient with the same layout as the network parameters.
struct LayerGrads {
    std::vector<double> w;
    std::vector<double> b;
};
using NetGrads = std::vector<LayerGrads>;

/// Deterministic feed-forward network with point-estimate parameters.
class DenseNet {
public:
    DenseNet() = default;

    /// Fan-in scaled uniform weights, zero biases. Hidden layers get ReLU,
    /// the output layer is linear.
    static DenseNet make(std::size_t input_width,
                         const std::vector<std::size_t>& hidden,
                         std::size_t output_width, Rng& rng);

    std::size_t input_width() const;
    std::size_t output_width() const;
    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    std::vector<double> forward(std::span<const double> x) const;
    std::vector<double> forward_cached(std::span<const double> x,
                                       ForwardCache& cache) const;

    /// Backpropagate dL/d(output) through the cached pass; accumulates into
    /// grads and returns dL/d(input).
    std::vector<double> backward(const ForwardCache& cache,
                                 std::span<const double> dloss_dout,
                                 NetGrads& grads) const;

    NetGrads zero_grads() const;

    std::size_t parameter_count() const;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    static std::vector<double> flatten(const NetGrads& grads);

    std::string to_json() const;
    static DenseNet from_json(const std::string& text);
    void save(const std::string& path) const;
    static DenseNet load(const std::string& path);

private:
    std::vector<DenseLayer> layers_;
};

/// Default topology from the experimental campaign.
inline std::vector<std::size_t> dnn_default_hidden() { return {64, 128, 64}; }

}  // namespace fleetwise
