#pragma once

#include <string>

#include "fleetwise/dense_net.hpp"
#include "fleetwise/train.hpp"

namespace fleetwise {

/// Mean absolute error averaged over rows and output channels.
double mae_loss(const DenseNet& net, const LabeledTable& data);

/// Loss and flat analytic gradient over a batch ("mae" or "mse").
double mlp_loss_and_grad(const DenseNet& net, const LabeledTable& batch,
                         const std::string& loss, std::vector<double>& grad);

struct DnnTrainResult {
    DenseNet net;
    TrainHistory history;
};

/// Minibatch training with the MAE objective. Early stopping restores the
/// parameters of the best-monitored epoch. When no validation set is given
/// and the monitor is ValidationLoss, an internal 80/20 split is used.
DnnTrainResult mlp_train(const DenseNet& net, const LabeledTable& train,
                         const LabeledTable* validation, const TrainConfig& cfg);

/// Max over parameters of |analytic - central difference| relative error,
/// with the denominator floored to dodge division by ~0.
double finite_diff_check(const DenseNet& net, const LabeledTable& batch,
                         double eps, const std::string& loss,
                         double floor = 1e-6);

}  // namespace fleetwise
