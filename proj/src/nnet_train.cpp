#include "fleetwise/nnet_train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fleetwise/errors.hpp"

namespace fleetwise {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_labeled(const DenseNet& net, const LabeledTable& data) {
    if (data.x.rows != data.y.rows) {
        throw ValidationError("inputs and labels disagree on row count");
    }
    if (data.x.cols != net.input_width() || data.y.cols != net.output_width()) {
        throw ValidationError("table width does not match the network");
    }
}

/// One batch of loss + gradient accumulation. Returns the batch loss.
double batch_pass(const DenseNet& net, const LabeledTable& data,
                  std::span<const std::size_t> rows, const std::string& loss,
                  NetGrads& grads) {
    const double denom =
        static_cast<double>(rows.size()) * static_cast<double>(data.y.cols);
    double total = 0.0;
    ForwardCache cache;
    std::vector<double> dout(data.y.cols);
    for (std::size_t r : rows) {
        auto out = net.forward_cached(data.x.row(r), cache);
        auto label = data.y.row(r);
        for (std::size_t c = 0; c < out.size(); ++c) {
            double e = out[c] - label[c];
            if (loss == "mae") {
                total += std::abs(e);
                dout[c] = sign(e) / denom;
            } else if (loss == "mse") {
                total += e * e;
                dout[c] = 2.0 * e / denom;
            } else {
                throw ValidationError("unknown loss '" + loss + "'");
            }
        }
        net.backward(cache, dout, grads);
    }
    return total / denom;
}

double eval_loss(const DenseNet& net, const LabeledTable& data,
                 const std::string& loss) {
    double total = 0.0;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        auto out = net.forward(data.x.row(r));
        auto label = data.y.row(r);
        for (std::size_t c = 0; c < out.size(); ++c) {
            double e = out[c] - label[c];
            total += loss == "mae" ? std::abs(e) : e * e;
        }
    }
    return total / (static_cast<double>(data.rows()) *
                    static_cast<double>(data.y.cols));
}

}  // namespace

double mae_loss(const DenseNet& net, const LabeledTable& data) {
    check_labeled(net, data);
    if (data.rows() == 0) throw ValidationError("mae_loss: empty table");
    return eval_loss(net, data, "mae");
}

double mlp_loss_and_grad(const DenseNet& net, const LabeledTable& batch,
                         const std::string& loss, std::vector<double>& grad) {
    check_labeled(net, batch);
    if (batch.rows() == 0) throw ValidationError("empty batch");
    NetGrads grads = net.zero_grads();
    std::vector<std::size_t> rows(batch.rows());
    std::iota(rows.begin(), rows.end(), 0);
    double value = batch_pass(net, batch, rows, loss, grads);
    grad = DenseNet::flatten(grads);
    return value;
}

DnnTrainResult mlp_train(const DenseNet& net, const LabeledTable& train,
                         const LabeledTable* validation,
                         const TrainConfig& cfg) {
    cfg.validate();
    check_labeled(net, train);
    if (train.rows() == 0) throw ValidationError("mlp_train: empty training set");

    // 80/20 internal split when validation is monitored but not provided.
    LabeledTable internal_val;
    const LabeledTable* val = validation;
    LabeledTable train_part;
    const LabeledTable* eff_train = &train;
    if (val == nullptr && cfg.early_stop.monitor == Monitor::ValidationLoss) {
        std::vector<std::size_t> order(train.rows());
        std::iota(order.begin(), order.end(), 0);
        Rng rng = Rng::substream(cfg.seed, 0x7a11u, train.rows());
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.below(i);
            std::swap(order[i - 1], order[j]);
        }
        std::size_t n_train = static_cast<std::size_t>(
            std::floor(0.8 * static_cast<double>(train.rows())));
        if (n_train == 0 || n_train == train.rows()) {
            throw ValidationError("training set too small for an 80/20 split");
        }
        auto take = [&](std::size_t begin, std::size_t end) {
            LabeledTable part;
            part.x.cols = train.x.cols;
            part.y.cols = train.y.cols;
            for (std::size_t i = begin; i < end; ++i) {
                auto xr = train.x.row(order[i]);
                auto yr = train.y.row(order[i]);
                part.x.v.insert(part.x.v.end(), xr.begin(), xr.end());
                part.y.v.insert(part.y.v.end(), yr.begin(), yr.end());
            }
            part.x.rows = end - begin;
            part.y.rows = end - begin;
            return part;
        };
        train_part = take(0, n_train);
        internal_val = take(n_train, train.rows());
        eff_train = &train_part;
        val = &internal_val;
    }
    if (cfg.early_stop.monitor == Monitor::ValidationLoss &&
        (val == nullptr || val->rows() == 0)) {
        throw ValidationError("validation monitor needs a nonempty validation set");
    }

    DnnTrainResult result{net, {}};
    if (cfg.max_epochs == 0) return result;

    AdamOptimizer optimizer(cfg.optimizer);
    std::vector<double> params = result.net.parameters();
    std::vector<double> best_params = params;
    double best_monitor = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<std::size_t> order(eff_train->rows());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng rng = Rng::substream(cfg.seed, 0x5f77u, epoch);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.below(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            std::span<const std::size_t> rows(order.data() + start, end - start);
            NetGrads grads = result.net.zero_grads();
            double batch_loss = batch_pass(result.net, *eff_train, rows, "mae", grads);
            if (!std::isfinite(batch_loss)) {
                throw NumericalError("training aborted: non-finite loss at epoch " +
                                     std::to_string(epoch));
            }
            auto flat = DenseNet::flatten(grads);
            optimizer.step(params, flat);
            result.net.set_parameters(params);
            epoch_loss += batch_loss;
            ++n_batches;
        }
        epoch_loss /= static_cast<double>(n_batches);

        EpochRecord record;
        record.training_loss = epoch_loss;
        if (val != nullptr && val->rows() > 0) {
            record.validation_loss = eval_loss(result.net, *val, "mae");
        }
        result.history.epochs.push_back(record);
        result.history.stopped_epoch = epoch;

        double monitored = cfg.early_stop.monitor == Monitor::ValidationLoss
                               ? *record.validation_loss
                               : record.training_loss;
        if (monitored < best_monitor - cfg.early_stop.min_delta) {
            best_monitor = monitored;
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

double finite_diff_check(const DenseNet& net, const LabeledTable& batch,
                         double eps, const std::string& loss, double floor) {
    if (eps <= 0.0) throw ValidationError("finite_diff_check: eps must be > 0");
    std::vector<double> analytic;
    DenseNet work = net;
    mlp_loss_and_grad(work, batch, loss, analytic);

    std::vector<double> params = work.parameters();
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params[i];
        params[i] = saved + eps;
        work.set_parameters(params);
        double up = eval_loss(work, batch, loss);
        params[i] = saved - eps;
        work.set_parameters(params);
        double down = eval_loss(work, batch, loss);
        params[i] = saved;
        double fd = (up - down) / (2.0 * eps);
        double err = std::abs(analytic[i] - fd) /
                     std::max(std::abs(analytic[i]), floor);
        worst = std::max(worst, err);
    }
    work.set_parameters(params);
    return worst;
}

}  // namespace fleetwise
