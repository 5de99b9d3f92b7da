#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fleetwise/dataset.hpp"
#include "fleetwise/optimizer.hpp"

namespace fleetwise {

enum class Monitor { TrainingLoss, ValidationLoss };

struct EarlyStopConfig {
    Monitor monitor = Monitor::ValidationLoss;
    std::size_t patience = 5;
    double min_delta = 0.0;
};

struct TrainConfig {
    OptimizerConfig optimizer;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    EarlyStopConfig early_stop;
    std::uint64_t seed = 0;

    void validate() const {
        if (optimizer.learning_rate <= 0.0) {
            throw ValidationError("learning_rate must be > 0");
        }
        if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
        if (early_stop.patience < 1) throw ValidationError("patience must be >= 1");
    }
};

struct EpochRecord {
    double training_loss = 0.0;
    std::optional<double> validation_loss;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t stopped_epoch = 0;  // 1-based; 0 when no epoch ran
    std::size_t best_epoch = 0;     // epoch whose parameters were returned
};

/// Inputs x paired with labels y, row-aligned.
struct LabeledTable {
    Table x;
    Table y;

    std::size_t rows() const { return x.rows; }
};

/// Deterministic-network training defaults: Adamax at 0.001 on 32-sample
/// batches, 200 epochs, early stopping on validation loss with patience 5.
inline TrainConfig dnn_default_config() {
    TrainConfig cfg;
    cfg.optimizer = {OptimizerKind::Adamax, 1e-3};
    cfg.batch_size = 32;
    cfg.max_epochs = 200;
    cfg.early_stop = {Monitor::ValidationLoss, 5, 0.0};
    return cfg;
}

}  // namespace fleetwise
