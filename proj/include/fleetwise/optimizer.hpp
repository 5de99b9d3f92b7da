#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fleetwise/errors.hpp"

namespace fleetwise {

enum class OptimizerKind { Adam, Adamax };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First-order moment optimizer covering both the Adam and Adamax update
/// rules. State is sized lazily on the first step.
class AdamOptimizer {
public:
    explicit AdamOptimizer(const OptimizerConfig& cfg) : cfg_(cfg) {
        if (cfg.learning_rate <= 0.0) {
            throw ValidationError("learning rate must be positive");
        }
    }

    void step(std::span<double> params, std::span<const double> grads) {
        if (params.size() != grads.size()) {
            throw ValidationError("optimizer: parameter/gradient size mismatch");
        }
        if (m_.empty()) {
            m_.assign(params.size(), 0.0);
            v_.assign(params.size(), 0.0);
        }
        ++t_;
        double b1t = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        if (cfg_.kind == OptimizerKind::Adam) {
            double b2t = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
                v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
                double m_hat = m_[i] / b1t;
                double v_hat = v_[i] / b2t;
                params[i] -= cfg_.learning_rate * m_hat /
                             (std::sqrt(v_hat) + cfg_.epsilon);
            }
        } else {
            // Adamax: infinity-norm second moment, no bias correction on u.
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
                v_[i] = std::max(cfg_.beta2 * v_[i], std::abs(grads[i]));
                params[i] -= (cfg_.learning_rate / b1t) * m_[i] /
                             (v_[i] + cfg_.epsilon);
            }
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t t_ = 0;
};

}  // namespace fleetwise
