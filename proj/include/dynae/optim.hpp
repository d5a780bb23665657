#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "dynae/mlp.hpp"

namespace dynae {

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerHyper {
    double lr = 1e-3;
    double momentum = 0.9;  // sgd_momentum only
    double beta1 = 0.9;     // adam moment decay rates
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    OptimizerKind kind = OptimizerKind::adam;
    OptimizerHyper hyper;
    std::uint64_t step = 0;
    MlpGrads first;   // momentum buffer, or Adam m
    MlpGrads second;  // Adam v (empty for SGD)
};

OptimizerState make_optimizer(const Mlp& net, OptimizerKind kind, OptimizerHyper hyper);

/// SGD-momentum: v <- mu v - lr g, p <- p + v.
/// Adam: bias-corrected first/second moments, p <- p - lr m_hat / (sqrt(v_hat) + eps).
void optimizer_step(Mlp& net, const MlpGrads& grads, OptimizerState& state);

std::string_view to_string(OptimizerKind k);

}  // namespace dynae
