#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dynae/matrix.hpp"
#include "dynae/rng.hpp"

namespace dynae {

enum class Activation { relu, linear };

struct DenseLayer {
    Matrix weights;             // in x out
    std::vector<double> bias;   // out
    Activation activation = Activation::linear;

    std::size_t in() const noexcept { return weights.rows(); }
    std::size_t out() const noexcept { return weights.cols(); }
};

/// Fully connected network. `version` changes on every parameter mutation so
/// forward caches can be checked for staleness.
struct Mlp {
    std::vector<DenseLayer> layers;
    std::uint64_t version = 0;

    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;
    /// Layer widths, e.g. {784, 500, 500, 2000, 10}.
    std::vector<std::size_t> widths() const;
};

/// Builds a network over `widths` with one activation per layer. ReLU layers use
/// He-uniform weights, linear layers Glorot-uniform; biases start at zero.
Mlp make_mlp(std::span<const std::size_t> widths, std::span<const Activation> activations, Rng& rng);

struct LayerGrad {
    Matrix weights;
    std::vector<double> bias;
};

using MlpGrads = std::vector<LayerGrad>;

/// Zero gradients shaped like `net`.
MlpGrads zero_grads(const Mlp& net);
/// a += b
void accumulate(MlpGrads& a, const MlpGrads& b);

struct ForwardCache {
    std::uint64_t version = 0;
    const Mlp* net = nullptr;
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> pre;     // pre-activation of each layer
    Matrix output;
};

ForwardCache mlp_forward(const Mlp& net, const Matrix& x);
/// Output only, no cache retained.
Matrix mlp_predict(const Mlp& net, const Matrix& x);

struct BackwardResult {
    MlpGrads grads;
    Matrix grad_input;
};

struct BackwardOptions {
    bool param_grads = true;  // when false, grads are returned as zeros
    bool input_grad = true;   // when false, grad_input is left empty
};

BackwardResult mlp_backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_output,
                            BackwardOptions opts = {});

/// Parameters flattened layer by layer: weights row-major, then bias.
std::vector<double> flatten_params(const Mlp& net);
void assign_params(Mlp& net, std::span<const double> flat);
std::vector<double> flatten_grads(const MlpGrads& grads);

}  // namespace dynae
