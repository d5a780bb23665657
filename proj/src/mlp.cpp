#include "dynae/mlp.hpp"

#include <cmath>
#include <string>

#include "dynae/errors.hpp"

namespace dynae {

std::size_t Mlp::input_size() const { return layers.empty() ? 0 : layers.front().in(); }
std::size_t Mlp::output_size() const { return layers.empty() ? 0 : layers.back().out(); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

std::vector<std::size_t> Mlp::widths() const {
    std::vector<std::size_t> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().in());
    for (const auto& l : layers) w.push_back(l.out());
    return w;
}

Mlp make_mlp(std::span<const std::size_t> widths, std::span<const Activation> activations, Rng& rng) {
    if (widths.size() < 2 || activations.size() != widths.size() - 1)
        throw ArgumentError("make_mlp: need n+1 widths for n activations");
    Mlp net;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        const std::size_t in = widths[i];
        const std::size_t out = widths[i + 1];
        DenseLayer layer{Matrix(in, out), std::vector<double>(out, 0.0), activations[i]};
        const double limit = activations[i] == Activation::relu
                                 ? std::sqrt(6.0 / static_cast<double>(in))
                                 : std::sqrt(6.0 / static_cast<double>(in + out));
        for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

MlpGrads zero_grads(const Mlp& net) {
    MlpGrads g;
    g.reserve(net.layers.size());
    for (const auto& l : net.layers)
        g.push_back({Matrix(l.in(), l.out()), std::vector<double>(l.out(), 0.0)});
    return g;
}

void accumulate(MlpGrads& a, const MlpGrads& b) {
    if (a.size() != b.size()) throw DimensionError("accumulate: layer count mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto aw = a[i].weights.values();
        auto bw = b[i].weights.values();
        if (aw.size() != bw.size() || a[i].bias.size() != b[i].bias.size())
            throw DimensionError("accumulate: layer shape mismatch");
        for (std::size_t k = 0; k < aw.size(); ++k) aw[k] += bw[k];
        for (std::size_t k = 0; k < a[i].bias.size(); ++k) a[i].bias[k] += b[i].bias[k];
    }
}

namespace {

void affine_into(const DenseLayer& layer, const Matrix& x, Matrix& out) {
    out = Matrix(x.rows(), layer.out());
    gemm(Trans::no, Trans::no, 1.0, x, layer.weights, 0.0, out);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
    }
}

void relu_inplace(Matrix& m) {
    for (double& v : m.values())
        if (v < 0.0) v = 0.0;
}

void check_input(const Mlp& net, const Matrix& x) {
    if (net.layers.empty()) throw ArgumentError("mlp_forward: empty network");
    if (x.cols() != net.input_size())
        throw DimensionError("mlp_forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                             std::to_string(net.input_size()));
}

}  // namespace

ForwardCache mlp_forward(const Mlp& net, const Matrix& x) {
    check_input(net, x);
    ForwardCache cache;
    cache.version = net.version;
    cache.net = &net;
    cache.inputs.reserve(net.layers.size());
    cache.pre.reserve(net.layers.size());
    Matrix current = x;
    for (const auto& layer : net.layers) {
        Matrix z;
        affine_into(layer, current, z);
        cache.inputs.push_back(std::move(current));
        current = z;
        if (layer.activation == Activation::relu) relu_inplace(current);
        cache.pre.push_back(std::move(z));
    }
    cache.output = std::move(current);
    return cache;
}

Matrix mlp_predict(const Mlp& net, const Matrix& x) {
    check_input(net, x);
    Matrix current = x;
    Matrix next;
    for (const auto& layer : net.layers) {
        affine_into(layer, current, next);
        if (layer.activation == Activation::relu) relu_inplace(next);
        std::swap(current, next);
    }
    return current;
}

BackwardResult mlp_backward(const Mlp& net, const ForwardCache& cache, const Matrix& grad_output,
                            BackwardOptions opts) {
    if (cache.net != &net || cache.version != net.version || cache.inputs.size() != net.layers.size())
        throw ConsistencyError("mlp_backward: forward cache does not belong to the current network parameters");
    if (grad_output.rows() != cache.output.rows() || grad_output.cols() != cache.output.cols())
        throw DimensionError("mlp_backward: grad_output shape does not match the forward output");

    BackwardResult result;
    result.grads = zero_grads(net);
    Matrix delta = grad_output;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        if (layer.activation == Activation::relu) {
            auto d = delta.values();
            auto z = cache.pre[li].values();
            for (std::size_t k = 0; k < d.size(); ++k)
                if (z[k] <= 0.0) d[k] = 0.0;
        }
        if (opts.param_grads) {
            gemm(Trans::yes, Trans::no, 1.0, cache.inputs[li], delta, 0.0, result.grads[li].weights);
            auto& db = result.grads[li].bias;
            for (std::size_t r = 0; r < delta.rows(); ++r) {
                auto row = delta.row(r);
                for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
            }
        }
        if (li > 0 || opts.input_grad) {
            Matrix prev(delta.rows(), layer.in());
            gemm(Trans::no, Trans::yes, 1.0, delta, layer.weights, 0.0, prev);
            delta = std::move(prev);
        }
    }
    if (opts.input_grad) result.grad_input = std::move(delta);
    return result;
}

std::vector<double> flatten_params(const Mlp& net) {
    std::vector<double> flat;
    flat.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        auto w = l.weights.values();
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
}

void assign_params(Mlp& net, std::span<const double> flat) {
    if (flat.size() != net.parameter_count()) throw DimensionError("assign_params: wrong parameter count");
    std::size_t k = 0;
    for (auto& l : net.layers) {
        for (double& w : l.weights.values()) w = flat[k++];
        for (double& b : l.bias) b = flat[k++];
    }
    ++net.version;
}

std::vector<double> flatten_grads(const MlpGrads& grads) {
    std::vector<double> flat;
    for (const auto& g : grads) {
        auto w = g.weights.values();
        flat.insert(flat.end(), w.begin(), w.end());
        flat.insert(flat.end(), g.bias.begin(), g.bias.end());
    }
    return flat;
}

}  // namespace dynae
