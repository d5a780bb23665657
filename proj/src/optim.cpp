#include "dynae/optim.hpp"

#include <cmath>
#include <string>

#include "dynae/errors.hpp"

namespace dynae {

OptimizerState make_optimizer(const Mlp& net, OptimizerKind kind, OptimizerHyper hyper) {
    OptimizerState s;
    s.kind = kind;
    s.hyper = hyper;
    s.first = zero_grads(net);
    if (kind == OptimizerKind::adam) s.second = zero_grads(net);
    return s;
}

namespace {

void check_shapes(const Mlp& net, const MlpGrads& g, const char* what) {
    if (g.size() != net.layers.size()) throw DimensionError(std::string("optimizer_step: ") + what + " layer count");
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i].weights.rows() != net.layers[i].in() || g[i].weights.cols() != net.layers[i].out() ||
            g[i].bias.size() != net.layers[i].out())
            throw DimensionError(std::string("optimizer_step: ") + what + " shape mismatch at layer " +
                                 std::to_string(i));
    }
}

template <typename Fn>
void for_each_param(Mlp& net, const MlpGrads& grads, OptimizerState& s, Fn&& fn) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto p = net.layers[i].weights.values();
        auto g = grads[i].weights.values();
        auto m = s.first[i].weights.values();
        auto v = s.second.empty() ? std::span<double>{} : s.second[i].weights.values();
        for (std::size_t k = 0; k < p.size(); ++k) fn(p[k], g[k], m[k], v.empty() ? m[k] : v[k]);
        auto& pb = net.layers[i].bias;
        const auto& gb = grads[i].bias;
        auto& mb = s.first[i].bias;
        auto* vb = s.second.empty() ? &mb : &s.second[i].bias;
        for (std::size_t k = 0; k < pb.size(); ++k) fn(pb[k], gb[k], mb[k], (*vb)[k]);
    }
}

}  // namespace

void optimizer_step(Mlp& net, const MlpGrads& grads, OptimizerState& s) {
    check_shapes(net, grads, "gradient");
    check_shapes(net, s.first, "state buffer");
    if (s.kind == OptimizerKind::adam) check_shapes(net, s.second, "state buffer");
    ++s.step;
    const auto& h = s.hyper;
    if (s.kind == OptimizerKind::sgd_momentum) {
        for_each_param(net, grads, s, [&](double& p, double g, double& vel, double&) {
            vel = h.momentum * vel - h.lr * g;
            p += vel;
        });
    } else {
        const double t = static_cast<double>(s.step);
        const double c1 = 1.0 - std::pow(h.beta1, t);
        const double c2 = 1.0 - std::pow(h.beta2, t);
        for_each_param(net, grads, s, [&](double& p, double g, double& m, double& v) {
            m = h.beta1 * m + (1.0 - h.beta1) * g;
            v = h.beta2 * v + (1.0 - h.beta2) * g * g;
            p -= h.lr * (m / c1) / (std::sqrt(v / c2) + h.epsilon);
        });
    }
    ++net.version;
}

std::string_view to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

}  // namespace dynae
