#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dynae/matrix.hpp"
#include "dynae/mlp.hpp"
#include "dynae/net.hpp"
#include "dynae/rng.hpp"

namespace testing {

inline dynae::Matrix random_matrix(std::size_t r, std::size_t c, dynae::Rng& rng, double lo = -1.0, double hi = 1.0) {
    dynae::Matrix m(r, c);
    for (double& v : m.values()) v = rng.uniform(lo, hi);
    return m;
}

// Plain triple loop, no BLAS.
inline dynae::Matrix naive_matmul(const dynae::Matrix& a, const dynae::Matrix& b) {
    dynae::Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

// Layer-by-layer affine map written out with loops.
inline dynae::Matrix naive_forward(const dynae::Mlp& net, const dynae::Matrix& x) {
    dynae::Matrix h = x;
    for (const auto& layer : net.layers) {
        dynae::Matrix out = naive_matmul(h, layer.weights);
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < out.cols(); ++j) {
                out(i, j) += layer.bias[j];
                if (layer.activation == dynae::Activation::relu && out(i, j) < 0.0) out(i, j) = 0.0;
            }
        h = out;
    }
    return h;
}

inline dynae::Mlp random_mlp(std::vector<std::size_t> widths, dynae::Rng& rng, bool relu_hidden = true) {
    std::vector<dynae::Activation> acts(widths.size() - 1,
                                        relu_hidden ? dynae::Activation::relu : dynae::Activation::linear);
    acts.back() = dynae::Activation::linear;
    auto net = dynae::make_mlp(widths, acts, rng);
    for (auto& l : net.layers)
        for (double& b : l.bias) b = rng.uniform(-0.3, 0.3);  // keep ReLU kinks away from zero biases
    return net;
}

inline dynae::AutoencoderModel tiny_autoencoder(std::size_t d, std::size_t p, std::size_t hidden, dynae::Rng& rng) {
    dynae::AutoencoderModel m{random_mlp({d, hidden, p}, rng), random_mlp({p, hidden, d}, rng)};
    return m;
}

// Largest per-coordinate relative error between two gradient vectors.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        dynae::Rng r(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
        path_ = std::filesystem::temp_directory_path() / ("dynae_" + tag + "_" + std::to_string(r.next_u64() % 1000000));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testing
