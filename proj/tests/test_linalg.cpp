#include <doctest.h>

#include <cmath>

#include "dynae/errors.hpp"
#include "dynae/loss.hpp"
#include "dynae/matrix.hpp"
#include "dynae/mlp.hpp"
#include "dynae/optim.hpp"
#include "support.hpp"

using namespace dynae;

TEST_CASE("matmul small cases") {
    Matrix a{{1, 2}, {3, 4}};
    CHECK(matmul(Matrix::identity(2), a) == a);
    CHECK(matmul(Matrix{{1, 0}, {0, 0}}, Matrix{{5}, {7}}) == Matrix{{5}, {0}});
}

TEST_CASE("matmul agrees with a triple loop") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        auto a = testing::random_matrix(3, 4, rng);
        auto b = testing::random_matrix(4, 2, rng);
        auto c = matmul(a, b);
        auto ref = testing::naive_matmul(a, b);
        for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c.values()[i] - ref.values()[i]) < 1e-12);
        auto tn = matmul_tn(transpose(a), b);
        auto nt = matmul_nt(a, transpose(b));
        for (std::size_t i = 0; i < c.size(); ++i) {
            CHECK(std::abs(tn.values()[i] - ref.values()[i]) < 1e-12);
            CHECK(std::abs(nt.values()[i] - ref.values()[i]) < 1e-12);
        }
    }
}

TEST_CASE("matmul in single precision stays close") {
    Rng rng(12);
    auto a = testing::random_matrix(30, 40, rng);
    auto b = testing::random_matrix(40, 20, rng);
    auto ref = testing::naive_matmul(a, b);
    PrecisionScope scope(Precision::f32);
    auto c = matmul(a, b);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(std::abs(c.values()[i] - ref.values()[i]) < 1e-4);
}

TEST_CASE("matmul rejects bad shapes and non-finite input") {
    CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), DimensionError);
    Matrix a{{1, NAN}};
    CHECK_THROWS_AS(matmul(a, Matrix{{1}, {1}}), NumericError);
}

TEST_CASE("forward pass basics") {
    Rng rng(1);
    Mlp lin;
    lin.layers.push_back({Matrix::identity(2), {0, 0}, Activation::linear});
    Matrix x{{-1, 2}, {3, -4}};
    CHECK(mlp_forward(lin, x).output == x);

    Mlp relu = lin;
    relu.layers[0].activation = Activation::relu;
    CHECK(mlp_forward(relu, Matrix{{-1, 2}}).output == Matrix{{0, 2}});

    auto net = testing::random_mlp({3, 2, 1}, rng);
    auto xb = testing::random_matrix(5, 3, rng);
    auto out = mlp_forward(net, xb).output;
    auto ref = testing::naive_forward(net, xb);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out.values()[i] - ref.values()[i]) < 1e-12);
}

TEST_CASE("backward pass basics") {
    Rng rng(2);
    auto net = testing::random_mlp({3, 4, 2}, rng);
    auto x = testing::random_matrix(2, 3, rng);
    auto cache = mlp_forward(net, x);
    auto zero = mlp_backward(net, cache, Matrix(2, 2));
    for (const auto& g : zero.grads) {
        for (double v : g.weights.values()) CHECK(v == 0.0);
        for (double v : g.bias) CHECK(v == 0.0);
    }
    for (double v : zero.grad_input.values()) CHECK(v == 0.0);

    // scalar output of a 1-layer linear net: dW = x^T, db = 1
    Mlp lin;
    lin.layers.push_back({Matrix{{0.5}, {-2}, {3}}, {0.25}, Activation::linear});
    Matrix x1{{1.5, -0.5, 2.0}};
    auto r = mlp_backward(lin, mlp_forward(lin, x1), Matrix{{1.0}});
    CHECK(r.grads[0].weights == Matrix{{1.5}, {-0.5}, {2.0}});
    CHECK(r.grads[0].bias == std::vector<double>{1.0});
    CHECK(r.grad_input == Matrix{{0.5, -2, 3}});
}

TEST_CASE("backward pass matches finite differences") {
    Rng rng(3);
    auto net = testing::random_mlp({4, 8, 3, 8, 4}, rng);
    auto x = testing::random_matrix(6, 4, rng);
    auto target = testing::random_matrix(6, 4, rng);

    auto cache = mlp_forward(net, x);
    auto loss = mse_loss(cache.output, target);
    auto analytic = flatten_grads(mlp_backward(net, cache, loss.grad).grads);

    Mlp probe = net;
    auto numeric = finite_diff_gradient(
        [&](std::span<const double> p) {
            assign_params(probe, p);
            return mse_loss(mlp_predict(probe, x), target).value;
        },
        flatten_params(net), 1e-5);
    CHECK(testing::max_relative_error(analytic, numeric) < 1e-4);

    // input gradient too
    auto gin = mlp_backward(net, cache, loss.grad).grad_input;
    auto numeric_in = finite_diff_gradient(
        [&](std::span<const double> p) {
            Matrix xi(6, 4, std::vector<double>(p.begin(), p.end()));
            return mse_loss(mlp_predict(net, xi), target).value;
        },
        x.values(), 1e-5);
    CHECK(testing::max_relative_error({gin.values().begin(), gin.values().end()}, numeric_in) < 1e-4);
}

TEST_CASE("backward pass refuses a stale cache") {
    Rng rng(4);
    auto net = testing::random_mlp({2, 3, 1}, rng);
    auto cache = mlp_forward(net, Matrix{{1, 2}});
    ++net.version;
    CHECK_THROWS_AS(mlp_backward(net, cache, Matrix{{1}}), ConsistencyError);
}

TEST_CASE("mse loss") {
    Matrix p{{1, 2}, {3, 4}};
    auto same = mse_loss(p, p);
    CHECK(same.value == 0.0);
    for (double v : same.grad.values()) CHECK(v == 0.0);
    CHECK(mse_loss(Matrix{{1, 0}}, Matrix{{0, 0}}).value == 1.0);

    Rng rng(5);
    auto a = testing::random_matrix(3, 4, rng);
    auto b = testing::random_matrix(3, 4, rng);
    auto l = mse_loss(a, b);
    auto numeric = finite_diff_gradient(
        [&](std::span<const double> v) { return mse_loss(Matrix(3, 4, {v.begin(), v.end()}), b).value; }, a.values(),
        1e-5);
    CHECK(testing::max_relative_error({l.grad.values().begin(), l.grad.values().end()}, numeric) < 1e-6);
    CHECK_THROWS_AS(mse_loss(Matrix(2, 2), Matrix(2, 3)), DimensionError);
}

TEST_CASE("finite differences") {
    std::vector<double> p{3.0};
    auto g = finite_diff_gradient([](std::span<const double> v) { return v[0] * v[0]; }, p, 1e-5);
    CHECK(std::abs(g[0] - 6.0) < 1e-6);
    auto z = finite_diff_gradient([](std::span<const double>) { return 4.0; }, std::vector<double>{1, 2, 3}, 1e-5);
    for (double v : z) CHECK(v == 0.0);
    CHECK_THROWS_AS(finite_diff_gradient([](std::span<const double>) { return NAN; }, p, 1e-5), NumericError);
}

namespace {
Mlp scalar_net(double p) {
    Mlp n;
    n.layers.push_back({Matrix{{p}}, {0.0}, Activation::linear});
    return n;
}
MlpGrads scalar_grad(double g) { return {LayerGrad{Matrix{{g}}, {0.0}}}; }
}  // namespace

TEST_CASE("optimizer steps") {
    auto n = scalar_net(1.5);
    auto st = make_optimizer(n, OptimizerKind::sgd_momentum, {.lr = 0.1, .momentum = 0.9});
    optimizer_step(n, scalar_grad(0.0), st);
    CHECK(n.layers[0].weights(0, 0) == 1.5);

    auto s = scalar_net(0.0);
    auto sgd = make_optimizer(s, OptimizerKind::sgd_momentum, {.lr = 0.1, .momentum = 0.0});
    optimizer_step(s, scalar_grad(1.0), sgd);
    CHECK(s.layers[0].weights(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(sgd.step == 1);

    // momentum: v1 = -0.1, v2 = 0.9 v1 - 0.1
    auto m = scalar_net(0.0);
    auto mom = make_optimizer(m, OptimizerKind::sgd_momentum, {.lr = 0.1, .momentum = 0.9});
    optimizer_step(m, scalar_grad(1.0), mom);
    optimizer_step(m, scalar_grad(1.0), mom);
    CHECK(std::abs(m.layers[0].weights(0, 0) - (-0.1 - 0.19)) < 1e-15);

    // Adam first step by hand: m = 0.1, v = 0.001, mhat = 1, vhat = 1
    auto a = scalar_net(0.0);
    auto adam = make_optimizer(a, OptimizerKind::adam, {.lr = 1e-4});
    optimizer_step(a, scalar_grad(1.0), adam);
    const double mhat = (0.1 * 1.0) / (1 - 0.9), vhat = (0.001 * 1.0) / (1 - 0.999);
    CHECK(std::abs(a.layers[0].weights(0, 0) - (-1e-4 * mhat / (std::sqrt(vhat) + 1e-8))) < 1e-18);
    const auto v0 = a.version;
    optimizer_step(a, scalar_grad(1.0), adam);
    CHECK(adam.step == 2);
    CHECK(a.version > v0);
}
