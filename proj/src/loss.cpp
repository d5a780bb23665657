#include "dynae/loss.hpp"

#include <algorithm>
#include <cmath>

#include "dynae/errors.hpp"

namespace dynae {

LossValue mse_loss(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols())
        throw DimensionError("mse_loss: prediction and target shapes differ");
    LossValue out{0.0, Matrix(pred.rows(), pred.cols())};
    if (pred.rows() == 0) return out;
    const double scale = 1.0 / static_cast<double>(pred.rows());
    auto p = pred.values();
    auto t = target.values();
    auto g = out.grad.values();
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        sum += d * d;
        g[i] = 2.0 * scale * d;
    }
    out.value = sum * scale;
    return out;
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& loss_fn,
                                         std::span<const double> params, double step) {
    if (!(step > 0.0)) throw ArgumentError("finite_diff_gradient: step must be positive");
    std::vector<double> p(params.begin(), params.end());
    std::vector<double> grad(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + step;
        const double up = loss_fn(p);
        p[i] = saved - step;
        const double down = loss_fn(p);
        p[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw NumericError("finite_diff_gradient: loss is not finite");
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

double relative_error(double a, double b, double floor) noexcept {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dynae
