#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dynae/matrix.hpp"

namespace dynae {

struct LossValue {
    double value = 0.0;
    Matrix grad;  // d value / d pred
};

/// Mean over the batch of squared L2 row distances.
LossValue mse_loss(const Matrix& pred, const Matrix& target);

/// Central differences per coordinate.
std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& loss_fn,
                                         std::span<const double> params, double step);

/// |a-b| / max(|a|, |b|, floor), the per-coordinate comparison used by gradient checks.
double relative_error(double a, double b, double floor = 1e-6) noexcept;

}  // namespace dynae
