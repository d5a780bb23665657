#pragma once

#include <span>
#include <string>
#include <vector>

#include "dynae/matrix.hpp"

namespace dynae {

struct Assignment {
    std::vector<std::size_t> col_of_row;  // permutation: row i -> column col_of_row[i]
    double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix. Among optimal matchings
/// the lexicographically smallest permutation is returned.
Assignment hungarian(const Matrix& cost);

/// Contingency counts, rows = predicted cluster, cols = true class, padded square
/// to max(clusters, classes).
Matrix contingency(std::span<const int> y_true, std::span<const int> y_pred);

/// Best one-to-one cluster-to-class mapping accuracy.
double acc(std::span<const int> y_true, std::span<const int> y_pred);

/// Cluster -> class map of the accuracy-optimal matching (size = padded dimension).
std::vector<int> best_mapping(std::span<const int> y_true, std::span<const int> y_pred);

/// I(true; pred) / ((H(true) + H(pred)) / 2), natural logs. 0 when either partition is constant.
double nmi(std::span<const int> y_true, std::span<const int> y_pred);

struct GradientSnapshot {
    std::vector<double> values;
    std::string tag;
};

/// Cosine of the angle between two gradient vectors; UnavailableError on a zero vector.
double grad_cosine(const GradientSnapshot& a, const GradientSnapshot& b);
double grad_cosine(std::span<const double> a, std::span<const double> b);

/// Projection onto the two leading principal axes of the row cloud. Each axis is
/// oriented so its largest-magnitude component is positive.
Matrix pca2d(const Matrix& Z);

}  // namespace dynae
