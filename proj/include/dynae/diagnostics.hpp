#pragma once

#include <span>
#include <vector>

#include "dynae/cluster.hpp"
#include "dynae/metrics.hpp"

namespace dynae {

/// Gradient of the dynamic objective on a batch, flattened encoder-then-decoder.
GradientSnapshot loss_gradient(const AutoencoderModel& model, const Matrix& x_in, const RowTargets& targets,
                               const char* tag);

/// Feature-randomness score: cosine between the gradient under the current pseudo
/// targets and the gradient under supervised proxy targets. The proxy replaces the
/// assigned centroid of each reliable row by the centroid matched to its true class
/// (`cluster_of_class[y]`, -1 when the class has no cluster); conflicted rows keep
/// their reconstruction target in both.
double delta_fr(const AutoencoderModel& model, std::span<const std::size_t> indices, const Matrix& x_clean,
                std::span<const int> labels, std::span<const int> cluster_of_class, const ClusterState& state);

/// Feature-drift score: cosine between the gradient of the pseudo-supervised part
/// (construction plus embedded clustering on reliable rows) and the gradient of the
/// self-supervised part (reconstruction of conflicted rows).
double delta_fd(const AutoencoderModel& model, std::span<const std::size_t> indices, const Matrix& x_clean,
                const ClusterState& state);

/// class -> cluster inverse of the accuracy-optimal matching.
std::vector<int> cluster_of_class(std::span<const int> y_true, std::span<const int> y_pred, std::size_t K);

}  // namespace dynae
