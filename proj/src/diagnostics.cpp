#include "dynae/diagnostics.hpp"

#include "dynae/errors.hpp"

namespace dynae {

GradientSnapshot loss_gradient(const AutoencoderModel& model, const Matrix& x_in, const RowTargets& targets,
                               const char* tag) {
    const auto loss = pseudo_loss(model, x_in, targets, std::nullopt);
    return {flatten_grads(loss.grads), tag};
}

double delta_fr(const AutoencoderModel& model, std::span<const std::size_t> indices, const Matrix& x_clean,
                std::span<const int> labels, std::span<const int> cluster_of_class, const ClusterState& state) {
    if (labels.size() != indices.size()) throw DimensionError("delta_fr: one label per batch row is required");
    const RowTargets pseudo = dynamic_targets(indices, x_clean, state);
    RowTargets proxy = pseudo;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (!pseudo.construct[i]) continue;
        const int y = labels[i];
        const int k = (y >= 0 && static_cast<std::size_t>(y) < cluster_of_class.size()) ? cluster_of_class[y] : -1;
        if (k < 0 || static_cast<std::size_t>(k) >= state.K()) {
            // Class without a cluster: the proxy falls back to plain reconstruction.
            auto src = x_clean.row(i);
            std::copy(src.begin(), src.end(), proxy.image_target.row(i).begin());
            proxy.l2_rows[i] = false;
            proxy.construct[i] = false;
            continue;
        }
        const auto kk = static_cast<std::size_t>(k);
        auto img = state.centroid_images.row(kk);
        std::copy(img.begin(), img.end(), proxy.image_target.row(i).begin());
        auto mu = state.centroids.row(kk);
        std::copy(mu.begin(), mu.end(), proxy.latent_target.row(i).begin());
    }
    const auto g_pseudo = loss_gradient(model, x_clean, pseudo, "pseudo");
    const auto g_proxy = loss_gradient(model, x_clean, proxy, "supervised");
    return grad_cosine(g_proxy, g_pseudo);
}

double delta_fd(const AutoencoderModel& model, std::span<const std::size_t> indices, const Matrix& x_clean,
                const ClusterState& state) {
    const RowTargets all = dynamic_targets(indices, x_clean, state);
    RowTargets pseudo = all, self = all;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        pseudo.l1_rows[i] = all.construct[i];
        self.l1_rows[i] = !all.construct[i];
        self.l2_rows[i] = false;
    }
    const auto g_pseudo = loss_gradient(model, x_clean, pseudo, "pseudo_supervised");
    const auto g_self = loss_gradient(model, x_clean, self, "self_supervised");
    return grad_cosine(g_pseudo, g_self);
}

std::vector<int> cluster_of_class(std::span<const int> y_true, std::span<const int> y_pred, std::size_t K) {
    const auto map = best_mapping(y_true, y_pred);  // cluster -> class
    int classes = 0;
    for (int y : y_true) classes = std::max(classes, y + 1);
    std::vector<int> inverse(static_cast<std::size_t>(classes), -1);
    for (std::size_t k = 0; k < map.size() && k < K; ++k) {
        const int c = map[k];
        if (c >= 0 && c < classes) inverse[static_cast<std::size_t>(c)] = static_cast<int>(k);
    }
    return inverse;
}

}  // namespace dynae
