#pragma once

// Loss values written out directly from their definitions with plain loops, used
// to cross-check the library's vectorised code and as finite-difference targets.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "dynae/cluster.hpp"
#include "support.hpp"

namespace oracle {

using dynae::Matrix;

inline Matrix mix_latent(const Matrix& z, const dynae::AcaiSample& s) {
    Matrix out(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t k = 0; k < z.cols(); ++k) out(i, k) = s.alpha[i] * z(i, k) + (1 - s.alpha[i]) * z(s.partner[i], k);
    return out;
}

// ||x - g(f(x))||^2 + lambda c(x_alpha)^2, batch mean.
inline double acai_autoencoder(const dynae::AutoencoderModel& m, const dynae::CriticModel& c, const Matrix& x,
                               const Matrix& target, const dynae::AcaiSample& s, double lambda) {
    const Matrix z = testing::naive_forward(m.encoder, x);
    const Matrix xhat = testing::naive_forward(m.decoder, z);
    const Matrix crit = testing::naive_forward(c.net, testing::naive_forward(m.decoder, mix_latent(z, s)));
    double rec = 0.0, reg = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t k = 0; k < x.cols(); ++k)
            rec += (target(i, k) - xhat(i, k)) * (target(i, k) - xhat(i, k));
        reg += crit(i, 0) * crit(i, 0);
    }
    return (rec + lambda * reg) / static_cast<double>(x.rows());
}

inline double acai_autoencoder(const dynae::AutoencoderModel& m, const dynae::CriticModel& c, const Matrix& x,
                               const dynae::AcaiSample& s, double lambda) {
    return acai_autoencoder(m, c, x, x, s, lambda);
}

// (c(x_alpha) - alpha)^2 + c(gamma x + (1 - gamma) x_hat)^2, batch mean.
inline double acai_critic(const dynae::AutoencoderModel& m, const dynae::CriticModel& c, const Matrix& x,
                          const Matrix& target, const dynae::AcaiSample& s) {
    const Matrix z = testing::naive_forward(m.encoder, x);
    const Matrix xhat = testing::naive_forward(m.decoder, z);
    const Matrix ca = testing::naive_forward(c.net, testing::naive_forward(m.decoder, mix_latent(z, s)));
    Matrix blend(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t k = 0; k < x.cols(); ++k) blend(i, k) = s.gamma[i] * target(i, k) + (1 - s.gamma[i]) * xhat(i, k);
    const Matrix cr = testing::naive_forward(c.net, blend);
    double v = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) v += (ca(i, 0) - s.alpha[i]) * (ca(i, 0) - s.alpha[i]) + cr(i, 0) * cr(i, 0);
    return v / static_cast<double>(x.rows());
}

inline double acai_critic(const dynae::AutoencoderModel& m, const dynae::CriticModel& c, const Matrix& x,
                          const dynae::AcaiSample& s) {
    return acai_critic(m, c, x, x, s);
}

struct DynamicTerms {
    double l1 = 0.0;
    double l2 = 0.0;
};

// Conflicted rows reconstruct their clean image; reliable rows construct the image
// of their centroid and are pulled to the centroid in the embedding. Batch means.
inline DynamicTerms dynamic_terms(const dynae::AutoencoderModel& m, std::span<const std::size_t> idx,
                                  const Matrix& x_clean, const Matrix& x_in, const dynae::ClusterState& s) {
    const Matrix z = testing::naive_forward(m.encoder, x_in);
    const Matrix xhat = testing::naive_forward(m.decoder, z);
    DynamicTerms t;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::size_t n = idx[i];
        if (s.conflicted[n]) {
            for (std::size_t k = 0; k < x_clean.cols(); ++k)
                t.l1 += (xhat(i, k) - x_clean(i, k)) * (xhat(i, k) - x_clean(i, k));
        } else {
            const auto c = static_cast<std::size_t>(s.assignments[n]);
            for (std::size_t k = 0; k < x_clean.cols(); ++k)
                t.l1 += (xhat(i, k) - s.centroid_images(c, k)) * (xhat(i, k) - s.centroid_images(c, k));
            for (std::size_t k = 0; k < z.cols(); ++k) t.l2 += (z(i, k) - s.centroids(c, k)) * (z(i, k) - s.centroids(c, k));
        }
    }
    t.l1 /= static_cast<double>(idx.size());
    t.l2 /= static_cast<double>(idx.size());
    return t;
}

inline double dynamic_total(const dynae::AutoencoderModel& m, std::span<const std::size_t> idx, const Matrix& x_clean,
                            const Matrix& x_in, const dynae::ClusterState& s, std::optional<double> gamma) {
    const auto t = dynamic_terms(m, idx, x_clean, x_in, s);
    return t.l1 + gamma.value_or(1.0) * t.l2;
}

inline double min_assignment_cost(const Matrix& c) {
    std::vector<std::size_t> p(c.rows());
    std::iota(p.begin(), p.end(), 0);
    double best = INFINITY;
    do {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += c(i, p[i]);
        best = std::min(best, s);
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

// Best accuracy over every injective cluster -> class map.
inline double best_map_accuracy(const std::vector<int>& y, const std::vector<int>& pred) {
    const int n = std::max(*std::max_element(y.begin(), y.end()), *std::max_element(pred.begin(), pred.end())) + 1;
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    do {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < y.size(); ++i) hit += perm[static_cast<std::size_t>(pred[i])] == y[i];
        best = std::max(best, hit);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(y.size());
}

// I / ((H_a + H_b) / 2) from the contingency table, natural logs; 0 for a constant partition.
inline double contingency_nmi(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
    }
    const double n = static_cast<double>(a.size());
    double mi = 0.0, ha = 0.0, hb = 0.0;
    for (auto& [k, c] : joint) mi += c / n * std::log(c * n / (pa[k.first] * pb[k.second]));
    for (auto& [k, c] : pa) ha -= c / n * std::log(c / n);
    for (auto& [k, c] : pb) hb -= c / n * std::log(c / n);
    if (pa.size() < 2 || pb.size() < 2) return 0.0;
    return mi / ((ha + hb) / 2.0);
}

}  // namespace oracle
