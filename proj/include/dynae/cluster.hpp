#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynae/checkpoint.hpp"
#include "dynae/dataset.hpp"
#include "dynae/matrix.hpp"
#include "dynae/net.hpp"
#include "dynae/rng.hpp"

namespace dynae {

// ---------------------------------------------------------------------------
// K-Means in the embedded space

struct KMeansResult {
    Matrix centroids;         // K x p
    std::vector<int> labels;  // N
    double inertia = 0.0;
    std::size_t rounds = 0;
};

struct KMeansOptions {
    std::size_t max_rounds = 300;       // cold start
    std::size_t warm_max_rounds = 20;   // warm start
    std::size_t restarts = 1;           // cold k-means++ restarts, best inertia kept
};

/// Lloyd's algorithm to an assignment fixpoint. Cold starts use k-means++ seeding;
/// a warm start runs at most warm_max_rounds rounds from `warm_start`. An emptied
/// cluster takes the point farthest from its own centroid.
KMeansResult kmeans(const Matrix& Z, std::size_t K, Rng& rng, const std::optional<Matrix>& warm_start = {},
                    const KMeansOptions& opts = {});

/// Index of the nearest row of `centroids` (lowest index on ties).
std::size_t nearest_centroid(std::span<const double> z, const Matrix& centroids);

// ---------------------------------------------------------------------------
// Soft assignments and the conflicted set

/// Student's t kernel (1 + ||z - mu||^2 / dof)^(-(dof + 1) / 2), normalised per row.
Matrix soft_assign(const Matrix& Z, const Matrix& centroids, double kernel_dof);

struct TopTwo {
    double h1 = 0.0;  // largest value
    double h2 = 0.0;  // largest value strictly below h1, or h1 when all entries are equal
    std::size_t argmax = 0;  // lowest index attaining h1
};

TopTwo top_two(std::span<const double> row);

/// true = conflicted: h1 < beta1 or h1 - h2 < beta2. The complement is the reliable set.
std::vector<bool> conflict_mask(const Matrix& Q, double beta1, double beta2);

enum class KappaUpdate {
    subtract,  // kappa <- kappa - drop
    literal,   // kappa <- drop
};

/// Confidence bookkeeping. Templated so the escape arithmetic can be checked with
/// exact rationals.
template <typename T>
struct ThresholdState {
    T kappa;
    T beta1;
    T beta2;
    T last_drop;
};

/// beta1 = kappa / K, beta2 = beta1 / 2.
template <typename T>
ThresholdState<T> initial_thresholds(T kappa, std::size_t K) {
    const T beta1 = kappa / T(static_cast<long long>(K));
    return {kappa, beta1, beta1 / T(2), T(0)};
}

/// drop = factor * kappa; beta1 and beta2 each lose drop / K (floored at 0).
template <typename T>
ThresholdState<T> escape_thresholds(const ThresholdState<T>& s, T drop_factor, std::size_t K,
                                    KappaUpdate mode = KappaUpdate::subtract) {
    const T drop = drop_factor * s.kappa;
    const T step = drop / T(static_cast<long long>(K));
    ThresholdState<T> out;
    out.last_drop = drop;
    out.beta1 = std::max(T(0), s.beta1 - step);
    out.beta2 = std::max(T(0), s.beta2 - step);
    out.kappa = mode == KappaUpdate::subtract ? s.kappa - drop : drop;
    return out;
}

struct BetaPair {
    double beta1 = 0.0;
    double beta2 = 0.0;
};
BetaPair thresholds(double kappa, std::size_t K);

// ---------------------------------------------------------------------------
// Configuration and state

struct ClusterConfig {
    std::size_t K = 10;
    double tol = 0.01;
    std::size_t max_iter = 100000;
    double kappa_init_factor = 0.3;  // kappa = factor * K
    double kappa_drop_factor = 0.3;  // drop = factor * kappa
    KappaUpdate kappa_update = KappaUpdate::subtract;
    double kernel_dof = 1.0;
    double sgd_lr = 0.001;
    double momentum = 0.9;
    std::size_t batch_size = 256;
    std::optional<double> gamma;     // L1 + gamma L2 when set
    std::size_t conflict_eval_every = 100;
    std::size_t kmeans_restarts = 10;
    AugmentConfig augment{.enabled = true};
    std::size_t diagnostics_every = 1;  // evaluation windows between gradient diagnostics, 0 = off
    std::size_t diagnostic_batch = 256;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ClusterState {
    Matrix centroids;  // K x p
    double kernel_dof = 1.0;
    ThresholdState<double> thresholds{};
    std::vector<bool> conflicted;  // N
    std::vector<int> assignments;  // argmax of the soft assignments, N
    std::size_t conflicted_count = 0;
    double tau = 1.0;
    Matrix centroid_images;                    // K x d, copies of dataset rows
    std::vector<std::size_t> centroid_sources;  // dataset index behind each centroid image
    std::size_t prev_conflicted = 0;
    std::size_t escapes = 0;

    // Centroids change only through k-means. The mask and the centroid images are
    // tagged with the centroid version they were computed under.
    std::uint64_t centroid_version = 0;
    std::uint64_t mask_version = 0;
    std::uint64_t images_version = 0;

    double beta1() const { return thresholds.beta1; }
    double beta2() const { return thresholds.beta2; }
    double kappa() const { return thresholds.kappa; }
    std::size_t K() const { return centroids.rows(); }
};

struct CentroidImages {
    Matrix images;
    std::vector<std::size_t> sources;
};

/// Row k is the dataset image whose embedding is nearest to centroid k (lowest index on ties).
CentroidImages centroid_images(const Matrix& centroids, const Matrix& Z_all, const Matrix& X_all);

/// Recomputes soft assignments, hard assignments, the conflict mask and tau from
/// full-dataset embeddings. Returns the conflicted count.
std::size_t evaluate_assignments(ClusterState& state, const Matrix& Z_all);

/// K-Means init, thresholds from kappa, centroid images and a first evaluation.
ClusterState init_cluster_state(const Matrix& Z_all, const Matrix& X_all, const ClusterConfig& cfg, Rng& rng);

/// Warm-started K-Means refresh of the centroids plus a threshold drop, then fresh
/// centroid images. The mask is left stale until the next evaluation.
void escape_update(ClusterState& state, const Matrix& Z_all, const Matrix& X_all, const ClusterConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Losses

struct DynamicLoss {
    double total = 0.0;
    double l1 = 0.0;
    double l1_reconstruction = 0.0;  // conflicted rows
    double l1_construction = 0.0;    // reliable rows
    double l2 = 0.0;
    std::size_t conflicted = 0;
    AutoencoderGrads grads;
};

/// Per-row targets of the pseudo/self-supervised family of losses. For every row,
/// L1 compares the decoded output with image_target when l1_rows is set, and L2
/// compares the embedding with latent_target when l2_rows is set. Both are summed
/// over rows and divided by the batch size.
struct RowTargets {
    Matrix image_target;
    Matrix latent_target;
    std::vector<bool> l1_rows;
    std::vector<bool> l2_rows;
    std::vector<bool> construct;  // bookkeeping only: which L1 rows are construction rows
};

DynamicLoss pseudo_loss(const AutoencoderModel& model, const Matrix& x_in, const RowTargets& targets,
                        std::optional<double> gamma);

/// Targets of the dynamic objective for a batch: conflicted rows reconstruct their
/// clean image; reliable rows construct the centroid image of their assignment and
/// are pulled towards that centroid in the embedding.
RowTargets dynamic_targets(std::span<const std::size_t> indices, const Matrix& x_clean, const ClusterState& state);

/// Dynamic objective L1 + L2 (or L1 + gamma L2) on a batch. The network consumes
/// `x_aug`; targets and assignments come from clean data through `state`.
DynamicLoss dynamic_loss(const AutoencoderModel& model, std::span<const std::size_t> indices, const Matrix& x_clean,
                         const Matrix& x_aug, const ClusterState& state, std::optional<double> gamma = {});

// ---------------------------------------------------------------------------
// Driver

struct WindowRecord {
    std::size_t iter = 0;
    std::size_t conflicted_before = 0;  // count under the thresholds in force before any escape
    std::size_t conflicted = 0;         // count the next window trains with
    double tau = 1.0;
    bool escaped = false;
    double kappa = 0.0, beta1 = 0.0, beta2 = 0.0;
    double l1 = 0.0, l2 = 0.0, total = 0.0;  // batch means since the previous window
    double acc_all = NAN, nmi_all = NAN, acc_unconf = NAN, nmi_unconf = NAN, acc_conf = NAN, nmi_conf = NAN;
    double delta_fr = NAN, delta_fd = NAN;
    double seconds = 0.0;
};

struct ClusterResult {
    AutoencoderModel model;
    ClusterState state;
    std::vector<int> initial_assignments;  // K-Means labels at initialisation
    std::vector<int> assignments;          // final hard assignments
    std::vector<WindowRecord> windows;
    std::size_t iterations = 0;
    bool converged = false;  // tau < tol
};

struct ClusterRunOptions {
    std::optional<std::filesystem::path> out_dir;  // logs and final state when set
    std::function<void(const WindowRecord&)> on_window;
};

/// Phase-two training loop. Every conflict_eval_every steps the whole dataset is
/// re-embedded, the conflict mask and tau recomputed, and a conflicted count that
/// did not fall since the previous window triggers an escape update. Stops when
/// tau < tol or after max_iter steps.
ClusterResult run_clustering(const Dataset& ds, AutoencoderModel model, const ClusterConfig& cfg,
                             const ClusterRunOptions& opts = {});

/// AE + K-Means baseline: K-Means on the clean embeddings, with the same seeding a
/// clustering run uses for its initial centroids.
KMeansResult baseline_kmeans(const Dataset& ds, const AutoencoderModel& model, const ClusterConfig& cfg);

Checkpoint cluster_checkpoint(const AutoencoderModel& model, const ClusterState& state, std::size_t iteration);
ClusterState load_cluster_state(const Checkpoint& ck);

/// One "index,cluster" line per sample.
void write_assignments(const std::filesystem::path& path, std::span<const int> assignments);

std::vector<std::string> cluster_log_columns();
std::vector<std::string> diagnostics_log_columns();

}  // namespace dynae
