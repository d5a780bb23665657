#include "dynae/cluster.hpp"

#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>

#include "dynae/diagnostics.hpp"
#include "dynae/errors.hpp"
#include "dynae/fileio.hpp"
#include "dynae/loss.hpp"
#include "dynae/metrics.hpp"
#include "dynae/optim.hpp"
#include "dynae/pretrain.hpp"

namespace dynae {

// ---------------------------------------------------------------------------
// K-Means

std::size_t nearest_centroid(std::span<const double> z, const Matrix& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
        const double d = squared_distance(z, centroids.row(k));
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

namespace {

Matrix kmeanspp_seed(const Matrix& Z, std::size_t K, Rng& rng) {
    const std::size_t n = Z.rows();
    Matrix C(K, Z.cols());
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> chosen(n, false);
    std::size_t pick = rng.below(n);
    for (std::size_t k = 0; k < K; ++k) {
        if (k > 0) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += d2[i];
            if (total > 0.0) {
                double r = rng.uniform() * total;
                pick = n;
                for (std::size_t i = 0; i < n; ++i) {
                    if (d2[i] <= 0.0) continue;
                    pick = i;
                    r -= d2[i];
                    if (r < 0.0) break;
                }
            } else {  // every remaining point coincides with a centre; take any unchosen one
                std::vector<std::size_t> free;
                for (std::size_t i = 0; i < n; ++i)
                    if (!chosen[i]) free.push_back(i);
                pick = free[rng.below(free.size())];
            }
        }
        chosen[pick] = true;
        auto src = Z.row(pick);
        std::copy(src.begin(), src.end(), C.row(k).begin());
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(Z.row(i), C.row(k)));
    }
    return C;
}

// Lloyd rounds from `C`; returns the labels and updates C in place.
KMeansResult lloyd(const Matrix& Z, Matrix C, std::size_t max_rounds) {
    const std::size_t n = Z.rows(), K = C.rows(), p = Z.cols();
    KMeansResult r;
    r.labels.assign(n, -1);
    std::vector<double> dist(n);
    auto assign = [&] {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<int>(nearest_centroid(Z.row(i), C));
            dist[i] = squared_distance(Z.row(i), C.row(static_cast<std::size_t>(k)));
            if (k != r.labels[i]) {
                r.labels[i] = k;
                changed = true;
            }
        }
        return changed;
    };
    bool changed = assign();
    while (changed && r.rounds < max_rounds) {
        ++r.rounds;
        std::vector<std::size_t> count(K, 0);
        Matrix sum(K, p);
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(r.labels[i]);
            ++count[k];
            auto s = sum.row(k);
            auto z = Z.row(i);
            for (std::size_t c = 0; c < p; ++c) s[c] += z[c];
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (count[k] == 0) {
                // Steal the point farthest from its centroid among clusters that can spare one.
                std::size_t far = n;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (count[static_cast<std::size_t>(r.labels[i])] > 1 && dist[i] > far_d) {
                        far_d = dist[i];
                        far = i;
                    }
                }
                if (far == n) continue;
                const auto from = static_cast<std::size_t>(r.labels[far]);
                --count[from];
                auto s = sum.row(from);
                auto z = Z.row(far);
                for (std::size_t c = 0; c < p; ++c) s[c] -= z[c];
                r.labels[far] = static_cast<int>(k);
                dist[far] = 0.0;
                count[k] = 1;
                std::copy(z.begin(), z.end(), sum.row(k).begin());
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            if (count[k] == 0) continue;
            auto c = C.row(k);
            auto s = sum.row(k);
            for (std::size_t j = 0; j < p; ++j) c[j] = s[j] / static_cast<double>(count[k]);
        }
        changed = assign();
    }
    r.inertia = 0.0;
    for (double d : dist) r.inertia += d;
    r.centroids = std::move(C);
    return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& Z, std::size_t K, Rng& rng, const std::optional<Matrix>& warm_start,
                    const KMeansOptions& opts) {
    if (K == 0) throw ArgumentError("kmeans: K must be positive");
    if (Z.rows() < K) throw ArgumentError("kmeans: fewer points than clusters");
    if (warm_start) {
        if (warm_start->rows() != K || warm_start->cols() != Z.cols())
            throw DimensionError("kmeans: warm start has the wrong shape");
        return lloyd(Z, *warm_start, opts.warm_max_rounds);
    }
    KMeansResult best;
    const std::size_t restarts = std::max<std::size_t>(1, opts.restarts);
    for (std::size_t r = 0; r < restarts; ++r) {
        auto res = lloyd(Z, kmeanspp_seed(Z, K, rng), opts.max_rounds);
        if (r == 0 || res.inertia < best.inertia) best = std::move(res);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Assignments

Matrix soft_assign(const Matrix& Z, const Matrix& centroids, double kernel_dof) {
    if (!(kernel_dof > 0.0)) throw ArgumentError("soft_assign: kernel degrees of freedom must be positive");
    if (Z.cols() != centroids.cols()) throw DimensionError("soft_assign: embedding and centroid widths differ");
    const std::size_t n = Z.rows(), K = centroids.rows();
    Matrix Q(n, K);
    const double power = -(kernel_dof + 1.0) / 2.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto q = Q.row(i);
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            q[k] = std::pow(1.0 + squared_distance(Z.row(i), centroids.row(k)) / kernel_dof, power);
            sum += q[k];
        }
        for (double& v : q) v /= sum;
    }
    return Q;
}

TopTwo top_two(std::span<const double> row) {
    if (row.size() < 2) throw ArgumentError("top_two: need at least two entries");
    TopTwo t;
    t.h1 = row[0];
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > t.h1) {
            t.h1 = row[k];
            t.argmax = k;
        }
    bool found = false;
    for (double v : row)
        if (v < t.h1 && (!found || v > t.h2)) {
            t.h2 = v;
            found = true;
        }
    if (!found) t.h2 = t.h1;
    return t;
}

std::vector<bool> conflict_mask(const Matrix& Q, double beta1, double beta2) {
    std::vector<bool> mask(Q.rows());
    for (std::size_t i = 0; i < Q.rows(); ++i) {
        const auto t = top_two(Q.row(i));
        mask[i] = t.h1 < beta1 || (t.h1 - t.h2) < beta2;
    }
    return mask;
}

BetaPair thresholds(double kappa, std::size_t K) {
    if (K < 2) throw ArgumentError("thresholds: K must be at least 2");
    if (!(kappa > 0.0)) throw ArgumentError("thresholds: kappa must be positive");
    const auto s = initial_thresholds(kappa, K);
    return {s.beta1, s.beta2};
}

void ClusterConfig::validate() const {
    if (K < 2) throw ConfigError("cluster.K must be at least 2");
    if (!(tol > 0.0 && tol <= 1.0)) throw ConfigError("cluster.tol must lie in (0,1]");
    if (!(kappa_init_factor > 0.0 && kappa_init_factor <= 1.0))
        throw ConfigError("cluster.kappa_init_factor must lie in (0,1]");
    if (!(kappa_drop_factor >= 0.0 && kappa_drop_factor < 1.0))
        throw ConfigError("cluster.kappa_drop_factor must lie in [0,1)");
    if (!(kernel_dof > 0.0)) throw ConfigError("cluster.kernel_dof must be positive");
    if (!(sgd_lr > 0.0) || momentum < 0.0 || momentum >= 1.0) throw ConfigError("cluster SGD settings out of range");
    if (batch_size == 0 || conflict_eval_every == 0) throw ConfigError("cluster intervals must be positive");
    if (gamma && !(*gamma >= 0.0)) throw ConfigError("cluster.gamma must be non-negative");
    augment.validate();
}

CentroidImages centroid_images(const Matrix& centroids, const Matrix& Z_all, const Matrix& X_all) {
    if (Z_all.rows() != X_all.rows() || Z_all.rows() == 0)
        throw DimensionError("centroid_images: embeddings and images must be aligned and non-empty");
    CentroidImages out{Matrix(centroids.rows(), X_all.cols()), std::vector<std::size_t>(centroids.rows())};
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < Z_all.rows(); ++i) {
            const double d = squared_distance(Z_all.row(i), centroids.row(k));
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        out.sources[k] = best;
        auto src = X_all.row(best);
        std::copy(src.begin(), src.end(), out.images.row(k).begin());
    }
    return out;
}

std::size_t evaluate_assignments(ClusterState& state, const Matrix& Z_all) {
    const Matrix Q = soft_assign(Z_all, state.centroids, state.kernel_dof);
    const std::size_t n = Q.rows();
    state.conflicted.assign(n, false);
    state.assignments.assign(n, 0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto t = top_two(Q.row(i));
        state.assignments[i] = static_cast<int>(t.argmax);
        const bool c = t.h1 < state.beta1() || (t.h1 - t.h2) < state.beta2();
        state.conflicted[i] = c;
        count += c ? 1 : 0;
    }
    state.conflicted_count = count;
    state.tau = n ? static_cast<double>(count) / static_cast<double>(n) : 0.0;
    state.mask_version = state.centroid_version;
    return count;
}

namespace {

KMeansOptions kmeans_options(const ClusterConfig& cfg) {
    KMeansOptions o;
    o.restarts = cfg.kmeans_restarts;
    return o;
}

constexpr std::uint64_t kKMeansStream = 0xC1A5;
constexpr std::uint64_t kBatchStream = 0xC1A6;
constexpr std::uint64_t kAugmentStream = 0xC1A7;
constexpr std::uint64_t kDiagnosticStream = 0xC1A8;

}  // namespace

ClusterState init_cluster_state(const Matrix& Z_all, const Matrix& X_all, const ClusterConfig& cfg, Rng& rng) {
    ClusterState s;
    s.kernel_dof = cfg.kernel_dof;
    s.centroids = kmeans(Z_all, cfg.K, rng, {}, kmeans_options(cfg)).centroids;
    s.centroid_version = 1;
    s.thresholds = initial_thresholds(cfg.kappa_init_factor * static_cast<double>(cfg.K), cfg.K);
    auto imgs = centroid_images(s.centroids, Z_all, X_all);
    s.centroid_images = std::move(imgs.images);
    s.centroid_sources = std::move(imgs.sources);
    s.images_version = s.centroid_version;
    s.prev_conflicted = Z_all.rows();
    evaluate_assignments(s, Z_all);
    return s;
}

void escape_update(ClusterState& state, const Matrix& Z_all, const Matrix& X_all, const ClusterConfig& cfg, Rng& rng) {
    state.centroids = kmeans(Z_all, state.K(), rng, state.centroids, kmeans_options(cfg)).centroids;
    ++state.centroid_version;
    state.thresholds = escape_thresholds(state.thresholds, cfg.kappa_drop_factor, state.K(), cfg.kappa_update);
    auto imgs = centroid_images(state.centroids, Z_all, X_all);
    state.centroid_images = std::move(imgs.images);
    state.centroid_sources = std::move(imgs.sources);
    state.images_version = state.centroid_version;
    ++state.escapes;
}

// ---------------------------------------------------------------------------
// Losses

DynamicLoss pseudo_loss(const AutoencoderModel& model, const Matrix& x_in, const RowTargets& t,
                        std::optional<double> gamma) {
    const std::size_t b = x_in.rows();
    if (b == 0) throw ArgumentError("pseudo_loss: empty batch");
    if (t.image_target.rows() != b || t.image_target.cols() != x_in.cols() || t.latent_target.rows() != b ||
        t.l1_rows.size() != b || t.l2_rows.size() != b || t.construct.size() != b)
        throw DimensionError("pseudo_loss: targets do not match the batch");
    const double inv_b = 1.0 / static_cast<double>(b);
    const double weight2 = gamma.value_or(1.0);

    const auto enc = mlp_forward(model.encoder, x_in);
    const auto dec = mlp_forward(model.decoder, enc.output);
    const Matrix& z = enc.output;
    const Matrix& xhat = dec.output;
    if (t.latent_target.cols() != z.cols()) throw DimensionError("pseudo_loss: latent target width");

    DynamicLoss out;
    Matrix d_xhat(b, xhat.cols());
    double recon = 0.0, construct = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        if (!t.l1_rows[i]) continue;
        auto o = xhat.row(i);
        auto tg = t.image_target.row(i);
        auto g = d_xhat.row(i);
        double s = 0.0;
        for (std::size_t k = 0; k < o.size(); ++k) {
            const double d = o[k] - tg[k];
            s += d * d;
            g[k] = 2.0 * inv_b * d;
        }
        (t.construct[i] ? construct : recon) += s;
        if (!t.construct[i]) ++out.conflicted;
    }
    Matrix dz_l2(b, z.cols());
    for (std::size_t i = 0; i < b; ++i) {
        if (!t.l2_rows[i]) continue;
        auto zi = z.row(i);
        auto mu = t.latent_target.row(i);
        auto g = dz_l2.row(i);
        for (std::size_t k = 0; k < zi.size(); ++k) {
            const double d = zi[k] - mu[k];
            l2 += d * d;
            g[k] = weight2 * 2.0 * inv_b * d;
        }
    }
    out.l1_reconstruction = recon * inv_b;
    out.l1_construction = construct * inv_b;
    out.l1 = (recon + construct) * inv_b;
    out.l2 = l2 * inv_b;
    out.total = gamma ? out.l1 + *gamma * out.l2 : out.l1 + out.l2;

    auto dec_back = mlp_backward(model.decoder, dec, d_xhat);
    out.grads.decoder = std::move(dec_back.grads);
    Matrix dz = std::move(dec_back.grad_input);
    auto a = dz.values();
    auto c = dz_l2.values();
    for (std::size_t k = 0; k < a.size(); ++k) a[k] += c[k];
    out.grads.encoder = mlp_backward(model.encoder, enc, dz, {.param_grads = true, .input_grad = false}).grads;
    return out;
}

RowTargets dynamic_targets(std::span<const std::size_t> indices, const Matrix& x_clean, const ClusterState& state) {
    const std::size_t b = indices.size();
    if (x_clean.rows() != b) throw DimensionError("dynamic_targets: clean batch does not match the indices");
    if (state.mask_version != state.centroid_version || state.images_version != state.centroid_version)
        throw ConsistencyError("conflict mask or centroid images are stale for the current centroids");
    RowTargets t{x_clean, Matrix(b, state.centroids.cols()), std::vector<bool>(b, true), std::vector<bool>(b, false),
                 std::vector<bool>(b, false)};
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t idx = indices[i];
        if (idx >= state.conflicted.size()) throw DimensionError("dynamic_targets: sample index out of range");
        if (state.conflicted[idx]) continue;
        const auto k = static_cast<std::size_t>(state.assignments[idx]);
        auto img = state.centroid_images.row(k);
        std::copy(img.begin(), img.end(), t.image_target.row(i).begin());
        auto mu = state.centroids.row(k);
        std::copy(mu.begin(), mu.end(), t.latent_target.row(i).begin());
        t.l2_rows[i] = true;
        t.construct[i] = true;
    }
    return t;
}

DynamicLoss dynamic_loss(const AutoencoderModel& model, std::span<const std::size_t> indices, const Matrix& x_clean,
                         const Matrix& x_aug, const ClusterState& state, std::optional<double> gamma) {
    if (x_aug.rows() != x_clean.rows() || x_aug.cols() != x_clean.cols())
        throw DimensionError("dynamic_loss: augmented and clean batches differ in shape");
    return pseudo_loss(model, x_aug, dynamic_targets(indices, x_clean, state), gamma);
}

// ---------------------------------------------------------------------------
// Driver

std::vector<std::string> cluster_log_columns() {
    return {"iter",       "tau",        "l1",       "l2",      "total",    "acc_all", "nmi_all",
            "acc_unconf", "nmi_unconf", "acc_conf", "nmi_conf", "seconds"};
}

std::vector<std::string> diagnostics_log_columns() { return {"iter", "delta_fr", "delta_fd"}; }

namespace {

std::vector<std::string> window_log_columns() {
    return {"iter", "conflicted_before", "conflicted", "tau", "escaped", "kappa", "beta1", "beta2"};
}

void subset_scores(const std::vector<int>& y, const std::vector<int>& pred, const std::vector<bool>& conflicted,
                   bool want_conflicted, double& acc_out, double& nmi_out) {
    std::vector<int> ys, ps;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (conflicted[i] == want_conflicted) {
            ys.push_back(y[i]);
            ps.push_back(pred[i]);
        }
    if (ys.empty()) {
        acc_out = nmi_out = NAN;
        return;
    }
    acc_out = acc(ys, ps);
    nmi_out = nmi(ys, ps);
}

}  // namespace

KMeansResult baseline_kmeans(const Dataset& ds, const AutoencoderModel& model, const ClusterConfig& cfg) {
    Rng rng(cfg.seed ^ kKMeansStream);
    const Matrix Z = encode_all(model, ds.X);
    return kmeans(Z, cfg.K, rng, {}, kmeans_options(cfg));
}

ClusterResult run_clustering(const Dataset& ds, AutoencoderModel model, const ClusterConfig& cfg,
                             const ClusterRunOptions& opts) {
    cfg.validate();
    if (model.input_dim() != ds.dim()) throw ConfigError("autoencoder input dimension differs from the dataset");
    const auto start = std::chrono::steady_clock::now();
    auto seconds = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    Rng kmeans_rng(cfg.seed ^ kKMeansStream);
    Rng augment_rng(cfg.seed ^ kAugmentStream);
    BatchIterator batches(ds.size(), cfg.batch_size, cfg.seed ^ kBatchStream);

    std::vector<std::size_t> diag_idx;
    Matrix diag_x;
    const bool labelled = ds.labels.has_value();
    if (labelled && cfg.diagnostics_every > 0) {
        Rng diag_rng(cfg.seed ^ kDiagnosticStream);
        auto perm = diag_rng.permutation(ds.size());
        perm.resize(std::min(cfg.diagnostic_batch, ds.size()));
        diag_idx = std::move(perm);
        diag_x = gather_rows(ds.X, diag_idx);
    }

    std::optional<CsvLog> log, diag_log, window_log;
    if (opts.out_dir) {
        std::filesystem::create_directories(*opts.out_dir);
        log.emplace(*opts.out_dir / "cluster_log.csv", cluster_log_columns());
        window_log.emplace(*opts.out_dir / "windows.csv", window_log_columns());
        if (!diag_idx.empty()) diag_log.emplace(*opts.out_dir / "diagnostics.csv", diagnostics_log_columns());
    }

    Matrix Z = encode_all(model, ds.X);
    ClusterResult result;
    result.state = init_cluster_state(Z, ds.X, cfg, kmeans_rng);
    result.initial_assignments = result.state.assignments;
    ClusterState& st = result.state;

    auto enc_opt = make_optimizer(model.encoder, OptimizerKind::sgd_momentum, {.lr = cfg.sgd_lr, .momentum = cfg.momentum});
    auto dec_opt = make_optimizer(model.decoder, OptimizerKind::sgd_momentum, {.lr = cfg.sgd_lr, .momentum = cfg.momentum});

    double sum_l1 = 0.0, sum_l2 = 0.0, sum_total = 0.0;
    std::size_t steps_in_window = 0;
    std::size_t window_index = 0;

    auto record_window = [&](std::size_t iter, std::size_t before, bool escaped) {
        WindowRecord w;
        w.iter = iter;
        w.conflicted_before = before;
        w.conflicted = st.conflicted_count;
        w.tau = st.tau;
        w.escaped = escaped;
        w.kappa = st.kappa();
        w.beta1 = st.beta1();
        w.beta2 = st.beta2();
        if (steps_in_window) {
            w.l1 = sum_l1 / static_cast<double>(steps_in_window);
            w.l2 = sum_l2 / static_cast<double>(steps_in_window);
            w.total = sum_total / static_cast<double>(steps_in_window);
        } else {
            w.l1 = w.l2 = w.total = NAN;
        }
        sum_l1 = sum_l2 = sum_total = 0.0;
        steps_in_window = 0;
        if (labelled) {
            const auto& y = *ds.labels;
            w.acc_all = acc(y, st.assignments);
            w.nmi_all = nmi(y, st.assignments);
            subset_scores(y, st.assignments, st.conflicted, false, w.acc_unconf, w.nmi_unconf);
            subset_scores(y, st.assignments, st.conflicted, true, w.acc_conf, w.nmi_conf);
            if (!diag_idx.empty() && window_index % cfg.diagnostics_every == 0) {
                const auto map = cluster_of_class(y, st.assignments, st.K());
                std::vector<int> diag_y;
                for (auto i : diag_idx) diag_y.push_back(y[i]);
                try {
                    w.delta_fr = delta_fr(model, diag_idx, diag_x, diag_y, map, st);
                } catch (const UnavailableError&) {
                }
                try {
                    w.delta_fd = delta_fd(model, diag_idx, diag_x, st);
                } catch (const UnavailableError&) {
                }
                if (diag_log) diag_log->row({static_cast<double>(iter), w.delta_fr, w.delta_fd});
            }
        }
        ++window_index;
        w.seconds = seconds();
        if (log)
            log->row({static_cast<double>(iter), w.tau, w.l1, w.l2, w.total, w.acc_all, w.nmi_all, w.acc_unconf,
                      w.nmi_unconf, w.acc_conf, w.nmi_conf, w.seconds});
        if (window_log)
            window_log->row({static_cast<double>(iter), static_cast<double>(w.conflicted_before),
                             static_cast<double>(w.conflicted), w.tau, w.escaped ? 1.0 : 0.0, w.kappa, w.beta1,
                             w.beta2});
        if (opts.on_window) opts.on_window(w);
        result.windows.push_back(w);
    };

    std::size_t iter = 0;
    for (; iter < cfg.max_iter; ++iter) {
        if (iter % cfg.conflict_eval_every == 0) {
            if (iter > 0) {
                Z = encode_all(model, ds.X);
                evaluate_assignments(st, Z);
            }
            const std::size_t before = st.conflicted_count;
            bool escaped = false;
            if (before >= st.prev_conflicted) {
                escape_update(st, Z, ds.X, cfg, kmeans_rng);
                evaluate_assignments(st, Z);
                escaped = true;
            }
            st.prev_conflicted = st.conflicted_count;
            record_window(iter, before, escaped);
            if (st.tau < cfg.tol) {
                result.converged = true;
                break;
            }
        }
        const Batch batch = batches.next(ds.X);
        const Matrix x_aug = augment(batch.X, ds.shape, cfg.augment, augment_rng);
        const auto loss = dynamic_loss(model, batch.indices, batch.X, x_aug, st, cfg.gamma);
        if (!std::isfinite(loss.total)) {
            if (opts.out_dir) cluster_checkpoint(model, st, iter).save(*opts.out_dir / "cluster_state.ckpt");
            throw NumericError("clustering loss became non-finite at iteration " + std::to_string(iter));
        }
        optimizer_step(model.encoder, loss.grads.encoder, enc_opt);
        optimizer_step(model.decoder, loss.grads.decoder, dec_opt);
        sum_l1 += loss.l1;
        sum_l2 += loss.l2;
        sum_total += loss.total;
        ++steps_in_window;
    }
    result.iterations = iter;
    if (!result.converged) {
        Z = encode_all(model, ds.X);
        const std::size_t before = evaluate_assignments(st, Z);
        st.prev_conflicted = st.conflicted_count;
        record_window(iter, before, false);
        result.converged = st.tau < cfg.tol;
    }
    result.assignments = st.assignments;
    if (opts.out_dir) {
        cluster_checkpoint(model, st, iter).save(*opts.out_dir / "cluster_state.ckpt");
        write_assignments(*opts.out_dir / "assignments.txt", result.assignments);
    }
    result.model = std::move(model);
    return result;
}

Checkpoint cluster_checkpoint(const AutoencoderModel& model, const ClusterState& s, std::size_t iteration) {
    Checkpoint ck;
    ck.arch_hash = architecture_hash({&model.encoder, &model.decoder});
    ck.strings["kind"] = "cluster";
    put_autoencoder(ck, model);
    ck.arrays["centroids"] = s.centroids;
    ck.arrays["centroid_images"] = s.centroid_images;
    put_vector(ck, "centroid_sources", {s.centroid_sources.begin(), s.centroid_sources.end()});
    std::vector<double> mask(s.conflicted.size()), assign(s.assignments.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = s.conflicted[i] ? 1.0 : 0.0;
    for (std::size_t i = 0; i < assign.size(); ++i) assign[i] = s.assignments[i];
    put_vector(ck, "conflict_mask", mask);
    put_vector(ck, "assignments", assign);
    ck.meta["iteration"] = static_cast<double>(iteration);
    ck.meta["kernel_dof"] = s.kernel_dof;
    ck.meta["kappa"] = s.thresholds.kappa;
    ck.meta["beta1"] = s.thresholds.beta1;
    ck.meta["beta2"] = s.thresholds.beta2;
    ck.meta["kappa_drop"] = s.thresholds.last_drop;
    ck.meta["tau"] = s.tau;
    ck.meta["conflicted"] = static_cast<double>(s.conflicted_count);
    ck.meta["prev_conflicted"] = static_cast<double>(s.prev_conflicted);
    ck.meta["escapes"] = static_cast<double>(s.escapes);
    return ck;
}

ClusterState load_cluster_state(const Checkpoint& ck) {
    if (ck.text("kind") != "cluster") throw FormatError("not a clustering checkpoint");
    ClusterState s;
    s.centroids = ck.array("centroids");
    s.centroid_images = ck.array("centroid_images");
    for (double v : get_vector(ck, "centroid_sources")) s.centroid_sources.push_back(static_cast<std::size_t>(v));
    for (double v : get_vector(ck, "conflict_mask")) s.conflicted.push_back(v != 0.0);
    for (double v : get_vector(ck, "assignments")) s.assignments.push_back(static_cast<int>(v));
    s.kernel_dof = ck.scalar("kernel_dof");
    s.thresholds = {ck.scalar("kappa"), ck.scalar("beta1"), ck.scalar("beta2"), ck.scalar("kappa_drop")};
    s.tau = ck.scalar("tau");
    s.conflicted_count = static_cast<std::size_t>(ck.scalar("conflicted"));
    s.prev_conflicted = static_cast<std::size_t>(ck.scalar("prev_conflicted"));
    s.escapes = static_cast<std::size_t>(ck.scalar("escapes"));
    s.centroid_version = s.mask_version = s.images_version = 1;
    return s;
}

void write_assignments(const std::filesystem::path& path, std::span<const int> assignments) {
    std::string out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        out += std::to_string(i) + "," + std::to_string(assignments[i]) + "\n";
    write_file_atomic(path, out);
}

}  // namespace dynae
