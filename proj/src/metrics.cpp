#include "dynae/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dynae/errors.hpp"

namespace dynae {

namespace {

// Shortest augmenting path (Jonker-Volgenant style potentials), O(n^3).
double solve_assignment(const std::vector<double>& cost, std::size_t n, std::vector<std::size_t>& col_of_row) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    col_of_row.assign(n, 0);
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
    for (std::size_t i = 0; i < n; ++i) total += cost[i * n + col_of_row[i]];
    return total;
}

double optimal_cost(const Matrix& cost, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    const std::size_t m = rows.size();
    if (m == 0) return 0.0;
    std::vector<double> sub(m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b) sub[a * m + b] = cost(rows[a], cols[b]);
    std::vector<std::size_t> tmp;
    return solve_assignment(sub, m, tmp);
}

std::size_t label_count(std::span<const int> y) {
    int mx = -1;
    for (int v : y) {
        if (v < 0) throw ArgumentError("labels must be non-negative");
        mx = std::max(mx, v);
    }
    return static_cast<std::size_t>(mx + 1);
}

}  // namespace

Assignment hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) throw ArgumentError("hungarian: cost matrix must be square");
    ensure_finite(cost, "hungarian cost");
    const std::size_t n = cost.rows();
    Assignment out;
    if (n == 0) return out;
    std::vector<double> flat(cost.values().begin(), cost.values().end());
    std::vector<std::size_t> base;
    const double best = solve_assignment(flat, n, base);
    double scale = 1.0;
    for (double c : flat) scale = std::max(scale, std::abs(c));
    const double eps = 1e-9 * scale * static_cast<double>(n);

    // Fix rows in order to the smallest column that still admits an optimal completion.
    std::vector<std::size_t> rows_left(n), cols_left(n);
    for (std::size_t i = 0; i < n; ++i) rows_left[i] = cols_left[i] = i;
    out.col_of_row.assign(n, 0);
    double fixed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rows_left.erase(rows_left.begin());
        bool placed = false;
        for (std::size_t k = 0; k < cols_left.size() && !placed; ++k) {
            const std::size_t j = cols_left[k];
            auto rest_cols = cols_left;
            rest_cols.erase(rest_cols.begin() + static_cast<long>(k));
            const double candidate = fixed + cost(i, j) + optimal_cost(cost, rows_left, rest_cols);
            if (candidate <= best + eps) {
                out.col_of_row[i] = j;
                fixed += cost(i, j);
                cols_left = std::move(rest_cols);
                placed = true;
            }
        }
        if (!placed) {  // rounding pushed every candidate over the bound; keep the solver's choice
            return {base, best};
        }
    }
    out.cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) out.cost += cost(i, out.col_of_row[i]);
    return out;
}

Matrix contingency(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) throw DimensionError("label vectors differ in length");
    const std::size_t n = std::max(label_count(y_true), label_count(y_pred));
    Matrix c(n, n);
    for (std::size_t i = 0; i < y_true.size(); ++i) c(y_pred[i], y_true[i]) += 1.0;
    return c;
}

std::vector<int> best_mapping(std::span<const int> y_true, std::span<const int> y_pred) {
    const Matrix c = contingency(y_true, y_pred);
    Matrix cost(c.rows(), c.cols());
    for (std::size_t k = 0; k < c.size(); ++k) cost.values()[k] = -c.values()[k];
    const auto a = hungarian(cost);
    return {a.col_of_row.begin(), a.col_of_row.end()};
}

double acc(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) throw DimensionError("acc: label vectors differ in length");
    if (y_true.empty()) throw ArgumentError("acc: empty labelling");
    const Matrix c = contingency(y_true, y_pred);
    const auto map = best_mapping(y_true, y_pred);
    double hit = 0.0;
    for (std::size_t k = 0; k < map.size(); ++k) hit += c(k, static_cast<std::size_t>(map[k]));
    return hit / static_cast<double>(y_true.size());
}

double nmi(std::span<const int> y_true, std::span<const int> y_pred) {
    if (y_true.size() != y_pred.size()) throw DimensionError("nmi: label vectors differ in length");
    if (y_true.empty()) throw ArgumentError("nmi: empty labelling");
    const Matrix c = contingency(y_true, y_pred);
    const double n = static_cast<double>(y_true.size());
    std::vector<double> row(c.rows(), 0.0), col(c.cols(), 0.0);
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) {
            row[i] += c(i, j);
            col[j] += c(i, j);
        }
    auto entropy = [n](const std::vector<double>& counts) {
        double h = 0.0;
        for (double k : counts)
            if (k > 0) h -= (k / n) * std::log(k / n);
        return h;
    };
    const double hp = entropy(row), ht = entropy(col);
    if (hp <= 0.0 || ht <= 0.0) return 0.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < c.rows(); ++i)
        for (std::size_t j = 0; j < c.cols(); ++j) {
            const double k = c(i, j);
            if (k > 0) mi += (k / n) * std::log(k * n / (row[i] * col[j]));
        }
    return std::clamp(mi / ((hp + ht) / 2.0), 0.0, 1.0);
}

double grad_cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("grad_cosine: gradient lengths differ");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) throw UnavailableError("grad_cosine: zero gradient");
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double grad_cosine(const GradientSnapshot& a, const GradientSnapshot& b) { return grad_cosine(a.values, b.values); }

Matrix pca2d(const Matrix& Z) {
    const std::size_t n = Z.rows(), p = Z.cols();
    if (p < 2) throw ArgumentError("pca2d: need at least two columns");
    if (n < 2) throw ArgumentError("pca2d: need at least two rows");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z(Z.data(),
                                                                                              static_cast<long>(n),
                                                                                              static_cast<long>(p));
    const Eigen::RowVectorXd mean = z.colwise().mean();
    const Eigen::MatrixXd centered = z.rowwise() - mean;
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("pca2d: eigendecomposition failed");
    const auto& values = eig.eigenvalues();  // ascending
    if (!(values(static_cast<long>(p) - 1) > 0.0)) throw UnavailableError("pca2d: data has rank 0");
    Eigen::MatrixXd axes(p, 2);
    for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v = eig.eigenvectors().col(static_cast<long>(p) - 1 - k);
        Eigen::Index at = 0;
        v.cwiseAbs().maxCoeff(&at);
        if (v(at) < 0) v = -v;
        axes.col(k) = v;
    }
    const Eigen::MatrixXd proj = centered * axes;
    Matrix out(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, 0) = proj(static_cast<long>(i), 0);
        out(i, 1) = proj(static_cast<long>(i), 1);
    }
    return out;
}

}  // namespace dynae
