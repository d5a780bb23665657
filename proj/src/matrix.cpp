#include "dynae/matrix.hpp"

#include <cblas.h>

#include <atomic>
#include <cmath>
#include <string>

#include "dynae/errors.hpp"

namespace dynae {

namespace {

std::atomic<Precision> g_precision{Precision::f64};

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void to_float(const Matrix& m, std::vector<float>& out) {
    out.resize(m.size());
    const double* src = m.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(src[i]);
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw DimensionError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                             std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void set_compute_precision(Precision p) noexcept { g_precision.store(p); }
Precision compute_precision() noexcept { return g_precision.load(); }

Precision parse_precision(std::string_view s) {
    if (s == "f64") return Precision::f64;
    if (s == "f32") return Precision::f32;
    throw ArgumentError("unknown precision '" + std::string(s) + "' (expected f32 or f64)");
}

void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b, double beta, Matrix& c) {
    const bool at = ta == Trans::yes;
    const bool bt = tb == Trans::yes;
    const std::size_t m = at ? a.cols() : a.rows();
    const std::size_t k = at ? a.rows() : a.cols();
    const std::size_t kb = bt ? b.cols() : b.rows();
    const std::size_t n = bt ? b.rows() : b.cols();
    if (k != kb) throw DimensionError("gemm: inner dimensions differ (" + shape(a) + " by " + shape(b) + ")");
    if (c.rows() != m || c.cols() != n) {
        if (beta != 0.0) throw DimensionError("gemm: accumulator has shape " + shape(c));
        c = Matrix(m, n);
    }
    if (m == 0 || n == 0) return;
    if (k == 0) {
        for (double& v : c.values()) v *= beta;
        return;
    }
    const auto cta = at ? CblasTrans : CblasNoTrans;
    const auto ctb = bt ? CblasTrans : CblasNoTrans;
    const int lda = static_cast<int>(a.cols());
    const int ldb = static_cast<int>(b.cols());
    const int ldc = static_cast<int>(n);
    if (compute_precision() == Precision::f64) {
        cblas_dgemm(CblasRowMajor, cta, ctb, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha,
                    a.data(), lda, b.data(), ldb, beta, c.data(), ldc);
        return;
    }
    thread_local std::vector<float> fa, fb, fc;
    to_float(a, fa);
    to_float(b, fb);
    fc.assign(m * n, 0.0f);
    cblas_sgemm(CblasRowMajor, cta, ctb, static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0f,
                fa.data(), lda, fb.data(), ldb, 0.0f, fc.data(), ldc);
    double* out = c.data();
    if (beta == 0.0) {
        for (std::size_t i = 0; i < fc.size(); ++i) out[i] = alpha * static_cast<double>(fc[i]);
    } else {
        for (std::size_t i = 0; i < fc.size(); ++i) out[i] = beta * out[i] + alpha * static_cast<double>(fc[i]);
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape(a) + " by " + shape(b));
    Matrix c(a.rows(), b.cols());
    gemm(Trans::no, Trans::no, 1.0, a, b, 0.0, c);
    ensure_finite(c, "matmul result");
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix c(a.cols(), b.cols());
    gemm(Trans::yes, Trans::no, 1.0, a, b, 0.0, c);
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.rows());
    gemm(Trans::no, Trans::yes, 1.0, a, b, 0.0, c);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) t(c, r) = a(r, c);
    return t;
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), src.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= src.rows()) throw DimensionError("gather_rows: index out of range");
        auto from = src.row(idx[i]);
        std::copy(from.begin(), from.end(), out.row(i).begin());
    }
    return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void ensure_finite(const Matrix& m, std::string_view what) {
    if (!all_finite(m.values())) throw NumericError(std::string(what) + " contains non-finite values");
}

std::string blas_core_name() {
    const char* name = openblas_get_corename();
    return name ? name : "unknown";
}

}  // namespace dynae
