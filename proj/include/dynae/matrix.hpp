#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dynae {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    void fill(double v);

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Precision used inside matrix products. Reductions elsewhere always accumulate in double.
enum class Precision { f64, f32 };

void set_compute_precision(Precision p) noexcept;
Precision compute_precision() noexcept;

/// Restores the previous compute precision on scope exit.
class PrecisionScope {
public:
    explicit PrecisionScope(Precision p) : saved_(compute_precision()) { set_compute_precision(p); }
    ~PrecisionScope() { set_compute_precision(saved_); }
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    Precision saved_;
};

Precision parse_precision(std::string_view s);

// Kernel family the BLAS picked at load time, e.g. "SkylakeX" or "Prescott".
std::string blas_core_name();

enum class Trans { no, yes };

/// c = alpha * op(a) * op(b) + beta * c. c must already have the result shape when beta != 0.
void gemm(Trans ta, Trans tb, double alpha, const Matrix& a, const Matrix& b, double beta, Matrix& c);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a b^T

Matrix transpose(const Matrix& a);

/// Rows of `src` selected by `idx`, in order.
Matrix gather_rows(const Matrix& src, std::span<const std::size_t> idx);

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

bool all_finite(std::span<const double> v) noexcept;
/// Throws NumericError naming `what` when any entry is NaN or infinite.
void ensure_finite(const Matrix& m, std::string_view what);

}  // namespace dynae
