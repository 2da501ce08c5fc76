#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace kz {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense vector of doubles. Thin owning wrapper so solver iterates, right-hand
/// sides and reference solutions are not confused with arbitrary buffers.
class DenseVector {
public:
    DenseVector() = default;
    explicit DenseVector(std::size_t len, double value = 0.0) : data_(len, value) {}
    DenseVector(std::initializer_list<double> values) : data_(values) {}
    explicit DenseVector(std::vector<double> values) : data_(std::move(values)) {}

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    std::span<double> span() noexcept { return data_; }
    std::span<const double> span() const noexcept { return data_; }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    const std::vector<double>& values() const noexcept { return data_; }

    friend bool operator==(const DenseVector&, const DenseVector&) = default;

private:
    std::vector<double> data_;
};

/// Row-major dense matrix with cached squared row norms and squared
/// Frobenius norm. Immutable after construction; rows must be nonzero.
class DenseMatrix {
public:
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }
    std::span<const double> data() const noexcept { return data_; }

    double row_norm_sq(std::size_t i) const noexcept { return row_norms_sq_[i]; }
    std::span<const double> row_norms_sq() const noexcept { return row_norms_sq_; }
    double frob_norm_sq() const noexcept { return frob_norm_sq_; }

    /// Squared Euclidean norm of every column (computed on demand, O(mn)).
    std::vector<double> column_norms_sq() const;

    /// Leading rows x cols block.
    DenseMatrix crop(std::size_t rows, std::size_t cols) const;

    /// Copy with rows reordered so that row i of the result is row order[i].
    DenseMatrix permute_rows(std::span<const std::size_t> order) const;

    friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> data_;
    std::vector<double> row_norms_sq_;
    double frob_norm_sq_ = 0.0;
};

/// A linear system Ax = b with optional reference solutions.
struct DenseSystem {
    DenseMatrix A;
    DenseVector b;
    std::optional<DenseVector> x_star;  // unique solution of a consistent system
    std::optional<DenseVector> x_ls;    // least-squares solution

    /// x_ls when present, otherwise x_star, otherwise nullptr.
    const DenseVector* reference() const noexcept {
        if (x_ls) return &*x_ls;
        if (x_star) return &*x_star;
        return nullptr;
    }
};

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

/// x <- x + alpha * (b_i - <A_i, x>) / ||A_i||^2 * A_i^T. Returns the step
/// coefficient that multiplied the row.
double project_row_inplace(std::span<double> x, const DenseMatrix& A, std::size_t i, double b_i,
                           double alpha = 1.0);

DenseVector project_row(const DenseVector& x, const DenseMatrix& A, std::size_t i, double b_i,
                        double alpha = 1.0);

/// b - A x
DenseVector residual(const DenseMatrix& A, const DenseVector& x, const DenseVector& b);
void residual_into(const DenseMatrix& A, std::span<const double> x, std::span<const double> b,
                   std::span<double> out);

DenseVector matvec(const DenseMatrix& A, const DenseVector& x);
void matvec_into(const DenseMatrix& A, std::span<const double> x, std::span<double> out);

/// A^T y without forming A^T.
DenseVector matvec_transpose(const DenseMatrix& A, const DenseVector& y);
void matvec_transpose_into(const DenseMatrix& A, std::span<const double> y, std::span<double> out);

/// Largest angle (radians) between consecutive rows.
double max_consecutive_angle(const DenseMatrix& A);

}  // namespace kz
