#include "kaczmarz/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kz {

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw DimensionError(what);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)), row_norms_sq_(rows, 0.0) {
    require(rows_ > 0 && cols_ > 0, "DenseMatrix: dimensions must be positive");
    require(data_.size() == rows_ * cols_, "DenseMatrix: data length must equal rows * cols");
    for (std::size_t i = 0; i < rows_; ++i) {
        const double s = squared_norm(row(i));
        if (!(s > 0.0)) {
            throw std::invalid_argument("DenseMatrix: row " + std::to_string(i) +
                                        " has zero (or non-finite) norm");
        }
        row_norms_sq_[i] = s;
        frob_norm_sq_ += s;
    }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t m = rows.size();
    const std::size_t n = m ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(m * n);
    for (const auto& r : rows) {
        require(r.size() == n, "DenseMatrix::from_rows: ragged rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return DenseMatrix(m, n, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    std::vector<double> data(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) data[i * n + i] = 1.0;
    return DenseMatrix(n, n, std::move(data));
}

std::vector<double> DenseMatrix::column_norms_sq() const {
    std::vector<double> out(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* r = data_.data() + i * cols_;
        for (std::size_t j = 0; j < cols_; ++j) out[j] += r[j] * r[j];
    }
    return out;
}

DenseMatrix DenseMatrix::crop(std::size_t rows, std::size_t cols) const {
    if (rows == 0 || cols == 0 || rows > rows_ || cols > cols_) {
        throw DimensionError("DenseMatrix::crop: target dimensions out of range");
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto r = row(i);
        data.insert(data.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(cols));
    }
    return DenseMatrix(rows, cols, std::move(data));
}

DenseMatrix DenseMatrix::permute_rows(std::span<const std::size_t> order) const {
    require(order.size() == rows_, "DenseMatrix::permute_rows: order length must equal rows");
    std::vector<double> data;
    data.reserve(data_.size());
    for (std::size_t src : order) {
        if (src >= rows_) throw std::out_of_range("DenseMatrix::permute_rows: index out of range");
        auto r = row(src);
        data.insert(data.end(), r.begin(), r.end());
    }
    return DenseMatrix(rows_, cols_, std::move(data));
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double squared_norm(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += v * v;
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), "squared_distance: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double project_row_inplace(std::span<double> x, const DenseMatrix& A, std::size_t i, double b_i,
                           double alpha) {
    if (i >= A.rows()) throw std::out_of_range("project_row: row index out of range");
    require(x.size() == A.cols(), "project_row: iterate length must equal cols");
    const auto a = A.row(i);
    const double coef = (b_i - dot(a, x)) / A.row_norm_sq(i);
    const double scale = alpha * coef;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += scale * a[j];
    return scale;
}

DenseVector project_row(const DenseVector& x, const DenseMatrix& A, std::size_t i, double b_i,
                        double alpha) {
    DenseVector out = x;
    project_row_inplace(out.span(), A, i, b_i, alpha);
    return out;
}

void residual_into(const DenseMatrix& A, std::span<const double> x, std::span<const double> b,
                   std::span<double> out) {
    require(x.size() == A.cols() && b.size() == A.rows() && out.size() == A.rows(),
            "residual: dimension mismatch");
    for (std::size_t i = 0; i < A.rows(); ++i) out[i] = b[i] - dot(A.row(i), x);
}

DenseVector residual(const DenseMatrix& A, const DenseVector& x, const DenseVector& b) {
    DenseVector r(A.rows());
    residual_into(A, x.span(), b.span(), r.span());
    return r;
}

void matvec_into(const DenseMatrix& A, std::span<const double> x, std::span<double> out) {
    require(x.size() == A.cols() && out.size() == A.rows(), "matvec: dimension mismatch");
    for (std::size_t i = 0; i < A.rows(); ++i) out[i] = dot(A.row(i), x);
}

DenseVector matvec(const DenseMatrix& A, const DenseVector& x) {
    DenseVector y(A.rows());
    matvec_into(A, x.span(), y.span());
    return y;
}

void matvec_transpose_into(const DenseMatrix& A, std::span<const double> y, std::span<double> out) {
    require(y.size() == A.rows() && out.size() == A.cols(), "matvec_transpose: dimension mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < A.rows(); ++i) {
        const double yi = y[i];
        const auto a = A.row(i);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += yi * a[j];
    }
}

DenseVector matvec_transpose(const DenseMatrix& A, const DenseVector& y) {
    DenseVector out(A.cols());
    matvec_transpose_into(A, y.span(), out.span());
    return out;
}

double max_consecutive_angle(const DenseMatrix& A) {
    if (A.rows() < 2) throw DimensionError("max_consecutive_angle: need at least two rows");
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < A.rows(); ++i) {
        const double c = dot(A.row(i), A.row(i + 1)) /
                         std::sqrt(A.row_norm_sq(i) * A.row_norm_sq(i + 1));
        best = std::max(best, std::acos(std::clamp(c, -1.0, 1.0)));
    }
    return best;
}

}  // namespace kz
