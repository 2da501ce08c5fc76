#pragma once

#include <vector>

#include "kaczmarz/linalg.hpp"
#include "kaczmarz/random.hpp"
#include "oracles.hpp"

namespace testutil {

inline oracle::Matrix to_rows(const kz::DenseMatrix& A) {
    oracle::Matrix rows(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) rows[i].assign(A.row(i).begin(), A.row(i).end());
    return rows;
}

inline oracle::Vector to_vec(const kz::DenseVector& v) { return v.values(); }

/// Entries ~ N(0, 1) from a fixed seed.
inline kz::DenseMatrix gaussian_matrix(std::size_t m, std::size_t n, std::uint64_t seed) {
    kz::Xoshiro256 rng(seed);
    kz::NormalSampler normal;
    std::vector<double> data(m * n);
    for (double& v : data) v = normal(rng);
    return kz::DenseMatrix(m, n, std::move(data));
}

inline kz::DenseVector gaussian_vector(std::size_t n, std::uint64_t seed) {
    kz::Xoshiro256 rng(seed);
    kz::NormalSampler normal;
    kz::DenseVector v(n);
    for (double& e : v) e = normal(rng);
    return v;
}

inline kz::DenseSystem consistent_system(kz::DenseMatrix A, const kz::DenseVector& x) {
    kz::DenseVector b = kz::matvec(A, x);
    return kz::DenseSystem{std::move(A), std::move(b), x, std::nullopt};
}

}  // namespace testutil
