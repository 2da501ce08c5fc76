#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include "kaczmarz/linalg.hpp"

namespace kz::io {

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// KZM1 blob: the 4 magic bytes "KZM1", u64 rows, u64 cols, then rows*cols
// little-endian IEEE-754 doubles in row-major order. Vectors are stored with
// cols = 1.

void write_matrix(std::ostream& out, const DenseMatrix& A);
void write_vector(std::ostream& out, const DenseVector& v);
DenseMatrix read_matrix(std::istream& in);
DenseVector read_vector(std::istream& in);

void write_matrix(const std::filesystem::path& path, const DenseMatrix& A);
void write_vector(const std::filesystem::path& path, const DenseVector& v);
DenseMatrix read_matrix(const std::filesystem::path& path);
DenseVector read_vector(const std::filesystem::path& path);

// CSV: one matrix row per line, comma separated, '.' decimal separator,
// values printed in shortest round-trip form.
void write_matrix_csv(std::ostream& out, const DenseMatrix& A);
DenseMatrix read_matrix_csv(std::istream& in);
void write_vector_csv(std::ostream& out, const DenseVector& v);
DenseVector read_vector_csv(std::istream& in);

}  // namespace kz::io
