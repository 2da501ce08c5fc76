#include "kaczmarz/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace kz::io {

namespace {

constexpr std::array<char, 4> kMagic{'K', 'Z', 'M', '1'};

static_assert(std::numeric_limits<double>::is_iec559, "KZM1 requires IEEE-754 doubles");

template <typename T>
T to_little_endian(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
        std::reverse(bytes.begin(), bytes.end());
        return std::bit_cast<T>(bytes);
    } else {
        return v;
    }
}

void put_u64(std::ostream& out, std::uint64_t v) {
    v = to_little_endian(v);
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("KZM1: truncated header");
    return to_little_endian(v);
}

void write_blob(std::ostream& out, std::uint64_t rows, std::uint64_t cols,
                std::span<const double> values) {
    out.write(kMagic.data(), kMagic.size());
    put_u64(out, rows);
    put_u64(out, cols);
    for (double d : values) {
        const auto bits = to_little_endian(std::bit_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) throw std::runtime_error("KZM1: write failed");
}

std::vector<double> read_blob(std::istream& in, std::uint64_t& rows, std::uint64_t& cols) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
        throw FormatError("KZM1: bad magic bytes");
    }
    rows = get_u64(in);
    cols = get_u64(in);
    if (rows != 0 && cols > (std::uint64_t{1} << 40) / rows) throw FormatError("KZM1: implausible size");
    std::vector<double> values(rows * cols);
    for (double& d : values) {
        std::uint64_t bits = 0;
        if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
            throw FormatError("KZM1: truncated payload");
        }
        d = std::bit_cast<double>(to_little_endian(bits));
    }
    return values;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return in;
}

std::vector<double> parse_csv_line(std::string_view line) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string_view::npos) end = line.size();
        std::string_view field = line.substr(pos, end - pos);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        if (!field.empty() && field.front() == '+') field.remove_prefix(1);
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
            throw FormatError("CSV: cannot parse field '" + std::string(field) + "'");
        }
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

}  // namespace

void write_matrix(std::ostream& out, const DenseMatrix& A) {
    write_blob(out, A.rows(), A.cols(), A.data());
}

void write_vector(std::ostream& out, const DenseVector& v) {
    write_blob(out, v.size(), 1, v.span());
}

DenseMatrix read_matrix(std::istream& in) {
    std::uint64_t rows = 0, cols = 0;
    auto values = read_blob(in, rows, cols);
    return DenseMatrix(rows, cols, std::move(values));
}

DenseVector read_vector(std::istream& in) {
    std::uint64_t rows = 0, cols = 0;
    auto values = read_blob(in, rows, cols);
    if (cols != 1) throw FormatError("KZM1: expected a vector (cols = 1)");
    return DenseVector(std::move(values));
}

void write_matrix(const std::filesystem::path& path, const DenseMatrix& A) {
    auto out = open_out(path);
    write_matrix(out, A);
}

void write_vector(const std::filesystem::path& path, const DenseVector& v) {
    auto out = open_out(path);
    write_vector(out, v);
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_matrix(in);
}

DenseVector read_vector(const std::filesystem::path& path) {
    auto in = open_in(path);
    return read_vector(in);
}

void write_matrix_csv(std::ostream& out, const DenseMatrix& A) {
    for (std::size_t i = 0; i < A.rows(); ++i) {
        out << fmt::format("{}\n", fmt::join(A.row(i), ","));
    }
}

DenseMatrix read_matrix_csv(std::istream& in) {
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto values = parse_csv_line(line);
        if (rows == 0) cols = values.size();
        if (values.size() != cols) throw FormatError("CSV: ragged rows");
        data.insert(data.end(), values.begin(), values.end());
        ++rows;
    }
    return DenseMatrix(rows, cols, std::move(data));
}

void write_vector_csv(std::ostream& out, const DenseVector& v) {
    for (double d : v) out << fmt::format("{}\n", d);
}

DenseVector read_vector_csv(std::istream& in) {
    std::vector<double> data;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto values = parse_csv_line(line);
        if (values.size() != 1) throw FormatError("CSV: expected one value per line for a vector");
        data.push_back(values.front());
    }
    return DenseVector(std::move(data));
}

}  // namespace kz::io
