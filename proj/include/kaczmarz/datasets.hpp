#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kaczmarz/linalg.hpp"

namespace kz {

enum class DatasetFamily {
    DS1,  // rows ~ N(mu_i, sigma_i), mu_i ~ U(-5,5), sigma_i ~ U(1,20): contrasting row norms
    DS2,  // coherent: consecutive rows differ in exactly 5 entries, entries ~ N(2,20)
    DS3,  // DS1 with b perturbed by N(0,1) noise: inconsistent
};

DatasetFamily parse_family(std::string_view text);  // ds1/ds2/ds3, case-insensitive
std::string_view to_string(DatasetFamily f) noexcept;

struct DatasetSpec {
    DatasetFamily family = DatasetFamily::DS1;
    std::size_t m_max = 0;
    std::size_t n_max = 0;
    std::uint64_t seed = 0;
    double noise_sigma = 1.0;                 // DS3 only
    std::optional<double> fixed_row_sigma;    // DS1/DS3 near-equal-norm variant

    void validate() const;
};

struct GeneratedSystem {
    DenseSystem system;
    DatasetSpec spec;
    DenseVector x_star;                   // solution of the consistent part
    std::optional<DenseVector> noise;     // DS3: b = A x_star + noise
    std::optional<std::uint64_t> noise_seed;

    std::size_t rows() const noexcept { return system.A.rows(); }
    std::size_t cols() const noexcept { return system.A.cols(); }
};

/// Tolerance on ||A^T (b - A x_ls)||_inf used when computing DS3 references.
inline constexpr double kLeastSquaresTolerance = 1e-9;

GeneratedSystem gen_ds1(const DatasetSpec& spec);
GeneratedSystem gen_ds2(const DatasetSpec& spec);
GeneratedSystem gen_ds3(const DatasetSpec& spec);
GeneratedSystem generate(const DatasetSpec& spec);

/// Leading m x n subsystem. x_star is truncated and b recomputed as
/// A_crop x_star_crop (plus the leading noise entries for DS3, whose x_ls is
/// recomputed).
GeneratedSystem crop(const GeneratedSystem& g, std::size_t m, std::size_t n);

/// Sub-seed for the DS3 noise stream.
std::uint64_t noise_seed_for(std::uint64_t seed) noexcept;

// ---------------------------------------------------------------------------
// Dataset container: KZM1 matrix at `path`, plus `<stem>.rhs.kzm`,
// `<stem>.ref.kzm` (reference solution: x* or x_ls) and a JSON sidecar
// `<stem>.json`.

struct DatasetFiles {
    std::filesystem::path matrix;
    std::filesystem::path rhs;
    std::filesystem::path reference;
    std::filesystem::path sidecar;
};

DatasetFiles dataset_files(const std::filesystem::path& matrix_path);

/// Writes a generated dataset; returns the paths written.
DatasetFiles write_dataset(const std::filesystem::path& matrix_path, const GeneratedSystem& g);

/// Writes an arbitrary system (family recorded as "custom"). The reference
/// is written when present.
DatasetFiles write_system(const std::filesystem::path& matrix_path, const DenseSystem& system);

/// Loads a container written by write_dataset/write_system. Accepts either
/// the matrix path or the sidecar path. DS3 references load as x_ls.
DenseSystem load_dataset(const std::filesystem::path& path);

}  // namespace kz
