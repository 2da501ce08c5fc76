#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "kaczmarz/datasets.hpp"
#include "kaczmarz/solvers.hpp"
#include "test_util.hpp"

using kz::DatasetFamily;

namespace {

kz::DatasetSpec spec(DatasetFamily f, std::size_t m, std::size_t n, std::uint64_t seed) {
    kz::DatasetSpec s;
    s.family = f;
    s.m_max = m;
    s.n_max = n;
    s.seed = seed;
    return s;
}

double inf_norm(const kz::DenseVector& v) {
    double r = 0.0;
    for (double e : v) r = std::max(r, std::abs(e));
    return r;
}

void expect_consistent(const kz::GeneratedSystem& g) {
    const auto r = kz::residual(g.system.A, g.x_star, g.system.b);
    EXPECT_LE(inf_norm(r), 1e-9 * std::max(1.0, inf_norm(g.system.b)));
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("kzm_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST(Ds1, ConsistentAndDeterministic) {
    const auto a = kz::generate(spec(DatasetFamily::DS1, 300, 30, 1));
    expect_consistent(a);
    ASSERT_TRUE(a.system.x_star);
    EXPECT_TRUE(kz::check_convergence(a.system.x_star->span(), a.x_star.span(), 1e-8));
    const auto b = kz::generate(spec(DatasetFamily::DS1, 300, 30, 1));
    EXPECT_EQ(a.system.A, b.system.A);
    EXPECT_EQ(a.system.b, b.system.b);
    EXPECT_FALSE(kz::generate(spec(DatasetFamily::DS1, 300, 30, 2)).system.A == a.system.A);
}

double row_norm_cv(const kz::DenseMatrix& A) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < A.rows(); ++i) {
        const double r = std::sqrt(A.row_norm_sq(i));
        mean += r;
        sq += r * r;
    }
    const double m = static_cast<double>(A.rows());
    mean /= m;
    return std::sqrt(sq / m - mean * mean) / mean;
}

TEST(Ds1, RowNormsAreDispersed) {
    EXPECT_GT(row_norm_cv(kz::generate(spec(DatasetFamily::DS1, 500, 50, 3)).system.A), 0.2);
}

TEST(Ds1, FixedRowSigmaNarrowsNorms) {
    auto s = spec(DatasetFamily::DS1, 500, 50, 3);
    const double spread = row_norm_cv(kz::generate(s).system.A);
    s.fixed_row_sigma = 10.0;
    const auto g = kz::generate(s);
    EXPECT_LT(row_norm_cv(g.system.A), 0.25 * spread);
    expect_consistent(g);
}

TEST(Ds2, ConsecutiveRowsDifferInFiveEntries) {
    const auto g = kz::generate(spec(DatasetFamily::DS2, 400, 30, 4));
    expect_consistent(g);
    const auto& A = g.system.A;
    for (std::size_t i = 1; i < A.rows(); ++i) {
        int diff = 0;
        for (std::size_t j = 0; j < A.cols(); ++j) diff += A(i, j) != A(i - 1, j);
        ASSERT_EQ(diff, 5) << "row " << i;
    }
}

TEST(Ds2, DeterministicAndRequiresFiveColumns) {
    EXPECT_EQ(kz::generate(spec(DatasetFamily::DS2, 50, 10, 9)).system.A,
              kz::generate(spec(DatasetFamily::DS2, 50, 10, 9)).system.A);
    try {
        kz::generate(spec(DatasetFamily::DS2, 50, 3, 9));
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("n < 5"), std::string::npos);
    }
    EXPECT_NO_THROW(kz::generate(spec(DatasetFamily::DS2, 5, 5, 9)));
}

TEST(Ds2, MoreCoherentThanDs1AtDeskSizes) {
    for (std::size_t m : {200u, 500u, 1000u, 2000u}) {
        for (std::size_t n : {10u, 20u, 50u, 100u}) {
            const double a2 = kz::max_consecutive_angle(kz::generate(spec(DatasetFamily::DS2, m, n, 7)).system.A);
            const double a1 = kz::max_consecutive_angle(kz::generate(spec(DatasetFamily::DS1, m, n, 7)).system.A);
            EXPECT_LT(a2, a1) << m << "x" << n;
        }
    }
}

TEST(Spec, RejectsUnderdetermined) {
    EXPECT_THROW(kz::generate(spec(DatasetFamily::DS1, 5, 10, 1)), std::invalid_argument);
    EXPECT_THROW(kz::generate(spec(DatasetFamily::DS1, 5, 0, 1)), std::invalid_argument);
    EXPECT_EQ(kz::parse_family("Ds3"), DatasetFamily::DS3);
    EXPECT_THROW(kz::parse_family("ds4"), std::invalid_argument);
}

TEST(Ds3, LeastSquaresOptimality) {
    const auto g = kz::generate(spec(DatasetFamily::DS3, 200, 20, 5));
    ASSERT_TRUE(g.system.x_ls);
    EXPECT_FALSE(g.system.x_star);
    const auto r = kz::residual(g.system.A, *g.system.x_ls, g.system.b);
    EXPECT_LE(inf_norm(kz::matvec_transpose(g.system.A, r)), 1e-8);
    EXPECT_GT(kz::squared_norm(r.span()), 0.0);
    const auto want = oracle::normal_equations_ls(testutil::to_rows(g.system.A), g.system.b.values());
    for (std::size_t j = 0; j < 20; ++j) EXPECT_NEAR((*g.system.x_ls)[j], want[j], 1e-9 * (1 + std::abs(want[j])));
}

TEST(Ds3, NoiseIsReproducibleFromSubSeed) {
    const auto a = kz::generate(spec(DatasetFamily::DS3, 60, 6, 11));
    const auto b = kz::generate(spec(DatasetFamily::DS3, 60, 6, 11));
    ASSERT_TRUE(a.noise_seed);
    EXPECT_EQ(*a.noise_seed, kz::noise_seed_for(11));
    EXPECT_EQ(a.system.b, b.system.b);
    EXPECT_EQ(*a.noise, *b.noise);
    const auto clean = kz::generate(spec(DatasetFamily::DS1, 60, 6, 11));
    EXPECT_EQ(a.system.A, clean.system.A);
    for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(a.system.b[i], clean.system.b[i] + (*a.noise)[i]);
}

TEST(Ds3, SingleColumnLeastSquaresIsTheMean) {
    const auto A = kz::DenseMatrix::from_rows({{1}, {1}, {1}});
    const auto b = testutil::gaussian_vector(3, 77);
    const auto x = kz::least_squares_cgls(A, b, 1e-14);
    EXPECT_NEAR(x[0], (b[0] + b[1] + b[2]) / 3, 1e-12);
}

TEST(Crop, FullSizeIsIdentity) {
    const auto g = kz::generate(spec(DatasetFamily::DS1, 40, 8, 2));
    const auto c = kz::crop(g, 40, 8);
    EXPECT_EQ(c.system.A, g.system.A);
    EXPECT_EQ(c.system.b, g.system.b);
    EXPECT_EQ(*c.system.x_star, *g.system.x_star);
}

TEST(Crop, RecomputesRhsAndComposes) {
    for (auto f : {DatasetFamily::DS1, DatasetFamily::DS2, DatasetFamily::DS3}) {
        const auto g = kz::generate(spec(f, 80, 12, 6));
        const auto c = kz::crop(g, 50, 9);
        EXPECT_EQ(c.rows(), 50u);
        EXPECT_EQ(c.cols(), 9u);
        if (f == DatasetFamily::DS3) {
            const auto r = kz::residual(c.system.A, *c.system.x_ls, c.system.b);
            EXPECT_LE(inf_norm(kz::matvec_transpose(c.system.A, r)), 1e-8);
        } else {
            expect_consistent(c);
        }
        const auto twice = kz::crop(kz::crop(g, 60, 10), 50, 9);
        EXPECT_EQ(twice.system.A, c.system.A);
        EXPECT_EQ(twice.system.b, c.system.b);
        EXPECT_EQ(twice.x_star, c.x_star);
    }
    const auto g = kz::generate(spec(DatasetFamily::DS1, 20, 5, 1));
    EXPECT_THROW(kz::crop(g, 21, 5), kz::DimensionError);
    EXPECT_THROW(kz::crop(g, 4, 5), kz::DimensionError);
}

TEST(Container, WriteAndLoadRoundTrip) {
    const auto dir = scratch_dir("container");
    for (auto f : {DatasetFamily::DS1, DatasetFamily::DS3}) {
        const auto g = kz::generate(spec(f, 30, 4, 8));
        const auto path = dir / (std::string(kz::to_string(f)) + ".kzm");
        const auto files = kz::write_dataset(path, g);
        for (const auto& p : {files.matrix, files.rhs, files.reference, files.sidecar})
            EXPECT_TRUE(std::filesystem::exists(p));

        std::ifstream in(files.sidecar);
        const auto j = nlohmann::json::parse(in);
        EXPECT_EQ(j["family"], kz::to_string(f));
        EXPECT_EQ(j["seed"], 8);
        EXPECT_EQ(j["prng"], kz::kPrngName);
        EXPECT_EQ(j["normal_algorithm"], kz::kNormalAlgorithm);
        EXPECT_EQ(j.contains("noise_seed"), f == DatasetFamily::DS3);

        for (const auto& p : {files.matrix, files.sidecar}) {
            const auto loaded = kz::load_dataset(p);
            EXPECT_EQ(loaded.A, g.system.A);
            EXPECT_EQ(loaded.b, g.system.b);
            EXPECT_EQ(loaded.x_ls.has_value(), f == DatasetFamily::DS3);
            EXPECT_EQ(*loaded.reference(), *g.system.reference());
        }
    }
    EXPECT_THROW(kz::load_dataset(dir / "missing.kzm"), std::runtime_error);
}
