#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "kaczmarz/datasets.hpp"
#include "kaczmarz/solvers.hpp"
#include "test_util.hpp"

using kz::DenseMatrix;
using kz::DenseSystem;
using kz::DenseVector;
using kz::Method;
using kz::SolverConfig;

namespace {

SolverConfig config(Method method, std::uint64_t iters, std::uint64_t seed = 0) {
    SolverConfig c;
    c.method = method;
    c.max_iterations = iters;
    c.seed = seed;
    return c;
}

DenseSystem one_by_one() {
    return DenseSystem{DenseMatrix::from_rows({{2}}), DenseVector{6}, DenseVector{3}, std::nullopt};
}

/// A = (1,1,1)^T, b = (0,1,2): x_LS = 1.
DenseSystem column_of_ones() {
    return DenseSystem{DenseMatrix::from_rows({{1}, {1}, {1}}), DenseVector{0, 1, 2}, std::nullopt, DenseVector{1}};
}

kz::GeneratedSystem ds(kz::DatasetFamily family, std::size_t m, std::size_t n, std::uint64_t seed) {
    kz::DatasetSpec spec;
    spec.family = family;
    spec.m_max = m;
    spec.n_max = n;
    spec.seed = seed;
    return kz::generate(spec);
}

double sigma_min_sq(const DenseMatrix& A) {
    return oracle::jacobi_eigenvalues(oracle::gram(testutil::to_rows(A))).front();
}

}  // namespace

TEST(Methods, IdsRoundTrip) {
    for (Method m : kz::kAllMethods) EXPECT_EQ(kz::parse_method(kz::to_string(m)), m);
    EXPECT_THROW(kz::parse_method("bogus"), std::invalid_argument);
    EXPECT_EQ(kz::to_string(Method::SRKHalton), "srk-halton");
}

TEST(SolverConfig, Validation) {
    auto c = config(Method::RK, 0);
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = config(Method::RKA, 10);
    c.rka_threads = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = config(Method::RK, 10);
    c.alpha = INFINITY;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Kaczmarz, CyclicSweepSolvesIdentity) {
    const DenseSystem s{DenseMatrix::identity(3), DenseVector{1, 2, 3}, DenseVector{1, 2, 3}, std::nullopt};
    const auto run = kz::solve(s, config(Method::CK, 3));
    EXPECT_EQ(run.x, (DenseVector{1, 2, 3}));
    EXPECT_EQ(run.iterations, 3u);
}

TEST(Kaczmarz, OneByOneEverySelector) {
    for (const char* sel : {"cyclic", "uniform", "norm", "wor:once", "wor:pass", "wor:pass:reorder", "halton:2",
                            "sobol", "grk", "nssrk", "gssrk"}) {
        const auto run = kz::run_kaczmarz(one_by_one(), kz::parse_selector_spec(sel), config(Method::RK, 1));
        EXPECT_EQ(run.x, DenseVector{3}) << sel;
    }
}

TEST(Kaczmarz, TraceMatchesHandProjections) {
    const DenseSystem s{DenseMatrix::from_rows({{1, 0}, {1, 1}}), DenseVector{1, 2}, DenseVector{1, 1}, std::nullopt};
    auto c = config(Method::CK, 8);
    c.trace_stride = 1;
    const auto run = kz::solve(s, c);
    ASSERT_EQ(run.trace.size(), 9u);
    oracle::Vector x{0, 0};
    const oracle::Matrix rows{{1, 0}, {1, 1}};
    const oracle::Vector b{1, 2}, xs{1, 1};
    EXPECT_EQ(run.trace[0].sq_error, 2.0);
    for (std::size_t k = 1; k <= 8; ++k) {
        x = oracle::project(x, rows[(k - 1) % 2], b[(k - 1) % 2]);
        EXPECT_EQ(run.trace[k].iteration, k);
        EXPECT_NEAR(run.trace[k].sq_error, oracle::sq_dist(x, xs), 1e-15);
    }
}

TEST(Kaczmarz, MaterializedReorderMatchesTwoFoldIndexing) {
    const auto g = ds(kz::DatasetFamily::DS1, 60, 8, 4);
    for (const char* base : {"wor:once", "wor:pass"}) {
        const auto two = kz::run_kaczmarz(g.system, kz::parse_selector_spec(base), config(Method::SRKWOR, 500, 9));
        const auto mat = kz::run_kaczmarz(g.system, kz::parse_selector_spec(std::string(base) + ":reorder"),
                                          config(Method::SRKWOR, 500, 9));
        EXPECT_EQ(two.x, mat.x) << base;
    }
}

TEST(Kaczmarz, GreedyStopsOnSolvedSystem) {
    const DenseSystem s{testutil::gaussian_matrix(6, 3, 1), DenseVector(6), DenseVector(3), std::nullopt};
    const auto run = kz::solve(s, config(Method::GRK, 100));
    EXPECT_EQ(run.iterations, 0u);
    EXPECT_TRUE(run.converged);
}

TEST(Kaczmarz, SeedDeterminism) {
    const auto g = ds(kz::DatasetFamily::DS1, 80, 10, 2);
    for (Method m : kz::kAllMethods) {
        auto c = config(m, 300, 1234);
        c.trace_stride = 7;
        const auto a = kz::solve(g.system, c);
        const auto b = kz::solve(g.system, c);
        ASSERT_EQ(a.x, b.x) << kz::to_string(m);
        ASSERT_EQ(a.trace.size(), b.trace.size());
        for (std::size_t k = 0; k < a.trace.size(); ++k) ASSERT_EQ(a.trace[k].sq_error, b.trace[k].sq_error);
    }
}

TEST(Kaczmarz, GramianSelectableMatchesNonRepetitiveOnDenseRows) {
    const auto g = ds(kz::DatasetFamily::DS1, 100, 10, 6);
    for (std::uint64_t k : {1u, 10u, 250u, 1000u}) {
        EXPECT_EQ(kz::solve(g.system, config(Method::GSSRK, k, 3)).x,
                  kz::solve(g.system, config(Method::NSSRK, k, 3)).x);
    }
}

TEST(Kaczmarz, DivergenceIsReported) {
    const auto g = ds(kz::DatasetFamily::DS1, 40, 5, 1);
    auto c = config(Method::RK, 100000, 1);
    c.alpha = 1e200;
    EXPECT_THROW(kz::solve(g.system, c), kz::DivergenceError);
}

TEST(Kaczmarz, RequiresReferenceForTraceAndStopping) {
    const DenseSystem s{DenseMatrix::identity(2), DenseVector{1, 1}, std::nullopt, std::nullopt};
    auto c = config(Method::RK, 5);
    c.trace_stride = 1;
    EXPECT_THROW(kz::solve(s, c), std::invalid_argument);
    c.trace_stride = 0;
    c.stop_epsilon = 1e-8;
    EXPECT_THROW(kz::solve(s, c), std::invalid_argument);
    c.stop_epsilon.reset();
    EXPECT_NO_THROW(kz::solve(s, c));
}

TEST(Kaczmarz, StopsAtEpsilon) {
    const auto g = ds(kz::DatasetFamily::DS1, 100, 10, 8);
    auto c = config(Method::RK, 100000, 5);
    c.stop_epsilon = 1e-8;
    const auto run = kz::solve(g.system, c);
    EXPECT_TRUE(run.converged);
    EXPECT_LT(run.iterations, 100000u);
    EXPECT_TRUE(kz::check_convergence(run.x.span(), g.x_star.span(), 1e-8));
    c.max_iterations = run.iterations - 1;
    c.stop_epsilon.reset();
    EXPECT_FALSE(kz::check_convergence(kz::solve(g.system, c).x.span(), g.x_star.span(), 1e-8));
}

TEST(CheckConvergence, Examples) {
    const std::vector<double> ref{0.0, 0.0};
    EXPECT_TRUE(kz::check_convergence(ref, ref, 1e-300));
    const std::vector<double> at{1e-4, 0.0};
    ASSERT_EQ(kz::squared_distance(at, ref), 1e-8);
    EXPECT_FALSE(kz::check_convergence(at, ref, 1e-8));
    EXPECT_FALSE(kz::check_convergence(std::vector<double>{1, 0}, ref, 0.5));
    EXPECT_THROW(kz::check_convergence(std::vector<double>{1}, ref, 0.5), kz::DimensionError);
}

TEST(RkBound, MeanErrorWithinExpectedRate) {
    const auto g = ds(kz::DatasetFamily::DS1, 50, 10, 2024);
    const auto& A = g.system.A;
    const double rate = 1.0 - sigma_min_sq(A) / A.frob_norm_sq();
    const double x0 = kz::squared_norm(g.x_star.span());
    for (std::uint64_t k : {10u, 50u, 100u}) {
        double mean = 0.0;
        for (std::uint64_t s = 0; s < 200; ++s) {
            mean += kz::squared_distance(kz::solve(g.system, config(Method::RK, k, s)).x.span(), g.x_star.span());
        }
        mean /= 200;
        EXPECT_LE(mean, 1.1 * std::pow(rate, static_cast<double>(k)) * x0) << "k=" << k;
    }
}

TEST(RkHorizon, InconsistentSystemPlateaus) {
    const auto g = ds(kz::DatasetFamily::DS3, 200, 20, 5);
    const auto& A = g.system.A;
    const auto& x_ls = *g.system.x_ls;
    const double r_ls = kz::squared_norm(kz::residual(A, x_ls, g.system.b).span());
    const double horizon = r_ls / sigma_min_sq(A);
    double mean = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        mean += kz::squared_distance(kz::solve(g.system, config(Method::RK, 20000, s)).x.span(), x_ls.span());
    }
    mean /= 50;
    EXPECT_LE(mean, 1.5 * horizon);
    EXPECT_GE(mean, 1e-3 * horizon);
}

TEST(Rek, IdentityDrivesZToZero) {
    const DenseSystem s{DenseMatrix::identity(4), DenseVector{1, -2, 3, 4}, DenseVector{1, -2, 3, 4}, std::nullopt};
    const auto run = kz::solve(s, config(Method::REK, 400, 3));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(run.x[j], s.b[j], 1e-12);
    ASSERT_TRUE(run.auxiliary);
    EXPECT_EQ(kz::squared_norm(run.auxiliary->span()), 0.0);
}

TEST(Rek, OneByOne) {
    const auto run = kz::solve(one_by_one(), config(Method::REK, 3));
    EXPECT_NEAR(run.x[0], 3.0, 1e-15);
    EXPECT_EQ((*run.auxiliary)[0], 0.0);
}

TEST(Rek, ColumnOfOnesMeanNearLeastSquares) {
    const auto s = column_of_ones();
    double mean = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) mean += kz::solve(s, config(Method::REK, 500, seed)).x[0];
    EXPECT_NEAR(mean / 50, 1.0, 0.05);
}

TEST(Rgs, IdentityCoordinatesJumpToRhs) {
    const DenseSystem s{DenseMatrix::identity(5), DenseVector{1, 2, 3, 4, 5}, DenseVector{1, 2, 3, 4, 5}, std::nullopt};
    auto c = config(Method::RGS, 1, 7);
    c.trace_stride = 1;
    // Run until every coordinate has been touched.
    for (std::uint64_t k = 1; k < 200; ++k) {
        c.max_iterations = k;
        const auto run = kz::solve(s, c);
        for (std::size_t j = 0; j < 5; ++j) EXPECT_TRUE(run.x[j] == 0.0 || run.x[j] == s.b[j]);
        if (run.x == s.b) return;
    }
    FAIL() << "not all coordinates touched";
}

TEST(Rgs, MaintainedResidualMatchesRecomputation) {
    const auto A = testutil::gaussian_matrix(50, 10, 3);
    const auto b = testutil::gaussian_vector(50, 4);
    const DenseSystem s{A, b, std::nullopt, std::nullopt};
    for (std::uint64_t k = 100; k <= 2000; k += 100) {
        const auto run = kz::solve(s, config(Method::RGS, k, 21));
        const auto r = kz::residual(A, run.x, b);
        for (std::size_t i = 0; i < 50; ++i) ASSERT_NEAR((*run.auxiliary)[i], r[i], 1e-10);
    }
}

TEST(Rgs, ColumnOfOnesReachesLeastSquares) {
    EXPECT_NEAR(kz::solve(column_of_ones(), config(Method::RGS, 200, 1)).x[0], 1.0, 0.02);
}

TEST(LeastSquares, RekAndRgsConvergeWhileRkStalls) {
    const auto g = ds(kz::DatasetFamily::DS3, 100, 10, 12);
    const auto& x_ls = *g.system.x_ls;
    const auto ref_oracle = oracle::normal_equations_ls(testutil::to_rows(g.system.A), g.system.b.values());
    for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(x_ls[j], ref_oracle[j], 1e-9 * (1 + std::abs(ref_oracle[j])));
    auto mean_error = [&](Method m, std::uint64_t iters) {
        double s = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            s += kz::squared_distance(kz::solve(g.system, config(m, iters, seed)).x.span(), x_ls.span());
        return s / 20;
    };
    EXPECT_LT(mean_error(Method::REK, 60000), 1e-6);
    EXPECT_LT(mean_error(Method::RGS, 60000), 1e-6);
    EXPECT_GT(mean_error(Method::RK, 60000), 1e-4);
}

TEST(Rka, SingleThreadEqualsRandomizedKaczmarz) {
    const auto g = ds(kz::DatasetFamily::DS1, 70, 9, 3);
    for (std::uint64_t k : {1u, 17u, 500u}) {
        for (std::uint64_t seed : {0u, 5u, 99u}) {
            EXPECT_EQ(kz::solve(g.system, config(Method::RKA, k, seed)).x,
                      kz::solve(g.system, config(Method::RK, k, seed)).x);
        }
    }
}

TEST(Rka, AveragedStepOnIdentity) {
    const DenseSystem s{DenseMatrix::identity(2), DenseVector{2, 4}, DenseVector{2, 4}, std::nullopt};
    bool saw_both = false;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        auto c = config(Method::RKA, 1, seed);
        c.rka_threads = 2;
        const auto x = kz::solve(s, c).x;
        const bool both = x == DenseVector{1, 2};
        EXPECT_TRUE(both || x == (DenseVector{2, 0}) || x == (DenseVector{0, 4}));
        saw_both |= both;
    }
    EXPECT_TRUE(saw_both);
}

TEST(Rka, OptimalAlphaBranches) {
    EXPECT_DOUBLE_EQ(kz::rka_optimal_alpha(2, 0.2, 0.8), 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(kz::rka_optimal_alpha(1, 0.2, 0.8), 1.0);
    EXPECT_DOUBLE_EQ(kz::rka_optimal_alpha(4, 0.1, 0.9), 8.0 / (1 + 3 * 1.0));
}

TEST(Rka, MoreThreadsLowerTheHorizon) {
    const auto g = ds(kz::DatasetFamily::DS3, 200, 20, 7);
    const auto& x_ls = *g.system.x_ls;
    auto mean_error = [&](std::size_t q) {
        double s = 0.0;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            auto c = config(Method::RKA, 20000, seed);
            c.rka_threads = q;
            s += kz::squared_distance(kz::solve(g.system, c).x.span(), x_ls.span());
        }
        return s / 50;
    };
    EXPECT_LT(mean_error(8), mean_error(1));
}

TEST(Cimmino, OneByOneSolvesInOneStep) {
    EXPECT_EQ(kz::solve(one_by_one(), config(Method::Cimmino, 1)).x, DenseVector{3});
}

TEST(Cimmino, IdentityContractsByOneOverM) {
    const std::size_t m = 4;
    const DenseSystem s{DenseMatrix::identity(m), DenseVector{4, 8, -4, 2}, DenseVector{4, 8, -4, 2}, std::nullopt};
    for (std::uint64_t k = 1; k <= 5; ++k) {
        const auto x = kz::solve(s, config(Method::Cimmino, k)).x;
        const double factor = 1.0 - std::pow(1.0 - 1.0 / m, static_cast<double>(k));
        for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(x[j], factor * s.b[j], 1e-14);
    }
}

TEST(Cimmino, ErrorDecreasesMonotonically) {
    const auto A = testutil::gaussian_matrix(20, 5, 9);
    const auto s = testutil::consistent_system(A, testutil::gaussian_vector(5, 10));
    auto c = config(Method::Cimmino, 1000);
    c.trace_stride = 1;
    const auto run = kz::solve(s, c);
    // Strict decrease until the error reaches the rounding floor.
    const double floor = 1e-26 * run.trace.front().sq_error;
    for (std::size_t k = 1; k < run.trace.size(); ++k) {
        if (run.trace[k - 1].sq_error > floor) {
            ASSERT_LT(run.trace[k].sq_error, run.trace[k - 1].sq_error) << "k=" << k;
        } else {
            ASSERT_LE(run.trace[k].sq_error, floor) << "k=" << k;
        }
    }
    EXPECT_GT(run.trace.size(), 100u);
}

TEST(Krylov, IdentityInOneIteration) {
    const DenseSystem s{DenseMatrix::identity(3), DenseVector{1, -2, 5}, DenseVector{1, -2, 5}, std::nullopt};
    for (Method m : {Method::CG, Method::CGLS}) {
        const auto x = kz::solve(s, config(m, 1)).x;
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(x[j], s.b[j], 1e-15) << kz::to_string(m);
    }
}

TEST(Krylov, SmallNormalEquationsExactInTwoSteps) {
    const auto A = DenseMatrix::from_rows({{1, 0}, {0, 2}, {1, 1}});
    const DenseVector b{1, 2, 4};
    // A^T A = [[2,1],[1,5]], A^T b = (5, 8); inverse is [[5,-1],[-1,2]] / 9.
    const DenseVector want{(5 * 5 - 8) / 9.0, (-5 + 2 * 8) / 9.0};
    const DenseSystem s{A, b, std::nullopt, want};
    for (Method m : {Method::CG, Method::CGLS}) {
        const auto x = kz::solve(s, config(m, 2)).x;
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(x[j], want[j], 1e-12) << kz::to_string(m);
    }
    const auto normal = kz::form_normal_equations(A, b);
    EXPECT_EQ(normal.gram, (std::vector<double>{2, 1, 1, 5}));
    EXPECT_EQ(normal.rhs, (DenseVector{5, 8}));
}

TEST(Krylov, CglsColumnOfOnesInOneStep) {
    EXPECT_NEAR(kz::solve(column_of_ones(), config(Method::CGLS, 1)).x[0], 1.0, 1e-12);
}

TEST(Krylov, LeastSquaresHelperMatchesOracle) {
    const auto A = testutil::gaussian_matrix(40, 6, 50);
    const auto b = testutil::gaussian_vector(40, 51);
    const auto x = kz::least_squares_cgls(A, b, 1e-12);
    const auto want = oracle::normal_equations_ls(testutil::to_rows(A), b.values());
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(x[j], want[j], 1e-10);
}

TEST(ConsistentMethods, ReachEpsilonOnSmallDs1) {
    const auto g = ds(kz::DatasetFamily::DS1, 200, 10, 3);
    for (Method m : kz::kAllMethods) {
        auto c = config(m, 2000000, 1);
        c.stop_epsilon = 1e-8;
        const auto run = kz::solve(g.system, c);
        EXPECT_TRUE(run.converged) << kz::to_string(m);
        EXPECT_LT(kz::squared_distance(run.x.span(), g.x_star.span()), 1e-8) << kz::to_string(m);
    }
}
