#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "kaczmarz/linalg.hpp"
#include "kaczmarz/sampling.hpp"

namespace kz {

/// A non-finite value appeared in the iterate.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::uint64_t iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    std::uint64_t iteration() const noexcept { return iteration_; }

private:
    std::uint64_t iteration_;
};

/// A Krylov method hit a zero or negative curvature direction with a nonzero
/// residual.
class BreakdownError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Method {
    CK,
    RK,
    SRK,
    SRKWOR,
    SRKHalton,
    SRKSobol,
    GRK,
    NSSRK,
    GSSRK,
    REK,
    RGS,
    RKA,
    Cimmino,
    CG,
    CGLS,
};

inline constexpr Method kAllMethods[] = {
    Method::CK,    Method::RK,  Method::SRK, Method::SRKWOR,  Method::SRKHalton,
    Method::SRKSobol, Method::GRK, Method::NSSRK, Method::GSSRK, Method::REK,
    Method::RGS,   Method::RKA, Method::Cimmino, Method::CG, Method::CGLS,
};

/// ck, rk, srk, srkwor, srk-halton, srk-sobol, grk, nssrk, gssrk, rek, rgs,
/// rka, cimmino, cg, cgls
Method parse_method(std::string_view id);
std::string_view to_string(Method m) noexcept;

/// Whether the seed affects the run. Deterministic methods need only one
/// run per measurement.
bool is_randomized(Method m) noexcept;

/// Row selector used by the single-row Kaczmarz engine for `m`, or nullopt
/// for methods with their own engine (rek, rgs, rka, cimmino, cg, cgls).
std::optional<SelectorSpec> kaczmarz_selector(Method m);

struct SolverConfig {
    Method method = Method::RK;
    std::uint64_t max_iterations = 1000;
    double alpha = 1.0;                 // relaxation; uniform RKA weight; Cimmino lambda
    std::size_t rka_threads = 1;        // q, rows averaged per RKA step
    std::vector<double> row_weights;    // RKA w_i; empty means w_i = alpha
    std::uint64_t seed = 0;
    std::uint64_t trace_stride = 0;     // 0 = no error trace
    std::optional<double> stop_epsilon; // stop once ||x - ref||^2 < eps

    // Selector options for the Kaczmarz family.
    ShufflePolicy wor_shuffle = ShufflePolicy::Once;
    RowStorage wor_storage = RowStorage::TwoFoldIndexing;
    unsigned halton_base = 2;

    void validate() const;
};

struct TracePoint {
    std::uint64_t iteration;
    double sq_error;
};

struct SolveRun {
    DenseVector x;
    std::uint64_t iterations = 0;
    std::vector<TracePoint> trace;
    std::chrono::nanoseconds wall_time{0};
    bool converged = false;  // stop_epsilon reached, or the residual is exactly zero
    std::optional<DenseVector> auxiliary;  // final z for REK, final maintained residual for RGS
};

/// Dispatch on config.method. `reference` overrides system.reference() for
/// traces and the stopping test.
SolveRun solve(const DenseSystem& system, const SolverConfig& config,
               const DenseVector* reference = nullptr);

/// Single-row projection engine; the selector decides the method (CK, RK,
/// SRK, SRKWOR, SRK-Halton, SRK-Sobol, GRK, NSSRK, GSSRK).
SolveRun run_kaczmarz(const DenseSystem& system, const SelectorSpec& selector,
                      const SolverConfig& config, const DenseVector* reference = nullptr);

/// Each iteration projects z away from one column (drawn by column norm), then
/// takes a Kaczmarz step against b - z with the updated z.
SolveRun run_rek(const DenseSystem& system, const SolverConfig& config,
                 const DenseVector* reference = nullptr);
SolveRun run_rgs(const DenseSystem& system, const SolverConfig& config,
                 const DenseVector* reference = nullptr);
SolveRun run_rka(const DenseSystem& system, const SolverConfig& config,
                 const DenseVector* reference = nullptr);
SolveRun run_cimmino(const DenseSystem& system, const SolverConfig& config,
                     const DenseVector* reference = nullptr);

/// Preconditioned CG on A^T A x = A^T b (Jacobi preconditioner). Forming the
/// normal equations is inside the timed region.
SolveRun run_cg(const DenseSystem& system, const SolverConfig& config,
                const DenseVector* reference = nullptr);

/// CGLS on A with the column-norm diagonal preconditioner.
SolveRun run_cgls(const DenseSystem& system, const SolverConfig& config,
                  const DenseVector* reference = nullptr);

struct NormalEquations {
    std::size_t n;
    std::vector<double> gram;  // A^T A, n x n row-major
    DenseVector rhs;           // A^T b
};
NormalEquations form_normal_equations(const DenseMatrix& A, const DenseVector& b);

/// Least-squares solution by CGLS, iterated until ||A^T (b - A x)||_inf <=
/// tol (residual recomputed directly, not from the recurrence) or until
/// progress stalls.
DenseVector least_squares_cgls(const DenseMatrix& A, const DenseVector& b, double tol,
                               std::uint64_t max_iterations = 0);

/// Squared distance strictly below epsilon.
bool check_convergence(std::span<const double> x, std::span<const double> reference, double epsilon);

/// Optimal uniform RKA weight for consistent systems, with
/// s_min = sigma_min^2 / ||A||_F^2 and s_max = sigma_max^2 / ||A||_F^2.
double rka_optimal_alpha(std::size_t q, double s_min, double s_max);

}  // namespace kz
