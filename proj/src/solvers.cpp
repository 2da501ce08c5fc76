#include "kaczmarz/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kz {

namespace {

using Clock = std::chrono::steady_clock;

/// Error trace and optional early stop against a reference solution.
class Monitor {
public:
    Monitor(const SolverConfig& config, const DenseVector* reference, std::size_t n)
        : stride_(config.trace_stride), epsilon_(config.stop_epsilon), ref_(reference) {
        if ((stride_ > 0 || epsilon_) && ref_ == nullptr) {
            throw std::invalid_argument("error trace or stopping test requires a reference solution");
        }
        if (ref_ && ref_->size() != n) {
            throw DimensionError("reference solution length must equal the number of columns");
        }
    }

    /// Record iteration k; true means stop.
    bool observe(std::uint64_t k, const DenseVector& x, SolveRun& run) const {
        if (stride_ == 0 && !epsilon_) return false;
        double err = -1.0;
        if (stride_ > 0 && k % stride_ == 0) {
            err = squared_distance(x.span(), ref_->span());
            run.trace.push_back({k, err});
        }
        if (epsilon_) {
            if (err < 0.0) err = squared_distance(x.span(), ref_->span());
            if (err < *epsilon_) {
                run.converged = true;
                return true;
            }
        }
        return false;
    }

private:
    std::uint64_t stride_;
    std::optional<double> epsilon_;
    const DenseVector* ref_;
};

void check_system(const DenseSystem& system) {
    if (system.b.size() != system.A.rows()) {
        throw DimensionError("right-hand side length must equal the number of rows");
    }
}

const DenseVector* pick_reference(const DenseSystem& system, const DenseVector* reference) {
    return reference ? reference : system.reference();
}

[[noreturn]] void diverged(std::string_view method, std::uint64_t k) {
    throw DivergenceError(std::string(method) + ": non-finite iterate at iteration " +
                              std::to_string(k),
                          k);
}

void check_finite(const DenseVector& x, std::string_view method, std::uint64_t k) {
    for (double v : x) {
        if (!std::isfinite(v)) diverged(method, k);
    }
}

/// Column j of a row-major matrix dotted with a length-m vector.
double column_dot(const DenseMatrix& A, std::size_t j, std::span<const double> v) {
    const std::size_t n = A.cols();
    const double* a = A.data().data() + j;
    double s = 0.0;
    for (std::size_t i = 0; i < A.rows(); ++i) s += a[i * n] * v[i];
    return s;
}

void column_axpy(const DenseMatrix& A, std::size_t j, double scale, std::span<double> v) {
    const std::size_t n = A.cols();
    const double* a = A.data().data() + j;
    for (std::size_t i = 0; i < A.rows(); ++i) v[i] += scale * a[i * n];
}

std::vector<double> inverse_or_one(std::vector<double> diag) {
    for (double& d : diag) d = d > 0.0 ? 1.0 / d : 1.0;
    return diag;
}

struct CglsStep {
    std::uint64_t iteration;
    double normal_residual_sq;  // ||A^T r||^2 from the recurrence
};

/// Preconditioned CGLS for min ||b - A x|| starting from the given x. The
/// residual is computed directly from x at entry. `on_step` is called after
/// every step and returns true to stop. Returns (steps taken, exact zero
/// normal residual reached).
template <typename OnStep>
std::pair<std::uint64_t, bool> cgls_loop(const DenseMatrix& A, std::span<const double> b,
                                         std::span<double> x, std::span<const double> inv_diag,
                                         std::uint64_t max_iterations, OnStep&& on_step) {
    const std::size_t m = A.rows();
    const std::size_t n = A.cols();
    std::vector<double> r(m), s(n), z(n), p(n), q(m);
    residual_into(A, x, b, r);
    matvec_transpose_into(A, r, s);
    for (std::size_t j = 0; j < n; ++j) z[j] = inv_diag[j] * s[j];
    p = z;
    double gamma = dot(s, z);
    const double s0 = squared_norm(s);

    std::uint64_t k = 0;
    while (k < max_iterations) {
        if (gamma == 0.0) return {k, true};
        matvec_into(A, p, q);
        const double qq = squared_norm(q);
        if (!(qq > 0.0)) {
            if (squared_norm(s) <= 1e-28 * s0) return {k, true};
            throw BreakdownError("cgls: zero curvature direction at iteration " + std::to_string(k));
        }
        const double step = gamma / qq;
        if (!std::isfinite(step)) diverged("cgls", k);
        for (std::size_t j = 0; j < n; ++j) x[j] += step * p[j];
        for (std::size_t i = 0; i < m; ++i) r[i] -= step * q[i];
        ++k;
        matvec_transpose_into(A, r, s);
        for (std::size_t j = 0; j < n; ++j) z[j] = inv_diag[j] * s[j];
        const double gamma_next = dot(s, z);
        if (on_step(CglsStep{k, squared_norm(s)})) break;
        const double beta = gamma_next / gamma;
        gamma = gamma_next;
        for (std::size_t j = 0; j < n; ++j) p[j] = z[j] + beta * p[j];
    }
    return {k, false};
}

}  // namespace

// ---------------------------------------------------------------------------

Method parse_method(std::string_view id) {
    for (Method m : kAllMethods) {
        if (to_string(m) == id) return m;
    }
    throw std::invalid_argument("unknown method id '" + std::string(id) + "'");
}

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::CK: return "ck";
        case Method::RK: return "rk";
        case Method::SRK: return "srk";
        case Method::SRKWOR: return "srkwor";
        case Method::SRKHalton: return "srk-halton";
        case Method::SRKSobol: return "srk-sobol";
        case Method::GRK: return "grk";
        case Method::NSSRK: return "nssrk";
        case Method::GSSRK: return "gssrk";
        case Method::REK: return "rek";
        case Method::RGS: return "rgs";
        case Method::RKA: return "rka";
        case Method::Cimmino: return "cimmino";
        case Method::CG: return "cg";
        case Method::CGLS: return "cgls";
    }
    return "?";
}

bool is_randomized(Method m) noexcept {
    switch (m) {
        case Method::CK:
        case Method::SRKHalton:
        case Method::SRKSobol:
        case Method::Cimmino:
        case Method::CG:
        case Method::CGLS: return false;
        default: return true;
    }
}

std::optional<SelectorSpec> kaczmarz_selector(Method m) {
    SelectorSpec spec;
    switch (m) {
        case Method::CK: spec.kind = SelectorKind::Cyclic; break;
        case Method::RK: spec.kind = SelectorKind::NormWeighted; break;
        case Method::SRK: spec.kind = SelectorKind::Uniform; break;
        case Method::SRKWOR: spec.kind = SelectorKind::WithoutReplacement; break;
        case Method::SRKHalton: spec.kind = SelectorKind::Halton; break;
        case Method::SRKSobol: spec.kind = SelectorKind::Sobol; break;
        case Method::GRK: spec.kind = SelectorKind::Greedy; break;
        case Method::NSSRK: spec.kind = SelectorKind::NonRepetitive; break;
        case Method::GSSRK: spec.kind = SelectorKind::GramianSelectable; break;
        default: return std::nullopt;
    }
    return spec;
}

void SolverConfig::validate() const {
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (rka_threads < 1) throw std::invalid_argument("rka_threads (q) must be at least 1");
    if (!std::isfinite(alpha)) throw std::invalid_argument("alpha must be finite");
    if (stop_epsilon && !(*stop_epsilon > 0.0)) throw std::invalid_argument("stop_epsilon must be positive");
    if (halton_base < 2) throw std::invalid_argument("halton base must be at least 2");
}

bool check_convergence(std::span<const double> x, std::span<const double> reference, double epsilon) {
    return squared_distance(x, reference) < epsilon;
}

double rka_optimal_alpha(std::size_t q, double s_min, double s_max) {
    if (q < 1) throw std::invalid_argument("rka_optimal_alpha: q must be at least 1");
    const double qd = static_cast<double>(q);
    if (q == 1 || s_max - s_min <= 1.0 / (qd - 1.0)) {
        return qd / (1.0 + (qd - 1.0) * s_min);
    }
    return 2.0 * qd / (1.0 + (qd - 1.0) * (s_min + s_max));
}

SolveRun solve(const DenseSystem& system, const SolverConfig& config, const DenseVector* reference) {
    if (auto spec = kaczmarz_selector(config.method)) {
        spec->shuffle = config.wor_shuffle;
        spec->storage = config.wor_storage;
        spec->halton_base = config.halton_base;
        return run_kaczmarz(system, *spec, config, reference);
    }
    switch (config.method) {
        case Method::REK: return run_rek(system, config, reference);
        case Method::RGS: return run_rgs(system, config, reference);
        case Method::RKA: return run_rka(system, config, reference);
        case Method::Cimmino: return run_cimmino(system, config, reference);
        case Method::CG: return run_cg(system, config, reference);
        case Method::CGLS: return run_cgls(system, config, reference);
        default: break;
    }
    throw std::logic_error("solve: unhandled method");
}

// ---------------------------------------------------------------------------

namespace {

/// Without-replacement sampling over a physically reordered copy of the
/// system, rebuilt whenever the selector reshuffles.
SolveRun run_wor_materialized(const DenseSystem& system, const SelectorSpec& spec,
                              const SolverConfig& config, const Monitor& monitor) {
    const auto& A = system.A;
    SolveRun run;
    run.x = DenseVector(A.cols());
    Xoshiro256 rng(config.seed);
    WithoutReplacementSelector sel(A.rows(), spec.shuffle, rng);

    const auto t0 = Clock::now();
    auto reorder = [&](DenseVector& b_out) {
        const auto perm = sel.permutation();
        for (std::size_t s = 0; s < perm.size(); ++s) b_out[s] = system.b[perm[s]];
        return A.permute_rows(perm);
    };
    DenseVector b_work(A.rows());
    DenseMatrix A_work = reorder(b_work);
    std::uint64_t generation = sel.generation();

    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            const std::size_t slot = sel.next_slot(rng);
            if (sel.generation() != generation) {
                A_work = reorder(b_work);
                generation = sel.generation();
            }
            const double step =
                project_row_inplace(run.x.span(), A_work, slot, b_work[slot], config.alpha);
            if (!std::isfinite(step)) diverged("srkwor", k);
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "srkwor", run.iterations);
    return run;
}

}  // namespace

SolveRun run_kaczmarz(const DenseSystem& system, const SelectorSpec& spec, const SolverConfig& config,
                      const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const auto& b = system.b;
    const Monitor monitor(config, pick_reference(system, reference), A.cols());

    if (spec.kind == SelectorKind::WithoutReplacement &&
        spec.storage == RowStorage::MaterializedReorder) {
        return run_wor_materialized(system, spec, config, monitor);
    }

    SolveRun run;
    run.x = DenseVector(A.cols());
    RowSelector selector(spec, A, config.seed);

    const auto t0 = Clock::now();
    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            const auto i = selector.next(run.x.span(), b.span());
            if (!i) {
                run.converged = true;
                break;
            }
            const double step = project_row_inplace(run.x.span(), A, *i, b[*i], config.alpha);
            if (!std::isfinite(step)) diverged(to_string(spec), k);
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, to_string(spec), run.iterations);
    return run;
}

SolveRun run_rek(const DenseSystem& system, const SolverConfig& config, const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const auto& b = system.b;
    const Monitor monitor(config, pick_reference(system, reference), A.cols());

    SolveRun run;
    run.x = DenseVector(A.cols());
    DenseVector z = b;
    Xoshiro256 rng(config.seed);
    const ColumnWeightedSelector columns(A);
    const NormWeightedSelector rows(A);
    const auto col_norms = columns.column_norms_sq();

    const auto t0 = Clock::now();
    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            const std::size_t j = columns.next(rng);
            const std::size_t i = rows.next(rng);
            // Project z onto the orthogonal complement of column j.
            const double zc = column_dot(A, j, z.span()) / col_norms[j];
            column_axpy(A, j, -zc, z.span());
            // Kaczmarz step against b - z with the updated z.
            const auto a = A.row(i);
            const double coef = (b[i] - z[i] - dot(a, run.x.span())) / A.row_norm_sq(i);
            if (!std::isfinite(coef)) diverged("rek", k);
            for (std::size_t c = 0; c < a.size(); ++c) run.x[c] += coef * a[c];
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "rek", run.iterations);
    run.auxiliary = std::move(z);
    return run;
}

SolveRun run_rgs(const DenseSystem& system, const SolverConfig& config, const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const Monitor monitor(config, pick_reference(system, reference), A.cols());

    SolveRun run;
    run.x = DenseVector(A.cols());
    DenseVector r = system.b;  // b - A x0 with x0 = 0
    Xoshiro256 rng(config.seed);
    const ColumnWeightedSelector columns(A);
    const auto col_norms = columns.column_norms_sq();

    const auto t0 = Clock::now();
    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            const std::size_t j = columns.next(rng);
            const double step = column_dot(A, j, r.span()) / col_norms[j];
            if (!std::isfinite(step)) diverged("rgs", k);
            run.x[j] += step;
            column_axpy(A, j, -step, r.span());
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "rgs", run.iterations);
    run.auxiliary = std::move(r);
    return run;
}

SolveRun run_rka(const DenseSystem& system, const SolverConfig& config, const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const auto& b = system.b;
    if (!config.row_weights.empty() && config.row_weights.size() != A.rows()) {
        throw DimensionError("rka: row_weights length must equal the number of rows");
    }
    const Monitor monitor(config, pick_reference(system, reference), A.cols());

    SolveRun run;
    run.x = DenseVector(A.cols());
    std::vector<double> delta(A.cols());
    Xoshiro256 rng(config.seed);
    const NormWeightedSelector rows(A);
    const double q = static_cast<double>(config.rka_threads);

    const auto t0 = Clock::now();
    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            std::fill(delta.begin(), delta.end(), 0.0);
            // All q updates are computed from the same iterate.
            for (std::size_t t = 0; t < config.rka_threads; ++t) {
                const std::size_t i = rows.next(rng);
                const double w = config.row_weights.empty() ? config.alpha : config.row_weights[i];
                const auto a = A.row(i);
                const double coef = (b[i] - dot(a, run.x.span())) / A.row_norm_sq(i);
                const double scale = w * coef / q;
                if (!std::isfinite(scale)) diverged("rka", k);
                for (std::size_t c = 0; c < a.size(); ++c) delta[c] += scale * a[c];
            }
            for (std::size_t c = 0; c < delta.size(); ++c) run.x[c] += delta[c];
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "rka", run.iterations);
    return run;
}

SolveRun run_cimmino(const DenseSystem& system, const SolverConfig& config,
                     const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const Monitor monitor(config, pick_reference(system, reference), A.cols());

    SolveRun run;
    run.x = DenseVector(A.cols());
    const double m = static_cast<double>(A.rows());
    std::vector<double> d(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) d[i] = config.alpha / (m * A.row_norm_sq(i));
    std::vector<double> r(A.rows());
    std::vector<double> step(A.cols());

    const auto t0 = Clock::now();
    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            residual_into(A, run.x.span(), system.b.span(), r);
            for (std::size_t i = 0; i < r.size(); ++i) r[i] *= d[i];
            matvec_transpose_into(A, r, step);
            for (std::size_t c = 0; c < step.size(); ++c) run.x[c] += step[c];
            if (!std::isfinite(squared_norm(step))) diverged("cimmino", k);
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "cimmino", run.iterations);
    return run;
}

NormalEquations form_normal_equations(const DenseMatrix& A, const DenseVector& b) {
    if (b.size() != A.rows()) throw DimensionError("form_normal_equations: dimension mismatch");
    const std::size_t n = A.cols();
    NormalEquations ne{n, std::vector<double>(n * n, 0.0), DenseVector(n)};
    // Accumulate the upper triangle row by row, then mirror.
    for (std::size_t i = 0; i < A.rows(); ++i) {
        const auto a = A.row(i);
        for (std::size_t p = 0; p < n; ++p) {
            const double ap = a[p];
            double* g = ne.gram.data() + p * n;
            for (std::size_t q = p; q < n; ++q) g[q] += ap * a[q];
            ne.rhs[p] += ap * b[i];
        }
    }
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < p; ++q) ne.gram[p * n + q] = ne.gram[q * n + p];
    }
    return ne;
}

SolveRun run_cg(const DenseSystem& system, const SolverConfig& config, const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const Monitor monitor(config, pick_reference(system, reference), A.cols());
    const std::size_t n = A.cols();

    SolveRun run;
    run.x = DenseVector(n);
    std::vector<double> r(n), z(n), p(n), q(n), inv_diag(n);

    const auto t0 = Clock::now();
    const NormalEquations ne = form_normal_equations(A, system.b);
    for (std::size_t j = 0; j < n; ++j) {
        const double d = ne.gram[j * n + j];
        inv_diag[j] = d > 0.0 ? 1.0 / d : 1.0;
    }
    auto gram_times = [&](std::span<const double> v, std::span<double> out) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = dot(std::span<const double>(ne.gram.data() + i * n, n), v);
        }
    };

    std::copy(ne.rhs.begin(), ne.rhs.end(), r.begin());
    for (std::size_t j = 0; j < n; ++j) z[j] = inv_diag[j] * r[j];
    p = z;
    double rz = dot(r, z);
    const double r0 = squared_norm(r);

    if (!monitor.observe(0, run.x, run)) {
        for (std::uint64_t k = 0; k < config.max_iterations; ++k) {
            if (rz == 0.0) {
                run.converged = true;
                break;
            }
            gram_times(p, q);
            const double pq = dot(p, q);
            if (!(pq > 0.0)) {
                if (squared_norm(r) <= 1e-28 * r0) {
                    run.converged = true;
                    break;
                }
                throw BreakdownError("cg: non-positive curvature at iteration " + std::to_string(k));
            }
            const double step = rz / pq;
            if (!std::isfinite(step)) diverged("cg", k);
            for (std::size_t j = 0; j < n; ++j) {
                run.x[j] += step * p[j];
                r[j] -= step * q[j];
            }
            ++run.iterations;
            if (monitor.observe(run.iterations, run.x, run)) break;
            for (std::size_t j = 0; j < n; ++j) z[j] = inv_diag[j] * r[j];
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t j = 0; j < n; ++j) p[j] = z[j] + beta * p[j];
        }
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "cg", run.iterations);
    return run;
}

SolveRun run_cgls(const DenseSystem& system, const SolverConfig& config,
                  const DenseVector* reference) {
    config.validate();
    check_system(system);
    const auto& A = system.A;
    const Monitor monitor(config, pick_reference(system, reference), A.cols());

    SolveRun run;
    run.x = DenseVector(A.cols());

    const auto t0 = Clock::now();
    const auto inv_diag = inverse_or_one(A.column_norms_sq());
    if (!monitor.observe(0, run.x, run)) {
        auto [steps, exact] = cgls_loop(A, system.b.span(), run.x.span(), inv_diag,
                                        config.max_iterations, [&](const CglsStep& s) {
                                            return monitor.observe(s.iteration, run.x, run);
                                        });
        run.iterations = steps;
        if (exact) run.converged = true;
    }
    run.wall_time = Clock::now() - t0;
    check_finite(run.x, "cgls", run.iterations);
    return run;
}

DenseVector least_squares_cgls(const DenseMatrix& A, const DenseVector& b, double tol,
                               std::uint64_t max_iterations) {
    if (b.size() != A.rows()) throw DimensionError("least_squares_cgls: dimension mismatch");
    const std::size_t n = A.cols();
    if (max_iterations == 0) max_iterations = 20 * n + 200;
    const auto inv_diag = inverse_or_one(A.column_norms_sq());

    DenseVector x(n);
    std::vector<double> r(A.rows()), s(n);
    auto normal_residual_inf = [&] {
        residual_into(A, x.span(), b.span(), r);
        matvec_transpose_into(A, r, s);
        double worst = 0.0;
        for (double v : s) worst = std::max(worst, std::abs(v));
        return worst;
    };

    // Restarted CGLS: each restart recomputes the residual from x, which
    // removes the drift of the recurrence.
    constexpr int kMaxRestarts = 30;
    double best = normal_residual_inf();
    for (int restart = 0; restart < kMaxRestarts && best > tol; ++restart) {
        const double start = best;
        cgls_loop(A, b.span(), x.span(), inv_diag, max_iterations, [&](const CglsStep& step) {
            return std::sqrt(step.normal_residual_sq) <= 1e-3 * tol ||
                   step.normal_residual_sq <= 1e-30 * start * start;
        });
        best = normal_residual_inf();
        if (!(best < start)) break;
    }
    if (!(best <= tol)) {
        throw BreakdownError("least_squares_cgls: normal-equations residual " + std::to_string(best) +
                             " above tolerance " + std::to_string(tol));
    }
    check_finite(x, "cgls", 0);
    return x;
}

}  // namespace kz
