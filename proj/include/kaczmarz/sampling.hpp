#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kaczmarz/linalg.hpp"
#include "kaczmarz/random.hpp"

namespace kz {

/// Discrete distribution over {0, ..., size-1} as a normalized cumulative
/// table. Sampling is a binary search for the first entry strictly greater
/// than u, so zero-weight entries are never returned.
class DiscreteSampler {
public:
    DiscreteSampler() = default;
    explicit DiscreteSampler(std::span<const double> weights) { assign(weights); }

    /// Rebuild from nonnegative weights; at least one must be positive.
    void assign(std::span<const double> weights);

    std::size_t operator()(double u) const noexcept;
    std::size_t sample(Xoshiro256& rng) const noexcept { return (*this)(rng.uniform()); }

    std::size_t size() const noexcept { return cumulative_.size(); }
    std::span<const double> cumulative() const noexcept { return cumulative_; }
    double probability(std::size_t i) const noexcept {
        return i == 0 ? cumulative_[0] : cumulative_[i] - cumulative_[i - 1];
    }

private:
    std::vector<double> cumulative_;
};

// ---------------------------------------------------------------------------
// Elementary selectors. Randomized ones take the run's generator explicitly so
// that engines drawing rows and columns (REK) share a single stream.

/// i = k mod m. The counter is a u64 and wraps modulo 2^64.
class CyclicSelector {
public:
    explicit CyclicSelector(std::size_t m, std::uint64_t start = 0) : m_(m), k_(start) {}
    std::size_t next() noexcept { return static_cast<std::size_t>(k_++ % m_); }
    std::uint64_t counter() const noexcept { return k_; }

private:
    std::size_t m_;
    std::uint64_t k_;
};

/// floor(u * m), u uniform in [0, 1).
class UniformSelector {
public:
    explicit UniformSelector(std::size_t m) : m_(m) {}
    std::size_t next(Xoshiro256& rng) noexcept { return rng.index(m_); }

private:
    std::size_t m_;
};

/// P{i = l} = ||A_l||^2 / ||A||_F^2.
class NormWeightedSelector {
public:
    explicit NormWeightedSelector(const DenseMatrix& A) : dist_(A.row_norms_sq()) {}
    std::size_t next(Xoshiro256& rng) const noexcept { return dist_.sample(rng); }
    const DiscreteSampler& distribution() const noexcept { return dist_; }

private:
    DiscreteSampler dist_;
};

/// P{j = l} = ||A_(l)||^2 / ||A||_F^2 over columns.
class ColumnWeightedSelector {
public:
    explicit ColumnWeightedSelector(const DenseMatrix& A);
    std::size_t next(Xoshiro256& rng) const noexcept { return dist_.sample(rng); }
    const DiscreteSampler& distribution() const noexcept { return dist_; }
    std::span<const double> column_norms_sq() const noexcept { return col_norms_sq_; }

private:
    std::vector<double> col_norms_sq_;
    DiscreteSampler dist_;
};

enum class ShufflePolicy { Once, EachPass };
enum class RowStorage { TwoFoldIndexing, MaterializedReorder };

/// Sampling without replacement: cycle through a Fisher-Yates permutation,
/// optionally reshuffling after every full pass.
class WithoutReplacementSelector {
public:
    WithoutReplacementSelector(std::size_t m, ShufflePolicy policy, Xoshiro256& rng);

    std::size_t next(Xoshiro256& rng) { return permutation_[next_slot(rng)]; }

    /// Position within the current permutation that the next row comes from.
    std::size_t next_slot(Xoshiro256& rng);

    std::span<const std::size_t> permutation() const noexcept { return permutation_; }
    /// Rows drawn from the current pass; a reshuffle happens when the next pass starts.
    std::size_t cursor() const noexcept { return cursor_; }
    ShufflePolicy policy() const noexcept { return policy_; }
    /// Number of shuffles performed so far (1 after construction).
    std::uint64_t generation() const noexcept { return generation_; }

private:
    std::vector<std::size_t> permutation_;
    std::size_t cursor_ = 0;
    ShufflePolicy policy_;
    std::uint64_t generation_ = 0;
};

/// Radical inverse of n in the given base.
double radical_inverse(std::uint64_t n, unsigned base) noexcept;

/// One-dimensional Halton (van der Corput) sequence; the first point is the
/// radical inverse of index 1.
class HaltonSequence {
public:
    explicit HaltonSequence(unsigned base = 2);
    double next() noexcept { return radical_inverse(++index_, base_); }
    std::uint64_t index() const noexcept { return index_; }
    unsigned base() const noexcept { return base_; }

private:
    unsigned base_;
    std::uint64_t index_ = 0;
};

/// One-dimensional Sobol sequence with direction numbers v_k = 2^-k, generated
/// in Gray-code order: x_n = x_{n-1} XOR v_c, c = position of the lowest zero
/// bit of n-1. The origin x_0 = 0 is not emitted. Points are kept on a 2^-53
/// grid, so the stream is exact for 2^53 - 1 draws.
class SobolSequence {
public:
    static constexpr int kBits = 53;

    double next() noexcept {
        const int c = std::countr_one(index_);
        state_ ^= std::uint64_t{1} << (kBits - 1 - c);
        ++index_;
        return static_cast<double>(state_) * 0x1.0p-53;
    }
    std::uint64_t index() const noexcept { return index_; }

private:
    std::uint64_t index_ = 0;
    std::uint64_t state_ = 0;
};

/// floor(u * m), clamped to m - 1.
std::size_t quasirandom_row(double u, std::size_t m) noexcept;

template <typename Sequence>
class QuasirandomSelector {
public:
    QuasirandomSelector(std::size_t m, Sequence seq) : m_(m), seq_(std::move(seq)) {}
    std::size_t next() noexcept { return quasirandom_row(seq_.next(), m_); }
    const Sequence& sequence() const noexcept { return seq_; }

private:
    std::size_t m_;
    Sequence seq_;
};

/// The greedy candidate set for one iterate:
///   eps = 1/2 * ( max_i |r_i|^2 / ||A_i||^2 / ||r||^2 + 1 / ||A||_F^2 )
///   U   = { i : |r_i|^2 >= eps * ||r||^2 * ||A_i||^2 }
/// with r = b - A x.
struct GreedyCandidates {
    double residual_norm_sq = 0.0;
    double epsilon = 0.0;
    std::size_t argmax = 0;              // first index attaining the max ratio
    std::vector<std::size_t> members;    // U, ascending
    std::vector<double> member_weights;  // |r_i|^2 for i in U
    bool fallback_used = false;          // rounding emptied U; argmax used alone
};

/// Fills `residual` with b - A x and computes the candidate set. When the
/// residual is exactly zero the candidate set is empty.
void greedy_candidates(const DenseMatrix& A, std::span<const double> x, std::span<const double> b,
                       std::span<double> residual, GreedyCandidates& out);

class GreedySelector {
public:
    explicit GreedySelector(const DenseMatrix& A) : A_(&A), residual_(A.rows()) {}

    /// Row drawn with probability |r_i|^2 / ||r~||^2 over the candidate set, or
    /// nullopt if the residual is exactly zero.
    std::optional<std::size_t> next(std::span<const double> x, std::span<const double> b,
                                    Xoshiro256& rng);

    const GreedyCandidates& last() const noexcept { return cand_; }
    std::span<const double> residual() const noexcept { return residual_; }

private:
    const DenseMatrix* A_;
    std::vector<double> residual_;
    GreedyCandidates cand_;
    DiscreteSampler dist_;
};

enum class SelectableRule {
    NonRepetitive,  // S_{k+1} = [m] \ {i_k}
    Gramian,        // S_{k+1} = (S_k U {j : G_{i_k j} != 0}) \ {i_k}
};

/// Norm-weighted sampling restricted to a selectable set S_k, by rejection.
/// Gramian entries count as zero when |<A_i, A_j>| <= tol * ||A_i|| * ||A_j||;
/// rows of the sparsity pattern are computed the first time a row is used.
class SelectableSetSelector {
public:
    static constexpr double kOrthogonalityTol = 1e-12;

    SelectableSetSelector(const DenseMatrix& A, SelectableRule rule);

    /// Sample from S_k, then apply the update rule.
    std::size_t next(Xoshiro256& rng) {
        const std::size_t i = sample(rng);
        update(i);
        return i;
    }

    /// Norm-weighted draw restricted to S_k. An empty S_k falls back to the
    /// full row set for this draw and counts an anomaly.
    std::size_t sample(Xoshiro256& rng);
    void update(std::size_t i_k);

    bool contains(std::size_t i) const noexcept { return (set_[i / 64] >> (i % 64)) & 1U; }
    std::size_t selectable_count() const noexcept { return count_; }
    std::uint64_t anomalies() const noexcept { return anomalies_; }
    SelectableRule rule() const noexcept { return rule_; }

private:
    const std::vector<std::uint64_t>& gram_pattern(std::size_t i);

    const DenseMatrix* A_;
    SelectableRule rule_;
    NormWeightedSelector weighted_;
    std::vector<std::uint64_t> set_;
    std::size_t count_;
    std::vector<std::vector<std::uint64_t>> pattern_;
    std::uint64_t anomalies_ = 0;
    std::vector<double> scratch_;
};

// ---------------------------------------------------------------------------
// Selector specification strings and the type-erased per-run selector.

enum class SelectorKind {
    Cyclic,
    Uniform,
    NormWeighted,
    WithoutReplacement,
    Halton,
    Sobol,
    Greedy,
    NonRepetitive,
    GramianSelectable,
};

struct SelectorSpec {
    SelectorKind kind = SelectorKind::Cyclic;
    ShufflePolicy shuffle = ShufflePolicy::Once;
    RowStorage storage = RowStorage::TwoFoldIndexing;
    unsigned halton_base = 2;

    friend bool operator==(const SelectorSpec&, const SelectorSpec&) = default;
};

/// Parses `cyclic`, `uniform`, `norm`, `wor:once`, `wor:pass` (optionally
/// suffixed `:reorder`), `halton:<base>`, `sobol`, `grk`, `nssrk`, `gssrk`.
SelectorSpec parse_selector_spec(std::string_view text);
std::string to_string(const SelectorSpec& spec);

/// Whether the selector looks at the live iterate.
constexpr bool needs_iterate(SelectorKind kind) noexcept { return kind == SelectorKind::Greedy; }

class RowSelector {
public:
    using Impl = std::variant<CyclicSelector, UniformSelector, NormWeightedSelector,
                              WithoutReplacementSelector, QuasirandomSelector<HaltonSequence>,
                              QuasirandomSelector<SobolSequence>, GreedySelector,
                              SelectableSetSelector>;

    /// `A` must outlive the selector.
    RowSelector(const SelectorSpec& spec, const DenseMatrix& A, std::uint64_t seed);

    /// Next row. Only the greedy selector returns nullopt (zero residual).
    std::optional<std::size_t> next(std::span<const double> x, std::span<const double> b);

    const SelectorSpec& spec() const noexcept { return spec_; }
    Xoshiro256& rng() noexcept { return rng_; }
    Impl& impl() noexcept { return impl_; }
    const Impl& impl() const noexcept { return impl_; }

private:
    static Impl make_impl(const SelectorSpec& spec, const DenseMatrix& A, Xoshiro256& rng);

    SelectorSpec spec_;
    Xoshiro256 rng_;
    Impl impl_;
};

}  // namespace kz
