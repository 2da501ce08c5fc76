#include "kaczmarz/sampling.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kz {

void DiscreteSampler::assign(std::span<const double> weights) {
    if (weights.empty()) throw std::invalid_argument("DiscreteSampler: empty weight vector");
    cumulative_.resize(weights.size());
    double total = 0.0;
    std::size_t last_positive = weights.size();
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights[i];
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("DiscreteSampler: weights must be finite and nonnegative");
        }
        total += w;
        cumulative_[i] = total;
        if (w > 0.0) last_positive = i;
    }
    if (last_positive == weights.size()) {
        throw std::invalid_argument("DiscreteSampler: no positive weight");
    }
    for (std::size_t i = 0; i < last_positive; ++i) cumulative_[i] /= total;
    std::fill(cumulative_.begin() + static_cast<std::ptrdiff_t>(last_positive), cumulative_.end(), 1.0);
}

std::size_t DiscreteSampler::operator()(double u) const noexcept {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
}

ColumnWeightedSelector::ColumnWeightedSelector(const DenseMatrix& A)
    : col_norms_sq_(A.column_norms_sq()) {
    for (std::size_t j = 0; j < col_norms_sq_.size(); ++j) {
        if (!(col_norms_sq_[j] > 0.0)) {
            throw std::invalid_argument("ColumnWeightedSelector: column " + std::to_string(j) +
                                        " has zero norm");
        }
    }
    dist_.assign(col_norms_sq_);
}

WithoutReplacementSelector::WithoutReplacementSelector(std::size_t m, ShufflePolicy policy,
                                                       Xoshiro256& rng)
    : permutation_(m), policy_(policy) {
    std::iota(permutation_.begin(), permutation_.end(), std::size_t{0});
    fisher_yates_shuffle(permutation_, rng);
    generation_ = 1;
}

std::size_t WithoutReplacementSelector::next_slot(Xoshiro256& rng) {
    if (cursor_ == permutation_.size()) {
        cursor_ = 0;
        if (policy_ == ShufflePolicy::EachPass) {
            fisher_yates_shuffle(permutation_, rng);
            ++generation_;
        }
    }
    return cursor_++;
}

double radical_inverse(std::uint64_t n, unsigned base) noexcept {
    const double inv = 1.0 / base;
    double f = inv;
    double r = 0.0;
    while (n > 0) {
        r += static_cast<double>(n % base) * f;
        n /= base;
        f *= inv;
    }
    return r;
}

HaltonSequence::HaltonSequence(unsigned base) : base_(base) {
    if (base < 2) throw std::invalid_argument("HaltonSequence: base must be at least 2");
}

std::size_t quasirandom_row(double u, std::size_t m) noexcept {
    const auto i = static_cast<std::size_t>(u * static_cast<double>(m));
    return i < m ? i : m - 1;
}

void greedy_candidates(const DenseMatrix& A, std::span<const double> x, std::span<const double> b,
                       std::span<double> residual, GreedyCandidates& out) {
    residual_into(A, x, b, residual);
    out.members.clear();
    out.member_weights.clear();
    out.fallback_used = false;

    double rnorm2 = 0.0;
    double max_ratio = -1.0;
    std::size_t argmax = 0;
    for (std::size_t i = 0; i < residual.size(); ++i) {
        const double r2 = residual[i] * residual[i];
        rnorm2 += r2;
        const double ratio = r2 / A.row_norm_sq(i);
        if (ratio > max_ratio) {
            max_ratio = ratio;
            argmax = i;
        }
    }
    out.residual_norm_sq = rnorm2;
    out.argmax = argmax;
    if (rnorm2 == 0.0) {
        out.epsilon = 0.0;
        return;
    }

    out.epsilon = 0.5 * (max_ratio / rnorm2 + 1.0 / A.frob_norm_sq());
    const double scaled = out.epsilon * rnorm2;
    for (std::size_t i = 0; i < residual.size(); ++i) {
        const double r2 = residual[i] * residual[i];
        if (r2 >= scaled * A.row_norm_sq(i)) {
            out.members.push_back(i);
            out.member_weights.push_back(r2);
        }
    }
    // The argmax row satisfies the inequality in exact arithmetic; only
    // rounding can leave U empty.
    if (out.members.empty()) {
        out.fallback_used = true;
        out.members.push_back(argmax);
        out.member_weights.push_back(residual[argmax] * residual[argmax]);
    }
}

std::optional<std::size_t> GreedySelector::next(std::span<const double> x, std::span<const double> b,
                                                 Xoshiro256& rng) {
    greedy_candidates(*A_, x, b, residual_, cand_);
    if (cand_.residual_norm_sq == 0.0) return std::nullopt;
    dist_.assign(cand_.member_weights);
    return cand_.members[dist_.sample(rng)];
}

SelectableSetSelector::SelectableSetSelector(const DenseMatrix& A, SelectableRule rule)
    : A_(&A),
      rule_(rule),
      weighted_(A),
      set_((A.rows() + 63) / 64, ~std::uint64_t{0}),
      count_(A.rows()),
      pattern_(rule == SelectableRule::Gramian ? A.rows() : 0) {
    if (const std::size_t tail = A.rows() % 64; tail != 0) {
        set_.back() = (std::uint64_t{1} << tail) - 1;
    }
}

std::size_t SelectableSetSelector::sample(Xoshiro256& rng) {
    if (count_ == 0) {
        ++anomalies_;
        return weighted_.next(rng);
    }
    constexpr int kMaxRejections = 64;
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        const std::size_t i = weighted_.next(rng);
        if (contains(i)) return i;
    }
    // S_k carries little probability mass: draw from the conditional
    // distribution directly, which is what rejection converges to.
    scratch_.assign(A_->rows(), 0.0);
    for (std::size_t i = 0; i < A_->rows(); ++i) {
        if (contains(i)) scratch_[i] = A_->row_norm_sq(i);
    }
    return DiscreteSampler(scratch_).sample(rng);
}

const std::vector<std::uint64_t>& SelectableSetSelector::gram_pattern(std::size_t i) {
    auto& words = pattern_[i];
    if (!words.empty()) return words;
    words.assign(set_.size(), 0);
    const auto ai = A_->row(i);
    const double ni = std::sqrt(A_->row_norm_sq(i));
    for (std::size_t j = 0; j < A_->rows(); ++j) {
        const double g = dot(ai, A_->row(j));
        if (std::abs(g) > kOrthogonalityTol * ni * std::sqrt(A_->row_norm_sq(j))) {
            words[j / 64] |= std::uint64_t{1} << (j % 64);
        }
    }
    return words;
}

void SelectableSetSelector::update(std::size_t i_k) {
    if (rule_ == SelectableRule::NonRepetitive) {
        std::fill(set_.begin(), set_.end(), ~std::uint64_t{0});
        if (const std::size_t tail = A_->rows() % 64; tail != 0) {
            set_.back() = (std::uint64_t{1} << tail) - 1;
        }
    } else {
        const auto& words = gram_pattern(i_k);
        for (std::size_t w = 0; w < set_.size(); ++w) set_[w] |= words[w];
    }
    set_[i_k / 64] &= ~(std::uint64_t{1} << (i_k % 64));
    count_ = 0;
    for (auto w : set_) count_ += static_cast<std::size_t>(std::popcount(w));
}

// ---------------------------------------------------------------------------

namespace {

std::invalid_argument bad_spec(std::string_view text) {
    return std::invalid_argument("unknown selector '" + std::string(text) + "'");
}

}  // namespace

SelectorSpec parse_selector_spec(std::string_view text) {
    SelectorSpec spec;
    if (text == "cyclic") {
        spec.kind = SelectorKind::Cyclic;
    } else if (text == "uniform") {
        spec.kind = SelectorKind::Uniform;
    } else if (text == "norm") {
        spec.kind = SelectorKind::NormWeighted;
    } else if (text.starts_with("wor:")) {
        spec.kind = SelectorKind::WithoutReplacement;
        std::string_view rest = text.substr(4);
        if (rest.ends_with(":reorder")) {
            spec.storage = RowStorage::MaterializedReorder;
            rest.remove_suffix(8);
        }
        if (rest == "once") {
            spec.shuffle = ShufflePolicy::Once;
        } else if (rest == "pass") {
            spec.shuffle = ShufflePolicy::EachPass;
        } else {
            throw bad_spec(text);
        }
    } else if (text == "halton" || text.starts_with("halton:")) {
        spec.kind = SelectorKind::Halton;
        if (text.size() > 6) {
            std::string_view digits = text.substr(7);
            unsigned base = 0;
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), base);
            if (ec != std::errc{} || ptr != digits.data() + digits.size() || base < 2) {
                throw std::invalid_argument("halton base must be an integer >= 2 in '" +
                                            std::string(text) + "'");
            }
            spec.halton_base = base;
        }
    } else if (text == "sobol") {
        spec.kind = SelectorKind::Sobol;
    } else if (text == "grk") {
        spec.kind = SelectorKind::Greedy;
    } else if (text == "nssrk") {
        spec.kind = SelectorKind::NonRepetitive;
    } else if (text == "gssrk") {
        spec.kind = SelectorKind::GramianSelectable;
    } else {
        throw bad_spec(text);
    }
    return spec;
}

std::string to_string(const SelectorSpec& spec) {
    switch (spec.kind) {
        case SelectorKind::Cyclic: return "cyclic";
        case SelectorKind::Uniform: return "uniform";
        case SelectorKind::NormWeighted: return "norm";
        case SelectorKind::WithoutReplacement: {
            std::string s = spec.shuffle == ShufflePolicy::Once ? "wor:once" : "wor:pass";
            if (spec.storage == RowStorage::MaterializedReorder) s += ":reorder";
            return s;
        }
        case SelectorKind::Halton: return "halton:" + std::to_string(spec.halton_base);
        case SelectorKind::Sobol: return "sobol";
        case SelectorKind::Greedy: return "grk";
        case SelectorKind::NonRepetitive: return "nssrk";
        case SelectorKind::GramianSelectable: return "gssrk";
    }
    return "?";
}

RowSelector::Impl RowSelector::make_impl(const SelectorSpec& spec, const DenseMatrix& A,
                                         Xoshiro256& rng) {
    const std::size_t m = A.rows();
    switch (spec.kind) {
        case SelectorKind::Cyclic: return CyclicSelector(m);
        case SelectorKind::Uniform: return UniformSelector(m);
        case SelectorKind::NormWeighted: return NormWeightedSelector(A);
        case SelectorKind::WithoutReplacement:
            return WithoutReplacementSelector(m, spec.shuffle, rng);
        case SelectorKind::Halton:
            return QuasirandomSelector<HaltonSequence>(m, HaltonSequence(spec.halton_base));
        case SelectorKind::Sobol: return QuasirandomSelector<SobolSequence>(m, SobolSequence{});
        case SelectorKind::Greedy: return GreedySelector(A);
        case SelectorKind::NonRepetitive:
            return SelectableSetSelector(A, SelectableRule::NonRepetitive);
        case SelectorKind::GramianSelectable:
            return SelectableSetSelector(A, SelectableRule::Gramian);
    }
    throw std::logic_error("unhandled selector kind");
}

RowSelector::RowSelector(const SelectorSpec& spec, const DenseMatrix& A, std::uint64_t seed)
    : spec_(spec), rng_(seed), impl_(make_impl(spec, A, rng_)) {}

std::optional<std::size_t> RowSelector::next(std::span<const double> x, std::span<const double> b) {
    return std::visit(
        [&](auto& sel) -> std::optional<std::size_t> {
            using T = std::decay_t<decltype(sel)>;
            if constexpr (std::is_same_v<T, CyclicSelector> ||
                          std::is_same_v<T, QuasirandomSelector<HaltonSequence>> ||
                          std::is_same_v<T, QuasirandomSelector<SobolSequence>>) {
                return sel.next();
            } else if constexpr (std::is_same_v<T, GreedySelector>) {
                return sel.next(x, b, rng_);
            } else {
                return sel.next(rng_);
            }
        },
        impl_);
}

}  // namespace kz
