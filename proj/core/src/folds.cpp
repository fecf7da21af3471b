#include "patchseg/folds.hpp"

#include <random>
#include <set>

#include "patchseg/error.hpp"

namespace patchseg {

std::vector<std::string> FoldSplit::members(int fold) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < dealt.size(); ++i)
        if (static_cast<int>(i % fold_count) == fold) out.push_back(dealt[i]);
    return out;
}

std::vector<std::string> FoldSplit::complement(int fold) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < dealt.size(); ++i)
        if (static_cast<int>(i % fold_count) != fold) out.push_back(dealt[i]);
    return out;
}

FoldSplit split_folds(std::span<const std::string> stack_ids, int fold_count, std::uint64_t seed) {
    if (fold_count < 1) throw ArgumentError("fold_count must be positive");
    if (static_cast<std::size_t>(fold_count) > stack_ids.size())
        throw ArgumentError("fold_count " + std::to_string(fold_count) + " exceeds " +
                            std::to_string(stack_ids.size()) + " stacks");
    if (std::set<std::string>(stack_ids.begin(), stack_ids.end()).size() != stack_ids.size())
        throw ArgumentError("duplicate stack ids");

    FoldSplit split;
    split.fold_count = fold_count;
    split.dealt.assign(stack_ids.begin(), stack_ids.end());
    // Explicit Fisher-Yates; std::shuffle is implementation-defined.
    std::mt19937_64 rng(seed);
    for (std::size_t i = split.dealt.size(); i > 1; --i) {
        const std::size_t j = rng() % i;
        std::swap(split.dealt[i - 1], split.dealt[j]);
    }
    for (std::size_t i = 0; i < split.dealt.size(); ++i)
        split.assignment[split.dealt[i]] = static_cast<int>(i % fold_count);
    return split;
}

}  // namespace patchseg
