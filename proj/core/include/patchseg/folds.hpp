#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace patchseg {

struct FoldSplit {
    int fold_count = 0;
    std::map<std::string, int> assignment;
    /// Stack ids after the seeded shuffle; entry i went to fold i % fold_count.
    std::vector<std::string> dealt;

    /// Stack ids in `fold`, in the order they were dealt.
    std::vector<std::string> members(int fold) const;
    /// Every stack id outside `fold`.
    std::vector<std::string> complement(int fold) const;
};

/// Seeded shuffle followed by round-robin dealing, so fold sizes differ by
/// at most one. Throws ArgumentError if fold_count is not in
/// [1, stack_ids.size()] or ids repeat.
FoldSplit split_folds(std::span<const std::string> stack_ids, int fold_count, std::uint64_t seed);

}  // namespace patchseg
