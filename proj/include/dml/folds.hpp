#pragma once

#include <cstdint>
#include <vector>

namespace dml {

/// Deterministic partition of {0..n-1} into L folds whose sizes differ by at
/// most one. The assignment is a pure function of (n, L, seed).
struct FoldPlan {
    std::size_t n = 0;
    int L = 0;
    std::vector<int> assignment;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<std::vector<int>> fold_indices() const;
    std::vector<int> fold_rows(int fold) const;
    std::vector<int> complement_rows(int fold) const;
};

FoldPlan make_folds(std::size_t n, int L, std::uint64_t seed);

} // namespace dml
