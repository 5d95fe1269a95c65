#include "dml/folds.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

FoldPlan make_folds(std::size_t n, int L, std::uint64_t seed) {
    if (L < 2) throw ArgumentError("make_folds: need at least 2 folds, got " + std::to_string(L));
    if (static_cast<std::size_t>(L) > n)
        throw ArgumentError("make_folds: fold count " + std::to_string(L) +
                            " exceeds sample size " + std::to_string(n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(seed, 0x666f6c6473ULL); // "folds"
    // Fisher-Yates; shuffled position i lands in fold i mod L, so the first
    // n mod L folds get the extra unit.
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
    }
    FoldPlan plan;
    plan.n = n;
    plan.L = L;
    plan.seed = seed;
    plan.assignment.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        plan.assignment[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(L));
    plan.validate();
    return plan;
}

void FoldPlan::validate() const {
    if (L < 2) throw ValidationError("FoldPlan: fold count must be at least 2");
    if (assignment.size() != n) throw ValidationError("FoldPlan: assignment length mismatch");
    std::vector<std::size_t> sizes(static_cast<std::size_t>(L), 0);
    for (int fold : assignment) {
        if (fold < 0 || fold >= L) throw ValidationError("FoldPlan: fold id out of range");
        ++sizes[static_cast<std::size_t>(fold)];
    }
    const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
    if (*lo == 0) throw ValidationError("FoldPlan: empty fold");
    if (*hi - *lo > 1) throw ValidationError("FoldPlan: fold sizes differ by more than 1");
}

std::vector<std::vector<int>> FoldPlan::fold_indices() const {
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(L));
    for (std::size_t i = 0; i < assignment.size(); ++i)
        folds[static_cast<std::size_t>(assignment[i])].push_back(static_cast<int>(i));
    return folds;
}

std::vector<int> FoldPlan::fold_rows(int fold) const {
    std::vector<int> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) rows.push_back(static_cast<int>(i));
    return rows;
}

std::vector<int> FoldPlan::complement_rows(int fold) const {
    std::vector<int> rows;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) rows.push_back(static_cast<int>(i));
    return rows;
}

} // namespace dml
