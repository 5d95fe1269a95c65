#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dml/data.hpp"
#include "dml/dictionary.hpp"
#include "dml/folds.hpp"
#include "dml/functional.hpp"
#include "dml/regression.hpp"
#include "dml/riesz.hpp"

namespace dml {

/// Per-target fitting configuration shared by cross_fit and the plain
/// full-sample path.
struct NuisanceRecipe {
    std::shared_ptr<const Dictionary> dictionary;            // regression / automatic-riesz basis
    std::shared_ptr<const Dictionary> propensity_dictionary; // x-only; defaults to covariates_only()
    double regression_ridge = -1.0;                          // < 0: scale-free default
    double propensity_clip = 0.01;
    double propensity_ridge = 0.0;
    double riesz_clip = 100.0;
    RieszKind riesz = RieszKind::plugin;
    double riesz_ridge = -1.0;                               // automatic only
};

struct TargetFits {
    DxFunction gamma;
    DxFunction alpha;
};

struct FoldFits {
    std::vector<int> training_rows; // sorted
    std::vector<TargetFits> targets;
    std::uint64_t fingerprint = 0;
};

/// Cross-fitted (or full-sample) nuisance fits with recorded training
/// provenance. `plan` is absent for full-sample fits. When fold-level recipe
/// selection was used, `selected_recipe` holds the winner per fold and
/// `selection_a_n` the entropy scale max(e, r) that the selection step costs.
struct NuisanceFitSet {
    std::optional<FoldPlan> plan;
    std::vector<FoldFits> folds;
    std::vector<int> selected_recipe;
    double selection_a_n = 2.718281828459045;

    bool cross_fitted() const { return plan.has_value(); }
    std::size_t n_targets() const { return folds.empty() ? 0 : folds.front().targets.size(); }
    int fold_of(std::size_t row) const {
        return plan ? plan->assignment[row] : 0;
    }
    const TargetFits& fits_for(std::size_t row, std::size_t target) const {
        return folds[static_cast<std::size_t>(fold_of(row))].targets[target];
    }
};

std::uint64_t provenance_fingerprint(std::uint64_t plan_seed, int fold,
                                     const std::vector<int>& training_rows);

/// Pure sample splitting: fold l's fits are trained on the complement only.
/// Throws when a fold complement lacks a treatment label.
NuisanceFitSet cross_fit(const Dataset& data, const FoldPlan& plan,
                         const std::vector<MomentFunctional>& functionals,
                         const NuisanceRecipe& recipe);

/// Fold-level selection among r preconfigured recipes: every candidate is
/// trained on the complement, the fold's own rows pick the winner by summed
/// regression MSE, and selection_a_n records max(e, r).
NuisanceFitSet cross_fit_with_selection(const Dataset& data, const FoldPlan& plan,
                                        const std::vector<MomentFunctional>& functionals,
                                        const std::vector<NuisanceRecipe>& recipes);

/// One set of fits trained on the full sample (hand checks, plain AIPW).
NuisanceFitSet full_sample_fit(const Dataset& data,
                               const std::vector<MomentFunctional>& functionals,
                               const NuisanceRecipe& recipe);

/// Externally supplied evaluators (oracle nuisances); no training rows.
NuisanceFitSet fit_set_from_functions(std::size_t n, std::vector<TargetFits> targets);

/// Rejects a fit set whose provenance does not match the data and plan.
void audit_fit_set(const Dataset& data, const NuisanceFitSet& fits);

} // namespace dml
