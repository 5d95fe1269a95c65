#include "dml/crossfit.hpp"

#include <algorithm>
#include <limits>

#include "dml/errors.hpp"
#include "dml/propensity.hpp"
#include "dml/rng.hpp"

namespace dml {

std::uint64_t provenance_fingerprint(std::uint64_t plan_seed, int fold,
                                     const std::vector<int>& training_rows) {
    std::uint64_t h = hash_mix(plan_seed, static_cast<std::uint64_t>(fold) + 1);
    for (int row : training_rows) h = hash_mix(h, static_cast<std::uint64_t>(row) + 0x517cc1b7ULL);
    return h;
}

namespace {

std::vector<TargetFits> fit_targets(const Dataset& training,
                                    const std::vector<MomentFunctional>& functionals,
                                    const NuisanceRecipe& recipe) {
    if (!recipe.dictionary) throw ConfigError("nuisance recipe: missing dictionary");
    std::optional<PropensityFit> propensity;
    if (recipe.riesz == RieszKind::plugin) {
        auto prop_dict = recipe.propensity_dictionary ? recipe.propensity_dictionary
                                                      : recipe.dictionary->covariates_only();
        propensity = fit_propensity(training, prop_dict, recipe.propensity_clip,
                                    recipe.propensity_ridge);
    }
    std::vector<TargetFits> fits;
    fits.reserve(functionals.size());
    for (const auto& functional : functionals) {
        RegressionFit gamma = fit_regression(training, functional.outcome_index(),
                                             recipe.dictionary, recipe.regression_ridge);
        RieszFit alpha =
            recipe.riesz == RieszKind::plugin
                ? riesz_plugin_for(functional, *propensity, recipe.riesz_clip)
                : riesz_automatic(training, functional, recipe.dictionary, recipe.riesz_ridge,
                                  recipe.riesz_clip);
        fits.push_back(TargetFits{gamma.as_function(), alpha.as_function()});
    }
    return fits;
}

void require_all_labels(const Dataset& training, const Dataset& full, int fold) {
    std::vector<int> counts(static_cast<std::size_t>(full.n_labels()), 0);
    for (std::size_t i = 0; i < training.n(); ++i)
        ++counts[static_cast<std::size_t>(training.treatment_of(i))];
    for (int k = 0; k < full.n_labels(); ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw EstimationError("cross_fit: complement of fold " + std::to_string(fold) +
                                  " lacks treatment label \"" +
                                  full.labels()[static_cast<std::size_t>(k)] + "\"");
    }
}

} // namespace

NuisanceFitSet cross_fit(const Dataset& data, const FoldPlan& plan,
                         const std::vector<MomentFunctional>& functionals,
                         const NuisanceRecipe& recipe) {
    plan.validate();
    if (plan.n != data.n()) throw AuditError("cross_fit: fold plan built for a different n");
    if (functionals.empty()) throw ArgumentError("cross_fit: no target functionals");
    NuisanceFitSet set;
    set.plan = plan;
    set.folds.resize(static_cast<std::size_t>(plan.L));
    for (int fold = 0; fold < plan.L; ++fold) {
        std::vector<int> training_rows = plan.complement_rows(fold);
        const Dataset training = data.subset(training_rows);
        require_all_labels(training, data, fold);
        auto& slot = set.folds[static_cast<std::size_t>(fold)];
        slot.targets = fit_targets(training, functionals, recipe);
        slot.training_rows = std::move(training_rows);
        slot.fingerprint = provenance_fingerprint(plan.seed, fold, slot.training_rows);
    }
    return set;
}

NuisanceFitSet cross_fit_with_selection(const Dataset& data, const FoldPlan& plan,
                                        const std::vector<MomentFunctional>& functionals,
                                        const std::vector<NuisanceRecipe>& recipes) {
    if (recipes.empty()) throw ArgumentError("cross_fit_with_selection: no candidate recipes");
    plan.validate();
    if (plan.n != data.n())
        throw AuditError("cross_fit_with_selection: fold plan built for a different n");
    if (functionals.empty()) throw ArgumentError("cross_fit_with_selection: no target functionals");

    NuisanceFitSet set;
    set.plan = plan;
    set.folds.resize(static_cast<std::size_t>(plan.L));
    set.selected_recipe.resize(static_cast<std::size_t>(plan.L), 0);
    set.selection_a_n = std::max(2.718281828459045, static_cast<double>(recipes.size()));
    for (int fold = 0; fold < plan.L; ++fold) {
        std::vector<int> training_rows = plan.complement_rows(fold);
        const Dataset training = data.subset(training_rows);
        require_all_labels(training, data, fold);
        const std::vector<int> held_out = plan.fold_rows(fold);

        double best_loss = std::numeric_limits<double>::infinity();
        std::vector<TargetFits> best_fits;
        int best_recipe = 0;
        for (std::size_t r = 0; r < recipes.size(); ++r) {
            std::vector<TargetFits> fits = fit_targets(training, functionals, recipes[r]);
            // Validation loss on the fold's own rows: summed regression MSE.
            double loss = 0.0;
            for (std::size_t j = 0; j < functionals.size(); ++j) {
                const int yj = functionals[j].outcome_index();
                for (int row : held_out) {
                    const auto i = static_cast<std::size_t>(row);
                    const double resid =
                        data.outcome(i, yj) -
                        fits[j].gamma(data.treatment_of(i), data.covariate_row(i));
                    loss += resid * resid;
                }
            }
            if (loss < best_loss) {
                best_loss = loss;
                best_fits = std::move(fits);
                best_recipe = static_cast<int>(r);
            }
        }
        auto& slot = set.folds[static_cast<std::size_t>(fold)];
        slot.targets = std::move(best_fits);
        slot.training_rows = std::move(training_rows);
        slot.fingerprint = provenance_fingerprint(plan.seed, fold, slot.training_rows);
        set.selected_recipe[static_cast<std::size_t>(fold)] = best_recipe;
    }
    return set;
}

NuisanceFitSet full_sample_fit(const Dataset& data,
                               const std::vector<MomentFunctional>& functionals,
                               const NuisanceRecipe& recipe) {
    if (functionals.empty()) throw ArgumentError("full_sample_fit: no target functionals");
    NuisanceFitSet set;
    FoldFits slot;
    slot.training_rows.resize(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) slot.training_rows[i] = static_cast<int>(i);
    slot.targets = fit_targets(data, functionals, recipe);
    slot.fingerprint = provenance_fingerprint(0, 0, slot.training_rows);
    set.folds.push_back(std::move(slot));
    return set;
}

NuisanceFitSet fit_set_from_functions(std::size_t n, std::vector<TargetFits> targets) {
    NuisanceFitSet set;
    FoldFits slot;
    slot.training_rows.resize(n);
    for (std::size_t i = 0; i < n; ++i) slot.training_rows[i] = static_cast<int>(i);
    slot.targets = std::move(targets);
    slot.fingerprint = provenance_fingerprint(0, 0, slot.training_rows);
    set.folds.push_back(std::move(slot));
    return set;
}

void audit_fit_set(const Dataset& data, const NuisanceFitSet& fits) {
    if (fits.folds.empty()) throw AuditError("audit: empty fit set");
    if (fits.cross_fitted()) {
        const FoldPlan& plan = *fits.plan;
        plan.validate();
        if (plan.n != data.n()) throw AuditError("audit: fold plan n does not match data");
        if (fits.folds.size() != static_cast<std::size_t>(plan.L))
            throw AuditError("audit: fold count mismatch");
        for (int fold = 0; fold < plan.L; ++fold) {
            const auto& slot = fits.folds[static_cast<std::size_t>(fold)];
            const std::vector<int> expected = plan.complement_rows(fold);
            if (slot.training_rows != expected)
                throw AuditError("audit: fold " + std::to_string(fold) +
                                 " was not trained on its complement");
            if (slot.fingerprint != provenance_fingerprint(plan.seed, fold, slot.training_rows))
                throw AuditError("audit: provenance fingerprint mismatch at fold " +
                                 std::to_string(fold));
        }
    } else {
        const auto& slot = fits.folds.front();
        if (slot.training_rows.size() != data.n())
            throw AuditError("audit: full-sample fit trained on a different n");
        if (slot.fingerprint != provenance_fingerprint(0, 0, slot.training_rows))
            throw AuditError("audit: provenance fingerprint mismatch");
    }
    const std::size_t targets = fits.folds.front().targets.size();
    for (const auto& slot : fits.folds)
        if (slot.targets.size() != targets)
            throw AuditError("audit: ragged target count across folds");
}

} // namespace dml
