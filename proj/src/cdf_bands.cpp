#include "dml/cdf_bands.hpp"

#include <algorithm>
#include <cmath>

#include "dml/errors.hpp"
#include "dml/propensity.hpp"
#include "dml/rng.hpp"

namespace dml {

namespace {

void require_increasing(const Eigen::VectorXd& grid) {
    if (grid.size() < 1) throw ArgumentError("cdf band: empty threshold grid");
    for (Eigen::Index g = 1; g < grid.size(); ++g)
        if (!(grid(g) > grid(g - 1)))
            throw ArgumentError("cdf band: grid must be strictly increasing");
}

DxFunction clip_unit(DxFunction raw) {
    return [raw = std::move(raw)](int d, const Eigen::VectorXd& x) {
        return std::clamp(raw(d, x), 0.0, 1.0);
    };
}

} // namespace

CdfFitSet cross_fit_cdf(const Dataset& data, int arm, const Eigen::VectorXd& grid,
                        const NuisanceRecipe& recipe, const FoldPlan& plan, int outcome_index) {
    require_increasing(grid);
    plan.validate();
    if (plan.n != data.n()) throw AuditError("cross_fit_cdf: fold plan built for a different n");
    if (arm < 0 || arm >= data.n_labels())
        throw ArgumentError("cross_fit_cdf: arm label out of range");
    if (outcome_index < 0 || outcome_index >= data.n_outcomes())
        throw ArgumentError("cross_fit_cdf: outcome index out of range");
    if (!recipe.dictionary) throw ConfigError("cross_fit_cdf: missing dictionary");

    CdfFitSet set;
    set.plan = plan;
    set.arm = arm;
    set.outcome_index = outcome_index;
    set.grid = grid;
    const MomentFunctional cdf_functional = MomentFunctional::cdf_at_point(arm, grid(0));
    for (int fold = 0; fold < plan.L; ++fold) {
        const Dataset training = data.subset(plan.complement_rows(fold));
        auto prop_dict = recipe.propensity_dictionary ? recipe.propensity_dictionary
                                                      : recipe.dictionary->covariates_only();
        const PropensityFit propensity =
            fit_propensity(training, prop_dict, recipe.propensity_clip, recipe.propensity_ridge);
        CdfFitSet::Fold slot;
        slot.alpha = riesz_plugin_for(cdf_functional, propensity, recipe.riesz_clip).predict;
        slot.gamma_u.reserve(static_cast<std::size_t>(grid.size()));
        for (Eigen::Index g = 0; g < grid.size(); ++g) {
            Eigen::VectorXd indicator(static_cast<Eigen::Index>(training.n()));
            for (std::size_t i = 0; i < training.n(); ++i)
                indicator(static_cast<Eigen::Index>(i)) =
                    training.outcome(i, set.outcome_index) <= grid(g) ? 1.0 : 0.0;
            BinaryLogitFit fit = fit_binary_logit(training, indicator, recipe.dictionary,
                                                  std::max(recipe.propensity_ridge, 0.0));
            slot.gamma_u.push_back(clip_unit(fit.as_function()));
        }
        set.folds.push_back(std::move(slot));
    }
    return set;
}

CdfBandResult estimate_cdf_band(const Dataset& data, const CdfFitSet& fits, double level,
                                std::size_t draws, std::uint64_t seed, int threads) {
    require_increasing(fits.grid);
    if (fits.plan.n != data.n())
        throw AuditError("estimate_cdf_band: fit set built for a different n");
    const std::size_t n = data.n();
    const auto G = fits.grid.size();

    ScoreMatrix score;
    score.values.resize(static_cast<Eigen::Index>(n), G);
    score.centered = true;
    Eigen::VectorXd theta(G), sigma(G);
    for (Eigen::Index g = 0; g < G; ++g) {
        const double u = fits.grid(g);
        const MomentFunctional functional = MomentFunctional::cdf_at_point(fits.arm, u);
        NeumaierSum mean;
        for (std::size_t i = 0; i < n; ++i) {
            const Record w{data.treatment_of(i), data.covariate_row(i)};
            const auto& fold = fits.folds[static_cast<std::size_t>(fits.plan.assignment[i])];
            const auto& gamma_u = fold.gamma_u[static_cast<std::size_t>(g)];
            const double indicator = data.outcome(i, fits.outcome_index) <= u ? 1.0 : 0.0;
            const double value = gamma_u(fits.arm, w.x) +
                                 fold.alpha(w.d, w.x) * (indicator - gamma_u(w.d, w.x));
            score.values(static_cast<Eigen::Index>(i), g) = value;
            mean.add(value);
        }
        theta(g) = mean.value() / static_cast<double>(n);
        score.values.col(g).array() -= theta(g);
        sigma(g) = std::sqrt(score.values.col(g).squaredNorm() / static_cast<double>(n));
        score.target_meta.push_back(functional.name());
    }

    const CorrelationEstimate corr = estimate_correlation(score);
    const double critical = sup_t_critical_value(corr, level, draws, seed, Sided::two_sided, threads);
    const double root_n = std::sqrt(static_cast<double>(n));

    std::vector<double> est(static_cast<std::size_t>(G)), lo(static_cast<std::size_t>(G)),
        hi(static_cast<std::size_t>(G));
    for (Eigen::Index g = 0; g < G; ++g) {
        const double half = critical * sigma(g) / root_n;
        est[static_cast<std::size_t>(g)] = theta(g);
        lo[static_cast<std::size_t>(g)] = theta(g) - half;
        hi[static_cast<std::size_t>(g)] = theta(g) + half;
    }
    est = pool_adjacent_violators(est);
    lo = pool_adjacent_violators(lo);
    hi = pool_adjacent_violators(hi);

    CdfBandResult band;
    band.grid = fits.grid;
    band.estimate.resize(G);
    band.se = sigma;
    band.lower.resize(G);
    band.upper.resize(G);
    for (Eigen::Index g = 0; g < G; ++g) {
        band.estimate(g) = std::clamp(est[static_cast<std::size_t>(g)], 0.0, 1.0);
        band.lower(g) = std::clamp(lo[static_cast<std::size_t>(g)], 0.0, 1.0);
        band.upper(g) = std::clamp(hi[static_cast<std::size_t>(g)], 0.0, 1.0);
    }
    band.level = level;
    band.critical_value = critical;
    band.monotonized = true;
    band.draws = draws;
    band.seed = seed;
    band.n = n;
    band.arm = fits.arm;
    return band;
}

std::vector<double> pool_adjacent_violators(const std::vector<double>& values) {
    // Classic PAVA for a nondecreasing fit under equal weights.
    std::vector<double> level;   // pooled block means
    std::vector<std::size_t> count; // pooled block sizes
    for (double v : values) {
        level.push_back(v);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const double merged = (level[level.size() - 2] * static_cast<double>(count[count.size() - 2]) +
                                   level.back() * static_cast<double>(count.back())) /
                                  static_cast<double>(count[count.size() - 2] + count.back());
            count[count.size() - 2] += count.back();
            level[level.size() - 2] = merged;
            level.pop_back();
            count.pop_back();
        }
    }
    std::vector<double> out;
    out.reserve(values.size());
    for (std::size_t b = 0; b < level.size(); ++b)
        out.insert(out.end(), count[b], level[b]);
    return out;
}

namespace {

// Left-continuous generalized inverse on the grid: smallest grid point with
// cdf >= q. Throws when q lies outside the estimated range.
double grid_inverse(const Eigen::VectorXd& grid, const Eigen::VectorXd& cdf, double q) {
    if (q < cdf(0) || q > cdf(cdf.size() - 1))
        throw RangeError("qte_from_cdf: quantile " + std::to_string(q) +
                         " is outside the estimated CDF range on the grid; widen the grid");
    for (Eigen::Index g = 0; g < grid.size(); ++g)
        if (cdf(g) >= q) return grid(g);
    throw RangeError("qte_from_cdf: quantile outside the grid");
}

} // namespace

QteResult qte_from_cdf(const CdfBandResult& band_treated, const CdfBandResult& band_control,
                       double q) {
    if (!(q > 0.0 && q < 1.0)) throw ArgumentError("qte_from_cdf: q must lie in (0, 1)");
    if (!band_treated.monotonized || !band_control.monotonized)
        throw PreconditionError("qte_from_cdf: bands must be monotonized");
    if (band_treated.grid.size() != band_control.grid.size() ||
        band_treated.grid != band_control.grid)
        throw PreconditionError("qte_from_cdf: bands must share the same grid");

    QteResult out;
    out.point = grid_inverse(band_treated.grid, band_treated.estimate, q) -
                grid_inverse(band_control.grid, band_control.estimate, q);
    // Larger CDF means smaller quantile, so the lower QTE endpoint inverts the
    // upper treated envelope against the lower control envelope.
    out.lower = grid_inverse(band_treated.grid, band_treated.upper, q) -
                grid_inverse(band_control.grid, band_control.lower, q);
    out.upper = grid_inverse(band_treated.grid, band_treated.lower, q) -
                grid_inverse(band_control.grid, band_control.upper, q);
    return out;
}

} // namespace dml
