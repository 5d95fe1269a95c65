#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dml/crossfit.hpp"
#include "dml/data.hpp"
#include "dml/estimate.hpp"
#include "dml/folds.hpp"

namespace dml {

/// Cross-fitted distribution-regression fits over a threshold grid. The
/// representer is shared across thresholds (it does not depend on u for a
/// fixed arm); the per-u regressions are logistic fits of 1{Y <= u}.
struct CdfFitSet {
    FoldPlan plan;
    int arm = 1;
    int outcome_index = 0;
    Eigen::VectorXd grid; // strictly increasing
    struct Fold {
        DxFunction alpha;                 // shared across the grid
        std::vector<DxFunction> gamma_u;  // one per grid point, values in [0, 1]
    };
    std::vector<Fold> folds;
};

CdfFitSet cross_fit_cdf(const Dataset& data, int arm, const Eigen::VectorXd& grid,
                        const NuisanceRecipe& recipe, const FoldPlan& plan,
                        int outcome_index = 0);

/// Simultaneous band for the counterfactual CDF on the grid, monotonized by
/// pool-adjacent-violators and clipped to [0, 1].
struct CdfBandResult {
    Eigen::VectorXd grid;
    Eigen::VectorXd estimate;
    Eigen::VectorXd se;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double level = 0.95;
    double critical_value = 0.0;
    bool monotonized = false;
    std::size_t draws = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    int arm = 1;
};

CdfBandResult estimate_cdf_band(const Dataset& data, const CdfFitSet& fits, double level,
                                std::size_t draws, std::uint64_t seed, int threads = 1);

/// Nondecreasing least-squares projection (pool-adjacent-violators).
std::vector<double> pool_adjacent_violators(const std::vector<double>& values);

/// Quantile treatment effect read off two monotonized CDF bands on a common
/// grid, with the interval from inverting the envelopes.
struct QteResult {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

QteResult qte_from_cdf(const CdfBandResult& band_treated, const CdfBandResult& band_control,
                       double q);

} // namespace dml
