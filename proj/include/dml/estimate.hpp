#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dml/crossfit.hpp"
#include "dml/data.hpp"
#include "dml/functional.hpp"
#include "dml/scores.hpp"

namespace dml {

/// Point estimates with their studentization inputs. sigma_hat_j^2 is the
/// mean of the squared centered score column j.
struct EstimateSet {
    Eigen::VectorXd theta_hat;
    Eigen::VectorXd sigma_hat;
    std::size_t n = 0;
    ScoreMatrix score;
};

/// Cross-fitted DML point estimates: theta_hat_j is the sample mean of the
/// augmented score's uncentered part, with fold-l fits used on fold-l rows.
EstimateSet estimate_targets(const Dataset& data, const std::vector<MomentFunctional>& functionals,
                             const NuisanceFitSet& fits);

/// Sample correlation of the centered score columns. When the smallest
/// eigenvalue falls below 1e-10, ridge * I is added and the matrix rescaled
/// to unit diagonal; both facts are recorded.
struct CorrelationEstimate {
    Eigen::MatrixXd matrix;
    double ridge_applied = 0.0;
    double min_eigenvalue = 0.0;
};

CorrelationEstimate estimate_correlation(const ScoreMatrix& score, double ridge = 1e-8);

enum class Sided { two_sided, one_sided };

std::string sided_name(Sided sided);
Sided sided_from_name(const std::string& name);

/// Draws of max_j |Z_j| (or max_j Z_j) for Z ~ N(0, corr), via a symmetric
/// eigenfactorization with eigenvalue clipping. Draw blocks use derived
/// seeds, so the sample is identical for every thread count.
std::vector<double> gaussian_max_sample(const Eigen::MatrixXd& corr, std::size_t draws,
                                        std::uint64_t seed, Sided sided = Sided::two_sided,
                                        int threads = 1);

/// (1-alpha) Monte Carlo quantile of max_j |Z_j| (or max_j Z_j) for
/// Z ~ N(0, corr), using the ceil((1-alpha)(B+1)) order statistic of B draws.
/// Deterministic in (corr, level, draws, seed, sided) for any thread count.
double sup_t_critical_value(const CorrelationEstimate& corr, double level, std::size_t draws,
                            std::uint64_t seed, Sided sided = Sided::two_sided, int threads = 1);

struct BandRow {
    double estimate = 0.0;
    double se = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Simultaneous sup-t band theta_hat_j -+ c * sigma_hat_j / sqrt(n).
struct BandResult {
    double level = 0.95;
    double critical_value = 0.0;
    std::vector<BandRow> targets;
    std::size_t draws = 0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    Sided sided = Sided::two_sided;
};

BandResult build_bands(const EstimateSet& estimates, const CorrelationEstimate& corr, double level,
                       std::size_t draws, std::uint64_t seed, Sided sided = Sided::two_sided,
                       int threads = 1);

} // namespace dml
