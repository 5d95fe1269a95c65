#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dml/data.hpp"
#include "dml/functional.hpp"

namespace dml {

/// One support point of a finite data-generating process.
struct DgpAtom {
    Eigen::VectorXd y;
    int d = 0;
    Eigen::VectorXd x;
};

/// Exactly enumerable distribution over (Y, D, X) atoms. Every population
/// expectation in the diagnostics is computed by enumeration against this
/// object, which is what makes the identity tests exact.
class DiscreteDgp {
public:
    /// Builds the dgp and derives the conditional tables (true regression,
    /// true propensity) from the atom distribution itself.
    static DiscreteDgp from_atoms(std::vector<DgpAtom> atoms, std::vector<double> probabilities,
                                  std::vector<std::string> labels);

    /// Overrides the derived tables (values aligned with `cells()`),
    /// e.g. to exercise the consistency check.
    void override_regression(int cell_index, const Eigen::VectorXd& values);
    void override_propensity(int cell_index, double value);

    void validate() const;

    struct Cell {
        int d = 0;
        Eigen::VectorXd x;
        double prob = 0.0;              // P(D=d, X=x)
        Eigen::VectorXd regression;     // E[Y | D=d, X=x], one entry per outcome
        double propensity = 0.0;        // P(D=d | X=x)
    };

    const std::vector<DgpAtom>& atoms() const { return atoms_; }
    const std::vector<double>& probabilities() const { return probabilities_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<Cell>& cells() const { return cells_; }
    int n_labels() const { return static_cast<int>(labels_.size()); }
    int n_outcomes() const { return p_y_; }
    int n_covariates() const { return k_; }

    double propensity(int d, const Eigen::VectorXd& x) const;
    double regression(int outcome_index, int d, const Eigen::VectorXd& x) const;

    DxFunction true_gamma(int outcome_index) const;
    /// Closed-form Riesz representer of `functional` built from the true
    /// propensities (unclipped).
    DxFunction true_alpha(const MomentFunctional& functional) const;

    /// theta_0 = E[m(W, gamma_0)] by enumeration.
    double true_target(const MomentFunctional& functional) const;

    /// sd of the oracle score at (theta_0, gamma_0, alpha_0), by enumeration.
    double oracle_sigma(const MomentFunctional& functional) const;
    /// Correlation matrix of the oracle scores, by enumeration.
    Eigen::MatrixXd oracle_correlation(const std::vector<MomentFunctional>& functionals) const;

    /// Targets attached by the catalog builders; optional.
    Eigen::VectorXd true_targets;

private:
    std::vector<DgpAtom> atoms_;
    std::vector<double> probabilities_;
    std::vector<std::string> labels_;
    std::vector<Cell> cells_;
    int p_y_ = 0;
    int k_ = 0;

    const Cell* find_cell(int d, const Eigen::VectorXd& x) const;
};

/// Exact expectation sum_atoms prob * f(y, d, x), Neumaier-compensated.
double enumerate_expectation(
    const DiscreteDgp& dgp,
    const std::function<double(const Eigen::VectorXd&, int, const Eigen::VectorXd&)>& f);

/// Expectation of a score-like function of (y_j, record) pairs; convenience
/// overload used by the diagnostics.
double enumerate_score_expectation(
    const DiscreteDgp& dgp, const MomentFunctional& functional, double theta,
    const DxFunction& gamma, const DxFunction& alpha);

/// n i.i.d. draws from the atom distribution; deterministic in (dgp, n, seed).
Dataset generate_dataset(const DiscreteDgp& dgp, std::size_t n, std::uint64_t seed);

} // namespace dml
