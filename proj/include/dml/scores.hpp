#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "dml/crossfit.hpp"
#include "dml/data.hpp"
#include "dml/dgp.hpp"
#include "dml/functional.hpp"

namespace dml {

/// n x p matrix of evaluated orthogonal scores psi_j(Z_i).
struct ScoreMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> target_meta;
    bool centered = false;
};

/// Central finite-difference Gateaux derivatives of the expected score at
/// (theta_0, gamma_0, alpha_0), in the gamma and alpha directions. Both are
/// zero for a valid dgp (the maps are affine in r with zero slope).
std::pair<double, double> check_orthogonality(const DiscreteDgp& dgp,
                                              const MomentFunctional& functional,
                                              const DxFunction& direction_gamma,
                                              const DxFunction& direction_alpha, double h = 1e-4);

/// lhs = E_P[psi(Z, theta_0, gamma, alpha)],
/// rhs = -E_P[(alpha - alpha_0)(gamma - gamma_0)], both by enumeration.
std::pair<double, double> double_robustness_residual(const DiscreteDgp& dgp,
                                                     const MomentFunctional& functional,
                                                     const DxFunction& gamma,
                                                     const DxFunction& alpha);

/// Exact finite-sample decomposition of sqrt(n)(theta_hat - theta_0) into the
/// oracle term plus the centered empirical-process terms A, B, C and the
/// population cross term D, with population pieces enumerated per fold
/// (fitted functions held fixed).
struct TargetDecomposition {
    double oracle_term = 0.0; // sqrt(n) (theta_bar - theta_0)
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    double sqrtn_error = 0.0; // sqrt(n) (theta_hat - theta_0)
    double residual = 0.0;    // oracle_term + a + b + c + d - sqrtn_error
};

struct OracleDecomposition {
    std::vector<TargetDecomposition> targets;
};

OracleDecomposition oracle_decomposition(const Dataset& data, const DiscreteDgp& dgp,
                                         const std::vector<MomentFunctional>& functionals,
                                         const NuisanceFitSet& fits);

} // namespace dml
