#pragma once

#include <memory>

#include "dml/data.hpp"
#include "dml/dictionary.hpp"

namespace dml {

/// Penalized least-squares fit on a dictionary; predict(d, x) = <coef, basis(d, x)>.
struct RegressionFit {
    std::shared_ptr<const Dictionary> dictionary;
    Eigen::VectorXd coefficients;
    double ridge = 0.0;

    double predict(int d, const Eigen::VectorXd& x) const {
        return coefficients.dot(dictionary->eval_all(d, x));
    }
    DxFunction as_function() const;
};

/// Minimizes sum_i (Y_ij - <b, basis(D_i, X_i)>)^2 + ridge * |b|^2 with the
/// constant term unpenalized. ridge < 0 selects the scale-free default
/// 1e-6 * trace(B'B) / dim.
RegressionFit fit_regression(const Dataset& data, int outcome_index,
                             std::shared_ptr<const Dictionary> dictionary, double ridge);

/// Same normal equations for an arbitrary response vector (distribution
/// regression and tests reuse it).
RegressionFit fit_regression_response(const Dataset& data, const Eigen::VectorXd& response,
                                      std::shared_ptr<const Dictionary> dictionary, double ridge);

/// The library-wide scale-free ridge default for a Gram matrix.
double default_ridge(const Eigen::MatrixXd& gram);

} // namespace dml
