#include "dml/regression.hpp"

#include <Eigen/Dense>

#include "dml/errors.hpp"

namespace dml {

DxFunction RegressionFit::as_function() const {
    const auto dict = dictionary;
    const Eigen::VectorXd coef = coefficients;
    return [dict, coef](int d, const Eigen::VectorXd& x) { return coef.dot(dict->eval_all(d, x)); };
}

double default_ridge(const Eigen::MatrixXd& gram) {
    return 1e-6 * gram.trace() / static_cast<double>(gram.rows());
}

RegressionFit fit_regression_response(const Dataset& data, const Eigen::VectorXd& response,
                                      std::shared_ptr<const Dictionary> dictionary, double ridge) {
    if (response.size() != static_cast<Eigen::Index>(data.n()))
        throw ArgumentError("fit_regression: response length mismatch");
    const Eigen::MatrixXd B = dictionary->design(data);
    if (!B.allFinite()) throw ValidationError("fit_regression: non-finite design matrix");
    Eigen::MatrixXd gram = B.transpose() * B;
    const Eigen::VectorXd rhs = B.transpose() * response;
    if (ridge < 0.0) ridge = default_ridge(gram);
    if (ridge == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible())
            throw RankError("fit_regression: singular normal equations at ridge = 0 "
                            "(rank " + std::to_string(lu.rank()) + " of " +
                            std::to_string(gram.rows()) + "); use ridge > 0");
        RegressionFit fit{std::move(dictionary), lu.solve(rhs), 0.0};
        return fit;
    }
    // Constant term unpenalized.
    for (Eigen::Index k = 1; k < gram.rows(); ++k) gram(k, k) += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw RankError("fit_regression: factorization failed");
    Eigen::VectorXd coef = ldlt.solve(rhs);
    if (!coef.allFinite()) throw RankError("fit_regression: non-finite coefficients");
    return RegressionFit{std::move(dictionary), std::move(coef), ridge};
}

RegressionFit fit_regression(const Dataset& data, int outcome_index,
                             std::shared_ptr<const Dictionary> dictionary, double ridge) {
    if (outcome_index < 0 || outcome_index >= data.n_outcomes())
        throw ArgumentError("fit_regression: outcome index out of range");
    return fit_regression_response(data, data.outcomes().col(outcome_index), std::move(dictionary),
                                   ridge);
}

} // namespace dml
