#include "dml/data.hpp"

#include <cmath>

#include "dml/errors.hpp"

namespace dml {

Dataset::Dataset(Eigen::MatrixXd outcomes,
                 std::vector<int> treatment,
                 std::vector<std::string> labels,
                 Eigen::MatrixXd covariates,
                 Eigen::VectorXd weights)
    : outcomes_(std::move(outcomes)),
      treatment_(std::move(treatment)),
      labels_(std::move(labels)),
      covariates_(std::move(covariates)),
      weights_(std::move(weights)) {
    const auto n = outcomes_.rows();
    if (n < 1) throw ValidationError("Dataset: needs at least one record");
    if (static_cast<Eigen::Index>(treatment_.size()) != n)
        throw ValidationError("Dataset: treatment length does not match outcome rows");
    if (covariates_.rows() != n)
        throw ValidationError("Dataset: covariate rows do not match outcome rows");
    if (labels_.empty()) throw ValidationError("Dataset: empty treatment label set");
    if (weights_.size() == 0) {
        weights_ = Eigen::VectorXd::Ones(n);
    } else if (weights_.size() != n) {
        throw ValidationError("Dataset: weight length does not match outcome rows");
    }
    for (std::size_t i = 0; i < treatment_.size(); ++i) {
        if (treatment_[i] < 0 || treatment_[i] >= n_labels())
            throw ValidationError("Dataset: treatment label out of range at row " + std::to_string(i));
    }
    if (!outcomes_.allFinite() || !covariates_.allFinite() || !weights_.allFinite())
        throw ValidationError("Dataset: non-finite values");
    if ((weights_.array() <= 0.0).any())
        throw ValidationError("Dataset: weights must be positive");
}

int Dataset::label_id(const std::string& label) const {
    for (std::size_t k = 0; k < labels_.size(); ++k)
        if (labels_[k] == label) return static_cast<int>(k);
    throw ValidationError("Dataset: unknown treatment label \"" + label + "\"");
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
    const auto m = static_cast<Eigen::Index>(rows.size());
    if (m == 0) throw ValidationError("Dataset::subset: empty row selection");
    Eigen::MatrixXd y(m, outcomes_.cols());
    Eigen::MatrixXd x(m, covariates_.cols());
    Eigen::VectorXd w(m);
    std::vector<int> d(rows.size());
    for (Eigen::Index i = 0; i < m; ++i) {
        const int r = rows[static_cast<std::size_t>(i)];
        if (r < 0 || static_cast<std::size_t>(r) >= n())
            throw ArgumentError("Dataset::subset: row index out of range");
        y.row(i) = outcomes_.row(r);
        x.row(i) = covariates_.row(r);
        w(i) = weights_(r);
        d[static_cast<std::size_t>(i)] = treatment_[static_cast<std::size_t>(r)];
    }
    return Dataset(std::move(y), std::move(d), labels_, std::move(x), std::move(w));
}

} // namespace dml
