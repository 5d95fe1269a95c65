#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace dml {

/// Evaluable nuisance function of (treatment label id, covariates).
using DxFunction = std::function<double(int, const Eigen::VectorXd&)>;

/// One observation's (D, X) part.
struct Record {
    int d;
    Eigen::VectorXd x;
};

/// Immutable n-record sample: outcomes (n x p_y), treatment label ids,
/// covariates (n x k) and optional positive weights.
class Dataset {
public:
    Dataset(Eigen::MatrixXd outcomes,
            std::vector<int> treatment,
            std::vector<std::string> labels,
            Eigen::MatrixXd covariates,
            Eigen::VectorXd weights = Eigen::VectorXd());

    std::size_t n() const { return static_cast<std::size_t>(outcomes_.rows()); }
    int n_outcomes() const { return static_cast<int>(outcomes_.cols()); }
    int n_covariates() const { return static_cast<int>(covariates_.cols()); }
    int n_labels() const { return static_cast<int>(labels_.size()); }

    const Eigen::MatrixXd& outcomes() const { return outcomes_; }
    const std::vector<int>& treatment() const { return treatment_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const Eigen::MatrixXd& covariates() const { return covariates_; }
    const Eigen::VectorXd& weights() const { return weights_; }

    double outcome(std::size_t row, int j) const { return outcomes_(static_cast<Eigen::Index>(row), j); }
    int treatment_of(std::size_t row) const { return treatment_[row]; }
    Eigen::VectorXd covariate_row(std::size_t row) const {
        return covariates_.row(static_cast<Eigen::Index>(row)).transpose();
    }

    int label_id(const std::string& label) const;

    /// New dataset with the given rows, order preserved.
    Dataset subset(const std::vector<int>& rows) const;

private:
    Eigen::MatrixXd outcomes_;
    std::vector<int> treatment_;
    std::vector<std::string> labels_;
    Eigen::MatrixXd covariates_;
    Eigen::VectorXd weights_;
};

} // namespace dml
