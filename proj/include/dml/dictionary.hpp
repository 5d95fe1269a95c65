#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "dml/data.hpp"

namespace dml {

struct BasisFeature {
    std::string name;
    bool uses_treatment = false;
    std::function<double(int, const Eigen::VectorXd&)> eval;
};

/// Config-level description of a generated dictionary. `degrees` overrides
/// the uniform degree per covariate when nonempty.
struct PolynomialSpec {
    int degree = 1;
    bool interactions = false;
    bool treatment_intercepts = true;
    std::vector<int> degrees;
};

/// Finite basis of named (d, x) feature maps; first entry is always the
/// constant 1.
class Dictionary {
public:
    explicit Dictionary(std::vector<BasisFeature> features);

    int size() const { return static_cast<int>(features_.size()); }
    const BasisFeature& feature(int k) const { return features_[static_cast<std::size_t>(k)]; }
    std::vector<std::string> names() const;
    bool has_treatment_features() const;

    double eval(int k, int d, const Eigen::VectorXd& x) const {
        return features_[static_cast<std::size_t>(k)].eval(d, x);
    }
    Eigen::VectorXd eval_all(int d, const Eigen::VectorXd& x) const;

    /// n x size design matrix at the observed (D_i, X_i).
    Eigen::MatrixXd design(const Dataset& data) const;

    /// Sub-dictionary of the features that do not look at the treatment.
    std::shared_ptr<const Dictionary> covariates_only() const;

    static std::shared_ptr<const Dictionary> constant();
    /// Constant, treatment intercepts 1{d=k} for k >= 1, per-covariate powers
    /// up to `degree`, optional pairwise interactions.
    static std::shared_ptr<const Dictionary> polynomial(const PolynomialSpec& spec, int n_labels,
                                                        int n_covariates);
    /// Constant plus indicators of every (d, x) cell after the first; spans
    /// all functions on a finite support.
    static std::shared_ptr<const Dictionary> saturated(
        const std::vector<std::pair<int, Eigen::VectorXd>>& cells);
    /// Constant plus indicators of every x cell after the first (x-only).
    static std::shared_ptr<const Dictionary> saturated_covariates(
        const std::vector<Eigen::VectorXd>& x_cells);

private:
    std::vector<BasisFeature> features_;
};

} // namespace dml
