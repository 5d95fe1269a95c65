#pragma once

#include <memory>

#include "dml/data.hpp"
#include "dml/dictionary.hpp"

namespace dml {

/// Multinomial-logistic propensity model over the label set, fit on an
/// x-only dictionary. Outputs are clipped to [clip, 1-clip] and renormalized.
class PropensityFit {
public:
    PropensityFit(std::shared_ptr<const Dictionary> dictionary, Eigen::MatrixXd coefficients,
                  int n_labels, double clip, int iterations, double gradient_norm);

    /// Clipped, renormalized label probabilities at x.
    Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const;
    double prob(int label, const Eigen::VectorXd& x) const;

    int n_labels() const { return n_labels_; }
    double clip() const { return clip_; }
    int iterations() const { return iterations_; }
    double gradient_norm() const { return gradient_norm_; }
    const Eigen::MatrixXd& coefficients() const { return coefficients_; }

private:
    std::shared_ptr<const Dictionary> dictionary_;
    Eigen::MatrixXd coefficients_; // dim x (n_labels - 1), baseline = label 0
    int n_labels_;
    double clip_;
    int iterations_;
    double gradient_norm_;
};

/// Penalized maximum likelihood via damped Newton (step halving, ridge
/// escalation on singular Hessians). `gtol` bounds the mean per-observation
/// score.
PropensityFit fit_propensity(const Dataset& data, std::shared_ptr<const Dictionary> dictionary,
                             double clip, double ridge = 0.0, int max_iterations = 100,
                             double gtol = 1e-9);

/// Binary logistic probability fit for an arbitrary 0/1 response on the
/// observed (D, X) design; used by distribution regression.
struct BinaryLogitFit {
    std::shared_ptr<const Dictionary> dictionary;
    Eigen::VectorXd coefficients;
    double predict(int d, const Eigen::VectorXd& x) const;
    DxFunction as_function() const;
};

BinaryLogitFit fit_binary_logit(const Dataset& data, const Eigen::VectorXd& response,
                                std::shared_ptr<const Dictionary> dictionary, double ridge = 0.0,
                                int max_iterations = 100, double gtol = 1e-9);

} // namespace dml
