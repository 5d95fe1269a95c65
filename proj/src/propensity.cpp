#include "dml/propensity.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "dml/errors.hpp"

namespace dml {

namespace {

struct LogitProblem {
    const Eigen::MatrixXd& design;  // n x m
    const std::vector<int>& response; // class ids in [0, K]
    int n_classes;
    double ridge;
};

// Row-wise class probabilities for the current coefficients (m x K, baseline 0).
Eigen::MatrixXd class_probabilities(const LogitProblem& prob, const Eigen::MatrixXd& beta) {
    const auto n = prob.design.rows();
    const int K = prob.n_classes - 1;
    Eigen::MatrixXd eta = prob.design * beta; // n x K
    Eigen::MatrixXd p(n, prob.n_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        double maxeta = 0.0;
        for (int k = 0; k < K; ++k) maxeta = std::max(maxeta, eta(i, k));
        double denom = std::exp(-maxeta);
        for (int k = 0; k < K; ++k) denom += std::exp(eta(i, k) - maxeta);
        p(i, 0) = std::exp(-maxeta) / denom;
        for (int k = 0; k < K; ++k) p(i, k + 1) = std::exp(eta(i, k) - maxeta) / denom;
    }
    return p;
}

double penalized_nll(const LogitProblem& prob, const Eigen::MatrixXd& beta,
                     const Eigen::MatrixXd& p) {
    double nll = 0.0;
    for (Eigen::Index i = 0; i < prob.design.rows(); ++i)
        nll -= std::log(std::max(p(i, prob.response[static_cast<std::size_t>(i)]), 1e-300));
    nll += 0.5 * prob.ridge * beta.squaredNorm();
    return nll;
}

struct NewtonResult {
    Eigen::MatrixXd beta;
    int iterations;
    double gradient_norm; // max-norm of the mean per-observation score
    bool converged;
};

NewtonResult newton_logit(const LogitProblem& prob, int max_iterations, double gtol) {
    const auto n = prob.design.rows();
    const auto m = prob.design.cols();
    const int K = prob.n_classes - 1;
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(m, K);
    Eigen::MatrixXd p = class_probabilities(prob, beta);
    double nll = penalized_nll(prob, beta, p);
    double grad_scale = 0.0;
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        // Stacked gradient and Hessian over classes 1..K.
        Eigen::VectorXd grad(m * K);
        for (int k = 0; k < K; ++k) {
            Eigen::VectorXd resid(n);
            for (Eigen::Index i = 0; i < n; ++i)
                resid(i) = p(i, k + 1) -
                           (prob.response[static_cast<std::size_t>(i)] == k + 1 ? 1.0 : 0.0);
            grad.segment(k * m, m) = prob.design.transpose() * resid + prob.ridge * beta.col(k);
        }
        grad_scale = grad.cwiseAbs().maxCoeff() / static_cast<double>(n);
        if (grad_scale <= gtol) return {beta, iter, grad_scale, true};

        Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m * K, m * K);
        for (int k = 0; k < K; ++k) {
            for (int l = k; l < K; ++l) {
                Eigen::VectorXd w(n);
                for (Eigen::Index i = 0; i < n; ++i)
                    w(i) = p(i, k + 1) * ((k == l ? 1.0 : 0.0) - p(i, l + 1));
                Eigen::MatrixXd block = prob.design.transpose() * w.asDiagonal() * prob.design;
                hess.block(k * m, l * m, m, m) = block;
                if (l != k) hess.block(l * m, k * m, m, m) = block.transpose();
            }
            hess.block(k * m, k * m, m, m) += prob.ridge * Eigen::MatrixXd::Identity(m, m);
        }

        // Levenberg damping: escalate tau until the step is finite and
        // decreases the objective after step halving.
        const double base_tau = 1e-12 * std::max(1.0, hess.trace() / static_cast<double>(m * K));
        double tau = 0.0;
        bool accepted = false;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            Eigen::MatrixXd damped = hess;
            if (tau > 0.0) damped += tau * Eigen::MatrixXd::Identity(m * K, m * K);
            Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
            if (ldlt.info() == Eigen::Success) {
                Eigen::VectorXd step = ldlt.solve(-grad);
                if (step.allFinite()) {
                    double scale = 1.0;
                    for (int half = 0; half < 40; ++half) {
                        Eigen::MatrixXd candidate = beta;
                        for (int k = 0; k < K; ++k) candidate.col(k) += scale * step.segment(k * m, m);
                        Eigen::MatrixXd cand_p = class_probabilities(prob, candidate);
                        const double cand_nll = penalized_nll(prob, candidate, cand_p);
                        // Slack of a few ulps: near the optimum the true
                        // decrease drops below rounding noise on the sum.
                        if (std::isfinite(cand_nll) &&
                            cand_nll <= nll + 1e-12 * (1.0 + std::abs(nll))) {
                            beta = std::move(candidate);
                            p = std::move(cand_p);
                            nll = cand_nll;
                            accepted = true;
                            break;
                        }
                        scale *= 0.5;
                    }
                }
            }
            tau = tau == 0.0 ? base_tau : tau * 100.0;
        }
        if (!accepted) return {beta, iter, grad_scale, false};
    }
    // Re-check the score at exit.
    Eigen::VectorXd grad(m * K);
    for (int k = 0; k < K; ++k) {
        Eigen::VectorXd resid(n);
        for (Eigen::Index i = 0; i < n; ++i)
            resid(i) = p(i, k + 1) - (prob.response[static_cast<std::size_t>(i)] == k + 1 ? 1.0 : 0.0);
        grad.segment(k * m, m) = prob.design.transpose() * resid + prob.ridge * beta.col(k);
    }
    grad_scale = grad.cwiseAbs().maxCoeff() / static_cast<double>(n);
    return {beta, iter, grad_scale, grad_scale <= gtol};
}

} // namespace

PropensityFit::PropensityFit(std::shared_ptr<const Dictionary> dictionary,
                             Eigen::MatrixXd coefficients, int n_labels, double clip,
                             int iterations, double gradient_norm)
    : dictionary_(std::move(dictionary)),
      coefficients_(std::move(coefficients)),
      n_labels_(n_labels),
      clip_(clip),
      iterations_(iterations),
      gradient_norm_(gradient_norm) {}

Eigen::VectorXd PropensityFit::probabilities(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd basis = dictionary_->eval_all(0, x);
    const int K = n_labels_ - 1;
    Eigen::VectorXd eta = coefficients_.transpose() * basis;
    double maxeta = 0.0;
    for (int k = 0; k < K; ++k) maxeta = std::max(maxeta, eta(k));
    double denom = std::exp(-maxeta);
    for (int k = 0; k < K; ++k) denom += std::exp(eta(k) - maxeta);
    Eigen::VectorXd p(n_labels_);
    p(0) = std::exp(-maxeta) / denom;
    for (int k = 0; k < K; ++k) p(k + 1) = std::exp(eta(k) - maxeta) / denom;
    for (int k = 0; k < n_labels_; ++k) p(k) = std::clamp(p(k), clip_, 1.0 - clip_);
    return p / p.sum();
}

double PropensityFit::prob(int label, const Eigen::VectorXd& x) const {
    if (label < 0 || label >= n_labels_) throw ArgumentError("PropensityFit: label out of range");
    return probabilities(x)(label);
}

PropensityFit fit_propensity(const Dataset& data, std::shared_ptr<const Dictionary> dictionary,
                             double clip, double ridge, int max_iterations, double gtol) {
    if (!(clip > 0.0 && clip < 0.5))
        throw ArgumentError("fit_propensity: clip must lie in (0, 0.5)");
    if (dictionary->has_treatment_features())
        throw ValidationError("fit_propensity: propensity dictionary must not depend on treatment");
    std::vector<int> counts(static_cast<std::size_t>(data.n_labels()), 0);
    for (std::size_t i = 0; i < data.n(); ++i) ++counts[static_cast<std::size_t>(data.treatment_of(i))];
    for (int k = 0; k < data.n_labels(); ++k)
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw EstimationError("fit_propensity: treatment label \"" +
                                  data.labels()[static_cast<std::size_t>(k)] +
                                  "\" is absent from the data");

    const Eigen::MatrixXd B = dictionary->design(data);
    LogitProblem prob{B, data.treatment(), data.n_labels(), ridge};
    const NewtonResult result = newton_logit(prob, max_iterations, gtol);
    if (!result.converged)
        throw ConvergenceError("fit_propensity: no convergence after " +
                               std::to_string(max_iterations) + " iterations (mean score " +
                               std::to_string(result.gradient_norm) + ")");
    return PropensityFit(std::move(dictionary), result.beta, data.n_labels(), clip,
                         result.iterations, result.gradient_norm);
}

double BinaryLogitFit::predict(int d, const Eigen::VectorXd& x) const {
    const double eta = coefficients.dot(dictionary->eval_all(d, x));
    return 1.0 / (1.0 + std::exp(-eta));
}

DxFunction BinaryLogitFit::as_function() const {
    const auto dict = dictionary;
    const Eigen::VectorXd coef = coefficients;
    return [dict, coef](int d, const Eigen::VectorXd& x) {
        const double eta = coef.dot(dict->eval_all(d, x));
        return 1.0 / (1.0 + std::exp(-eta));
    };
}

BinaryLogitFit fit_binary_logit(const Dataset& data, const Eigen::VectorXd& response,
                                std::shared_ptr<const Dictionary> dictionary, double ridge,
                                int max_iterations, double gtol) {
    if (response.size() != static_cast<Eigen::Index>(data.n()))
        throw ArgumentError("fit_binary_logit: response length mismatch");
    std::vector<int> classes(data.n());
    for (std::size_t i = 0; i < data.n(); ++i) {
        const double v = response(static_cast<Eigen::Index>(i));
        if (v != 0.0 && v != 1.0)
            throw ArgumentError("fit_binary_logit: response must be 0/1");
        classes[i] = static_cast<int>(v);
    }
    const Eigen::MatrixXd B = dictionary->design(data);
    LogitProblem prob{B, classes, 2, ridge};
    const NewtonResult result = newton_logit(prob, max_iterations, gtol);
    if (!result.converged)
        throw ConvergenceError("fit_binary_logit: no convergence after " +
                               std::to_string(max_iterations) + " iterations (mean score " +
                               std::to_string(result.gradient_norm) + ")");
    return BinaryLogitFit{std::move(dictionary), result.beta.col(0)};
}

} // namespace dml
