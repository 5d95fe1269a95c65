#include "dml/scores.hpp"

#include <cmath>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

namespace {

DxFunction perturbed(const DxFunction& base, const DxFunction& direction, double r) {
    return [base, direction, r](int d, const Eigen::VectorXd& x) {
        return base(d, x) + r * direction(d, x);
    };
}

} // namespace

std::pair<double, double> check_orthogonality(const DiscreteDgp& dgp,
                                              const MomentFunctional& functional,
                                              const DxFunction& direction_gamma,
                                              const DxFunction& direction_alpha, double h) {
    if (!(h > 0.0 && h <= 0.1)) throw ArgumentError("check_orthogonality: h must lie in (0, 0.1]");
    const DxFunction gamma0 = dgp.true_gamma(functional.outcome_index());
    const DxFunction alpha0 = dgp.true_alpha(functional);
    const double theta0 = dgp.true_target(functional);

    const auto expected_score = [&](const DxFunction& gamma, const DxFunction& alpha) {
        return enumerate_score_expectation(dgp, functional, theta0, gamma, alpha);
    };
    const double gamma_plus = expected_score(perturbed(gamma0, direction_gamma, h), alpha0);
    const double gamma_minus = expected_score(perturbed(gamma0, direction_gamma, -h), alpha0);
    const double alpha_plus = expected_score(gamma0, perturbed(alpha0, direction_alpha, h));
    const double alpha_minus = expected_score(gamma0, perturbed(alpha0, direction_alpha, -h));
    return {(gamma_plus - gamma_minus) / (2.0 * h), (alpha_plus - alpha_minus) / (2.0 * h)};
}

std::pair<double, double> double_robustness_residual(const DiscreteDgp& dgp,
                                                     const MomentFunctional& functional,
                                                     const DxFunction& gamma,
                                                     const DxFunction& alpha) {
    const DxFunction gamma0 = dgp.true_gamma(functional.outcome_index());
    const DxFunction alpha0 = dgp.true_alpha(functional);
    const double theta0 = dgp.true_target(functional);
    const double lhs = enumerate_score_expectation(dgp, functional, theta0, gamma, alpha);
    const double rhs = -enumerate_expectation(
        dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
            return (alpha(d, x) - alpha0(d, x)) * (gamma(d, x) - gamma0(d, x));
        });
    return {lhs, rhs};
}

OracleDecomposition oracle_decomposition(const Dataset& data, const DiscreteDgp& dgp,
                                         const std::vector<MomentFunctional>& functionals,
                                         const NuisanceFitSet& fits) {
    audit_fit_set(data, fits);
    if (fits.n_targets() != functionals.size())
        throw ArgumentError("oracle_decomposition: functional/fit count mismatch");
    const std::size_t n = data.n();
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const std::size_t n_folds = fits.folds.size();

    OracleDecomposition out;
    out.targets.resize(functionals.size());
    for (std::size_t j = 0; j < functionals.size(); ++j) {
        const auto& functional = functionals[j];
        const int yj = functional.outcome_index();
        const DxFunction gamma0 = dgp.true_gamma(yj);
        const DxFunction alpha0 = dgp.true_alpha(functional);
        const double theta0 = dgp.true_target(functional);

        // Population means of the per-fold deviation functions, fitted
        // functions treated as fixed.
        std::vector<double> mean_a(n_folds), mean_b(n_folds), mean_c(n_folds);
        for (std::size_t fold = 0; fold < n_folds; ++fold) {
            const auto& fit = fits.folds[fold].targets[j];
            mean_a[fold] = enumerate_expectation(
                dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                    const Record w{d, x};
                    const DxFunction dev = [&](int dd, const Eigen::VectorXd& xx) {
                        return fit.gamma(dd, xx) - gamma0(dd, xx);
                    };
                    return functional.value(w, dev) - alpha0(d, x) * dev(d, x);
                });
            mean_b[fold] = enumerate_expectation(
                dgp, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
                    return (fit.alpha(d, x) - alpha0(d, x)) * (y(yj) - gamma0(d, x));
                });
            mean_c[fold] = enumerate_expectation(
                dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                    return -(fit.alpha(d, x) - alpha0(d, x)) * (fit.gamma(d, x) - gamma0(d, x));
                });
        }

        NeumaierSum sum_a, sum_b, sum_c, sum_d, sum_theta_hat, sum_theta_bar;
        for (std::size_t i = 0; i < n; ++i) {
            const Record w{data.treatment_of(i), data.covariate_row(i)};
            const double y = data.outcome(i, yj);
            const std::size_t fold = static_cast<std::size_t>(fits.fold_of(i));
            const auto& fit = fits.folds[fold].targets[j];

            const double g_hat = fit.gamma(w.d, w.x);
            const double a_hat = fit.alpha(w.d, w.x);
            const double g0 = gamma0(w.d, w.x);
            const double a0 = alpha0(w.d, w.x);

            const DxFunction dev = [&](int dd, const Eigen::VectorXd& xx) {
                return fit.gamma(dd, xx) - gamma0(dd, xx);
            };
            const double f_a = functional.value(w, dev) - a0 * (g_hat - g0);
            const double f_b = (a_hat - a0) * (y - g0);
            const double f_c = -(a_hat - a0) * (g_hat - g0);

            sum_a.add(f_a - mean_a[fold]);
            sum_b.add(f_b - mean_b[fold]);
            sum_c.add(f_c - mean_c[fold]);
            sum_d.add(mean_c[fold]);

            const DxFunction gamma_hat_fn = [&](int dd, const Eigen::VectorXd& xx) {
                return fit.gamma(dd, xx);
            };
            sum_theta_hat.add(functional.value(w, gamma_hat_fn) + a_hat * (y - g_hat));
            sum_theta_bar.add(functional.value(w, gamma0) + a0 * (y - g0));
        }

        auto& t = out.targets[j];
        const double inv_sqrt_n = 1.0 / sqrt_n;
        t.a = inv_sqrt_n * sum_a.value();
        t.b = inv_sqrt_n * sum_b.value();
        t.c = inv_sqrt_n * sum_c.value();
        // D = -sqrt(n) E_P[(alpha_hat - alpha_0)(gamma_hat - gamma_0)], averaged
        // over the per-fold fits with fold weights n_l / n.
        t.d = inv_sqrt_n * sum_d.value();
        const double theta_hat = sum_theta_hat.value() / static_cast<double>(n);
        const double theta_bar = sum_theta_bar.value() / static_cast<double>(n);
        t.oracle_term = sqrt_n * (theta_bar - theta0);
        t.sqrtn_error = sqrt_n * (theta_hat - theta0);
        t.residual = t.oracle_term + t.a + t.b + t.c + t.d - t.sqrtn_error;
    }
    return out;
}

} // namespace dml
