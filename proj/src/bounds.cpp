#include "dml/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "dml/errors.hpp"

namespace dml {

std::string regime_name(TailRegime regime) {
    switch (regime) {
        case TailRegime::heavy_tail_q: return "heavy";
        case TailRegime::sub_gaussian: return "subgauss";
        case TailRegime::bounded: return "bounded";
    }
    throw ArgumentError("regime_name: unknown regime");
}

TailRegime regime_from_name(const std::string& name) {
    if (name == "heavy" || name == "heavy_tail_q") return TailRegime::heavy_tail_q;
    if (name == "subgauss" || name == "sub_gaussian") return TailRegime::sub_gaussian;
    if (name == "bounded") return TailRegime::bounded;
    throw ConfigError("unknown tail regime \"" + name + "\"");
}

namespace {

double lookup_constant(const std::map<std::string, double>& constants, const std::string& name) {
    const auto it = constants.find(name);
    if (it == constants.end()) return 1.0;
    if (!(it->second >= 0.0))
        throw ValidationError("constant " + name + " must be nonnegative");
    return it->second;
}

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value))
        throw ValidationError(std::string(name) + " must be positive and finite");
}

void require_nonnegative(double value, const char* name) {
    if (!(value >= 0.0) || !std::isfinite(value))
        throw ValidationError(std::string(name) + " must be nonnegative and finite");
}

constexpr double kEuler = 2.718281828459045;

} // namespace

double Theorem1Inputs::constant(const std::string& name) const {
    return lookup_constant(constants, name);
}

void Theorem1Inputs::validate() const {
    if (!(n > 1.0)) throw ValidationError("theorem 1 inputs: n must exceed 1");
    if (!(p >= 2.0)) throw ValidationError("theorem 1 inputs: p must be at least 2 (log p > 0)");
    if (!(q >= 4.0)) throw ValidationError("theorem 1 inputs: q must be at least 4");
    require_positive(b_n, "b_n");
    require_positive(lambda_min, "lambda_min");
    require_positive(sigma_min, "sigma_min");
    require_positive(q_bar, "Q_bar");
    require_positive(alpha_bar, "alpha_bar");
    require_positive(sigma_bar, "sigma_bar");
    require_nonnegative(delta, "delta");
    if (!(v_n >= 1.0)) throw ValidationError("theorem 1 inputs: v_n must be at least 1");
    if (!(a_n >= kEuler)) throw ValidationError("theorem 1 inputs: a_n must be at least e");
    require_nonnegative(m_n, "M_n");
    require_nonnegative(r_gamma, "R(gamma)");
    require_nonnegative(r_alpha, "R(alpha)");
    require_positive(c, "c");
}

double theorem1_term_A(const Theorem1Inputs& in, TailRegime regime) {
    in.validate();
    const double C = in.constant("C_q");
    const double log_p = std::log(in.p);
    const double log_n = std::log(in.n);
    const double first = in.b_n * std::pow(log_p, 1.5) * log_n / (std::sqrt(in.n) * in.lambda_min);
    switch (regime) {
        case TailRegime::bounded:
            return C * first;
        case TailRegime::sub_gaussian: {
            const double second =
                in.b_n * in.b_n * log_p * log_p / std::sqrt(in.n * in.lambda_min);
            return C * (first + second);
        }
        case TailRegime::heavy_tail_q: {
            const double second = in.b_n * in.b_n * log_p * log_p * log_n /
                                  (std::pow(in.n, 1.0 - 2.0 / in.q) * in.lambda_min);
            const double third_inner =
                std::pow(in.b_n, in.q) * std::pow(log_p, 1.5 * in.q - 4.0) * log_n *
                std::log(in.p * in.n) /
                (std::pow(in.n, in.q / 2.0 - 1.0) * std::pow(in.lambda_min, in.q / 2.0));
            const double third = std::pow(third_inner, 1.0 / (in.q - 2.0));
            return C * (first + second + third);
        }
    }
    throw ArgumentError("theorem1_term_A: unknown regime");
}

double theorem1_delta1(const Theorem1Inputs& in) {
    in.validate();
    const double K = in.constant("K");
    const double rate_part =
        ((2.0 + std::sqrt(2.0)) * in.alpha_bar + std::sqrt(2.0) * in.q_bar) * in.r_gamma +
        in.sigma_bar * in.r_alpha;
    const double entropy = std::sqrt(3.0 * in.v_n * std::log(3.0 * in.a_n));
    const double envelope_part = 3.0 * in.v_n *
                                 std::pow(in.n, 1.0 / (2.0 + in.delta) - 0.5) * 5.0 * in.m_n *
                                 std::log(3.0 * in.a_n);
    return K * (rate_part * entropy + envelope_part);
}

double theorem1_delta2(const Theorem1Inputs& in) {
    in.validate();
    return std::sqrt(in.n) * in.r_gamma * in.r_alpha;
}

Theorem1Bound theorem1_bound(const Theorem1Inputs& in, TailRegime regime) {
    in.validate();
    Theorem1Bound out;
    out.regime = regime;
    out.term_a = theorem1_term_A(in, regime);
    out.delta_1n = theorem1_delta1(in);
    out.delta_2n = theorem1_delta2(in);
    out.term_b = 6.0 * std::sqrt(std::log(in.p)) / in.sigma_min * (out.delta_1n + out.delta_2n);
    out.term_c = in.c / std::log(in.n);
    out.total = out.term_a + out.term_b + out.term_c;
    out.warnings.push_back("bound evaluated up to configured constants");
    if (out.total >= 1.0) out.warnings.push_back("bound vacuous at these inputs (total >= 1)");
    return out;
}

double Theorem2Inputs::constant(const std::string& name) const {
    return lookup_constant(constants, name);
}

void Theorem2Inputs::validate() const {
    if (!(n > 1.0)) throw ValidationError("theorem 2 inputs: n must exceed 1");
    if (!(q >= 4.0)) throw ValidationError("theorem 2 inputs: q must be at least 4");
    require_nonnegative(eps_n, "eps_n");
    require_positive(c0, "c0");
    require_positive(c1, "c1");
    require_positive(C0, "C0");
    require_nonnegative(B_1n, "B_1n");
    require_nonnegative(B_2n, "B_2n");
    if (!(omega > 0.0 && omega <= 2.0))
        throw ValidationError("theorem 2 inputs: omega must lie in (0, 2]");
    require_nonnegative(delta, "delta");
    if (!(v_n >= 1.0)) throw ValidationError("theorem 2 inputs: v_n must be at least 1");
    if (!(a_n >= kEuler)) throw ValidationError("theorem 2 inputs: a_n must be at least e");
    require_nonnegative(m_n, "M_n");
    require_nonnegative(r_eta, "R(eta)");
    require_positive(b_n, "b_n");
    if (!(V_n >= 1.0)) throw ValidationError("theorem 2 inputs: V_n must be at least 1");
    if (!(A_n >= n)) throw ValidationError("theorem 2 inputs: A_n must be at least n");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw ValidationError("theorem 2 inputs: gamma must lie in (0, 1)");
    require_positive(c, "c");
    if (delta_prefactor) require_nonnegative(*delta_prefactor, "delta prefactor");
}

Theorem2Bound theorem2_bound(const Theorem2Inputs& in) {
    in.validate();
    Theorem2Bound out;
    const double K = in.constant("K");
    const double d_q = in.constant("d_q");
    const double D_q = in.constant("D_q");
    const double kappa = in.constant("kappa");
    const double chi = in.constant("chi");
    const double root_n = std::sqrt(in.n);
    const double log_n = std::log(in.n);

    // Preliminary rate for theta, maxed with the nuisance rate.
    const double preliminary =
        (in.eps_n / (in.c1 * root_n)) +
        (K / (in.c1 * root_n)) *
            (in.C0 * std::sqrt(in.v_n * std::log(in.a_n)) +
             in.v_n * std::pow(in.n, 1.0 / (2.0 + in.delta) - 0.5) * in.m_n * std::log(in.a_n)) +
        in.B_1n * in.r_eta / in.c1;
    out.r_vee = std::max(preliminary, in.r_eta);

    const double prefactor = in.delta_prefactor ? *in.delta_prefactor : 1.0 / in.C0;
    out.delta_1n = prefactor * K *
                   (std::sqrt(in.C0) * std::pow(out.r_vee, in.omega / 2.0) *
                        std::sqrt(2.0 * in.v_n * std::log(2.0 * in.a_n)) +
                    2.0 * in.v_n * std::pow(in.n, 1.0 / (2.0 + in.delta) - 0.5) * 2.0 * in.m_n *
                        std::log(2.0 * in.a_n));
    out.delta_2n = prefactor * 0.5 * root_n * in.B_2n * out.r_vee * out.r_vee;

    out.l_n = d_q * in.V_n * std::max(log_n, std::log(in.A_n * in.b_n));
    out.delta_3n = in.b_n * out.l_n / (std::sqrt(in.gamma) * std::pow(in.n, 0.5 - 1.0 / in.q)) +
                   std::sqrt(in.b_n) * std::pow(out.l_n, 0.75) /
                       (std::sqrt(in.gamma) * std::pow(in.n, 0.25)) +
                   std::cbrt(in.b_n * out.l_n * out.l_n) /
                       (std::cbrt(in.gamma) * std::pow(in.n, 1.0 / 6.0));

    out.r_1n = in.eps_n / in.c0 + out.delta_1n + out.delta_2n + out.delta_3n;
    out.r_2n = D_q * (in.gamma + log_n / in.n) + in.c / log_n;

    if (out.r_1n == 0.0) {
        out.total = out.r_2n;
    } else {
        const double dudley = chi * std::sqrt(in.V_n * std::log(in.A_n * in.b_n));
        const double log_term = std::sqrt(std::max(1.0, std::log(1.0 / out.r_1n)));
        out.total = kappa * out.r_1n * (dudley + log_term) + out.r_2n;
    }
    out.warnings.push_back("bound evaluated up to configured constants");
    if (out.total >= 1.0) out.warnings.push_back("bound vacuous at these inputs (total >= 1)");
    return out;
}

double maximal_inequality_bound(double sigma, double v, double a, double M, double q, double c,
                                double K, double n) {
    (void)c;
    require_nonnegative(sigma, "sigma");
    if (!(v >= 1.0)) throw ValidationError("maximal_inequality_bound: v must be at least 1");
    if (!(a >= kEuler)) throw ValidationError("maximal_inequality_bound: a must be at least e");
    require_nonnegative(M, "M");
    if (!(q >= 2.0)) throw ValidationError("maximal_inequality_bound: q must be at least 2");
    require_nonnegative(K, "K");
    require_positive(n, "n");
    return K * (sigma * std::sqrt(v * std::log(a)) +
                v * std::pow(n, 1.0 / q - 0.5) * M * std::log(a));
}

std::pair<double, double> entropy_sum(double v1, double a1, double v2, double a2) {
    return entropy_sum({{v1, a1}, {v2, a2}});
}

std::pair<double, double> entropy_sum(const std::vector<std::pair<double, double>>& classes) {
    if (classes.empty()) throw ArgumentError("entropy_sum: no classes");
    double v = 0.0;
    double a_max = 0.0;
    for (const auto& [vi, ai] : classes) {
        if (!(vi >= 1.0)) throw ValidationError("entropy_sum: each v must be at least 1");
        if (!(ai >= kEuler)) throw ValidationError("entropy_sum: each a must be at least e");
        v += vi;
        a_max = std::max(a_max, ai);
    }
    // Splitting the radius across k classes puts a factor k inside the log.
    return {v, static_cast<double>(classes.size()) * a_max};
}

double anti_concentration_bound(double p, double eps, double sigma) {
    if (!(p >= 2.0)) throw ValidationError("anti_concentration_bound: p must be at least 2");
    require_nonnegative(eps, "eps");
    require_positive(sigma, "sigma");
    return 12.0 * eps * std::sqrt(std::log(p)) / sigma;
}

EmpiricalBoundInputs empirical_bound_inputs(const DiscreteDgp& dgp,
                                            const std::vector<MomentFunctional>& functionals,
                                            const NuisanceFitSet& fits, const ScoreMatrix& score,
                                            double q) {
    if (functionals.empty()) throw ArgumentError("empirical_bound_inputs: no functionals");
    if (fits.n_targets() != functionals.size())
        throw ArgumentError("empirical_bound_inputs: functional/fit count mismatch");
    EmpiricalBoundInputs out;
    Theorem1Inputs& in = out.inputs;
    in.n = static_cast<double>(score.values.rows());
    in.p = static_cast<double>(functionals.size());
    in.q = q;

    const std::size_t p = functionals.size();
    std::vector<DxFunction> gammas, alphas;
    std::vector<double> thetas, sigmas;
    for (const auto& f : functionals) {
        gammas.push_back(dgp.true_gamma(f.outcome_index()));
        alphas.push_back(dgp.true_alpha(f));
        thetas.push_back(dgp.true_target(f));
        sigmas.push_back(dgp.oracle_sigma(f));
    }
    in.sigma_min = *std::min_element(sigmas.begin(), sigmas.end());

    const Eigen::MatrixXd corr = dgp.oracle_correlation(functionals);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
    in.lambda_min = eig.eigenvalues().minCoeff();
    if (in.lambda_min < 1e-10) {
        out.warnings.push_back("oracle correlation is degenerate (lambda_min ~ 0); "
                               "term (A) is undefined at these inputs");
        in.lambda_min = std::max(in.lambda_min, 0.0);
    }

    // b_n: smallest value compatible with both moment conditions, enumerated
    // exactly: the q-norm of max_j |psi_j / sigma_j| and the square roots of
    // the fourth moments.
    double max_q_norm = enumerate_expectation(
        dgp, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
            double worst = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double psi =
                    orthogonal_score(functionals[j], Record{d, x}, y(functionals[j].outcome_index()),
                                     thetas[j], gammas[j], alphas[j]) /
                    sigmas[j];
                worst = std::max(worst, std::abs(psi));
            }
            return std::pow(worst, q);
        });
    double b_n = std::pow(max_q_norm, 1.0 / q);
    for (std::size_t j = 0; j < p; ++j) {
        const double fourth = enumerate_expectation(
            dgp, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
                const double psi =
                    orthogonal_score(functionals[j], Record{d, x}, y(functionals[j].outcome_index()),
                                     thetas[j], gammas[j], alphas[j]) /
                    sigmas[j];
                return psi * psi * psi * psi;
            });
        b_n = std::max(b_n, std::sqrt(fourth));
    }
    in.b_n = b_n;

    // Realized RMSE rates: enumerated L2 distances of the fitted functions to
    // truth, maximized over folds and targets.
    double r_gamma = 0.0;
    double r_alpha = 0.0;
    for (const auto& fold : fits.folds) {
        for (std::size_t j = 0; j < p; ++j) {
            const auto& fit = fold.targets[j];
            const double g2 = enumerate_expectation(
                dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                    const double dev = fit.gamma(d, x) - gammas[j](d, x);
                    return dev * dev;
                });
            const double a2 = enumerate_expectation(
                dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                    const double dev = fit.alpha(d, x) - alphas[j](d, x);
                    return dev * dev;
                });
            r_gamma = std::max(r_gamma, std::sqrt(std::max(g2, 0.0)));
            r_alpha = std::max(r_alpha, std::sqrt(std::max(a2, 0.0)));
        }
    }
    in.r_gamma = r_gamma;
    in.r_alpha = r_alpha;

    // Measured diagnostics for the remaining assumption constants.
    double alpha_bar = 0.0;
    double sigma_bar = 0.0;
    for (const auto& cell : dgp.cells()) {
        for (std::size_t j = 0; j < p; ++j)
            alpha_bar = std::max(alpha_bar, std::abs(alphas[j](cell.d, cell.x)));
    }
    for (std::size_t j = 0; j < p; ++j) {
        const int yj = functionals[j].outcome_index();
        for (const auto& cell : dgp.cells()) {
            double second = 0.0;
            double mass = 0.0;
            for (std::size_t i = 0; i < dgp.atoms().size(); ++i) {
                const auto& atom = dgp.atoms()[i];
                if (atom.d == cell.d && atom.x == cell.x) {
                    const double resid = atom.y(yj) - cell.regression(yj);
                    second += dgp.probabilities()[i] * resid * resid;
                    mass += dgp.probabilities()[i];
                }
            }
            sigma_bar = std::max(sigma_bar, second / mass);
        }
    }
    in.alpha_bar = std::max(alpha_bar, 1e-12);
    in.sigma_bar = std::max(sigma_bar, 1e-12);
    // Entropy fields stay at the pure-splitting defaults (v_n = 1, a_n = e).
    return out;
}

} // namespace dml
