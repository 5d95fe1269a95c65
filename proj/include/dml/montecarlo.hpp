#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dml/bounds.hpp"
#include "dml/data.hpp"
#include "dml/dgp.hpp"
#include "dml/dictionary.hpp"
#include "dml/estimate.hpp"
#include "dml/functional.hpp"
#include "dml/rng.hpp"

namespace dml {

/// Continuous catalog dgp: X ~ N(0, I_k), logistic propensity in x, p
/// independent linear outcomes Y_j = tau_j D + x' beta_j + eps_j with
/// standard-logistic noise scaled by noise_scale. The linear mean makes the
/// ridge regression correctly specified, and the logistic noise makes
/// per-threshold distribution regression correctly specified. No enumeration
/// oracle, but every moment the coverage and KS experiments need is available
/// in closed form (the marginal CDF via one smooth quadrature).
class GaussianLinearDgp {
public:
    GaussianLinearDgp(int p, int k, double propensity_scale = 0.8, double noise_scale = 0.6);

    Dataset sample(std::size_t n, Rng& rng) const;

    int n_outcomes() const { return p_; }
    int n_covariates() const { return k_; }
    double tau(int j) const { return tau_(j); }
    double true_target(int j) const { return tau_(j); }
    double propensity(const Eigen::VectorXd& x) const; // P(D=1 | x)

    DxFunction true_gamma(int outcome_index) const;
    DxFunction true_alpha() const;

    /// sd of the oracle score (same for every outcome): the contrast is
    /// constant, so psi_0j = alpha_0 * noise and
    /// sigma^2 = Var(noise) (2 + 2 exp(|zeta|^2 / 2)).
    double oracle_sigma() const;
    /// Oracle scores are independent across outcomes: identity correlation.
    Eigen::MatrixXd oracle_correlation() const;

    /// Marginal potential-outcome CDF F_{Y(arm)}(u), exact.
    double true_cdf(int arm, int outcome_index, double u) const;

private:
    int p_;
    int k_;
    double noise_scale_;
    Eigen::VectorXd zeta_;
    Eigen::VectorXd tau_;
    Eigen::MatrixXd beta_; // k x p
};

DiscreteDgp make_discrete4();
DiscreteDgp make_discrete8();

enum class ExperimentMode { coverage, ks, decomposition_audit };
enum class NuisanceSource { oracle, fitted, oracle_gamma_wrong_alpha };

std::string mode_name(ExperimentMode mode);
ExperimentMode mode_from_name(const std::string& name);
std::string nuisance_source_name(NuisanceSource source);
NuisanceSource nuisance_source_from_name(const std::string& name);

/// Fully serializable description of a replicated experiment; the hash of
/// the canonical string identifies the run.
struct ExperimentSpec {
    std::string dgp = "discrete4"; // discrete4 | discrete8 | gaussian_linear
    int p = 1;                     // outcomes (gaussian_linear only)
    int k = 5;                     // covariates (gaussian_linear only)
    std::size_t n = 1000;
    int replications = 200;
    std::uint64_t master_seed = 1;
    double level = 0.95;
    std::size_t draws = 20000;     // Gaussian-max draws per critical value
    int folds = 5;
    NuisanceSource nuisance = NuisanceSource::oracle;
    PolynomialSpec dictionary{};
    ExperimentMode mode = ExperimentMode::coverage;
    Sided sided = Sided::two_sided;
    int grid_size = 0;             // > 0: CDF-band coverage on a quantile grid
    int cdf_arm = 1;
    std::optional<double> critical_value_override;
    std::size_t gaussian_draws = 100000; // reference sample size B for KS mode
    int threads = 1;

    std::string canonical_string() const;
    std::uint64_t spec_hash() const;
    void validate() const;
};

struct CoverageReport {
    double joint_coverage = 0.0;
    Eigen::VectorXd marginal_coverage;
    Eigen::VectorXd mean_half_width;
    int replications = 0;
    int failures = 0;
    double mc_se = 0.0; // sqrt(cov (1 - cov) / R)
    std::uint64_t spec_hash = 0;
};

struct KsReport {
    std::vector<double> sup_t_sample;
    std::vector<double> gaussian_sample;
    double ks = 0.0;
    std::optional<double> bound_total;
    bool bound_vacuous = false;
    bool empirical_within_bound = false;
    std::uint64_t spec_hash = 0;
};

struct DecompositionAuditReport {
    double max_scaled_residual = 0.0; // |residual| / (1 + |sqrt(n) error|)
    double max_abs_a = 0.0;
    double max_abs_b = 0.0;
    double max_abs_c = 0.0;
    double max_abs_d = 0.0;
    double median_abs_d = 0.0;
    bool identity_ok = false;
    int replications = 0;
    std::uint64_t spec_hash = 0;
};

/// Replicated band construction; records whether the full truth vector lies
/// inside the joint band. Replications run on derived streams and aggregate
/// in index order, so reports are identical for every thread count.
CoverageReport run_coverage(const ExperimentSpec& spec);

/// Replicated sup-t statistics max_j sqrt(n) |theta_hat_j - theta_0j| /
/// sigma_j, studentized by the oracle sigma.
std::vector<double> empirical_sup_t(const ExperimentSpec& spec);

/// Two-sample Kolmogorov statistic by sorted merge.
double ks_distance(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

/// Empirical KS against the Gaussian-max reference plus the Theorem 1 value
/// at the supplied inputs.
KsReport bound_vs_empirical(const ExperimentSpec& spec,
                            const std::optional<Theorem1Inputs>& bound_inputs,
                            TailRegime regime = TailRegime::heavy_tail_q);

/// Replicated exact-decomposition audit on an enumerable dgp.
DecompositionAuditReport decomposition_audit(const ExperimentSpec& spec);

} // namespace dml
