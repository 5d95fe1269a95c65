#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dml/crossfit.hpp"
#include "dml/dgp.hpp"
#include "dml/scores.hpp"

namespace dml {

// Numeric calculators for the finite-sample Kolmogorov-distance guarantees.
// Universal constants that the theory leaves abstract (C_q, K, kappa, chi,
// d_q, D_q) default to 1 and are configurable; every report carries an
// "up to configured constants" note, and the testable content is the exact
// arithmetic of the displayed formulas plus their monotone behavior.

enum class TailRegime { heavy_tail_q, sub_gaussian, bounded };

std::string regime_name(TailRegime regime);
TailRegime regime_from_name(const std::string& name);

/// Inputs for the many-functionals bound. n and p are real-valued so the
/// formula evaluators can be probed at analytically convenient points;
/// experiment code passes integer counts.
struct Theorem1Inputs {
    double n = 1000;
    double p = 2;
    double q = 4;
    double b_n = 1.0;
    double lambda_min = 1.0;
    double sigma_min = 1.0;
    double q_bar = 1.0;      // mean-square continuity constant
    double alpha_bar = 1.0;  // sup-norm bound on the representer
    double sigma_bar = 1.0;  // conditional outcome second-moment bound
    double delta = 0.0;      // envelope moment exponent offset
    double v_n = 1.0;
    double a_n = 2.718281828459045;
    double m_n = 1.0;        // envelope (2+delta)-norm
    double r_gamma = 0.0;    // regression RMSE rate
    double r_alpha = 0.0;    // representer RMSE rate
    double c = 1.0;          // tail-probability split, term C = c / log n
    std::map<std::string, double> constants; // C_q, K (default 1)

    double constant(const std::string& name) const;
    void validate() const;
};

struct Theorem1Bound {
    double term_a = 0.0;
    double term_b = 0.0;
    double term_c = 0.0;
    double delta_1n = 0.0;
    double delta_2n = 0.0;
    double total = 0.0;
    TailRegime regime = TailRegime::heavy_tail_q;
    std::vector<std::string> warnings;
};

/// Gaussian-approximation term (A) under the selected tail regime.
double theorem1_term_A(const Theorem1Inputs& in, TailRegime regime);
/// Uniform nuisance-deviation bound Delta_1n (maximal-inequality term).
double theorem1_delta1(const Theorem1Inputs& in);
/// Cross-rate bias term Delta_2n = sqrt(n) R(gamma) R(alpha).
double theorem1_delta2(const Theorem1Inputs& in);
Theorem1Bound theorem1_bound(const Theorem1Inputs& in, TailRegime regime);

struct Theorem2Inputs {
    double n = 1000;
    double q = 4;
    double eps_n = 0.0;   // approximate-solution slack
    double c0 = 1.0;      // lower Jacobian bound at the truth
    double c1 = 1.0;      // lower Jacobian bound on the parameter path
    double C0 = 1.0;      // upper Jacobian / Lipschitz constant
    double B_1n = 0.0;    // first-derivative bound in eta
    double B_2n = 1.0;    // second-derivative bound
    double omega = 2.0;   // Lipschitz exponent, in (0, 2]
    double delta = 0.0;
    double v_n = 1.0;
    double a_n = 2.718281828459045;
    double m_n = 1.0;
    double r_eta = 0.0;   // nuisance RMSE rate
    double b_n = 1.0;     // envelope q-norm of the re-scaled oracle score
    double V_n = 1.0;     // oracle-score entropy dimension
    double A_n = 1000;    // oracle-score entropy scale, >= n
    double gamma = 0.5;   // coupling probability split, in (0, 1)
    double c = 1.0;
    std::map<std::string, double> constants; // K, d_q, D_q, kappa, chi (default 1)
    /// Override for the Delta_1n/Delta_2n prefactor (default 1/C0, as in the
    /// theorem statement; the proof text uses 1/c0).
    std::optional<double> delta_prefactor;

    double constant(const std::string& name) const;
    void validate() const;
};

struct Theorem2Bound {
    double r_vee = 0.0;   // preliminary-vs-nuisance rate max
    double delta_1n = 0.0;
    double delta_2n = 0.0;
    double delta_3n = 0.0;
    double l_n = 0.0;
    double r_1n = 0.0;
    double r_2n = 0.0;
    double total = 0.0;
    std::vector<std::string> warnings;
};

Theorem2Bound theorem2_bound(const Theorem2Inputs& in);

/// K (sigma sqrt(v log a) + v n^{1/q - 1/2} M log a); the `c` argument only
/// documents which failure probability the constant K was chosen for.
double maximal_inequality_bound(double sigma, double v, double a, double M, double q, double c,
                                double K, double n);

/// Entropy parameters of a sum class: (v1 + v2, 2 max(a1, a2)).
std::pair<double, double> entropy_sum(double v1, double a1, double v2, double a2);
/// k-class version: (sum v_i, k max_i a_i); three identical classes give
/// (3v, 3a) as used for the F_C bound.
std::pair<double, double> entropy_sum(const std::vector<std::pair<double, double>>& classes);

/// 12 eps sqrt(log p) / sigma for the Gaussian max over p coordinates.
double anti_concentration_bound(double p, double eps, double sigma);

/// Measures sigma_min, lambda_min, b_n and the realized RMSE rates of a fit
/// set against dgp truth by enumeration; entropy fields keep their defaults
/// (pure splitting: v_n = 1, a_n = e).
struct EmpiricalBoundInputs {
    Theorem1Inputs inputs;
    std::vector<std::string> warnings;
};

EmpiricalBoundInputs empirical_bound_inputs(const DiscreteDgp& dgp,
                                            const std::vector<MomentFunctional>& functionals,
                                            const NuisanceFitSet& fits, const ScoreMatrix& score,
                                            double q = 4.0);

} // namespace dml
