#include "dml/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dml/cdf_bands.hpp"
#include "dml/errors.hpp"

namespace dml {

// ---------------------------------------------------------------------------
// Gaussian linear catalog dgp

GaussianLinearDgp::GaussianLinearDgp(int p, int k, double propensity_scale, double noise_scale)
    : p_(p), k_(k), noise_scale_(noise_scale) {
    if (p < 1 || k < 1) throw ArgumentError("GaussianLinearDgp: p and k must be positive");
    if (!(noise_scale > 0.0)) throw ArgumentError("GaussianLinearDgp: noise_scale must be positive");
    // Fixed deterministic coefficient patterns.
    Eigen::VectorXd raw(k);
    for (int m = 0; m < k; ++m) raw(m) = std::cos(1.3 * (m + 1));
    zeta_ = propensity_scale * raw / raw.norm();
    tau_ = Eigen::VectorXd::Ones(p);
    beta_.resize(k, p);
    for (int j = 0; j < p; ++j) {
        Eigen::VectorXd col(k);
        for (int m = 0; m < k; ++m) col(m) = std::sin(0.7 * (j + 1) + 1.1 * (m + 1));
        beta_.col(j) = col / col.norm();
    }
}

double GaussianLinearDgp::propensity(const Eigen::VectorXd& x) const {
    return 1.0 / (1.0 + std::exp(-zeta_.dot(x)));
}

Dataset GaussianLinearDgp::sample(std::size_t n, Rng& rng) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), k_);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), p_);
    std::vector<int> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        for (int m = 0; m < k_; ++m) x(row, m) = rng.next_normal();
        const double pi = propensity(x.row(row).transpose());
        d[i] = rng.next_double() < pi ? 1 : 0;
        for (int j = 0; j < p_; ++j) {
            const double u = rng.next_open_double();
            const double noise = noise_scale_ * std::log(u / (1.0 - u));
            y(row, j) = tau_(j) * static_cast<double>(d[i]) + x.row(row) * beta_.col(j) + noise;
        }
    }
    return Dataset(std::move(y), std::move(d), {"0", "1"}, std::move(x));
}

DxFunction GaussianLinearDgp::true_gamma(int outcome_index) const {
    const double tau = tau_(outcome_index);
    const Eigen::VectorXd beta = beta_.col(outcome_index);
    return [tau, beta](int d, const Eigen::VectorXd& x) {
        return tau * static_cast<double>(d) + beta.dot(x);
    };
}

DxFunction GaussianLinearDgp::true_alpha() const {
    const Eigen::VectorXd zeta = zeta_;
    return [zeta](int d, const Eigen::VectorXd& x) {
        const double pi = 1.0 / (1.0 + std::exp(-zeta.dot(x)));
        return d == 1 ? 1.0 / pi : -1.0 / (1.0 - pi);
    };
}

double GaussianLinearDgp::oracle_sigma() const {
    constexpr double pi = 3.141592653589793;
    const double noise_var = noise_scale_ * noise_scale_ * pi * pi / 3.0;
    return std::sqrt(noise_var * (2.0 + 2.0 * std::exp(0.5 * zeta_.squaredNorm())));
}

Eigen::MatrixXd GaussianLinearDgp::oracle_correlation() const {
    return Eigen::MatrixXd::Identity(p_, p_);
}

double GaussianLinearDgp::true_cdf(int arm, int outcome_index, double u) const {
    // F(u) = E_T[ logistic((u - tau arm - T) / s) ], T ~ N(0, |beta|^2);
    // composite Simpson over +-10 sd of the smooth integrand.
    const double mean = tau_(outcome_index) * static_cast<double>(arm);
    const double index_sd = beta_.col(outcome_index).norm();
    const auto integrand = [&](double t) {
        const double phi = std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.141592653589793);
        const double eta = (u - mean - index_sd * t) / noise_scale_;
        return phi / (1.0 + std::exp(-eta));
    };
    const int panels = 2000;
    const double lo = -10.0, hi = 10.0;
    const double h = (hi - lo) / panels;
    double sum = integrand(lo) + integrand(hi);
    for (int i = 1; i < panels; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * integrand(lo + i * h);
    return std::clamp(sum * h / 3.0, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Discrete catalog dgps

namespace {

Eigen::VectorXd scalar_vec(double v) {
    Eigen::VectorXd out(1);
    out(0) = v;
    return out;
}

double discrete_mu(int d, double x) { return 1.0 + d * (1.0 + x) + x; }

} // namespace

DiscreteDgp make_discrete4() {
    // Confounded binary treatment: P(X=1) = 0.4, P(D=1|x) = 0.3 + 0.4 x,
    // Y = 1 + D (1 + X) + X exactly. theta_0 (ATE) = E[1 + X] = 1.4.
    std::vector<DgpAtom> atoms;
    std::vector<double> probs;
    for (int xv = 0; xv <= 1; ++xv) {
        const double px = xv == 1 ? 0.4 : 0.6;
        const double pd1 = 0.3 + 0.4 * xv;
        for (int dv = 0; dv <= 1; ++dv) {
            atoms.push_back(DgpAtom{scalar_vec(discrete_mu(dv, xv)), dv, scalar_vec(xv)});
            probs.push_back(px * (dv == 1 ? pd1 : 1.0 - pd1));
        }
    }
    DiscreteDgp dgp = DiscreteDgp::from_atoms(std::move(atoms), std::move(probs), {"0", "1"});
    dgp.true_targets = scalar_vec(1.4);
    return dgp;
}

DiscreteDgp make_discrete8() {
    // Same confounded structure with +-0.5 outcome noise at every cell.
    std::vector<DgpAtom> atoms;
    std::vector<double> probs;
    for (int xv = 0; xv <= 1; ++xv) {
        const double px = xv == 1 ? 0.4 : 0.6;
        const double pd1 = 0.3 + 0.4 * xv;
        for (int dv = 0; dv <= 1; ++dv) {
            for (int noise = 0; noise <= 1; ++noise) {
                const double y = discrete_mu(dv, xv) + (noise == 1 ? 0.5 : -0.5);
                atoms.push_back(DgpAtom{scalar_vec(y), dv, scalar_vec(xv)});
                probs.push_back(0.5 * px * (dv == 1 ? pd1 : 1.0 - pd1));
            }
        }
    }
    DiscreteDgp dgp = DiscreteDgp::from_atoms(std::move(atoms), std::move(probs), {"0", "1"});
    dgp.true_targets = scalar_vec(1.4);
    return dgp;
}

// ---------------------------------------------------------------------------
// Experiment plumbing

std::string mode_name(ExperimentMode mode) {
    switch (mode) {
        case ExperimentMode::coverage: return "coverage";
        case ExperimentMode::ks: return "ks";
        case ExperimentMode::decomposition_audit: return "decomposition_audit";
    }
    throw ArgumentError("mode_name: unknown mode");
}

ExperimentMode mode_from_name(const std::string& name) {
    if (name == "coverage") return ExperimentMode::coverage;
    if (name == "ks") return ExperimentMode::ks;
    if (name == "decomposition_audit") return ExperimentMode::decomposition_audit;
    throw ConfigError("unknown simulate mode \"" + name + "\"");
}

std::string nuisance_source_name(NuisanceSource source) {
    switch (source) {
        case NuisanceSource::oracle: return "oracle";
        case NuisanceSource::fitted: return "fitted";
        case NuisanceSource::oracle_gamma_wrong_alpha: return "oracle_gamma_wrong_alpha";
    }
    throw ArgumentError("nuisance_source_name: unknown source");
}

NuisanceSource nuisance_source_from_name(const std::string& name) {
    if (name == "oracle") return NuisanceSource::oracle;
    if (name == "fitted") return NuisanceSource::fitted;
    if (name == "oracle_gamma_wrong_alpha") return NuisanceSource::oracle_gamma_wrong_alpha;
    throw ConfigError("unknown nuisance source \"" + name + "\"");
}

void ExperimentSpec::validate() const {
    if (replications < 1) throw ConfigError("experiment: replications must be at least 1");
    if (n < 2) throw ConfigError("experiment: n must be at least 2");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("experiment: level must lie in (0, 1)");
    if (draws < 1000) throw ConfigError("experiment: draws must be at least 1000");
    if (folds < 2) throw ConfigError("experiment: folds must be at least 2");
    if (dgp != "discrete4" && dgp != "discrete8" && dgp != "gaussian_linear")
        throw ConfigError("experiment: unknown dgp \"" + dgp + "\"");
    if (dgp == "gaussian_linear") {
        if (p < 1 || k < 1) throw ConfigError("experiment: gaussian_linear needs p, k >= 1");
    }
    if (grid_size < 0) throw ConfigError("experiment: grid_size must be nonnegative");
    if (grid_size > 0 && dgp != "gaussian_linear")
        throw ConfigError("experiment: CDF grids need the gaussian_linear dgp");
    if (grid_size > 0 && nuisance != NuisanceSource::fitted)
        throw ConfigError("experiment: CDF grids need fitted nuisances");
    if (mode == ExperimentMode::decomposition_audit && dgp == "gaussian_linear")
        throw PreconditionError("decomposition_audit needs an enumerable dgp");
}

std::string ExperimentSpec::canonical_string() const {
    std::ostringstream os;
    os.precision(17);
    os << "dgp=" << dgp << ";p=" << p << ";k=" << k << ";n=" << n << ";R=" << replications
       << ";seed=" << master_seed << ";level=" << level << ";draws=" << draws
       << ";folds=" << folds << ";nuisance=" << nuisance_source_name(nuisance)
       << ";dict=" << dictionary.degree << "," << (dictionary.interactions ? 1 : 0) << ","
       << (dictionary.treatment_intercepts ? 1 : 0) << ";mode=" << mode_name(mode)
       << ";sided=" << sided_name(sided) << ";grid=" << grid_size << ";arm=" << cdf_arm
       << ";override=";
    if (critical_value_override)
        os << *critical_value_override;
    else
        os << "none";
    os << ";B=" << gaussian_draws;
    return os.str();
}

std::uint64_t ExperimentSpec::spec_hash() const {
    const std::string s = canonical_string();
    return fnv1a(s.data(), s.size());
}

namespace {

constexpr std::uint64_t kSaltData = 1;
constexpr std::uint64_t kSaltFolds = 2;
constexpr std::uint64_t kSaltCritical = 3;
// Reference-sample stream; far outside the replication index range.
constexpr std::uint64_t kSaltGaussian = 0x9a55000000000001ULL;

struct Problem {
    std::vector<MomentFunctional> functionals;
    Eigen::VectorXd theta0;
    Eigen::VectorXd oracle_sigma;
    Eigen::MatrixXd oracle_corr;
    std::optional<DiscreteDgp> discrete;
    std::optional<GaussianLinearDgp> gaussian;
};

Problem build_problem(const ExperimentSpec& spec) {
    Problem prob;
    if (spec.dgp == "gaussian_linear") {
        prob.gaussian.emplace(spec.p, spec.k);
        prob.theta0.resize(spec.p);
        prob.oracle_sigma.resize(spec.p);
        for (int j = 0; j < spec.p; ++j) {
            prob.functionals.push_back(MomentFunctional::many_outcomes(j, 1, 0));
            prob.theta0(j) = prob.gaussian->true_target(j);
            prob.oracle_sigma(j) = prob.gaussian->oracle_sigma();
        }
        prob.oracle_corr = prob.gaussian->oracle_correlation();
    } else {
        prob.discrete = spec.dgp == "discrete4" ? make_discrete4() : make_discrete8();
        prob.functionals.push_back(MomentFunctional::many_treatments(1, 0));
        prob.theta0 = scalar_vec(prob.discrete->true_target(prob.functionals[0]));
        prob.oracle_sigma = scalar_vec(prob.discrete->oracle_sigma(prob.functionals[0]));
        prob.oracle_corr = prob.discrete->oracle_correlation(prob.functionals);
    }
    return prob;
}

Dataset sample_data(const ExperimentSpec& spec, const Problem& prob, std::uint64_t stream) {
    if (prob.gaussian) {
        Rng rng = Rng::derive(stream, kSaltData);
        return prob.gaussian->sample(spec.n, rng);
    }
    return generate_dataset(*prob.discrete, spec.n, hash_mix(stream, kSaltData));
}

NuisanceRecipe recipe_for(const ExperimentSpec& spec, const Dataset& data) {
    NuisanceRecipe recipe;
    recipe.dictionary =
        Dictionary::polynomial(spec.dictionary, data.n_labels(), data.n_covariates());
    return recipe;
}

NuisanceFitSet build_fits(const ExperimentSpec& spec, const Problem& prob, const Dataset& data,
                          std::uint64_t stream) {
    switch (spec.nuisance) {
        case NuisanceSource::fitted: {
            const FoldPlan plan = make_folds(data.n(), spec.folds, hash_mix(stream, kSaltFolds));
            return cross_fit(data, plan, prob.functionals, recipe_for(spec, data));
        }
        case NuisanceSource::oracle: {
            std::vector<TargetFits> targets;
            for (const auto& f : prob.functionals) {
                DxFunction gamma = prob.gaussian ? prob.gaussian->true_gamma(f.outcome_index())
                                                 : prob.discrete->true_gamma(f.outcome_index());
                DxFunction alpha =
                    prob.gaussian ? prob.gaussian->true_alpha() : prob.discrete->true_alpha(f);
                targets.push_back(TargetFits{std::move(gamma), std::move(alpha)});
            }
            return fit_set_from_functions(data.n(), std::move(targets));
        }
        case NuisanceSource::oracle_gamma_wrong_alpha: {
            std::vector<TargetFits> targets;
            for (const auto& f : prob.functionals) {
                DxFunction gamma = prob.gaussian ? prob.gaussian->true_gamma(f.outcome_index())
                                                 : prob.discrete->true_gamma(f.outcome_index());
                const int treated = f.treated();
                const int control = f.control();
                // Deliberately wrong but bounded representer.
                DxFunction alpha = [treated, control](int d, const Eigen::VectorXd&) {
                    if (d == treated) return 1.0;
                    if (d == control) return -1.0;
                    return 0.0;
                };
                targets.push_back(TargetFits{std::move(gamma), std::move(alpha)});
            }
            return fit_set_from_functions(data.n(), std::move(targets));
        }
    }
    throw ArgumentError("build_fits: unknown nuisance source");
}

void check_failures(int failures, int replications) {
    if (failures * 100 > replications)
        throw NumericError("experiment: " + std::to_string(failures) + " of " +
                           std::to_string(replications) + " replications failed (> 1%)");
}

struct CoverageRep {
    bool ok = false;
    std::vector<char> covered;
    std::vector<double> half_width;
    bool joint = false;
};

CoverageReport aggregate_coverage(const ExperimentSpec& spec, const std::vector<CoverageRep>& reps,
                                  std::size_t targets) {
    CoverageReport report;
    report.spec_hash = spec.spec_hash();
    Eigen::VectorXd marginal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets));
    Eigen::VectorXd widths = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(targets));
    int ok_count = 0;
    int joint_count = 0;
    for (const auto& rep : reps) {
        if (!rep.ok) continue;
        ++ok_count;
        if (rep.joint) ++joint_count;
        for (std::size_t j = 0; j < targets; ++j) {
            marginal(static_cast<Eigen::Index>(j)) += rep.covered[j] ? 1.0 : 0.0;
            widths(static_cast<Eigen::Index>(j)) += rep.half_width[j];
        }
    }
    report.failures = spec.replications - ok_count;
    check_failures(report.failures, spec.replications);
    report.replications = ok_count;
    report.joint_coverage = static_cast<double>(joint_count) / static_cast<double>(ok_count);
    report.marginal_coverage = marginal / static_cast<double>(ok_count);
    report.mean_half_width = widths / static_cast<double>(ok_count);
    report.mc_se =
        std::sqrt(report.joint_coverage * (1.0 - report.joint_coverage) /
                  static_cast<double>(ok_count));
    return report;
}

CoverageReport run_scalar_coverage(const ExperimentSpec& spec) {
    const Problem prob = build_problem(spec);
    const std::size_t targets = prob.functionals.size();
    std::vector<CoverageRep> reps(static_cast<std::size_t>(spec.replications));
    parallel_for(static_cast<std::size_t>(spec.replications), spec.threads, [&](std::size_t r) {
        auto& rep = reps[r];
        try {
            const std::uint64_t stream = hash_mix(spec.master_seed, r);
            const Dataset data = sample_data(spec, prob, stream);
            const NuisanceFitSet fits = build_fits(spec, prob, data, stream);
            const EstimateSet est = estimate_targets(data, prob.functionals, fits);
            double critical;
            if (spec.critical_value_override) {
                critical = *spec.critical_value_override;
            } else {
                const CorrelationEstimate corr = estimate_correlation(est.score);
                critical = sup_t_critical_value(corr, spec.level, spec.draws,
                                                hash_mix(stream, kSaltCritical), spec.sided, 1);
            }
            const double root_n = std::sqrt(static_cast<double>(est.n));
            rep.covered.resize(targets);
            rep.half_width.resize(targets);
            bool joint = true;
            for (std::size_t j = 0; j < targets; ++j) {
                const auto idx = static_cast<Eigen::Index>(j);
                const double half = critical * est.sigma_hat(idx) / root_n;
                const double gap = std::abs(est.theta_hat(idx) - prob.theta0(idx));
                rep.half_width[j] = half;
                rep.covered[j] = gap <= half ? 1 : 0;
                joint = joint && rep.covered[j];
            }
            rep.joint = joint;
            rep.ok = true;
        } catch (const std::exception&) {
            rep.ok = false;
        }
    });
    return aggregate_coverage(spec, reps, targets);
}

CoverageReport run_grid_coverage(const ExperimentSpec& spec) {
    const Problem prob = build_problem(spec);
    const auto G = static_cast<std::size_t>(spec.grid_size);
    std::vector<CoverageRep> reps(static_cast<std::size_t>(spec.replications));
    parallel_for(static_cast<std::size_t>(spec.replications), spec.threads, [&](std::size_t r) {
        auto& rep = reps[r];
        try {
            const std::uint64_t stream = hash_mix(spec.master_seed, r);
            const Dataset data = sample_data(spec, prob, stream);
            // Threshold grid at evenly spaced empirical quantiles of the
            // observed outcome.
            std::vector<double> ys(data.n());
            for (std::size_t i = 0; i < data.n(); ++i) ys[i] = data.outcome(i, 0);
            std::sort(ys.begin(), ys.end());
            Eigen::VectorXd grid(static_cast<Eigen::Index>(G));
            for (std::size_t g = 0; g < G; ++g) {
                const double q = 0.05 + 0.90 * (G == 1 ? 0.5 : static_cast<double>(g) /
                                                                   static_cast<double>(G - 1));
                const auto pos = static_cast<std::size_t>(q * static_cast<double>(data.n() - 1));
                grid(static_cast<Eigen::Index>(g)) = ys[pos];
            }
            for (Eigen::Index g = 1; g < grid.size(); ++g)
                if (!(grid(g) > grid(g - 1))) throw NumericError("tied quantile grid");

            const FoldPlan plan = make_folds(data.n(), spec.folds, hash_mix(stream, kSaltFolds));
            const CdfFitSet fits =
                cross_fit_cdf(data, spec.cdf_arm, grid, recipe_for(spec, data), plan);
            const CdfBandResult band = estimate_cdf_band(data, fits, spec.level, spec.draws,
                                                         hash_mix(stream, kSaltCritical), 1);
            rep.covered.resize(G);
            rep.half_width.resize(G);
            bool joint = true;
            for (std::size_t g = 0; g < G; ++g) {
                const auto idx = static_cast<Eigen::Index>(g);
                const double truth = prob.gaussian->true_cdf(spec.cdf_arm, 0, grid(idx));
                rep.covered[g] = (truth >= band.lower(idx) && truth <= band.upper(idx)) ? 1 : 0;
                rep.half_width[g] = 0.5 * (band.upper(idx) - band.lower(idx));
                joint = joint && rep.covered[g];
            }
            rep.joint = joint;
            rep.ok = true;
        } catch (const std::exception&) {
            rep.ok = false;
        }
    });
    return aggregate_coverage(spec, reps, G);
}

} // namespace

CoverageReport run_coverage(const ExperimentSpec& spec) {
    spec.validate();
    return spec.grid_size > 0 ? run_grid_coverage(spec) : run_scalar_coverage(spec);
}

std::vector<double> empirical_sup_t(const ExperimentSpec& spec) {
    spec.validate();
    const Problem prob = build_problem(spec);
    const std::size_t targets = prob.functionals.size();
    std::vector<double> values(static_cast<std::size_t>(spec.replications),
                               std::numeric_limits<double>::quiet_NaN());
    parallel_for(static_cast<std::size_t>(spec.replications), spec.threads, [&](std::size_t r) {
        try {
            const std::uint64_t stream = hash_mix(spec.master_seed, r);
            const Dataset data = sample_data(spec, prob, stream);
            const NuisanceFitSet fits = build_fits(spec, prob, data, stream);
            const EstimateSet est = estimate_targets(data, prob.functionals, fits);
            const double root_n = std::sqrt(static_cast<double>(est.n));
            double stat = -std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < targets; ++j) {
                const auto idx = static_cast<Eigen::Index>(j);
                const double t =
                    root_n * (est.theta_hat(idx) - prob.theta0(idx)) / prob.oracle_sigma(idx);
                stat = std::max(stat, spec.sided == Sided::two_sided ? std::abs(t) : t);
            }
            values[r] = stat;
        } catch (const std::exception&) {
            // left as NaN; counted below
        }
    });
    std::vector<double> out;
    out.reserve(values.size());
    int failures = 0;
    for (double v : values) {
        if (std::isnan(v))
            ++failures;
        else
            out.push_back(v);
    }
    check_failures(failures, spec.replications);
    return out;
}

double ks_distance(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    if (sample_a.empty() || sample_b.empty())
        throw ArgumentError("ks_distance: samples must be nonempty");
    std::vector<double> a = sample_a;
    std::vector<double> b = sample_b;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double ks = 0.0;
    while (i < a.size() || j < b.size()) {
        const double point = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] == point) ++i;
        while (j < b.size() && b[j] == point) ++j;
        ks = std::max(ks, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return ks;
}

KsReport bound_vs_empirical(const ExperimentSpec& spec,
                            const std::optional<Theorem1Inputs>& bound_inputs,
                            TailRegime regime) {
    spec.validate();
    if (spec.mode != ExperimentMode::ks)
        throw PreconditionError("bound_vs_empirical: spec must be in ks mode");
    const Problem prob = build_problem(spec);
    KsReport report;
    report.spec_hash = spec.spec_hash();
    report.sup_t_sample = empirical_sup_t(spec);
    report.gaussian_sample =
        gaussian_max_sample(prob.oracle_corr, spec.gaussian_draws,
                            hash_mix(spec.master_seed, kSaltGaussian), spec.sided, spec.threads);
    report.ks = ks_distance(report.sup_t_sample, report.gaussian_sample);
    if (bound_inputs) {
        const Theorem1Bound bound = theorem1_bound(*bound_inputs, regime);
        report.bound_total = bound.total;
        report.bound_vacuous = bound.total >= 1.0;
        report.empirical_within_bound = report.ks <= std::min(1.0, bound.total);
    }
    return report;
}

DecompositionAuditReport decomposition_audit(const ExperimentSpec& spec) {
    spec.validate();
    if (!spec.dgp.starts_with("discrete"))
        throw PreconditionError("decomposition_audit: needs an enumerable dgp");
    const Problem prob = build_problem(spec);
    DecompositionAuditReport report;
    report.spec_hash = spec.spec_hash();

    struct RepResult {
        bool ok = false;
        double scaled_residual = 0.0;
        double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    };
    std::vector<RepResult> reps(static_cast<std::size_t>(spec.replications));
    parallel_for(static_cast<std::size_t>(spec.replications), spec.threads, [&](std::size_t r) {
        auto& rep = reps[r];
        try {
            const std::uint64_t stream = hash_mix(spec.master_seed, r);
            const Dataset data = sample_data(spec, prob, stream);
            const NuisanceFitSet fits = build_fits(spec, prob, data, stream);
            const OracleDecomposition decomp =
                oracle_decomposition(data, *prob.discrete, prob.functionals, fits);
            for (const auto& t : decomp.targets) {
                rep.scaled_residual = std::max(
                    rep.scaled_residual, std::abs(t.residual) / (1.0 + std::abs(t.sqrtn_error)));
                rep.a = std::max(rep.a, std::abs(t.a));
                rep.b = std::max(rep.b, std::abs(t.b));
                rep.c = std::max(rep.c, std::abs(t.c));
                rep.d = std::max(rep.d, std::abs(t.d));
            }
            rep.ok = true;
        } catch (const std::exception&) {
            rep.ok = false;
        }
    });
    int failures = 0;
    std::vector<double> d_values;
    for (const auto& rep : reps) {
        if (!rep.ok) {
            ++failures;
            continue;
        }
        report.max_scaled_residual = std::max(report.max_scaled_residual, rep.scaled_residual);
        report.max_abs_a = std::max(report.max_abs_a, rep.a);
        report.max_abs_b = std::max(report.max_abs_b, rep.b);
        report.max_abs_c = std::max(report.max_abs_c, rep.c);
        report.max_abs_d = std::max(report.max_abs_d, rep.d);
        d_values.push_back(rep.d);
    }
    check_failures(failures, spec.replications);
    report.replications = spec.replications - failures;
    std::sort(d_values.begin(), d_values.end());
    report.median_abs_d = d_values[d_values.size() / 2];
    report.identity_ok = report.max_scaled_residual <= 1e-10;
    return report;
}

} // namespace dml
