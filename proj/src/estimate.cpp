#include "dml/estimate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

EstimateSet estimate_targets(const Dataset& data, const std::vector<MomentFunctional>& functionals,
                             const NuisanceFitSet& fits) {
    audit_fit_set(data, fits);
    if (functionals.empty()) throw ArgumentError("estimate_targets: no target functionals");
    if (fits.n_targets() != functionals.size())
        throw AuditError("estimate_targets: fit set holds " + std::to_string(fits.n_targets()) +
                         " targets, got " + std::to_string(functionals.size()) + " functionals");
    const std::size_t n = data.n();
    const auto p = static_cast<Eigen::Index>(functionals.size());

    EstimateSet est;
    est.n = n;
    est.theta_hat.resize(p);
    est.sigma_hat.resize(p);
    est.score.values.resize(static_cast<Eigen::Index>(n), p);
    est.score.centered = true;
    for (const auto& f : functionals) est.score.target_meta.push_back(f.name());

    for (Eigen::Index j = 0; j < p; ++j) {
        const auto& functional = functionals[static_cast<std::size_t>(j)];
        const int yj = functional.outcome_index();
        if (yj < 0 || yj >= data.n_outcomes())
            throw ArgumentError("estimate_targets: outcome index out of range for " +
                                functional.name());
        NeumaierSum mean;
        for (std::size_t i = 0; i < n; ++i) {
            const Record w{data.treatment_of(i), data.covariate_row(i)};
            const auto& fit = fits.fits_for(i, static_cast<std::size_t>(j));
            const double g = fit.gamma(w.d, w.x);
            const double a = fit.alpha(w.d, w.x);
            const double value = functional.value(w, fit.gamma) + a * (data.outcome(i, yj) - g);
            if (!std::isfinite(value))
                throw EvaluationError("estimate_targets: non-finite score for " + functional.name());
            est.score.values(static_cast<Eigen::Index>(i), j) = value;
            mean.add(value);
        }
        const double theta = mean.value() / static_cast<double>(n);
        est.theta_hat(j) = theta;
        est.score.values.col(j).array() -= theta;
        est.sigma_hat(j) = std::sqrt(est.score.values.col(j).squaredNorm() / static_cast<double>(n));
    }
    return est;
}

CorrelationEstimate estimate_correlation(const ScoreMatrix& score, double ridge) {
    const auto n = score.values.rows();
    const auto p = score.values.cols();
    if (p < 1) throw ArgumentError("estimate_correlation: empty score matrix");
    if (ridge < 0.0) throw ArgumentError("estimate_correlation: ridge must be nonnegative");

    Eigen::MatrixXd centered = score.values;
    for (Eigen::Index j = 0; j < p; ++j) centered.col(j).array() -= centered.col(j).mean();
    Eigen::VectorXd sd(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        sd(j) = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n));
        if (!(sd(j) > 0.0)) {
            const std::string name = static_cast<std::size_t>(j) < score.target_meta.size()
                                         ? score.target_meta[static_cast<std::size_t>(j)]
                                         : std::to_string(j);
            throw DegenerateScoreError("estimate_correlation: zero-variance score column for target " +
                                       name);
        }
    }
    Eigen::MatrixXd corr = centered.transpose() * centered / static_cast<double>(n);
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) corr(a, b) /= sd(a) * sd(b);
    // Force exact symmetry and unit diagonal against rounding.
    corr = ((corr + corr.transpose()) / 2.0).eval();
    corr.diagonal().setOnes();

    CorrelationEstimate out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr, Eigen::EigenvaluesOnly);
    double min_eig = eig.eigenvalues().minCoeff();
    if (min_eig < 1e-10) {
        corr += ridge * Eigen::MatrixXd::Identity(p, p);
        corr /= 1.0 + ridge;
        corr.diagonal().setOnes();
        out.ridge_applied = ridge;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2(corr, Eigen::EigenvaluesOnly);
        min_eig = eig2.eigenvalues().minCoeff();
    }
    out.matrix = std::move(corr);
    out.min_eigenvalue = min_eig;
    return out;
}

namespace {

// Symmetric square root with eigenvalue clipping and deterministic
// eigenvector signs (largest-magnitude entry positive), so that permuting
// the targets permutes the draws.
Eigen::MatrixXd gaussian_factor(const Eigen::MatrixXd& corr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
    if (eig.info() != Eigen::Success)
        throw FactorizationError("sup_t_critical_value: eigendecomposition failed");
    Eigen::VectorXd values = eig.eigenvalues();
    const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
    Eigen::MatrixXd vectors = eig.eigenvectors();
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (values(k) < -1e-12 * scale)
            throw FactorizationError("sup_t_critical_value: correlation matrix is not PSD "
                                     "(eigenvalue " + std::to_string(values(k)) + ")");
        values(k) = std::max(values(k), 0.0);
        Eigen::Index argmax = 0;
        vectors.col(k).cwiseAbs().maxCoeff(&argmax);
        if (vectors(argmax, k) < 0.0) vectors.col(k) = -vectors.col(k);
    }
    return vectors * values.cwiseSqrt().asDiagonal();
}

constexpr std::size_t kDrawBlock = 8192;

} // namespace

std::string sided_name(Sided sided) {
    return sided == Sided::two_sided ? "two_sided" : "one_sided";
}

Sided sided_from_name(const std::string& name) {
    if (name == "two_sided") return Sided::two_sided;
    if (name == "one_sided") return Sided::one_sided;
    throw ConfigError("unknown sided option \"" + name + "\"");
}

std::vector<double> gaussian_max_sample(const Eigen::MatrixXd& corr, std::size_t draws,
                                        std::uint64_t seed, Sided sided, int threads) {
    const auto p = corr.rows();
    if (p < 1 || corr.cols() != p)
        throw ArgumentError("gaussian_max_sample: malformed correlation matrix");
    if (draws < 1) throw ArgumentError("gaussian_max_sample: need at least one draw");
    const Eigen::MatrixXd factor = gaussian_factor(corr);
    std::vector<double> maxima(draws);
    const std::size_t blocks = (draws + kDrawBlock - 1) / kDrawBlock;
    parallel_for(blocks, threads, [&](std::size_t block) {
        Rng rng = Rng::derive(seed, block);
        const std::size_t begin = block * kDrawBlock;
        const std::size_t end = std::min(draws, begin + kDrawBlock);
        Eigen::VectorXd xi(p);
        for (std::size_t t = begin; t < end; ++t) {
            for (Eigen::Index j = 0; j < p; ++j) xi(j) = rng.next_normal();
            const Eigen::VectorXd z = factor * xi;
            maxima[t] = sided == Sided::two_sided ? z.cwiseAbs().maxCoeff() : z.maxCoeff();
        }
    });
    return maxima;
}

double sup_t_critical_value(const CorrelationEstimate& corr, double level, std::size_t draws,
                            std::uint64_t seed, Sided sided, int threads) {
    if (!(level > 0.0 && level < 1.0))
        throw ArgumentError("sup_t_critical_value: level must lie in (0, 1)");
    if (draws < 1000) throw ArgumentError("sup_t_critical_value: need at least 1000 draws");
    std::vector<double> maxima = gaussian_max_sample(corr.matrix, draws, seed, sided, threads);
    std::sort(maxima.begin(), maxima.end());
    const auto b = static_cast<double>(draws);
    std::size_t rank = static_cast<std::size_t>(std::ceil(level * (b + 1.0)));
    rank = std::min(rank, draws);
    return maxima[rank - 1];
}

BandResult build_bands(const EstimateSet& estimates, const CorrelationEstimate& corr, double level,
                       std::size_t draws, std::uint64_t seed, Sided sided, int threads) {
    const auto p = estimates.theta_hat.size();
    if (corr.matrix.rows() != p)
        throw ArgumentError("build_bands: correlation dimension does not match estimates");
    for (Eigen::Index j = 0; j < p; ++j)
        if (!(estimates.sigma_hat(j) > 0.0))
            throw DegenerateScoreError("build_bands: zero standard error for target " +
                                       std::to_string(j));
    BandResult band;
    band.level = level;
    band.critical_value = sup_t_critical_value(corr, level, draws, seed, sided, threads);
    band.draws = draws;
    band.seed = seed;
    band.n = estimates.n;
    band.sided = sided;
    const double root_n = std::sqrt(static_cast<double>(estimates.n));
    band.targets.resize(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
        auto& row = band.targets[static_cast<std::size_t>(j)];
        row.estimate = estimates.theta_hat(j);
        row.se = estimates.sigma_hat(j);
        const double half = band.critical_value * row.se / root_n;
        row.lower = row.estimate - half;
        row.upper = row.estimate + half;
    }
    return band;
}

} // namespace dml
