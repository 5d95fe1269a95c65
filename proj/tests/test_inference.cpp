#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dml/cdf_bands.hpp"
#include "dml/dgp.hpp"
#include "dml/errors.hpp"
#include "dml/estimate.hpp"
#include "dml/montecarlo.hpp"
#include "dml/rng.hpp"

using namespace dml;

namespace {

// Independent high-precision oracle: bisection against the erfc-based normal
// CDF for the quantile of max_j |Z_j| with p independent coordinates.
double independent_max_abs_quantile(int p, double level) {
    const auto coverage = [p](double c) {
        return std::pow(2.0 * normal_cdf(c) - 1.0, p);
    };
    double lo = 0.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (coverage(mid) < level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Dataset toy_dataset() {
    Eigen::MatrixXd y(6, 1), x(6, 0);
    y << 3, 5, 4, 1, 2, 3;
    return Dataset(y, {1, 1, 1, 0, 0, 0}, {"0", "1"}, x);
}

EstimateSet toy_estimates() {
    const Dataset data = toy_dataset();
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    NuisanceRecipe recipe;
    recipe.dictionary = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 0);
    recipe.regression_ridge = 0.0;
    const NuisanceFitSet fits = full_sample_fit(toy_dataset(), fs, recipe);
    return estimate_targets(toy_dataset(), fs, fits);
}

} // namespace

TEST_CASE("estimate_targets: AIPW with cell means collapses to difference in group means") {
    const EstimateSet est = toy_estimates();
    // Hand value: mean(3,5,4) - mean(1,2,3) = 4 - 2 = 2, and the score column
    // is (-2, 2, 0, 2, 0, -2) with sigma^2 = 16/6.
    CHECK(est.theta_hat(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(est.sigma_hat(0) == doctest::Approx(std::sqrt(16.0 / 6.0)).epsilon(1e-12));
    CHECK(est.score.centered);
    CHECK(std::abs(est.score.values.col(0).mean()) <= 1e-12);
    // sigma_hat^2 equals the mean squared centered column.
    const double ms = est.score.values.col(0).squaredNorm() / 6.0;
    CHECK(est.sigma_hat(0) * est.sigma_hat(0) == doctest::Approx(ms).epsilon(1e-12));
}

TEST_CASE("estimate_targets: zero residuals reduce theta to the m-average") {
    const DiscreteDgp dgp = make_discrete4(); // Y is deterministic given (d, x)
    const Dataset data = generate_dataset(dgp, 200, 8);
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    const NuisanceFitSet fits = fit_set_from_functions(
        data.n(), {TargetFits{dgp.true_gamma(0), dgp.true_alpha(fs[0])}});
    const EstimateSet est = estimate_targets(data, fs, fits);
    NeumaierSum m_avg;
    for (std::size_t i = 0; i < data.n(); ++i)
        m_avg.add(fs[0].value(Record{data.treatment_of(i), data.covariate_row(i)},
                              dgp.true_gamma(0)));
    CHECK(est.theta_hat(0) ==
          doctest::Approx(m_avg.value() / static_cast<double>(data.n())).epsilon(1e-12));
}

TEST_CASE("estimate_targets: constant outcome gives a zero effect") {
    Eigen::MatrixXd y(8, 1), x(8, 0);
    y.setConstant(5.0);
    const Dataset data(y, {0, 1, 0, 1, 0, 1, 0, 1}, {"0", "1"}, x);
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    NuisanceRecipe recipe;
    recipe.dictionary = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 0);
    recipe.regression_ridge = 0.0;
    const NuisanceFitSet fits = full_sample_fit(data, fs, recipe);
    const EstimateSet est = estimate_targets(data, fs, fits);
    CHECK(est.theta_hat(0) == doctest::Approx(0.0));
    // Degenerate score: the correlation step names the target.
    CHECK_THROWS_AS(estimate_correlation(est.score), DegenerateScoreError);
}

TEST_CASE("estimate_correlation: p = 1, duplicated columns, and noise scale") {
    ScoreMatrix score;
    score.values.resize(4, 1);
    score.values << 1, -1, 2, -2;
    score.target_meta = {"t0"};
    const CorrelationEstimate single = estimate_correlation(score);
    CHECK(single.matrix(0, 0) == 1.0);
    CHECK(single.ridge_applied == 0.0);

    ScoreMatrix dup;
    dup.values.resize(4, 2);
    dup.values << 1, 1, -1, -1, 2, 2, -2, -2;
    dup.target_meta = {"a", "b"};
    const CorrelationEstimate dupe = estimate_correlation(dup, 1e-8);
    CHECK(dupe.ridge_applied == 1e-8);
    CHECK(dupe.min_eigenvalue > 0.0);
    CHECK(dupe.matrix(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dupe.matrix(0, 1) == doctest::Approx(1.0).epsilon(1e-7));

    // Independent standard normal columns: off-diagonals near zero.
    Rng rng(3);
    ScoreMatrix wide;
    const int n = 100000;
    wide.values.resize(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) wide.values(i, j) = rng.next_normal();
    wide.target_meta = {"a", "b", "c"};
    const CorrelationEstimate indep = estimate_correlation(wide);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            if (a != b) CHECK(std::abs(indep.matrix(a, b)) < 0.02);
}

TEST_CASE("sup_t_critical_value: p = 1 matches the normal quantile oracle") {
    CorrelationEstimate corr;
    corr.matrix = Eigen::MatrixXd::Identity(1, 1);
    const double c = sup_t_critical_value(corr, 0.95, 1000000, 42);
    CHECK(std::abs(c - 1.95996) < 0.01);
    CHECK(std::abs(c - independent_max_abs_quantile(1, 0.95)) < 0.01);
}

TEST_CASE("sup_t_critical_value: p = 2 independent matches the bisection oracle") {
    CorrelationEstimate corr;
    corr.matrix = Eigen::MatrixXd::Identity(2, 2);
    const double c = sup_t_critical_value(corr, 0.95, 1000000, 42);
    const double oracle = independent_max_abs_quantile(2, 0.95);
    CHECK(oracle == doctest::Approx(2.2365).epsilon(2e-4));
    CHECK(std::abs(c - oracle) < 0.01);
}

TEST_CASE("sup_t_critical_value: perfectly correlated block equals the scalar value") {
    ScoreMatrix score;
    Rng rng(5);
    const int n = 2000;
    score.values.resize(n, 100);
    for (int i = 0; i < n; ++i) {
        const double z = rng.next_normal();
        for (int j = 0; j < 100; ++j) score.values(i, j) = z;
    }
    for (int j = 0; j < 100; ++j) score.target_meta.push_back("t" + std::to_string(j));
    const CorrelationEstimate corr = estimate_correlation(score, 1e-8);
    const double c_block = sup_t_critical_value(corr, 0.95, 200000, 9);
    CorrelationEstimate scalar;
    scalar.matrix = Eigen::MatrixXd::Identity(1, 1);
    const double c_scalar = sup_t_critical_value(scalar, 0.95, 200000, 9);
    CHECK(std::abs(c_block - c_scalar) < 0.02);
}

TEST_CASE("sup_t_critical_value: determinism, monotonicity, sidedness") {
    CorrelationEstimate corr;
    corr.matrix = Eigen::MatrixXd::Identity(3, 3);
    corr.matrix(0, 1) = corr.matrix(1, 0) = 0.35;
    const double c1 = sup_t_critical_value(corr, 0.95, 50000, 7, Sided::two_sided, 1);
    const double c8 = sup_t_critical_value(corr, 0.95, 50000, 7, Sided::two_sided, 8);
    CHECK(c1 == c8);

    // Monotone in the level: same draw sample, different order statistic.
    const double c90 = sup_t_critical_value(corr, 0.90, 50000, 7);
    const double c99 = sup_t_critical_value(corr, 0.99, 50000, 7);
    CHECK(c90 < c1);
    CHECK(c1 < c99);

    // Nondecreasing in p for nested independent problems.
    double previous = 0.0;
    for (int p : {1, 2, 5, 20}) {
        CorrelationEstimate identity;
        identity.matrix = Eigen::MatrixXd::Identity(p, p);
        const double c = sup_t_critical_value(identity, 0.95, 200000, 21);
        CHECK(c > previous - 0.005);
        previous = c;
    }

    // One-sided critical values sit below two-sided ones.
    const double one = sup_t_critical_value(corr, 0.95, 50000, 7, Sided::one_sided);
    CHECK(one < c1);

    CHECK_THROWS_AS(sup_t_critical_value(corr, 0.95, 100, 7), ArgumentError);
    CHECK_THROWS_AS(sup_t_critical_value(corr, 1.5, 5000, 7), ArgumentError);
}

TEST_CASE("sup_t_critical_value: permutation invariance") {
    Eigen::MatrixXd corr(3, 3);
    corr << 1.0, 0.4, -0.2, 0.4, 1.0, 0.1, -0.2, 0.1, 1.0;
    Eigen::PermutationMatrix<3> perm;
    perm.setIdentity();
    perm.applyTranspositionOnTheRight(0, 2);
    const Eigen::MatrixXd permuted = perm.transpose() * corr * perm;
    CorrelationEstimate a, b;
    a.matrix = corr;
    b.matrix = permuted;
    const double ca = sup_t_critical_value(a, 0.95, 100000, 3);
    const double cb = sup_t_critical_value(b, 0.95, 100000, 3);
    CHECK(ca == doctest::Approx(cb).epsilon(1e-9));
}

TEST_CASE("build_bands: widths, nesting, and studentization invariance") {
    const EstimateSet est = toy_estimates();
    const CorrelationEstimate corr = estimate_correlation(est.score);
    const BandResult band95 = build_bands(est, corr, 0.95, 20000, 17);
    const BandResult band99 = build_bands(est, corr, 0.99, 20000, 17);
    const auto& row95 = band95.targets[0];
    const auto& row99 = band99.targets[0];
    CHECK(row95.upper - row95.lower ==
          doctest::Approx(2.0 * band95.critical_value * row95.se / std::sqrt(6.0)).epsilon(1e-12));
    CHECK(row99.lower < row95.lower);
    CHECK(row99.upper > row95.upper);

    // Scaling outcomes by 2 scales estimates and ses by 2 and leaves the
    // critical value unchanged (exact in binary floating point).
    Eigen::MatrixXd y2(6, 1), x2(6, 0);
    y2 << 6, 10, 8, 2, 4, 6;
    const Dataset data2(y2, {1, 1, 1, 0, 0, 0}, {"0", "1"}, x2);
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    NuisanceRecipe recipe;
    recipe.dictionary = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 0);
    recipe.regression_ridge = 0.0;
    const EstimateSet est2 = estimate_targets(data2, fs, full_sample_fit(data2, fs, recipe));
    CHECK(est2.theta_hat(0) == 2.0 * est.theta_hat(0));
    CHECK(est2.sigma_hat(0) == 2.0 * est.sigma_hat(0));
    const CorrelationEstimate corr2 = estimate_correlation(est2.score);
    const BandResult band2 = build_bands(est2, corr2, 0.95, 20000, 17);
    CHECK(band2.critical_value == band95.critical_value);
    CHECK(std::abs(band2.targets[0].upper - 2.0 * row95.upper) <= 1e-10);
    // t-statistics unchanged.
    CHECK(est2.theta_hat(0) / est2.sigma_hat(0) ==
          doctest::Approx(est.theta_hat(0) / est.sigma_hat(0)).epsilon(1e-14));
}

TEST_CASE("pool_adjacent_violators: hand case and idempotence") {
    CHECK(pool_adjacent_violators({0.2, 0.1, 0.5}) ==
          std::vector<double>{0.15000000000000002, 0.15000000000000002, 0.5});
    const std::vector<double> sorted = {0.1, 0.2, 0.3};
    CHECK(pool_adjacent_violators(sorted) == sorted);
    const auto pav = pool_adjacent_violators({3.0, 1.0, 2.0, 0.0});
    for (std::size_t i = 1; i < pav.size(); ++i) CHECK(pav[i] >= pav[i - 1]);
    CHECK(pool_adjacent_violators(pav) == pav);
}

TEST_CASE("cdf band pipeline: boundary saturation, monotone envelopes, scalar grid") {
    GaussianLinearDgp dgp(1, 2);
    Rng rng(404);
    const Dataset data = dgp.sample(600, rng);
    NuisanceRecipe recipe;
    recipe.dictionary = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 2);
    const FoldPlan plan = make_folds(data.n(), 3, 12);

    double y_min = data.outcome(0, 0), y_max = y_min;
    for (std::size_t i = 0; i < data.n(); ++i) {
        y_min = std::min(y_min, data.outcome(i, 0));
        y_max = std::max(y_max, data.outcome(i, 0));
    }
    Eigen::VectorXd grid(4);
    grid << y_min - 5.0, -0.2, 1.2, y_max + 5.0;
    const CdfFitSet fits = cross_fit_cdf(data, 1, grid, recipe, plan);
    const CdfBandResult band = estimate_cdf_band(data, fits, 0.95, 20000, 77);

    CHECK(band.monotonized);
    CHECK(band.estimate(0) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(band.estimate(3) == doctest::Approx(1.0).epsilon(1e-6));
    for (Eigen::Index g = 0; g < 4; ++g) {
        CHECK(band.lower(g) <= band.estimate(g) + 1e-12);
        CHECK(band.estimate(g) <= band.upper(g) + 1e-12);
        CHECK(band.lower(g) >= 0.0);
        CHECK(band.upper(g) <= 1.0);
        if (g > 0) {
            CHECK(band.estimate(g) >= band.estimate(g - 1) - 1e-12);
            CHECK(band.lower(g) >= band.lower(g - 1) - 1e-12);
            CHECK(band.upper(g) >= band.upper(g - 1) - 1e-12);
        }
    }

    // G = 1 reduces to the scalar two-sided critical value.
    Eigen::VectorXd single(1);
    single << 1.0;
    const CdfFitSet fits1 = cross_fit_cdf(data, 1, single, recipe, plan);
    const CdfBandResult band1 = estimate_cdf_band(data, fits1, 0.95, 1000000, 5);
    CHECK(std::abs(band1.critical_value - 1.95996) < 0.01);

    Eigen::VectorXd bad(2);
    bad << 1.0, 1.0;
    CHECK_THROWS_AS(cross_fit_cdf(data, 1, bad, recipe, plan), ArgumentError);
}

TEST_CASE("qte_from_cdf: identical bands, location shift, and the step case") {
    CdfBandResult band;
    band.grid.resize(3);
    band.grid << 1.0, 2.0, 3.0;
    band.estimate.resize(3);
    band.estimate << 0.2, 0.6, 1.0;
    band.lower = band.estimate;
    band.upper = band.estimate;
    band.monotonized = true;

    // Step-CDF generalized inverse at q = 0.5 is the second grid point, and
    // identical bands have QTE 0.
    const QteResult same = qte_from_cdf(band, band, 0.5);
    CHECK(same.point == 0.0);
    CHECK(same.lower == 0.0);
    CHECK(same.upper == 0.0);

    // Location shift by one grid unit, both CDFs on a common grid {1,2,3,4}:
    // every quantile moves by exactly 1.
    CdfBandResult treated4, control4;
    treated4.grid.resize(4);
    treated4.grid << 1.0, 2.0, 3.0, 4.0;
    treated4.estimate.resize(4);
    treated4.estimate << 0.0, 0.2, 0.6, 1.0;
    treated4.lower = treated4.estimate;
    treated4.upper = treated4.estimate;
    treated4.monotonized = true;
    control4 = treated4;
    control4.estimate << 0.2, 0.6, 1.0, 1.0;
    control4.lower = control4.estimate;
    control4.upper = control4.estimate;
    for (double q : {0.3, 0.5, 0.9}) {
        const QteResult qte = qte_from_cdf(treated4, control4, q);
        CHECK(qte.point == doctest::Approx(1.0));
    }

    CHECK_THROWS_AS(qte_from_cdf(treated4, control4, 0.05), RangeError);
    CdfBandResult raw = band;
    raw.monotonized = false;
    CHECK_THROWS_AS(qte_from_cdf(raw, band, 0.5), PreconditionError);
}
