#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dml/crossfit.hpp"
#include "dml/dgp.hpp"
#include "dml/errors.hpp"
#include "dml/montecarlo.hpp"
#include "dml/propensity.hpp"
#include "dml/regression.hpp"
#include "dml/riesz.hpp"

using namespace dml;

namespace {

Dataset toy_dataset() {
    // d = (1,1,1,0,0,0), y = (3,5,4,1,2,3), x = index/10
    Eigen::MatrixXd y(6, 1), x(6, 1);
    y << 3, 5, 4, 1, 2, 3;
    x << 0.0, 0.1, 0.2, 0.3, 0.4, 0.5;
    return Dataset(y, {1, 1, 1, 0, 0, 0}, {"0", "1"}, x);
}

std::shared_ptr<const Dictionary> saturated_for(const DiscreteDgp& dgp) {
    std::vector<std::pair<int, Eigen::VectorXd>> cells;
    for (const auto& cell : dgp.cells()) cells.emplace_back(cell.d, cell.x);
    return Dictionary::saturated(cells);
}

std::shared_ptr<const Dictionary> saturated_x_for(const DiscreteDgp& dgp) {
    std::vector<Eigen::VectorXd> xs;
    for (const auto& cell : dgp.cells()) {
        bool seen = false;
        for (const auto& x : xs) seen = seen || x == cell.x;
        if (!seen) xs.push_back(cell.x);
    }
    return Dictionary::saturated_covariates(xs);
}

} // namespace

TEST_CASE("fit_regression: constant dictionary returns the sample mean") {
    const Dataset data = toy_dataset();
    const RegressionFit fit = fit_regression(data, 0, Dictionary::constant(), 0.0);
    Eigen::VectorXd x(1);
    x << 0.3;
    CHECK(fit.predict(0, x) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("fit_regression: exact interpolation at full rank, ridge 0") {
    // y = 2 + 3 x - d exactly.
    Eigen::MatrixXd y(6, 1), x(6, 1);
    x << 0, 1, 2, 3, 4, 5;
    std::vector<int> d = {0, 1, 0, 1, 0, 1};
    for (int i = 0; i < 6; ++i) y(i, 0) = 2.0 + 3.0 * x(i, 0) - d[static_cast<std::size_t>(i)];
    const Dataset data(y, d, {"0", "1"}, x);
    const auto dict = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 1);
    const RegressionFit fit = fit_regression(data, 0, dict, 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        CHECK(fit.predict(data.treatment_of(i), data.covariate_row(i)) ==
              doctest::Approx(data.outcome(i, 0)).epsilon(1e-10));
    }
}

TEST_CASE("fit_regression: huge ridge shrinks slopes to the mean") {
    const Dataset data = toy_dataset();
    const auto dict = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 1);
    const RegressionFit fit = fit_regression(data, 0, dict, 1e8);
    for (int k = 1; k < dict->size(); ++k) CHECK(std::abs(fit.coefficients(k)) < 1e-5);
    Eigen::VectorXd x(1);
    x << 0.25;
    CHECK(fit.predict(0, x) == doctest::Approx(3.0).epsilon(1e-4));
}

TEST_CASE("fit_regression: singular design at ridge 0 raises a rank error") {
    const Dataset data = toy_dataset();
    std::vector<BasisFeature> features{
        BasisFeature{"1", false, [](int, const Eigen::VectorXd&) { return 1.0; }},
        BasisFeature{"dup", false, [](int, const Eigen::VectorXd&) { return 1.0; }}};
    const auto dict = std::make_shared<Dictionary>(std::move(features));
    CHECK_THROWS_WITH_AS(fit_regression(data, 0, dict, 0.0), doctest::Contains("ridge"),
                         RankError);
}

TEST_CASE("fit_propensity: intercept-only fit equals the empirical frequency") {
    Eigen::MatrixXd y(100, 1), x(100, 0);
    y.setZero();
    std::vector<int> d(100);
    for (int i = 0; i < 100; ++i) d[static_cast<std::size_t>(i)] = i < 30 ? 0 : 1;
    const Dataset data(y, d, {"0", "1"}, x);
    const PropensityFit fit = fit_propensity(data, Dictionary::constant(), 0.01);
    Eigen::VectorXd empty(0);
    CHECK(fit.prob(1, empty) == doctest::Approx(0.7).epsilon(1e-8));
}

TEST_CASE("fit_propensity: perfect separation saturates at the clip") {
    Eigen::MatrixXd y(40, 1), x(40, 1);
    y.setZero();
    std::vector<int> d(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = i < 20 ? -1.0 : 1.0;
        d[static_cast<std::size_t>(i)] = i < 20 ? 0 : 1;
    }
    const Dataset data(y, d, {"0", "1"}, x);
    const auto dict = Dictionary::polynomial(PolynomialSpec{1, false, false}, 2, 1);
    CHECK_FALSE(dict->has_treatment_features());
    const PropensityFit fit = fit_propensity(data, dict, 0.05);
    Eigen::VectorXd right(1);
    right << 1.0;
    CHECK(fit.prob(1, right) == doctest::Approx(0.95).epsilon(1e-9));
    CHECK(fit.prob(0, right) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("fit_propensity: saturated cells recover the cell frequencies") {
    // Two covariate cells with P(D=1|x) = 0.2 and 0.6.
    const int per_cell = 200;
    Eigen::MatrixXd y(2 * per_cell, 1), x(2 * per_cell, 1);
    y.setZero();
    std::vector<int> d(2 * per_cell);
    for (int i = 0; i < per_cell; ++i) {
        x(i, 0) = 0.0;
        d[static_cast<std::size_t>(i)] = i < static_cast<int>(0.2 * per_cell) ? 1 : 0;
        x(per_cell + i, 0) = 1.0;
        d[static_cast<std::size_t>(per_cell + i)] = i < static_cast<int>(0.6 * per_cell) ? 1 : 0;
    }
    const Dataset data(y, d, {"0", "1"}, x);
    Eigen::VectorXd cell0(1), cell1(1);
    cell0 << 0.0;
    cell1 << 1.0;
    const auto dict = Dictionary::saturated_covariates({cell0, cell1});
    const PropensityFit fit = fit_propensity(data, dict, 0.001);
    CHECK(fit.prob(1, cell0) == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(fit.prob(1, cell1) == doctest::Approx(0.6).epsilon(1e-6));
}

TEST_CASE("fit_propensity errors: missing label and treatment-dependent dictionary") {
    Eigen::MatrixXd y(10, 1), x(10, 0);
    y.setZero();
    std::vector<int> d(10, 0);
    const Dataset data(y, d, {"0", "1"}, x);
    CHECK_THROWS_WITH_AS(fit_propensity(data, Dictionary::constant(), 0.01),
                         doctest::Contains("\"1\""), EstimationError);

    const Dataset ok = toy_dataset();
    const auto dict = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 1);
    CHECK_THROWS_AS(fit_propensity(ok, dict, 0.01), ValidationError);
}

TEST_CASE("riesz_plugin: direct substitution and clipping") {
    const Dataset data = toy_dataset();
    const PropensityFit prop = fit_propensity(data, Dictionary::constant(), 0.01);
    const RieszFit fit = riesz_plugin(prop, 1, 0, 100.0);
    Eigen::VectorXd x(1);
    x << 0.0;
    CHECK(fit.predict(1, x) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(fit.predict(0, x) == doctest::Approx(-2.0).epsilon(1e-9));

    // Tiny propensity hits the clip bound.
    const RieszFit clipped = riesz_plugin_for(
        MomentFunctional::many_treatments(1, 0),
        [](int, const Eigen::VectorXd&) { return 0.005; }, 100.0);
    CHECK(clipped.predict(1, x) == 100.0);
    CHECK_THROWS_AS(riesz_plugin(prop, 1, 1, 100.0), ArgumentError);
}

TEST_CASE("riesz identity: plugin representer with exact propensities") {
    const DiscreteDgp dgp = make_discrete4();
    const MomentFunctional ate = MomentFunctional::many_treatments(1, 0);
    const DxFunction alpha0 = dgp.true_alpha(ate);
    const auto dict = saturated_for(dgp);
    for (int k = 0; k < dict->size(); ++k) {
        const DxFunction basis_k = [&, k](int d, const Eigen::VectorXd& x) {
            return dict->eval(k, d, x);
        };
        const double lhs = enumerate_expectation(
            dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                return alpha0(d, x) * basis_k(d, x);
            });
        const double rhs = enumerate_expectation(
            dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                return ate.value(Record{d, x}, basis_k);
            });
        CHECK(std::abs(lhs - rhs) <= 1e-10);
    }
}

TEST_CASE("riesz_automatic: representer of the mean functional is 1") {
    const DiscreteDgp dgp = make_discrete8();
    const Dataset data = generate_dataset(dgp, 400, 5);
    const MomentFunctional identity = MomentFunctional::custom(
        "mean", [](const Record& w, const DxFunction& gamma) { return gamma(w.d, w.x); });
    const RieszFit fit = riesz_automatic(data, identity, saturated_for(dgp), 0.0, 100.0);
    for (const auto& cell : dgp.cells())
        CHECK(fit.predict(cell.d, cell.x) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("riesz_automatic matches the plugin representer on a saturated dictionary") {
    const DiscreteDgp dgp = make_discrete4();
    const Dataset data = generate_dataset(dgp, 2000, 11);
    const MomentFunctional ate = MomentFunctional::many_treatments(1, 0);
    const RieszFit automatic = riesz_automatic(data, ate, saturated_for(dgp), 0.0, 1000.0);

    // Empirical-propensity plugin on the same sample: with a saturated basis
    // both equal the unique representer of the empirical cell distribution.
    std::vector<double> cell_n(dgp.cells().size(), 0.0);
    for (std::size_t i = 0; i < data.n(); ++i) {
        for (std::size_t c = 0; c < dgp.cells().size(); ++c) {
            if (dgp.cells()[c].d == data.treatment_of(i) &&
                dgp.cells()[c].x == data.covariate_row(i))
                cell_n[c] += 1.0;
        }
    }
    const auto empirical_propensity = [&](int label, const Eigen::VectorXd& x) {
        double with_label = 0.0, total = 0.0;
        for (std::size_t c = 0; c < dgp.cells().size(); ++c) {
            if (dgp.cells()[c].x == x) {
                total += cell_n[c];
                if (dgp.cells()[c].d == label) with_label += cell_n[c];
            }
        }
        return with_label / total;
    };
    const RieszFit plugin = riesz_plugin_for(ate, empirical_propensity, 1000.0);
    for (const auto& cell : dgp.cells())
        CHECK(automatic.predict(cell.d, cell.x) ==
              doctest::Approx(plugin.predict(cell.d, cell.x)).epsilon(1e-8));
}

TEST_CASE("riesz_automatic equals the exact-propensity plugin on population data") {
    // Build a dataset whose empirical distribution is exactly the dgp: cell
    // counts proportional to the probabilities (0.42/0.18/0.12/0.28 at n=50).
    const DiscreteDgp dgp = make_discrete4();
    std::vector<int> counts;
    for (std::size_t a = 0; a < dgp.atoms().size(); ++a)
        counts.push_back(static_cast<int>(std::lround(50.0 * dgp.probabilities()[a])));
    int n = 0;
    for (int c : counts) n += c;
    REQUIRE(n == 50);
    Eigen::MatrixXd y(n, 1), x(n, 1);
    std::vector<int> d;
    int row = 0;
    for (std::size_t a = 0; a < dgp.atoms().size(); ++a) {
        for (int c = 0; c < counts[a]; ++c) {
            y(row, 0) = dgp.atoms()[a].y(0);
            x(row, 0) = dgp.atoms()[a].x(0);
            d.push_back(dgp.atoms()[a].d);
            ++row;
        }
    }
    const Dataset data(y, d, dgp.labels(), x);
    const MomentFunctional ate = MomentFunctional::many_treatments(1, 0);
    const RieszFit automatic = riesz_automatic(data, ate, saturated_for(dgp), 0.0, 1000.0);
    const DxFunction alpha0 = dgp.true_alpha(ate); // plugin with exact propensities
    for (const auto& cell : dgp.cells())
        CHECK(automatic.predict(cell.d, cell.x) ==
              doctest::Approx(alpha0(cell.d, cell.x)).epsilon(1e-8));
}

TEST_CASE("riesz_automatic: huge ridge collapses the predictions") {
    const DiscreteDgp dgp = make_discrete4();
    const Dataset data = generate_dataset(dgp, 500, 3);
    const MomentFunctional ate = MomentFunctional::many_treatments(1, 0);
    const RieszFit fit = riesz_automatic(data, ate, saturated_for(dgp), 1e8, 100.0);
    std::vector<double> values;
    for (const auto& cell : dgp.cells()) values.push_back(fit.predict(cell.d, cell.x));
    for (double v : values) CHECK(std::abs(v - values.front()) < 1e-4);
}

TEST_CASE("mean-square continuity witness stays below 2/p_lower") {
    const DiscreteDgp dgp = make_discrete4();
    const MomentFunctional ate = MomentFunctional::many_treatments(1, 0);
    double p_lower = 1.0;
    for (const auto& cell : dgp.cells()) p_lower = std::min(p_lower, cell.propensity);
    const auto dict = saturated_for(dgp);
    for (int k = 0; k < dict->size(); ++k) {
        const DxFunction basis_k = [&, k](int d, const Eigen::VectorXd& x) {
            return dict->eval(k, d, x);
        };
        const double m2 = enumerate_expectation(
            dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                const double m = ate.value(Record{d, x}, basis_k);
                return m * m;
            });
        const double g2 = enumerate_expectation(
            dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
                const double g = basis_k(d, x);
                return g * g;
            });
        CHECK(m2 / g2 <= 2.0 / p_lower + 1e-12);
    }
}

TEST_CASE("cross_fit: fold fit equals a direct fit on the complement") {
    const DiscreteDgp dgp = make_discrete8();
    const Dataset data = generate_dataset(dgp, 60, 17);
    const FoldPlan plan = make_folds(data.n(), 2, 4);
    NuisanceRecipe recipe;
    recipe.dictionary = saturated_for(dgp);
    recipe.regression_ridge = 0.0;
    recipe.propensity_dictionary = saturated_x_for(dgp);
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    const NuisanceFitSet fits = cross_fit(data, plan, fs, recipe);
    CHECK_NOTHROW(audit_fit_set(data, fits));

    const Dataset complement = data.subset(plan.complement_rows(0));
    const RegressionFit direct = fit_regression(complement, 0, recipe.dictionary, 0.0);
    for (const auto& cell : dgp.cells())
        CHECK(fits.folds[0].targets[0].gamma(cell.d, cell.x) ==
              doctest::Approx(direct.predict(cell.d, cell.x)).epsilon(1e-12));
}

TEST_CASE("cross_fit: duplicated rows across folds give identical fits") {
    Eigen::MatrixXd y(8, 1), x(8, 1);
    std::vector<int> d(8);
    for (int i = 0; i < 8; ++i) {
        const int pattern = i % 4;
        x(i, 0) = pattern < 2 ? 0.0 : 1.0;
        d[static_cast<std::size_t>(i)] = pattern % 2;
        y(i, 0) = 1.0 + x(i, 0) + d[static_cast<std::size_t>(i)];
    }
    const Dataset data(y, d, {"0", "1"}, x);
    FoldPlan plan;
    plan.n = 8;
    plan.L = 2;
    plan.seed = 0;
    plan.assignment = {0, 0, 0, 0, 1, 1, 1, 1};
    NuisanceRecipe recipe;
    recipe.dictionary = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 1);
    recipe.regression_ridge = 0.0;
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    const NuisanceFitSet fits = cross_fit(data, plan, fs, recipe);
    Eigen::VectorXd probe(1);
    probe << 1.0;
    CHECK(fits.folds[0].targets[0].gamma(1, probe) ==
          doctest::Approx(fits.folds[1].targets[0].gamma(1, probe)).epsilon(1e-12));
}

TEST_CASE("cross_fit: missing label in a complement names fold and label") {
    Eigen::MatrixXd y(6, 1), x(6, 0);
    y.setZero();
    std::vector<int> d = {0, 0, 0, 0, 0, 1};
    const Dataset data(y, d, {"0", "1"}, x);
    FoldPlan plan;
    plan.n = 6;
    plan.L = 2;
    plan.seed = 0;
    plan.assignment = {0, 0, 0, 1, 1, 1};
    NuisanceRecipe recipe;
    recipe.dictionary = Dictionary::constant();
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    CHECK_THROWS_WITH_AS(cross_fit(data, plan, fs, recipe), doctest::Contains("fold"),
                         EstimationError);
}

TEST_CASE("polynomial dictionary honors per-covariate degrees") {
    PolynomialSpec spec;
    spec.degrees = {2, 0, 1};
    spec.treatment_intercepts = false;
    const auto dict = Dictionary::polynomial(spec, 2, 3);
    // constant + x0 + x0^2 + x2
    CHECK(dict->size() == 4);
    Eigen::VectorXd x(3);
    x << 2.0, 5.0, 3.0;
    CHECK(dict->eval(2, 0, x) == 4.0);  // x0^2
    CHECK(dict->eval(3, 0, x) == 3.0);  // x2
    PolynomialSpec bad;
    bad.degrees = {1, 1};
    CHECK_THROWS_AS(Dictionary::polynomial(bad, 2, 3), ConfigError);
}

TEST_CASE("cross_fit_with_selection picks the better recipe and records a_n") {
    // Outcome is quadratic in x, so the degree-2 dictionary should win the
    // held-out regression loss in every fold.
    const std::size_t n = 300;
    Eigen::MatrixXd y(n, 1), x(n, 1);
    std::vector<int> d(n);
    Rng rng(8);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        x(row, 0) = 2.0 * rng.next_double() - 1.0;
        d[i] = rng.next_double() < 0.5 ? 1 : 0;
        y(row, 0) = 3.0 * x(row, 0) * x(row, 0) + d[i] + 0.05 * rng.next_normal();
    }
    const Dataset data(y, d, {"0", "1"}, x);
    const FoldPlan plan = make_folds(n, 3, 2);
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    NuisanceRecipe linear;
    linear.dictionary = Dictionary::polynomial(PolynomialSpec{1, false, true}, 2, 1);
    NuisanceRecipe quadratic;
    quadratic.dictionary = Dictionary::polynomial(PolynomialSpec{2, false, true}, 2, 1);
    const NuisanceFitSet fits = cross_fit_with_selection(data, plan, fs, {linear, quadratic});
    CHECK(fits.selection_a_n == doctest::Approx(2.718281828459045));
    for (int choice : fits.selected_recipe) CHECK(choice == 1);
    CHECK_NOTHROW(audit_fit_set(data, fits));

    // With three candidates the recorded entropy scale becomes r = 3.
    NuisanceRecipe cubic;
    cubic.dictionary = Dictionary::polynomial(PolynomialSpec{3, false, true}, 2, 1);
    const NuisanceFitSet fits3 =
        cross_fit_with_selection(data, plan, fs, {linear, quadratic, cubic});
    CHECK(fits3.selection_a_n == 3.0);
}

TEST_CASE("audit rejects tampered provenance") {
    const DiscreteDgp dgp = make_discrete8();
    const Dataset data = generate_dataset(dgp, 40, 9);
    const FoldPlan plan = make_folds(data.n(), 2, 1);
    NuisanceRecipe recipe;
    recipe.dictionary = saturated_for(dgp);
    recipe.propensity_dictionary = saturated_x_for(dgp);
    const std::vector<MomentFunctional> fs = {MomentFunctional::many_treatments(1, 0)};
    NuisanceFitSet fits = cross_fit(data, plan, fs, recipe);
    CHECK_NOTHROW(audit_fit_set(data, fits));
    fits.folds[0].training_rows[0] = fits.folds[0].training_rows[1];
    CHECK_THROWS_AS(audit_fit_set(data, fits), AuditError);

    NuisanceFitSet fits2 = cross_fit(data, plan, fs, recipe);
    fits2.folds[1].fingerprint ^= 1;
    CHECK_THROWS_AS(audit_fit_set(data, fits2), AuditError);
}
