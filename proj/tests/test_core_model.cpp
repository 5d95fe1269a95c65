#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "dml/csv.hpp"
#include "dml/dgp.hpp"
#include "dml/errors.hpp"
#include "dml/folds.hpp"
#include "dml/montecarlo.hpp"
#include "dml/rng.hpp"

using namespace dml;

namespace {

DiscreteDgp two_atom_bernoulli(double p1) {
    Eigen::VectorXd y0(1), y1(1), x(1);
    y0 << 0.0;
    y1 << 1.0;
    x << 0.0;
    // Both treatment labels present at the single covariate value so that the
    // overlap check passes; outcome is the interesting part.
    std::vector<DgpAtom> atoms = {
        DgpAtom{y0, 0, x}, DgpAtom{y1, 0, x}, DgpAtom{y0, 1, x}, DgpAtom{y1, 1, x}};
    std::vector<double> probs = {0.5 * (1.0 - p1), 0.5 * p1, 0.5 * (1.0 - p1), 0.5 * p1};
    return DiscreteDgp::from_atoms(std::move(atoms), std::move(probs), {"0", "1"});
}

} // namespace

TEST_CASE("normal quantile agrees with an erfc-based bisection oracle") {
    // Independent route: invert normal_cdf (erfc) by bisection.
    const auto cdf_inverse = [](double p) {
        double lo = -10.0, hi = 10.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (normal_cdf(mid) < p ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    for (double p : {0.001, 0.025, 0.1, 0.5, 0.9, 0.975, 0.9999}) {
        CHECK(normal_quantile(p) == doctest::Approx(cdf_inverse(p)).epsilon(1e-10));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK_THROWS_AS(normal_quantile(0.0), ArgumentError);
}

TEST_CASE("rng streams are deterministic and mix across indices") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 100; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    CHECK(differs);
    CHECK(hash_mix(1, 2) != hash_mix(2, 1));
    CHECK(hash_mix(1, 2) == hash_mix(1, 2));
}

TEST_CASE("neumaier summation recovers catastrophic cancellation") {
    NeumaierSum sum;
    sum.add(1.0);
    sum.add(1e100);
    sum.add(1.0);
    sum.add(-1e100);
    CHECK(sum.value() == 2.0);
}

TEST_CASE("generate_dataset: single-atom dgp yields identical records") {
    Eigen::VectorXd y(1), x(1);
    y << 3.5;
    x << 1.0;
    // Need both labels for overlap; use one covariate cell with both arms.
    Eigen::VectorXd y2(1);
    y2 << 3.5;
    std::vector<DgpAtom> atoms = {DgpAtom{y, 0, x}, DgpAtom{y2, 1, x}};
    const DiscreteDgp dgp = DiscreteDgp::from_atoms(atoms, {0.5, 0.5}, {"0", "1"});
    const Dataset data = generate_dataset(dgp, 5, 7);
    CHECK(data.n() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(data.outcome(i, 0) == 3.5);
        CHECK(data.covariate_row(i)(0) == 1.0);
    }
}

TEST_CASE("generate_dataset: frequencies concentrate and runs are bit-identical") {
    const DiscreteDgp dgp = two_atom_bernoulli(0.5);
    const std::size_t n = 100000;
    const Dataset data = generate_dataset(dgp, n, 2024);
    double ones = 0;
    for (std::size_t i = 0; i < n; ++i) ones += data.outcome(i, 0);
    CHECK(std::abs(ones / static_cast<double>(n) - 0.5) < 0.01);

    const Dataset again = generate_dataset(dgp, n, 2024);
    CHECK(data.outcomes() == again.outcomes());
    CHECK(data.treatment() == again.treatment());
    const Dataset other = generate_dataset(dgp, n, 2025);
    CHECK(data.outcomes() != other.outcomes());
}

TEST_CASE("sample means converge to enumerated expectations") {
    const DiscreteDgp dgp = make_discrete8();
    const auto f = [](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
        return y(0) * (1.0 + x(0)) + d;
    };
    const double truth = enumerate_expectation(dgp, f);
    const double sd = std::sqrt(enumerate_expectation(
                          dgp, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
                              const double v = f(y, d, x) - truth;
                              return v * v;
                          }));
    const std::size_t n = 1000000;
    int hits = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        const Dataset data = generate_dataset(dgp, n, 900 + static_cast<std::uint64_t>(s));
        NeumaierSum sum;
        for (std::size_t i = 0; i < n; ++i)
            sum.add(f(data.outcomes().row(i).transpose(), data.treatment_of(i),
                      data.covariate_row(i)));
        const double gap = std::abs(sum.value() / static_cast<double>(n) - truth);
        if (gap < 5.0 * sd / std::sqrt(static_cast<double>(n))) ++hits;
    }
    CHECK(hits >= seeds - 1);
}

TEST_CASE("make_folds: exact division and remainder rule") {
    const FoldPlan even = make_folds(10, 5, 1);
    auto sizes = [](const FoldPlan& plan) {
        std::vector<std::size_t> out;
        for (const auto& fold : plan.fold_indices()) out.push_back(fold.size());
        std::sort(out.begin(), out.end());
        return out;
    };
    CHECK(sizes(even) == std::vector<std::size_t>{2, 2, 2, 2, 2});
    const FoldPlan uneven = make_folds(11, 5, 1);
    CHECK(sizes(uneven) == std::vector<std::size_t>{2, 2, 2, 2, 3});

    // Partition: every index in exactly one fold.
    std::vector<int> seen(11, 0);
    for (const auto& fold : uneven.fold_indices())
        for (int i : fold) ++seen[static_cast<std::size_t>(i)];
    for (int count : seen) CHECK(count == 1);
}

TEST_CASE("make_folds: different seeds give different assignments") {
    const FoldPlan a = make_folds(100, 2, 1);
    const FoldPlan b = make_folds(100, 2, 2);
    CHECK(a.assignment != b.assignment);
    CHECK(a.assignment == make_folds(100, 2, 1).assignment);
}

TEST_CASE("make_folds rejects bad fold counts") {
    CHECK_THROWS_AS(make_folds(10, 1, 0), ArgumentError);
    CHECK_THROWS_AS(make_folds(3, 4, 0), ArgumentError);
}

TEST_CASE("enumerate_expectation basics") {
    const DiscreteDgp dgp = two_atom_bernoulli(0.75);
    CHECK(enumerate_expectation(dgp, [](const Eigen::VectorXd&, int, const Eigen::VectorXd&) {
              return 1.0;
          }) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(enumerate_expectation(dgp, [](const Eigen::VectorXd& y, int, const Eigen::VectorXd&) {
              return y(0);
          }) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS_AS(
        enumerate_expectation(dgp, [](const Eigen::VectorXd&, int, const Eigen::VectorXd&) {
            return std::numeric_limits<double>::infinity();
        }),
        EvaluationError);
}

TEST_CASE("IPW identity by enumeration") {
    const DiscreteDgp dgp = make_discrete4();
    const double value =
        enumerate_expectation(dgp, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
            return d == 1 ? 1.0 / dgp.propensity(1, x) : 0.0;
        });
    CHECK(value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dgp validation catches inconsistent tables and bad probabilities") {
    DiscreteDgp dgp = make_discrete4();
    CHECK_NOTHROW(dgp.validate());
    dgp.override_propensity(0, 0.9);
    CHECK_THROWS_AS(dgp.validate(), ValidationError);

    DiscreteDgp dgp2 = make_discrete4();
    Eigen::VectorXd wrong(1);
    wrong << -4.0;
    dgp2.override_regression(0, wrong);
    CHECK_THROWS_AS(dgp2.validate(), ValidationError);

    Eigen::VectorXd y(1), x(1);
    y << 1.0;
    x << 0.0;
    CHECK_THROWS_AS(
        DiscreteDgp::from_atoms({DgpAtom{y, 0, x}, DgpAtom{y, 1, x}}, {0.6, 0.6}, {"0", "1"}),
        ValidationError);
}

TEST_CASE("load_csv binds columns and validates cells") {
    const std::string path = "core_model_test.csv";
    {
        std::ofstream out(path);
        out << "y,d,x1\n1.5,0,0.1\n2.5,1,0.2\n3.5,0,0.3\n";
    }
    CsvSchema schema;
    schema.outcome_columns = {"y"};
    schema.treatment_column = "d";
    schema.covariate_columns = {"x1"};
    const Dataset data = load_csv(path, schema);
    CHECK(data.n() == 3);
    CHECK(data.n_outcomes() == 1);
    CHECK(data.n_covariates() == 1);
    CHECK(data.outcome(1, 0) == 2.5);
    CHECK(data.labels() == std::vector<std::string>{"0", "1"});

    {
        std::ofstream out(path);
        out << "y,d,x1\n1.5,0,0.1\n,1,0.2\n";
    }
    CHECK_THROWS_WITH_AS(load_csv(path, schema), doctest::Contains("row 2"), IngestionError);

    {
        std::ofstream out(path);
        out << "y,d,x1\n1.5,0,0.1\n2.5,2,0.2\n";
    }
    CsvSchema declared = schema;
    declared.labels = {"0", "1"};
    CHECK_THROWS_WITH_AS(load_csv(path, declared), doctest::Contains("\"2\""), IngestionError);

    CsvSchema missing = schema;
    missing.covariate_columns = {"nope"};
    {
        std::ofstream out(path);
        out << "y,d,x1\n1.5,0,0.1\n";
    }
    CHECK_THROWS_AS(load_csv(path, missing), IngestionError);
    std::remove(path.c_str());
}

TEST_CASE("load_csv binds an optional weight column") {
    const std::string path = "core_model_weights.csv";
    {
        std::ofstream out(path);
        out << "y,d,w\n1,0,2.0\n2,1,0.5\n";
    }
    CsvSchema schema;
    schema.outcome_columns = {"y"};
    schema.treatment_column = "d";
    schema.weight_column = "w";
    const Dataset data = load_csv(path, schema);
    CHECK(data.weights()(0) == 2.0);
    CHECK(data.weights()(1) == 0.5);

    {
        std::ofstream out(path);
        out << "y,d,w\n1,0,-1\n2,1,1\n";
    }
    CHECK_THROWS_AS(load_csv(path, schema), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("load_csv one-hot expands categorical covariates") {
    const std::string path = "core_model_cat.csv";
    {
        std::ofstream out(path);
        out << "y,d,city\n1,0,ath\n2,1,ber\n3,0,cph\n4,1,ber\n";
    }
    CsvSchema schema;
    schema.outcome_columns = {"y"};
    schema.treatment_column = "d";
    schema.covariate_columns = {"city"};
    schema.categorical_covariates = {"city"};
    const Dataset data = load_csv(path, schema);
    CHECK(data.n_covariates() == 2); // ber, cph (ath dropped)
    CHECK(data.covariate_row(1)(0) == 1.0);
    CHECK(data.covariate_row(2)(1) == 1.0);
    CHECK(data.covariate_row(0).sum() == 0.0);
    std::remove(path.c_str());
}
