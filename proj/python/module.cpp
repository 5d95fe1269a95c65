#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dml/bounds.hpp"
#include "dml/cdf_bands.hpp"
#include "dml/config.hpp"
#include "dml/errors.hpp"
#include "dml/estimate.hpp"
#include "dml/montecarlo.hpp"
#include "dml/rng.hpp"
#include "dml/runner.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

dml::Theorem1Inputs theorem1_inputs_from_dict(const py::dict& inputs) {
    dml::Theorem1Inputs in;
    for (const auto& item : inputs) {
        const std::string key = py::cast<std::string>(item.first);
        const double value = py::cast<double>(item.second);
        if (key == "n") in.n = value;
        else if (key == "p") in.p = value;
        else if (key == "q") in.q = value;
        else if (key == "b_n") in.b_n = value;
        else if (key == "lambda_min") in.lambda_min = value;
        else if (key == "sigma_min") in.sigma_min = value;
        else if (key == "q_bar") in.q_bar = value;
        else if (key == "alpha_bar") in.alpha_bar = value;
        else if (key == "sigma_bar") in.sigma_bar = value;
        else if (key == "delta") in.delta = value;
        else if (key == "v_n") in.v_n = value;
        else if (key == "a_n") in.a_n = value;
        else if (key == "m_n") in.m_n = value;
        else if (key == "r_gamma") in.r_gamma = value;
        else if (key == "r_alpha") in.r_alpha = value;
        else if (key == "c") in.c = value;
        else if (key == "C_q" || key == "K") in.constants[key] = value;
        else throw dml::ConfigError("unknown theorem 1 input \"" + key + "\"");
    }
    return in;
}

dml::Theorem2Inputs theorem2_inputs_from_dict(const py::dict& inputs) {
    dml::Theorem2Inputs in;
    for (const auto& item : inputs) {
        const std::string key = py::cast<std::string>(item.first);
        const double value = py::cast<double>(item.second);
        if (key == "n") in.n = value;
        else if (key == "q") in.q = value;
        else if (key == "eps_n") in.eps_n = value;
        else if (key == "c0") in.c0 = value;
        else if (key == "c1") in.c1 = value;
        else if (key == "C0") in.C0 = value;
        else if (key == "B_1n") in.B_1n = value;
        else if (key == "B_2n") in.B_2n = value;
        else if (key == "omega") in.omega = value;
        else if (key == "delta") in.delta = value;
        else if (key == "v_n") in.v_n = value;
        else if (key == "a_n") in.a_n = value;
        else if (key == "m_n") in.m_n = value;
        else if (key == "r_eta") in.r_eta = value;
        else if (key == "b_n") in.b_n = value;
        else if (key == "V_n") in.V_n = value;
        else if (key == "A_n") in.A_n = value;
        else if (key == "gamma") in.gamma = value;
        else if (key == "c") in.c = value;
        else if (key == "delta_prefactor") in.delta_prefactor = value;
        else if (key == "K" || key == "d_q" || key == "D_q" || key == "kappa" || key == "chi")
            in.constants[key] = value;
        else throw dml::ConfigError("unknown theorem 2 input \"" + key + "\"");
    }
    return in;
}

py::dict ate_bands(const Eigen::MatrixXd& y, const std::vector<int>& d, const Eigen::MatrixXd& x,
                   double level, int folds, std::uint64_t seed, std::size_t draws, int degree,
                   bool cross_fit) {
    std::vector<int> treatment = d;
    Eigen::VectorXd weights;
    dml::Dataset data(y, std::move(treatment), {"0", "1"}, x, weights);
    std::vector<dml::MomentFunctional> functionals;
    for (int j = 0; j < data.n_outcomes(); ++j)
        functionals.push_back(dml::MomentFunctional::many_outcomes(j, 1, 0));
    dml::NuisanceRecipe recipe;
    dml::PolynomialSpec spec;
    spec.degree = degree;
    recipe.dictionary = dml::Dictionary::polynomial(spec, 2, data.n_covariates());
    dml::NuisanceFitSet fits;
    if (cross_fit) {
        const dml::FoldPlan plan = dml::make_folds(data.n(), folds, dml::hash_mix(seed, 1));
        fits = dml::cross_fit(data, plan, functionals, recipe);
    } else {
        fits = dml::full_sample_fit(data, functionals, recipe);
    }
    const dml::EstimateSet est = dml::estimate_targets(data, functionals, fits);
    const dml::CorrelationEstimate corr = dml::estimate_correlation(est.score);
    const dml::BandResult band =
        dml::build_bands(est, corr, level, draws, dml::hash_mix(seed, 2));
    py::dict out;
    const auto p = est.theta_hat.size();
    Eigen::VectorXd lower(p), upper(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        lower(j) = band.targets[static_cast<std::size_t>(j)].lower;
        upper(j) = band.targets[static_cast<std::size_t>(j)].upper;
    }
    out["theta_hat"] = est.theta_hat;
    out["sigma_hat"] = est.sigma_hat;
    out["lower"] = lower;
    out["upper"] = upper;
    out["critical_value"] = band.critical_value;
    out["level"] = level;
    out["n"] = est.n;
    return out;
}

} // namespace

PYBIND11_MODULE(_dmlbands, m) {
    m.doc() = "High-dimensional debiased ML inference: simultaneous sup-t bands, "
              "finite-sample Kolmogorov-distance bound calculators, Monte Carlo harness";

    py::register_exception<dml::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<dml::NumericError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("run_json",
          [](const std::string& text) {
              const dml::RunConfig config = dml::parse_config_text(text);
              return dml::run(config).dump(-1);
          },
          "config_json"_a,
          "Run a full config document (same schema as the CLI); returns the report as JSON.");

    m.def("normal_quantile", &dml::normal_quantile, "p"_a);
    m.def("normal_cdf", &dml::normal_cdf, "x"_a);

    m.def("ks_distance",
          [](const std::vector<double>& a, const std::vector<double>& b) {
              return dml::ks_distance(a, b);
          },
          "sample_a"_a, "sample_b"_a, "Two-sample Kolmogorov statistic.");

    m.def("pava",
          [](const std::vector<double>& values) { return dml::pool_adjacent_violators(values); },
          "values"_a, "Nondecreasing least-squares projection (pool-adjacent-violators).");

    m.def("sup_t_critical_value",
          [](const Eigen::MatrixXd& corr, double level, std::size_t draws, std::uint64_t seed,
             const std::string& sided, int threads) {
              dml::CorrelationEstimate est;
              est.matrix = corr;
              return dml::sup_t_critical_value(est, level, draws, seed,
                                               dml::sided_from_name(sided), threads);
          },
          "corr"_a, "level"_a, "draws"_a = 100000, "seed"_a = 1, "sided"_a = "two_sided",
          "threads"_a = 1);

    m.def("gaussian_max_sample",
          [](const Eigen::MatrixXd& corr, std::size_t draws, std::uint64_t seed,
             const std::string& sided) {
              return dml::gaussian_max_sample(corr, draws, seed, dml::sided_from_name(sided));
          },
          "corr"_a, "draws"_a, "seed"_a = 1, "sided"_a = "two_sided");

    m.def("theorem1_bound",
          [](const py::dict& inputs, const std::string& regime) {
              const dml::Theorem1Bound bound =
                  dml::theorem1_bound(theorem1_inputs_from_dict(inputs),
                                      dml::regime_from_name(regime));
              py::dict out;
              out["term_A"] = bound.term_a;
              out["term_B"] = bound.term_b;
              out["term_C"] = bound.term_c;
              out["delta_1n"] = bound.delta_1n;
              out["delta_2n"] = bound.delta_2n;
              out["total"] = bound.total;
              out["warnings"] = bound.warnings;
              return out;
          },
          "inputs"_a, "regime"_a = "heavy");

    m.def("theorem2_bound",
          [](const py::dict& inputs) {
              const dml::Theorem2Bound bound = dml::theorem2_bound(theorem2_inputs_from_dict(inputs));
              py::dict out;
              out["r_vee"] = bound.r_vee;
              out["delta_1n"] = bound.delta_1n;
              out["delta_2n"] = bound.delta_2n;
              out["delta_3n"] = bound.delta_3n;
              out["L_n"] = bound.l_n;
              out["r_1n"] = bound.r_1n;
              out["r_2n"] = bound.r_2n;
              out["total"] = bound.total;
              out["warnings"] = bound.warnings;
              return out;
          },
          "inputs"_a);

    m.def("maximal_inequality_bound", &dml::maximal_inequality_bound, "sigma"_a, "v"_a, "a"_a,
          "M"_a, "q"_a, "c"_a, "K"_a, "n"_a);
    m.def("anti_concentration_bound", &dml::anti_concentration_bound, "p"_a, "eps"_a, "sigma"_a);
    m.def("entropy_sum",
          [](double v1, double a1, double v2, double a2) { return dml::entropy_sum(v1, a1, v2, a2); },
          "v1"_a, "a1"_a, "v2"_a, "a2"_a);

    m.def("ate_bands", &ate_bands, "y"_a, "d"_a, "x"_a, "level"_a = 0.95, "folds"_a = 5,
          "seed"_a = 1, "draws"_a = 100000, "degree"_a = 1, "cross_fit"_a = true,
          "Simultaneous bands for the ATE of a binary treatment on each outcome column.");

    m.attr("__version__") = "0.1.0";
}
