#include "dml/runner.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "dml/cdf_bands.hpp"
#include "dml/csv.hpp"
#include "dml/errors.hpp"
#include "dml/montecarlo.hpp"

namespace dml {

using nlohmann::json;

namespace {

json to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Dataset load_dataset(const RunConfig& config) {
    const json& doc = config.doc;
    if (doc.contains("data")) {
        const json& block = doc["data"];
        CsvSchema schema;
        for (const auto& name : block["schema"]["outcomes"])
            schema.outcome_columns.push_back(name.get<std::string>());
        schema.treatment_column = block["schema"]["treatment"].get<std::string>();
        for (const auto& name : block["schema"]["covariates"])
            schema.covariate_columns.push_back(name.get<std::string>());
        for (const auto& name : block["schema"]["categorical_covariates"])
            schema.categorical_covariates.push_back(name.get<std::string>());
        if (block["schema"].contains("weight"))
            schema.weight_column = block["schema"]["weight"].get<std::string>();
        if (block["schema"].contains("labels"))
            for (const auto& label : block["schema"]["labels"])
                schema.labels.push_back(label.get<std::string>());
        return load_csv(block["csv"].get<std::string>(), schema);
    }
    const json& block = doc.at("dgp");
    const std::string name = block["name"].get<std::string>();
    const auto n = static_cast<std::size_t>(block["n"].get<double>());
    const auto seed = static_cast<std::uint64_t>(block["seed"].get<double>());
    if (name == "gaussian_linear") {
        GaussianLinearDgp dgp(static_cast<int>(block["p"].get<double>()),
                              static_cast<int>(block["k"].get<double>()));
        Rng rng = Rng::derive(seed, 0x64677033ULL);
        return dgp.sample(n, rng);
    }
    const DiscreteDgp dgp = name == "discrete4" ? make_discrete4() : make_discrete8();
    return generate_dataset(dgp, n, seed);
}

int label_id_from_json(const Dataset& data, const json& value, const std::string& where) {
    if (value.is_string()) return data.label_id(value.get<std::string>());
    if (value.is_number()) return data.label_id(std::to_string(value.get<long long>()));
    throw ConfigError(where + " must be a label string or integer");
}

std::vector<MomentFunctional> build_functionals(const RunConfig& config, const Dataset& data) {
    const json& block = config.doc.at("functionals");
    const Family family = family_from_name(block["family"].get<std::string>());
    std::vector<MomentFunctional> out;
    switch (family) {
        case Family::many_treatments: {
            const int control = block.contains("control")
                                    ? label_id_from_json(data, block["control"], "functionals.control")
                                    : 0;
            if (block.contains("treated_labels")) {
                for (const auto& label : block["treated_labels"])
                    out.push_back(MomentFunctional::many_treatments(
                        label_id_from_json(data, label, "functionals.treated_labels"), control));
            } else if (block.contains("treated")) {
                out.push_back(MomentFunctional::many_treatments(
                    label_id_from_json(data, block["treated"], "functionals.treated"), control));
            } else {
                for (int k = 0; k < data.n_labels(); ++k)
                    if (k != control) out.push_back(MomentFunctional::many_treatments(k, control));
            }
            break;
        }
        case Family::many_outcomes: {
            const int treated = block.contains("treated")
                                    ? label_id_from_json(data, block["treated"], "functionals.treated")
                                    : data.label_id("1");
            const int control = block.contains("control")
                                    ? label_id_from_json(data, block["control"], "functionals.control")
                                    : data.label_id("0");
            if (block.contains("outcomes")) {
                for (const auto& j : block["outcomes"])
                    out.push_back(MomentFunctional::many_outcomes(j.get<int>(), treated, control));
            } else {
                for (int j = 0; j < data.n_outcomes(); ++j)
                    out.push_back(MomentFunctional::many_outcomes(j, treated, control));
            }
            break;
        }
        case Family::policy_value: {
            if (!block.contains("policies"))
                throw ConfigError("policy_value needs a \"policies\" array");
            const int treated = block.contains("treated")
                                    ? label_id_from_json(data, block["treated"], "functionals.treated")
                                    : data.label_id("1");
            const int control = block.contains("control")
                                    ? label_id_from_json(data, block["control"], "functionals.control")
                                    : data.label_id("0");
            for (const auto& rule : block["policies"]) {
                if (!rule.contains("covariate") || !rule.contains("threshold"))
                    throw ConfigError("each policy rule needs \"covariate\" and \"threshold\"");
                const int covariate = rule["covariate"].get<int>();
                const double threshold = rule["threshold"].get<double>();
                if (covariate < 0 || covariate >= data.n_covariates())
                    throw ConfigError("policy rule covariate index out of range");
                out.push_back(MomentFunctional::policy_value(
                    [covariate, threshold](const Eigen::VectorXd& x) {
                        return x(covariate) >= threshold ? 1 : 0;
                    },
                    treated, control,
                    "x" + std::to_string(covariate) + ">=" + std::to_string(threshold)));
            }
            break;
        }
        case Family::cdf_at_point: {
            if (!block.contains("thresholds") || !block.contains("arm"))
                throw ConfigError("cdf_at_point needs \"arm\" and \"thresholds\"");
            const int arm = label_id_from_json(data, block["arm"], "functionals.arm");
            for (const auto& u : block["thresholds"])
                out.push_back(MomentFunctional::cdf_at_point(arm, u.get<double>()));
            break;
        }
        case Family::custom:
            throw ConfigError("custom functionals are not constructible from config");
    }
    if (out.empty()) throw ConfigError("functionals: empty target list");
    return out;
}

NuisanceRecipe build_recipe(const RunConfig& config, const Dataset& data) {
    const json& block = config.doc.at("nuisance");
    NuisanceRecipe recipe;
    PolynomialSpec spec;
    spec.degree = static_cast<int>(block["dictionary"]["degree"].get<double>());
    if (block["dictionary"].contains("degrees"))
        for (const auto& degree : block["dictionary"]["degrees"])
            spec.degrees.push_back(degree.get<int>());
    spec.interactions = block["dictionary"]["interactions"].get<bool>();
    spec.treatment_intercepts = block["dictionary"]["treatment_intercepts"].get<bool>();
    recipe.dictionary = Dictionary::polynomial(spec, data.n_labels(), data.n_covariates());
    recipe.regression_ridge = block["regression_ridge"].get<double>();
    recipe.propensity_clip = block["propensity_clip"].get<double>();
    recipe.propensity_ridge = block["propensity_ridge"].get<double>();
    recipe.riesz = block["riesz"].get<std::string>() == "plugin" ? RieszKind::plugin
                                                                 : RieszKind::automatic;
    recipe.riesz_ridge = block["riesz_ridge"].get<double>();
    recipe.riesz_clip = block["riesz_clip"].get<double>();
    return recipe;
}

struct EstimatePipeline {
    Dataset data;
    std::vector<MomentFunctional> functionals;
    EstimateSet estimates;
    json selection; // null unless fold-level recipe selection ran
};

EstimatePipeline run_estimate_pipeline(const RunConfig& config) {
    Dataset data = load_dataset(config);
    std::vector<MomentFunctional> functionals = build_functionals(config, data);
    const json& nuisance = config.doc.at("nuisance");
    const auto seed = static_cast<std::uint64_t>(config.doc["seed"].get<double>());
    NuisanceFitSet fits;
    json selection;
    if (nuisance["cross_fit"].get<bool>()) {
        const int folds = static_cast<int>(nuisance["folds"].get<double>());
        const FoldPlan plan = make_folds(data.n(), folds, hash_mix(seed, 0x706c616eULL));
        if (nuisance.contains("candidate_degrees")) {
            std::vector<NuisanceRecipe> recipes;
            for (const auto& degree : nuisance["candidate_degrees"]) {
                RunConfig variant = config;
                variant.doc["nuisance"]["dictionary"]["degree"] = degree;
                recipes.push_back(build_recipe(variant, data));
            }
            fits = cross_fit_with_selection(data, plan, functionals, recipes);
            selection = {{"a_n", fits.selection_a_n},
                         {"selected_recipe_per_fold", fits.selected_recipe}};
        } else {
            fits = cross_fit(data, plan, functionals, build_recipe(config, data));
        }
    } else {
        fits = full_sample_fit(data, functionals, build_recipe(config, data));
    }
    EstimateSet estimates = estimate_targets(data, functionals, fits);
    return EstimatePipeline{std::move(data), std::move(functionals), std::move(estimates),
                            std::move(selection)};
}

json run_estimate(const RunConfig& config) {
    const EstimatePipeline pipe = run_estimate_pipeline(config);
    json targets = json::array();
    for (std::size_t j = 0; j < pipe.functionals.size(); ++j) {
        const auto idx = static_cast<Eigen::Index>(j);
        targets.push_back({{"name", pipe.functionals[j].name()},
                           {"theta_hat", pipe.estimates.theta_hat(idx)},
                           {"sigma_hat", pipe.estimates.sigma_hat(idx)}});
    }
    json results = {{"n", pipe.estimates.n}, {"targets", targets}};
    if (!pipe.selection.is_null()) results["recipe_selection"] = pipe.selection;
    return results;
}

json run_bands(const RunConfig& config) {
    const EstimatePipeline pipe = run_estimate_pipeline(config);
    const CorrelationEstimate corr = estimate_correlation(pipe.estimates.score);
    const double level = config.doc["level"].get<double>();
    const auto draws = static_cast<std::size_t>(config.doc["draws"].get<double>());
    const auto seed = static_cast<std::uint64_t>(config.doc["seed"].get<double>());
    const Sided sided = sided_from_name(config.doc["sided"].get<std::string>());
    const int threads = static_cast<int>(config.doc["threads"].get<double>());
    const BandResult band =
        build_bands(pipe.estimates, corr, level, draws, hash_mix(seed, 0x62616e64ULL), sided,
                    threads);
    json targets = json::array();
    for (std::size_t j = 0; j < band.targets.size(); ++j) {
        const auto& row = band.targets[j];
        targets.push_back({{"name", pipe.functionals[j].name()},
                           {"estimate", row.estimate},
                           {"se", row.se},
                           {"lower", row.lower},
                           {"upper", row.upper}});
    }
    json results = {{"n", band.n},
                    {"level", band.level},
                    {"critical_value", band.critical_value},
                    {"draws", band.draws},
                    {"sided", sided_name(band.sided)},
                    {"correlation", {{"ridge_applied", corr.ridge_applied},
                                     {"min_eigenvalue", corr.min_eigenvalue}}},
                    {"targets", targets}};
    if (!pipe.selection.is_null()) results["recipe_selection"] = pipe.selection;
    return results;
}

json cdf_band_to_json(const CdfBandResult& band, const Dataset& data) {
    return {{"arm", data.labels()[static_cast<std::size_t>(band.arm)]},
            {"n", band.n},
            {"level", band.level},
            {"critical_value", band.critical_value},
            {"monotonized", band.monotonized},
            {"grid", to_json(band.grid)},
            {"estimate", to_json(band.estimate)},
            {"se", to_json(band.se)},
            {"lower", to_json(band.lower)},
            {"upper", to_json(band.upper)}};
}

json run_cdf_bands(const RunConfig& config) {
    Dataset data = load_dataset(config);
    const json& block = config.doc.at("cdf");
    const int arm = label_id_from_json(data, block["arm"], "cdf.arm");
    const int outcome = static_cast<int>(block["outcome"].get<double>());
    Eigen::VectorXd grid;
    if (block.contains("grid")) {
        grid.resize(static_cast<Eigen::Index>(block["grid"].size()));
        Eigen::Index g = 0;
        for (const auto& u : block["grid"]) grid(g++) = u.get<double>();
    } else {
        const auto points = static_cast<int>(block["grid_points"].get<double>());
        if (points < 1) throw ConfigError("cdf.grid_points must be positive");
        std::vector<double> ys(data.n());
        for (std::size_t i = 0; i < data.n(); ++i) ys[i] = data.outcome(i, outcome);
        std::sort(ys.begin(), ys.end());
        grid.resize(points);
        for (int g = 0; g < points; ++g) {
            const double q =
                0.05 + 0.90 * (points == 1 ? 0.5 : static_cast<double>(g) / (points - 1));
            grid(g) = ys[static_cast<std::size_t>(q * static_cast<double>(data.n() - 1))];
        }
        for (Eigen::Index g = 1; g < grid.size(); ++g)
            if (!(grid(g) > grid(g - 1)))
                throw NumericError("cdf-bands: tied quantile grid; pass an explicit grid");
    }

    const NuisanceRecipe recipe = build_recipe(config, data);
    const json& nuisance = config.doc.at("nuisance");
    const auto seed = static_cast<std::uint64_t>(config.doc["seed"].get<double>());
    const int folds = static_cast<int>(nuisance["folds"].get<double>());
    const double level = config.doc["level"].get<double>();
    const auto draws = static_cast<std::size_t>(config.doc["draws"].get<double>());
    const int threads = static_cast<int>(config.doc["threads"].get<double>());

    const FoldPlan plan = make_folds(data.n(), folds, hash_mix(seed, 0x706c616eULL));
    const CdfFitSet fits = cross_fit_cdf(data, arm, grid, recipe, plan, outcome);
    const CdfBandResult band =
        estimate_cdf_band(data, fits, level, draws, hash_mix(seed, 0x63646631ULL), threads);
    json results = cdf_band_to_json(band, data);

    if (block.contains("qte")) {
        if (data.n_labels() != 2)
            throw ConfigError("cdf.qte needs a binary treatment");
        const int other = arm == 0 ? 1 : 0;
        const CdfFitSet fits0 = cross_fit_cdf(data, other, grid, recipe, plan, outcome);
        const CdfBandResult band0 =
            estimate_cdf_band(data, fits0, level, draws, hash_mix(seed, 0x63646630ULL), threads);
        results["control_band"] = cdf_band_to_json(band0, data);
        json qte = json::array();
        for (const auto& qv : block["qte"]) {
            const double q = qv.get<double>();
            const QteResult r = qte_from_cdf(band, band0, q);
            qte.push_back({{"q", q}, {"point", r.point}, {"lower", r.lower}, {"upper", r.upper}});
        }
        results["qte"] = qte;
    }
    return results;
}

Theorem1Inputs theorem1_inputs_from_json(const json& inputs, const json& constants) {
    Theorem1Inputs in;
    const auto get = [&](const char* key, double& slot) {
        if (inputs.contains(key)) slot = inputs[key].get<double>();
    };
    get("n", in.n);
    get("p", in.p);
    get("q", in.q);
    get("b_n", in.b_n);
    get("lambda_min", in.lambda_min);
    get("sigma_min", in.sigma_min);
    get("q_bar", in.q_bar);
    get("alpha_bar", in.alpha_bar);
    get("sigma_bar", in.sigma_bar);
    get("delta", in.delta);
    get("v_n", in.v_n);
    get("a_n", in.a_n);
    get("m_n", in.m_n);
    get("r_gamma", in.r_gamma);
    get("r_alpha", in.r_alpha);
    get("c", in.c);
    for (const auto& [key, value] : constants.items()) in.constants[key] = value.get<double>();
    return in;
}

json run_bound(const RunConfig& config) {
    const json& block = config.doc.at("bound");
    const int theorem = static_cast<int>(block["theorem"].get<double>());
    if (theorem == 1) {
        const Theorem1Inputs in = theorem1_inputs_from_json(block["inputs"], block["constants"]);
        const TailRegime regime = regime_from_name(block["regime"].get<std::string>());
        const Theorem1Bound bound = theorem1_bound(in, regime);
        return {{"theorem", 1},
                {"regime", regime_name(regime)},
                {"inputs", block["inputs"]},
                {"constants", block["constants"]},
                {"term_A", bound.term_a},
                {"term_B", bound.term_b},
                {"term_C", bound.term_c},
                {"delta_1n", bound.delta_1n},
                {"delta_2n", bound.delta_2n},
                {"total", bound.total},
                {"warnings", bound.warnings}};
    }
    Theorem2Inputs in;
    const json& inputs = block["inputs"];
    const auto get = [&](const char* key, double& slot) {
        if (inputs.contains(key)) slot = inputs[key].get<double>();
    };
    get("n", in.n);
    get("q", in.q);
    get("eps_n", in.eps_n);
    get("c0", in.c0);
    get("c1", in.c1);
    get("C0", in.C0);
    get("B_1n", in.B_1n);
    get("B_2n", in.B_2n);
    get("omega", in.omega);
    get("delta", in.delta);
    get("v_n", in.v_n);
    get("a_n", in.a_n);
    get("m_n", in.m_n);
    get("r_eta", in.r_eta);
    get("b_n", in.b_n);
    get("V_n", in.V_n);
    get("A_n", in.A_n);
    get("gamma", in.gamma);
    get("c", in.c);
    for (const auto& [key, value] : block["constants"].items())
        in.constants[key] = value.get<double>();
    if (block.contains("delta_prefactor")) in.delta_prefactor = block["delta_prefactor"].get<double>();
    const Theorem2Bound bound = theorem2_bound(in);
    return {{"theorem", 2},
            {"inputs", block["inputs"]},
            {"constants", block["constants"]},
            {"r_vee", bound.r_vee},
            {"delta_1n", bound.delta_1n},
            {"delta_2n", bound.delta_2n},
            {"delta_3n", bound.delta_3n},
            {"L_n", bound.l_n},
            {"r_1n", bound.r_1n},
            {"r_2n", bound.r_2n},
            {"total", bound.total},
            {"warnings", bound.warnings}};
}

ExperimentSpec experiment_from_config(const RunConfig& config) {
    const json& block = config.doc.at("simulate");
    ExperimentSpec spec;
    spec.dgp = block["dgp"].get<std::string>();
    spec.p = static_cast<int>(block["p"].get<double>());
    spec.k = static_cast<int>(block["k"].get<double>());
    spec.n = static_cast<std::size_t>(block["n"].get<double>());
    spec.replications = static_cast<int>(block["replications"].get<double>());
    spec.master_seed = static_cast<std::uint64_t>(config.doc["seed"].get<double>());
    spec.level = block.contains("level") ? block["level"].get<double>()
                                         : config.doc["level"].get<double>();
    spec.draws = static_cast<std::size_t>(block.contains("draws")
                                              ? block["draws"].get<double>()
                                              : config.doc["draws"].get<double>());
    spec.folds = static_cast<int>(block["folds"].get<double>());
    spec.nuisance = nuisance_source_from_name(block["nuisance"].get<std::string>());
    spec.dictionary.degree = static_cast<int>(block["dictionary"]["degree"].get<double>());
    spec.dictionary.interactions = block["dictionary"]["interactions"].get<bool>();
    spec.dictionary.treatment_intercepts = block["dictionary"]["treatment_intercepts"].get<bool>();
    spec.mode = mode_from_name(block["mode"].get<std::string>());
    spec.sided = sided_from_name(config.doc["sided"].get<std::string>());
    spec.grid_size = static_cast<int>(block["grid_size"].get<double>());
    spec.cdf_arm = static_cast<int>(block["arm"].get<double>());
    if (block.contains("critical_value_override") && !block["critical_value_override"].is_null())
        spec.critical_value_override = block["critical_value_override"].get<double>();
    spec.gaussian_draws = static_cast<std::size_t>(block["gaussian_draws"].get<double>());
    spec.threads = static_cast<int>(config.doc["threads"].get<double>());
    return spec;
}

std::string hash_hex(std::uint64_t value) {
    std::ostringstream os;
    os << std::hex << value;
    return os.str();
}

json run_simulate(const RunConfig& config) {
    const ExperimentSpec spec = experiment_from_config(config);
    const json& block = config.doc.at("simulate");
    switch (spec.mode) {
        case ExperimentMode::coverage: {
            const CoverageReport report = run_coverage(spec);
            return {{"mode", "coverage"},
                    {"joint_coverage", report.joint_coverage},
                    {"mc_se", report.mc_se},
                    {"marginal_coverage", to_json(report.marginal_coverage)},
                    {"mean_half_width", to_json(report.mean_half_width)},
                    {"replications", report.replications},
                    {"failures", report.failures},
                    {"spec_hash", hash_hex(report.spec_hash)}};
        }
        case ExperimentMode::ks: {
            std::optional<Theorem1Inputs> inputs;
            TailRegime regime = TailRegime::heavy_tail_q;
            if (block.contains("bound_inputs"))
                inputs = theorem1_inputs_from_json(block["bound_inputs"], json::object());
            if (block.contains("regime"))
                regime = regime_from_name(block["regime"].get<std::string>());
            const KsReport report = bound_vs_empirical(spec, inputs, regime);
            if (block.contains("dump_sup_t")) {
                std::ofstream out(block["dump_sup_t"].get<std::string>());
                if (!out) throw ValidationError("cannot open sup-t dump path");
                out << "sup_t\n";
                out.precision(17);
                for (double v : report.sup_t_sample) out << v << "\n";
            }
            json results = {{"mode", "ks"},
                            {"ks", report.ks},
                            {"sup_t_replications", report.sup_t_sample.size()},
                            {"gaussian_draws", report.gaussian_sample.size()},
                            {"spec_hash", hash_hex(report.spec_hash)}};
            if (report.bound_total) {
                results["bound_total"] = *report.bound_total;
                results["bound_vacuous"] = report.bound_vacuous;
                results["empirical_within_bound"] = report.empirical_within_bound;
            }
            return results;
        }
        case ExperimentMode::decomposition_audit: {
            const DecompositionAuditReport report = decomposition_audit(spec);
            return {{"mode", "decomposition_audit"},
                    {"max_scaled_residual", report.max_scaled_residual},
                    {"identity_ok", report.identity_ok},
                    {"max_abs_A", report.max_abs_a},
                    {"max_abs_B", report.max_abs_b},
                    {"max_abs_C", report.max_abs_c},
                    {"max_abs_D", report.max_abs_d},
                    {"median_abs_D", report.median_abs_d},
                    {"replications", report.replications},
                    {"spec_hash", hash_hex(report.spec_hash)}};
        }
    }
    throw ArgumentError("run_simulate: unknown mode");
}

} // namespace

Report run(const RunConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    json results;
    if (config.command == "estimate") {
        results = run_estimate(config);
    } else if (config.command == "bands") {
        results = run_bands(config);
    } else if (config.command == "cdf-bands") {
        results = run_cdf_bands(config);
    } else if (config.command == "bound") {
        results = run_bound(config);
    } else if (config.command == "simulate") {
        results = run_simulate(config);
    } else {
        throw ConfigError("unknown command \"" + config.command + "\"");
    }
    const auto elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json config_echo = config.doc;
    config_echo["spec_hash"] = hash_hex(config.spec_hash());
    Report report;
    report.doc = {{"schema_version", 1},
                  {"command", config.command},
                  {"config", config_echo},
                  {"results", results},
                  {"warnings", results.contains("warnings") ? results["warnings"] : json::array()},
                  {"timing", {{"seconds", elapsed}}}};
    if (config.doc.contains("out")) {
        const std::string path = config.doc["out"].get<std::string>();
        std::ofstream out(path);
        if (!out) throw ValidationError("cannot open output path \"" + path + "\"");
        out << report.dump(2) << "\n";
    }
    return report;
}

std::string summarize(const Report& report) {
    const json& results = report.doc["results"];
    std::ostringstream os;
    const std::string command = report.doc["command"].get<std::string>();
    os << command << ":";
    if (command == "estimate" || command == "bands") {
        for (const auto& target : results["targets"]) {
            os << " " << target["name"].get<std::string>() << "=";
            os << (target.contains("theta_hat") ? target["theta_hat"].get<double>()
                                                : target["estimate"].get<double>());
        }
        if (results.contains("critical_value"))
            os << " (c=" << results["critical_value"].get<double>() << ")";
    } else if (command == "cdf-bands") {
        os << " grid of " << results["grid"].size() << " points, c="
           << results["critical_value"].get<double>();
    } else if (command == "bound") {
        os << " total=" << results["total"].get<double>() << " (up to configured constants)";
    } else if (command == "simulate") {
        const std::string mode = results["mode"].get<std::string>();
        if (mode == "coverage")
            os << " coverage=" << results["joint_coverage"].get<double>();
        else if (mode == "ks")
            os << " ks=" << results["ks"].get<double>();
        else
            os << " max_scaled_residual=" << results["max_scaled_residual"].get<double>();
    }
    return os.str();
}

} // namespace dml
