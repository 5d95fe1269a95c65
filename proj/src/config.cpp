#include "dml/config.hpp"

#include <fstream>
#include <set>

#include "dml/errors.hpp"
#include "dml/estimate.hpp"
#include "dml/functional.hpp"
#include "dml/montecarlo.hpp"
#include "dml/rng.hpp"

namespace dml {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (allowed.find(key) == allowed.end())
            throw ConfigError("unknown key \"" + key + "\" in " + where);
    }
}

double require_number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw ConfigError(where + " is missing key \"" + key + "\"");
    if (!obj[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
    return obj[key].get<double>();
}

void default_number(json& obj, const std::string& key, double value) {
    if (!obj.contains(key)) obj[key] = value;
}

void check_range(double value, double lo, double hi, const std::string& name, bool open_ends) {
    const bool ok = open_ends ? (value > lo && value < hi) : (value >= lo && value <= hi);
    if (!ok)
        throw ConfigError(name + " must lie in " + (open_ends ? "(" : "[") + std::to_string(lo) +
                          ", " + std::to_string(hi) + (open_ends ? ")" : "]"));
}

void normalize_functionals(json& block) {
    reject_unknown_keys(block, {"family", "treated", "control", "treated_labels", "outcomes",
                                "policies", "arm", "thresholds"},
                        "functionals");
    if (!block.contains("family")) throw ConfigError("functionals is missing key \"family\"");
    family_from_name(block["family"].get<std::string>()); // validates the name
}

void normalize_nuisance(json& block) {
    reject_unknown_keys(block,
                        {"dictionary", "regression_ridge", "propensity_clip", "propensity_ridge",
                         "riesz", "riesz_ridge", "riesz_clip", "folds", "cross_fit",
                         "candidate_degrees"},
                        "nuisance");
    if (block.contains("candidate_degrees")) {
        if (!block["candidate_degrees"].is_array() || block["candidate_degrees"].empty())
            throw ConfigError("nuisance.candidate_degrees must be a nonempty array");
        for (const auto& degree : block["candidate_degrees"])
            if (!degree.is_number() || degree.get<double>() < 0)
                throw ConfigError("nuisance.candidate_degrees entries must be nonnegative numbers");
    }
    if (!block.contains("dictionary")) block["dictionary"] = json::object();
    json& dict = block["dictionary"];
    reject_unknown_keys(dict, {"degree", "degrees", "interactions", "treatment_intercepts"},
                        "nuisance.dictionary");
    default_number(dict, "degree", 1);
    if (dict.contains("degrees")) {
        if (!dict["degrees"].is_array())
            throw ConfigError("nuisance.dictionary.degrees must be an array");
        for (const auto& degree : dict["degrees"])
            if (!degree.is_number() || degree.get<double>() < 0)
                throw ConfigError("nuisance.dictionary.degrees entries must be nonnegative");
    }
    if (!dict.contains("interactions")) dict["interactions"] = false;
    if (!dict.contains("treatment_intercepts")) dict["treatment_intercepts"] = true;
    default_number(block, "regression_ridge", -1.0);
    default_number(block, "propensity_clip", 0.01);
    default_number(block, "propensity_ridge", 0.0);
    if (!block.contains("riesz")) block["riesz"] = "plugin";
    const std::string riesz = block["riesz"].get<std::string>();
    if (riesz != "plugin" && riesz != "automatic")
        throw ConfigError("nuisance.riesz must be \"plugin\" or \"automatic\"");
    default_number(block, "riesz_ridge", -1.0);
    default_number(block, "riesz_clip", 100.0);
    default_number(block, "folds", 5);
    if (!block.contains("cross_fit")) block["cross_fit"] = true;
    check_range(block["propensity_clip"].get<double>(), 0.0, 0.5, "nuisance.propensity_clip", true);
    if (block["folds"].get<double>() < 2) throw ConfigError("nuisance.folds must be at least 2");
}

void normalize_data(json& block) {
    reject_unknown_keys(block, {"csv", "schema"}, "data");
    if (!block.contains("csv")) throw ConfigError("data is missing key \"csv\"");
    if (!block.contains("schema")) throw ConfigError("data is missing key \"schema\"");
    reject_unknown_keys(block["schema"],
                        {"outcomes", "treatment", "covariates", "categorical_covariates", "weight",
                         "labels"},
                        "data.schema");
    if (!block["schema"].contains("outcomes") || !block["schema"].contains("treatment"))
        throw ConfigError("data.schema needs \"outcomes\" and \"treatment\"");
    if (!block["schema"].contains("covariates")) block["schema"]["covariates"] = json::array();
    if (!block["schema"].contains("categorical_covariates"))
        block["schema"]["categorical_covariates"] = json::array();
}

void normalize_dgp(json& block) {
    reject_unknown_keys(block, {"name", "n", "p", "k", "seed"}, "dgp");
    if (!block.contains("name")) throw ConfigError("dgp is missing key \"name\"");
    const std::string name = block["name"].get<std::string>();
    if (name != "discrete4" && name != "discrete8" && name != "gaussian_linear")
        throw ConfigError("unknown dgp \"" + name + "\"");
    default_number(block, "n", 1000);
    default_number(block, "p", 1);
    default_number(block, "k", 5);
    default_number(block, "seed", 1);
    if (block["n"].get<double>() < 1) throw ConfigError("dgp.n must be at least 1");
}

void normalize_cdf(json& block) {
    reject_unknown_keys(block, {"arm", "grid", "grid_points", "qte", "outcome"}, "cdf");
    if (!block.contains("arm")) throw ConfigError("cdf is missing key \"arm\"");
    if (block.contains("grid") && block.contains("grid_points"))
        throw ConfigError("cdf: give either \"grid\" or \"grid_points\", not both");
    if (!block.contains("grid") && !block.contains("grid_points")) block["grid_points"] = 25;
    default_number(block, "outcome", 0);
    if (block.contains("qte")) {
        for (const auto& q : block["qte"]) {
            if (!q.is_number()) throw ConfigError("cdf.qte entries must be numbers");
            check_range(q.get<double>(), 0.0, 1.0, "cdf.qte", true);
        }
    }
}

void normalize_bound(json& block) {
    reject_unknown_keys(block, {"theorem", "regime", "inputs", "constants", "delta_prefactor"},
                        "bound");
    const double theorem = require_number(block, "theorem", "bound");
    if (theorem != 1.0 && theorem != 2.0) throw ConfigError("bound.theorem must be 1 or 2");
    if (theorem == 1.0) {
        if (!block.contains("regime")) block["regime"] = "heavy";
        regime_from_name(block["regime"].get<std::string>());
    }
    if (!block.contains("inputs")) block["inputs"] = json::object();
    if (!block.contains("constants")) block["constants"] = json::object();
    static const std::set<std::string> theorem1_keys = {
        "n", "p", "q", "b_n", "lambda_min", "sigma_min", "q_bar", "alpha_bar",
        "sigma_bar", "delta", "v_n", "a_n", "m_n", "r_gamma", "r_alpha", "c"};
    static const std::set<std::string> theorem2_keys = {
        "n", "q", "eps_n", "c0", "c1", "C0", "B_1n", "B_2n", "omega", "delta",
        "v_n", "a_n", "m_n", "r_eta", "b_n", "V_n", "A_n", "gamma", "c"};
    reject_unknown_keys(block["inputs"], theorem == 1.0 ? theorem1_keys : theorem2_keys,
                        "bound.inputs");
    for (const auto& [key, value] : block["constants"].items()) {
        if (!value.is_number()) throw ConfigError("bound.constants." + key + " must be a number");
    }
}

void normalize_simulate(json& block) {
    reject_unknown_keys(block,
                        {"mode", "dgp", "n", "p", "k", "replications", "nuisance", "dictionary",
                         "grid_size", "arm", "gaussian_draws", "critical_value_override",
                         "dump_sup_t", "bound_inputs", "regime", "folds", "level", "draws"},
                        "simulate");
    if (!block.contains("mode")) block["mode"] = "coverage";
    mode_from_name(block["mode"].get<std::string>());
    if (!block.contains("dgp")) block["dgp"] = "discrete4";
    default_number(block, "n", 1000);
    default_number(block, "p", 1);
    default_number(block, "k", 5);
    default_number(block, "replications", 200);
    if (!block.contains("nuisance")) block["nuisance"] = "oracle";
    nuisance_source_from_name(block["nuisance"].get<std::string>());
    if (!block.contains("dictionary")) block["dictionary"] = json::object();
    reject_unknown_keys(block["dictionary"], {"degree", "interactions", "treatment_intercepts"},
                        "simulate.dictionary");
    default_number(block["dictionary"], "degree", 1);
    if (!block["dictionary"].contains("interactions")) block["dictionary"]["interactions"] = false;
    if (!block["dictionary"].contains("treatment_intercepts"))
        block["dictionary"]["treatment_intercepts"] = true;
    default_number(block, "grid_size", 0);
    default_number(block, "arm", 1);
    default_number(block, "gaussian_draws", 100000);
    default_number(block, "folds", 5);
}

} // namespace

void apply_override(json& doc, const std::string& path, const std::string& value) {
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) throw ConfigError("bad override path \"" + path + "\"");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        if (!node->contains(key)) (*node)[key] = json::object();
        node = &(*node)[key];
        start = dot + 1;
    }
}

RunConfig parse_config(const json& raw) {
    json doc = raw;
    reject_unknown_keys(doc,
                        {"command", "data", "dgp", "functionals", "nuisance", "level", "draws",
                         "seed", "sided", "threads", "cdf", "bound", "simulate", "out",
                         "spec_hash"},
                        "config");
    doc.erase("spec_hash"); // reports stamp it into the echo; never an input
    if (!doc.contains("command")) throw ConfigError("config is missing key \"command\"");
    const std::string command = doc["command"].get<std::string>();
    static const std::set<std::string> commands = {"estimate", "bands", "cdf-bands", "bound",
                                                   "simulate"};
    if (commands.find(command) == commands.end())
        throw ConfigError("unknown command \"" + command + "\"");

    default_number(doc, "level", 0.95);
    default_number(doc, "draws", 100000);
    default_number(doc, "seed", 1);
    if (!doc.contains("sided")) doc["sided"] = "two_sided";
    sided_from_name(doc["sided"].get<std::string>());
    default_number(doc, "threads", 1);
    check_range(doc["level"].get<double>(), 0.0, 1.0, "level", true);
    if (doc["draws"].get<double>() < 1000) throw ConfigError("draws must be at least 1000");

    const bool needs_data = command == "estimate" || command == "bands" || command == "cdf-bands";
    if (needs_data) {
        const bool has_csv = doc.contains("data");
        const bool has_dgp = doc.contains("dgp");
        if (has_csv == has_dgp)
            throw ConfigError("exactly one data source (\"data\" or \"dgp\") is required for " +
                              command);
        if (has_csv) normalize_data(doc["data"]);
        if (has_dgp) normalize_dgp(doc["dgp"]);
        if (!doc.contains("nuisance")) doc["nuisance"] = json::object();
        normalize_nuisance(doc["nuisance"]);
    }
    if (command == "estimate" || command == "bands") {
        if (!doc.contains("functionals"))
            throw ConfigError(command + " requires a \"functionals\" block");
        normalize_functionals(doc["functionals"]);
    }
    if (command == "cdf-bands") {
        if (!doc.contains("cdf")) throw ConfigError("cdf-bands requires a \"cdf\" block");
        normalize_cdf(doc["cdf"]);
    }
    if (command == "bound") {
        if (!doc.contains("bound")) throw ConfigError("bound requires a \"bound\" block");
        normalize_bound(doc["bound"]);
    }
    if (command == "simulate") {
        if (!doc.contains("simulate")) doc["simulate"] = json::object();
        normalize_simulate(doc["simulate"]);
    }
    return RunConfig{command, std::move(doc)};
}

RunConfig parse_config_text(const std::string& text,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    json raw = json::parse(text, nullptr, false);
    if (raw.is_discarded()) throw ConfigError("config is not valid JSON");
    for (const auto& [path, value] : overrides) apply_override(raw, path, value);
    return parse_config(raw);
}

RunConfig parse_config_file(const std::string& path,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, overrides);
}

std::uint64_t RunConfig::spec_hash() const {
    json semantic = doc;
    semantic.erase("out");
    semantic.erase("threads");
    const std::string dump = semantic.dump();
    return fnv1a(dump.data(), dump.size());
}

} // namespace dml
