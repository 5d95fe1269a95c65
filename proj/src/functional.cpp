#include "dml/functional.hpp"

#include <cmath>

#include "dml/errors.hpp"

namespace dml {

std::string family_name(Family family) {
    switch (family) {
        case Family::many_treatments: return "many_treatments";
        case Family::many_outcomes: return "many_outcomes";
        case Family::policy_value: return "policy_value";
        case Family::cdf_at_point: return "cdf_at_point";
        case Family::custom: return "custom";
    }
    throw ArgumentError("family_name: unknown family");
}

Family family_from_name(const std::string& name) {
    if (name == "many_treatments") return Family::many_treatments;
    if (name == "many_outcomes") return Family::many_outcomes;
    if (name == "policy_value") return Family::policy_value;
    if (name == "cdf_at_point") return Family::cdf_at_point;
    if (name == "custom") return Family::custom;
    throw ConfigError("unknown functional family \"" + name + "\"");
}

MomentFunctional MomentFunctional::many_treatments(int treated, int control) {
    if (treated == control)
        throw ArgumentError("many_treatments: treated and control labels coincide");
    MomentFunctional f;
    f.family_ = Family::many_treatments;
    f.treated_ = treated;
    f.control_ = control;
    f.name_ = "ate[d" + std::to_string(treated) + "-d" + std::to_string(control) + "]";
    f.eval_ = [treated, control](const Record& w, const DxFunction& gamma) {
        return gamma(treated, w.x) - gamma(control, w.x);
    };
    return f;
}

MomentFunctional MomentFunctional::many_outcomes(int outcome_index, int treated, int control) {
    MomentFunctional f = many_treatments(treated, control);
    f.family_ = Family::many_outcomes;
    f.outcome_index_ = outcome_index;
    f.name_ = "ate[y" + std::to_string(outcome_index) + "]";
    return f;
}

MomentFunctional MomentFunctional::policy_value(PolicyRule policy, int treated, int control,
                                                const std::string& policy_name) {
    if (!policy) throw ArgumentError("policy_value: empty policy rule");
    if (treated == control)
        throw ArgumentError("policy_value: treated and control labels coincide");
    MomentFunctional f;
    f.family_ = Family::policy_value;
    f.treated_ = treated;
    f.control_ = control;
    f.policy_ = policy;
    f.name_ = "policy[" + policy_name + "]";
    f.eval_ = [policy, treated, control](const Record& w, const DxFunction& gamma) {
        const int assign = policy(w.x);
        if (assign != 0 && assign != 1)
            throw EvaluationError("policy rule returned a value outside {0,1}");
        const double g0 = gamma(control, w.x);
        return g0 + static_cast<double>(assign) * (gamma(treated, w.x) - g0);
    };
    return f;
}

MomentFunctional MomentFunctional::cdf_at_point(int arm, double threshold, int outcome_index) {
    MomentFunctional f;
    f.family_ = Family::cdf_at_point;
    f.arm_ = arm;
    f.threshold_ = threshold;
    f.outcome_index_ = outcome_index;
    f.name_ = "cdf[d" + std::to_string(arm) + ",u=" + std::to_string(threshold) + "]";
    f.eval_ = [arm](const Record& w, const DxFunction& gamma) { return gamma(arm, w.x); };
    return f;
}

MomentFunctional MomentFunctional::custom(
    const std::string& name, std::function<double(const Record&, const DxFunction&)> evaluate,
    int outcome_index) {
    if (!evaluate) throw ArgumentError("custom functional: empty evaluator");
    MomentFunctional f;
    f.family_ = Family::custom;
    f.name_ = name;
    f.outcome_index_ = outcome_index;
    f.eval_ = std::move(evaluate);
    return f;
}

double moment_value(const MomentFunctional& functional, const Record& w, const DxFunction& gamma) {
    const double v = functional.value(w, gamma);
    if (!std::isfinite(v))
        throw EvaluationError("moment_value: non-finite value for " + functional.name());
    return v;
}

double orthogonal_score(const MomentFunctional& functional, const Record& w, double y,
                        double theta, const DxFunction& gamma, const DxFunction& alpha) {
    const double g = gamma(w.d, w.x);
    const double a = alpha(w.d, w.x);
    const double value = functional.value(w, gamma) + a * (y - g) - theta;
    if (!std::isfinite(value))
        throw EvaluationError("orthogonal_score: non-finite intermediate for " + functional.name());
    return value;
}

} // namespace dml
