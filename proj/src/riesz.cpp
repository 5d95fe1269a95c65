#include "dml/riesz.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dml/errors.hpp"
#include "dml/regression.hpp"

namespace dml {

namespace {

DxFunction clipped(DxFunction raw, double clip_bound) {
    return [raw = std::move(raw), clip_bound](int d, const Eigen::VectorXd& x) {
        return std::clamp(raw(d, x), -clip_bound, clip_bound);
    };
}

std::function<double(int, const Eigen::VectorXd&)> propensity_evaluator(const PropensityFit& fit) {
    return [fit](int label, const Eigen::VectorXd& x) { return fit.prob(label, x); };
}

} // namespace

RieszFit riesz_plugin_for(const MomentFunctional& functional,
                          const std::function<double(int, const Eigen::VectorXd&)>& propensity,
                          double clip_bound) {
    if (!(clip_bound > 0.0)) throw ArgumentError("riesz_plugin: clip_bound must be positive");
    DxFunction raw;
    switch (functional.family()) {
        case Family::many_treatments:
        case Family::many_outcomes: {
            const int treated = functional.treated();
            const int control = functional.control();
            if (treated == control)
                throw ArgumentError("riesz_plugin: treated and control labels coincide");
            raw = [propensity, treated, control](int d, const Eigen::VectorXd& x) {
                if (d == treated) return 1.0 / propensity(treated, x);
                if (d == control) return -1.0 / propensity(control, x);
                return 0.0;
            };
            break;
        }
        case Family::policy_value: {
            const int treated = functional.treated();
            const int control = functional.control();
            const PolicyRule policy = functional.policy();
            raw = [propensity, policy, treated, control](int d, const Eigen::VectorXd& x) {
                const double assign = static_cast<double>(policy(x));
                if (d == treated) return assign / propensity(treated, x);
                if (d == control) return (1.0 - assign) / propensity(control, x);
                return 0.0;
            };
            break;
        }
        case Family::cdf_at_point: {
            const int arm = functional.arm();
            raw = [propensity, arm](int d, const Eigen::VectorXd& x) {
                return d == arm ? 1.0 / propensity(arm, x) : 0.0;
            };
            break;
        }
        case Family::custom:
            throw ArgumentError("riesz_plugin: custom functionals have no closed-form representer; "
                                "use riesz_automatic");
    }
    return RieszFit{RieszKind::plugin, clip_bound, clipped(std::move(raw), clip_bound),
                    "plugin[" + functional.name() + "]"};
}

RieszFit riesz_plugin_for(const MomentFunctional& functional, const PropensityFit& propensity,
                          double clip_bound) {
    return riesz_plugin_for(functional, propensity_evaluator(propensity), clip_bound);
}

RieszFit riesz_plugin(const PropensityFit& propensity, int treated, int control,
                      double clip_bound) {
    return riesz_plugin_for(MomentFunctional::many_treatments(treated, control), propensity,
                            clip_bound);
}

RieszFit riesz_automatic(const Dataset& data, const MomentFunctional& functional,
                         std::shared_ptr<const Dictionary> dictionary, double ridge,
                         double clip_bound) {
    if (!(clip_bound > 0.0)) throw ArgumentError("riesz_automatic: clip_bound must be positive");
    const Eigen::MatrixXd B = dictionary->design(data);
    const double n = static_cast<double>(data.n());
    Eigen::MatrixXd gram = B.transpose() * B / n;
    Eigen::VectorXd moments(dictionary->size());
    for (int k = 0; k < dictionary->size(); ++k) {
        const auto dict = dictionary;
        const DxFunction basis_k = [dict, k](int d, const Eigen::VectorXd& x) {
            return dict->eval(k, d, x);
        };
        double sum = 0.0;
        for (std::size_t i = 0; i < data.n(); ++i)
            sum += functional.value(Record{data.treatment_of(i), data.covariate_row(i)}, basis_k);
        moments(k) = sum / n;
    }
    if (ridge < 0.0) ridge = default_ridge(gram);
    Eigen::VectorXd coef;
    if (ridge == 0.0) {
        Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
        if (!lu.isInvertible())
            throw RankError("riesz_automatic: singular Gram matrix at ridge = 0; use ridge > 0");
        coef = lu.solve(moments);
    } else {
        gram += ridge * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        if (ldlt.info() != Eigen::Success)
            throw RankError("riesz_automatic: factorization failed");
        coef = ldlt.solve(moments);
    }
    if (!coef.allFinite()) throw RankError("riesz_automatic: non-finite coefficients");
    const auto dict = dictionary;
    DxFunction raw = [dict, coef](int d, const Eigen::VectorXd& x) {
        return coef.dot(dict->eval_all(d, x));
    };
    return RieszFit{RieszKind::automatic, clip_bound, clipped(std::move(raw), clip_bound),
                    "automatic[" + functional.name() + "]"};
}

} // namespace dml
