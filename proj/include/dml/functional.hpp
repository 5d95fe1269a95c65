#pragma once

#include <functional>
#include <string>

#include "dml/data.hpp"

namespace dml {

enum class Family {
    many_treatments,
    many_outcomes,
    policy_value,
    cdf_at_point,
    custom,
};

std::string family_name(Family family);
Family family_from_name(const std::string& name);

/// Policy rule pi: x -> {0, 1}.
using PolicyRule = std::function<int(const Eigen::VectorXd&)>;

/// A linear moment functional m(w, gamma). `value` evaluates the family
/// formula; linearity in gamma is an invariant, not an option.
class MomentFunctional {
public:
    static MomentFunctional many_treatments(int treated, int control);
    static MomentFunctional many_outcomes(int outcome_index, int treated, int control);
    static MomentFunctional policy_value(PolicyRule policy, int treated, int control,
                                         const std::string& policy_name = "policy");
    static MomentFunctional cdf_at_point(int arm, double threshold, int outcome_index = 0);
    /// Arbitrary linear functional, for tests and extensions.
    static MomentFunctional custom(const std::string& name,
                                   std::function<double(const Record&, const DxFunction&)> evaluate,
                                   int outcome_index = 0);

    double value(const Record& w, const DxFunction& gamma) const { return eval_(w, gamma); }

    Family family() const { return family_; }
    const std::string& name() const { return name_; }
    int outcome_index() const { return outcome_index_; }
    int treated() const { return treated_; }
    int control() const { return control_; }
    int arm() const { return arm_; }
    double threshold() const { return threshold_; }
    const PolicyRule& policy() const { return policy_; }

private:
    MomentFunctional() = default;

    Family family_ = Family::custom;
    std::string name_;
    int outcome_index_ = 0;
    int treated_ = 1;
    int control_ = 0;
    int arm_ = 1;
    double threshold_ = 0.0;
    PolicyRule policy_;
    std::function<double(const Record&, const DxFunction&)> eval_;
};

/// m(w, gamma) for one record.
double moment_value(const MomentFunctional& functional, const Record& w, const DxFunction& gamma);

/// Augmented score m(w, gamma) + alpha(w) (y - gamma(w)) - theta.
double orthogonal_score(const MomentFunctional& functional, const Record& w, double y,
                        double theta, const DxFunction& gamma, const DxFunction& alpha);

} // namespace dml
