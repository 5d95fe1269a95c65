#include "dml/dictionary.hpp"

#include <cmath>

#include "dml/errors.hpp"

namespace dml {

Dictionary::Dictionary(std::vector<BasisFeature> features) : features_(std::move(features)) {
    if (features_.empty()) throw ValidationError("Dictionary: empty basis");
    const auto& first = features_.front();
    if (first.name != "1")
        throw ValidationError("Dictionary: first basis entry must be the constant 1");
}

std::vector<std::string> Dictionary::names() const {
    std::vector<std::string> out;
    out.reserve(features_.size());
    for (const auto& f : features_) out.push_back(f.name);
    return out;
}

bool Dictionary::has_treatment_features() const {
    for (const auto& f : features_)
        if (f.uses_treatment) return true;
    return false;
}

Eigen::VectorXd Dictionary::eval_all(int d, const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(size());
    for (int k = 0; k < size(); ++k) out(k) = eval(k, d, x);
    if (!out.allFinite()) throw EvaluationError("Dictionary: non-finite basis value");
    return out;
}

Eigen::MatrixXd Dictionary::design(const Dataset& data) const {
    Eigen::MatrixXd B(static_cast<Eigen::Index>(data.n()), size());
    for (std::size_t i = 0; i < data.n(); ++i)
        B.row(static_cast<Eigen::Index>(i)) =
            eval_all(data.treatment_of(i), data.covariate_row(i)).transpose();
    return B;
}

std::shared_ptr<const Dictionary> Dictionary::covariates_only() const {
    std::vector<BasisFeature> keep;
    for (const auto& f : features_)
        if (!f.uses_treatment) keep.push_back(f);
    return std::make_shared<Dictionary>(std::move(keep));
}

namespace {

BasisFeature constant_feature() {
    return BasisFeature{"1", false, [](int, const Eigen::VectorXd&) { return 1.0; }};
}

} // namespace

std::shared_ptr<const Dictionary> Dictionary::constant() {
    return std::make_shared<Dictionary>(std::vector<BasisFeature>{constant_feature()});
}

std::shared_ptr<const Dictionary> Dictionary::polynomial(const PolynomialSpec& spec, int n_labels,
                                                         int n_covariates) {
    if (spec.degree < 0) throw ConfigError("dictionary degree must be nonnegative");
    if (!spec.degrees.empty() && static_cast<int>(spec.degrees.size()) != n_covariates)
        throw ConfigError("dictionary: per-covariate degree list must have one entry per covariate");
    std::vector<BasisFeature> features{constant_feature()};
    if (spec.treatment_intercepts) {
        for (int k = 1; k < n_labels; ++k) {
            features.push_back(BasisFeature{
                "1{d=" + std::to_string(k) + "}", true,
                [k](int d, const Eigen::VectorXd&) { return d == k ? 1.0 : 0.0; }});
        }
    }
    for (int m = 0; m < n_covariates; ++m) {
        const int degree_m =
            spec.degrees.empty() ? spec.degree : spec.degrees[static_cast<std::size_t>(m)];
        if (degree_m < 0) throw ConfigError("dictionary degree must be nonnegative");
        for (int q = 1; q <= degree_m; ++q) {
            std::string name = "x" + std::to_string(m);
            if (q > 1) name += "^" + std::to_string(q);
            features.push_back(BasisFeature{
                name, false, [m, q](int, const Eigen::VectorXd& x) { return std::pow(x(m), q); }});
        }
    }
    if (spec.interactions) {
        for (int m = 0; m < n_covariates; ++m) {
            for (int l = m + 1; l < n_covariates; ++l) {
                features.push_back(BasisFeature{
                    "x" + std::to_string(m) + "*x" + std::to_string(l), false,
                    [m, l](int, const Eigen::VectorXd& x) { return x(m) * x(l); }});
            }
        }
    }
    return std::make_shared<Dictionary>(std::move(features));
}

std::shared_ptr<const Dictionary> Dictionary::saturated(
    const std::vector<std::pair<int, Eigen::VectorXd>>& cells) {
    if (cells.empty()) throw ArgumentError("saturated dictionary: no cells");
    std::vector<BasisFeature> features{constant_feature()};
    for (std::size_t c = 1; c < cells.size(); ++c) {
        const int d_cell = cells[c].first;
        const Eigen::VectorXd x_cell = cells[c].second;
        features.push_back(BasisFeature{
            "cell" + std::to_string(c), true,
            [d_cell, x_cell](int d, const Eigen::VectorXd& x) {
                return (d == d_cell && x.size() == x_cell.size() && x == x_cell) ? 1.0 : 0.0;
            }});
    }
    return std::make_shared<Dictionary>(std::move(features));
}

std::shared_ptr<const Dictionary> Dictionary::saturated_covariates(
    const std::vector<Eigen::VectorXd>& x_cells) {
    if (x_cells.empty()) throw ArgumentError("saturated covariate dictionary: no cells");
    std::vector<BasisFeature> features{constant_feature()};
    for (std::size_t c = 1; c < x_cells.size(); ++c) {
        const Eigen::VectorXd x_cell = x_cells[c];
        features.push_back(BasisFeature{
            "xcell" + std::to_string(c), false,
            [x_cell](int, const Eigen::VectorXd& x) {
                return (x.size() == x_cell.size() && x == x_cell) ? 1.0 : 0.0;
            }});
    }
    return std::make_shared<Dictionary>(std::move(features));
}

} // namespace dml
