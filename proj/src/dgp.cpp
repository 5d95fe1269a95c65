#include "dml/dgp.hpp"

#include <cmath>

#include "dml/errors.hpp"
#include "dml/rng.hpp"

namespace dml {

namespace {

bool same_vector(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && a == b;
}

} // namespace

DiscreteDgp DiscreteDgp::from_atoms(std::vector<DgpAtom> atoms, std::vector<double> probabilities,
                                    std::vector<std::string> labels) {
    if (atoms.empty()) throw ValidationError("DiscreteDgp: empty support");
    if (atoms.size() != probabilities.size())
        throw ValidationError("DiscreteDgp: atom/probability length mismatch");
    if (labels.empty()) throw ValidationError("DiscreteDgp: empty label set");

    DiscreteDgp dgp;
    dgp.atoms_ = std::move(atoms);
    dgp.probabilities_ = std::move(probabilities);
    dgp.labels_ = std::move(labels);
    dgp.p_y_ = static_cast<int>(dgp.atoms_.front().y.size());
    dgp.k_ = static_cast<int>(dgp.atoms_.front().x.size());

    // Derive (d, x) cells with conditional moments by enumeration.
    for (std::size_t i = 0; i < dgp.atoms_.size(); ++i) {
        const auto& atom = dgp.atoms_[i];
        if (atom.y.size() != dgp.p_y_ || atom.x.size() != dgp.k_)
            throw ValidationError("DiscreteDgp: ragged atom dimensions");
        Cell* cell = nullptr;
        for (auto& c : dgp.cells_)
            if (c.d == atom.d && same_vector(c.x, atom.x)) { cell = &c; break; }
        if (cell == nullptr) {
            dgp.cells_.push_back(Cell{atom.d, atom.x, 0.0,
                                      Eigen::VectorXd::Zero(dgp.p_y_), 0.0});
            cell = &dgp.cells_.back();
        }
        cell->prob += dgp.probabilities_[i];
        cell->regression += dgp.probabilities_[i] * atom.y;
    }
    for (auto& cell : dgp.cells_) {
        if (cell.prob <= 0.0)
            throw ValidationError("DiscreteDgp: zero-probability (d,x) cell");
        cell.regression /= cell.prob;
        double x_prob = 0.0;
        for (const auto& other : dgp.cells_)
            if (same_vector(other.x, cell.x)) x_prob += other.prob;
        cell.propensity = cell.prob / x_prob;
    }
    dgp.validate();
    return dgp;
}

void DiscreteDgp::override_regression(int cell_index, const Eigen::VectorXd& values) {
    cells_.at(static_cast<std::size_t>(cell_index)).regression = values;
}

void DiscreteDgp::override_propensity(int cell_index, double value) {
    cells_.at(static_cast<std::size_t>(cell_index)).propensity = value;
}

void DiscreteDgp::validate() const {
    NeumaierSum total;
    for (double p : probabilities_) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw ValidationError("DiscreteDgp: probabilities must be finite and nonnegative");
        total.add(p);
    }
    if (std::abs(total.value() - 1.0) > 1e-12)
        throw ValidationError("DiscreteDgp: probabilities sum to " + std::to_string(total.value()) +
                              ", not 1 within 1e-12");
    for (const auto& atom : atoms_) {
        if (!atom.y.allFinite() || !atom.x.allFinite())
            throw ValidationError("DiscreteDgp: non-finite atom");
        if (atom.d < 0 || atom.d >= n_labels())
            throw ValidationError("DiscreteDgp: atom treatment label out of range");
    }

    // Consistency of the stored tables with the atom distribution.
    for (const auto& cell : cells_) {
        NeumaierSum mass;
        Eigen::VectorXd moment = Eigen::VectorXd::Zero(p_y_);
        double x_mass = 0.0;
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (same_vector(atoms_[i].x, cell.x)) {
                x_mass += probabilities_[i];
                if (atoms_[i].d == cell.d) {
                    mass.add(probabilities_[i]);
                    moment += probabilities_[i] * atoms_[i].y;
                }
            }
        }
        const double cond = mass.value();
        if ((moment / cond - cell.regression).cwiseAbs().maxCoeff() > 1e-10)
            throw ValidationError("DiscreteDgp: stored regression inconsistent with atoms");
        if (std::abs(cond / x_mass - cell.propensity) > 1e-10)
            throw ValidationError("DiscreteDgp: stored propensity inconsistent with atoms");
    }

    // Overlap: every label reachable with probability strictly inside (0,1)
    // at every covariate value.
    for (const auto& cell : cells_) {
        for (int d = 0; d < n_labels(); ++d) {
            bool found = false;
            for (const auto& other : cells_) {
                if (other.d == d && same_vector(other.x, cell.x)) {
                    if (!(other.propensity > 0.0 && other.propensity < 1.0))
                        throw ValidationError("DiscreteDgp: propensity outside (0,1) (no overlap)");
                    found = true;
                    break;
                }
            }
            if (!found)
                throw ValidationError("DiscreteDgp: label " + labels_[static_cast<std::size_t>(d)] +
                                      " has zero probability at some covariate value (no overlap)");
        }
    }
}

const DiscreteDgp::Cell* DiscreteDgp::find_cell(int d, const Eigen::VectorXd& x) const {
    for (const auto& cell : cells_)
        if (cell.d == d && same_vector(cell.x, x)) return &cell;
    return nullptr;
}

double DiscreteDgp::propensity(int d, const Eigen::VectorXd& x) const {
    const Cell* cell = find_cell(d, x);
    if (cell == nullptr) throw EvaluationError("DiscreteDgp: (d,x) outside the support");
    return cell->propensity;
}

double DiscreteDgp::regression(int outcome_index, int d, const Eigen::VectorXd& x) const {
    const Cell* cell = find_cell(d, x);
    if (cell == nullptr) throw EvaluationError("DiscreteDgp: (d,x) outside the support");
    return cell->regression(outcome_index);
}

DxFunction DiscreteDgp::true_gamma(int outcome_index) const {
    return [this, outcome_index](int d, const Eigen::VectorXd& x) {
        return regression(outcome_index, d, x);
    };
}

DxFunction DiscreteDgp::true_alpha(const MomentFunctional& functional) const {
    switch (functional.family()) {
        case Family::many_treatments:
        case Family::many_outcomes: {
            const int treated = functional.treated();
            const int control = functional.control();
            return [this, treated, control](int d, const Eigen::VectorXd& x) {
                if (d == treated) return 1.0 / propensity(treated, x);
                if (d == control) return -1.0 / propensity(control, x);
                return 0.0;
            };
        }
        case Family::policy_value: {
            const int treated = functional.treated();
            const int control = functional.control();
            const PolicyRule policy = functional.policy();
            return [this, treated, control, policy](int d, const Eigen::VectorXd& x) {
                const double assign = static_cast<double>(policy(x));
                if (d == treated) return assign / propensity(treated, x);
                if (d == control) return (1.0 - assign) / propensity(control, x);
                return 0.0;
            };
        }
        case Family::cdf_at_point: {
            const int arm = functional.arm();
            return [this, arm](int d, const Eigen::VectorXd& x) {
                return d == arm ? 1.0 / propensity(arm, x) : 0.0;
            };
        }
        case Family::custom:
            throw PreconditionError("true_alpha: no closed-form representer for a custom functional");
    }
    throw PreconditionError("true_alpha: unknown family");
}

double DiscreteDgp::true_target(const MomentFunctional& functional) const {
    const DxFunction gamma = true_gamma(functional.outcome_index());
    return enumerate_expectation(*this, [&](const Eigen::VectorXd&, int d, const Eigen::VectorXd& x) {
        return functional.value(Record{d, x}, gamma);
    });
}

double DiscreteDgp::oracle_sigma(const MomentFunctional& functional) const {
    const DxFunction gamma = true_gamma(functional.outcome_index());
    const DxFunction alpha = true_alpha(functional);
    const double theta = true_target(functional);
    const int j = functional.outcome_index();
    const double second = enumerate_expectation(
        *this, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
            const double psi = orthogonal_score(functional, Record{d, x}, y(j), theta, gamma, alpha);
            return psi * psi;
        });
    return std::sqrt(second);
}

Eigen::MatrixXd DiscreteDgp::oracle_correlation(const std::vector<MomentFunctional>& functionals) const {
    const auto p = static_cast<Eigen::Index>(functionals.size());
    Eigen::MatrixXd second(p, p);
    std::vector<DxFunction> gammas, alphas;
    std::vector<double> thetas;
    for (const auto& f : functionals) {
        gammas.push_back(true_gamma(f.outcome_index()));
        alphas.push_back(true_alpha(f));
        thetas.push_back(true_target(f));
    }
    for (Eigen::Index a = 0; a < p; ++a) {
        for (Eigen::Index b = a; b < p; ++b) {
            const double value = enumerate_expectation(
                *this, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
                    const Record w{d, x};
                    const double pa = orthogonal_score(functionals[a], w, y(functionals[a].outcome_index()),
                                                       thetas[a], gammas[a], alphas[a]);
                    const double pb = orthogonal_score(functionals[b], w, y(functionals[b].outcome_index()),
                                                       thetas[b], gammas[b], alphas[b]);
                    return pa * pb;
                });
            second(a, b) = value;
            second(b, a) = value;
        }
    }
    Eigen::VectorXd sd = second.diagonal().cwiseSqrt();
    Eigen::MatrixXd corr(p, p);
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) corr(a, b) = second(a, b) / (sd(a) * sd(b));
    return corr;
}

double enumerate_expectation(
    const DiscreteDgp& dgp,
    const std::function<double(const Eigen::VectorXd&, int, const Eigen::VectorXd&)>& f) {
    NeumaierSum sum;
    const auto& atoms = dgp.atoms();
    const auto& probs = dgp.probabilities();
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const double value = f(atoms[i].y, atoms[i].d, atoms[i].x);
        if (!std::isfinite(value))
            throw EvaluationError("enumerate_expectation: non-finite value at atom " + std::to_string(i));
        sum.add(probs[i] * value);
    }
    return sum.value();
}

double enumerate_score_expectation(const DiscreteDgp& dgp, const MomentFunctional& functional,
                                   double theta, const DxFunction& gamma, const DxFunction& alpha) {
    const int j = functional.outcome_index();
    return enumerate_expectation(dgp, [&](const Eigen::VectorXd& y, int d, const Eigen::VectorXd& x) {
        return orthogonal_score(functional, Record{d, x}, y(j), theta, gamma, alpha);
    });
}

Dataset generate_dataset(const DiscreteDgp& dgp, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ArgumentError("generate_dataset: n must be at least 1");
    dgp.validate();
    const auto& atoms = dgp.atoms();
    const auto& probs = dgp.probabilities();
    std::vector<double> cumulative(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cumulative[i] = acc;
    }
    cumulative.back() = 1.0;

    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), dgp.n_outcomes());
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), dgp.n_covariates());
    std::vector<int> d(n);
    Rng rng = Rng::derive(seed, 0x64617461ULL); // "data"
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.next_double();
        std::size_t k = 0;
        while (k + 1 < cumulative.size() && u >= cumulative[k]) ++k;
        y.row(static_cast<Eigen::Index>(i)) = atoms[k].y.transpose();
        x.row(static_cast<Eigen::Index>(i)) = atoms[k].x.transpose();
        d[i] = atoms[k].d;
    }
    return Dataset(std::move(y), std::move(d), dgp.labels(), std::move(x));
}

} // namespace dml
