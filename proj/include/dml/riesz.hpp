#pragma once

#include <memory>
#include <string>

#include "dml/data.hpp"
#include "dml/dictionary.hpp"
#include "dml/functional.hpp"
#include "dml/propensity.hpp"

namespace dml {

enum class RieszKind { plugin, automatic };

/// Estimated Riesz representer; predict is clipped to [-clip_bound, clip_bound]
/// everywhere, which enforces the boundedness assumption mechanically.
struct RieszFit {
    RieszKind kind = RieszKind::plugin;
    double clip_bound = 100.0;
    DxFunction predict;
    std::string description;

    DxFunction as_function() const { return predict; }
};

/// ATE-contrast representer 1{d=treated}/pi_treated - 1{d=control}/pi_control.
RieszFit riesz_plugin(const PropensityFit& propensity, int treated, int control,
                      double clip_bound);

/// Closed-form plug-in representer for any built-in family.
RieszFit riesz_plugin_for(const MomentFunctional& functional, const PropensityFit& propensity,
                          double clip_bound);

/// Same construction from arbitrary propensity evaluators (oracle runs).
RieszFit riesz_plugin_for(const MomentFunctional& functional,
                          const std::function<double(int, const Eigen::VectorXd&)>& propensity,
                          double clip_bound);

/// Dictionary least-squares representer: b = (G + ridge I)^{-1} M with
/// G = E_n[basis basis'], M_k = E_n[m(W, basis_k)]. ridge < 0 selects the
/// scale-free default.
RieszFit riesz_automatic(const Dataset& data, const MomentFunctional& functional,
                         std::shared_ptr<const Dictionary> dictionary, double ridge,
                         double clip_bound);

} // namespace dml
