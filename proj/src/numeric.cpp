#include "liouconv/numeric.hpp"

#include <boost/math/quadrature/gauss.hpp>

namespace liouconv {

GaussLegendre::GaussLegendre()
{
    using Rule = boost::math::quadrature::gauss<double, 10>;
    const auto& x = Rule::abscissa();
    const auto& w = Rule::weights();
    // Boost stores the non-negative half of a symmetric rule.
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (x[k] == 0.0) {
            nodes_.push_back(0.0);
            weights_.push_back(w[k]);
            continue;
        }
        nodes_.push_back(x[k]);
        weights_.push_back(w[k]);
        nodes_.push_back(-x[k]);
        weights_.push_back(w[k]);
    }
}

const GaussLegendre& gauss_legendre()
{
    static const GaussLegendre rule;
    return rule;
}

} // namespace liouconv
