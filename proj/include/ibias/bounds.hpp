#pragma once

#include <stdexcept>
#include <utility>

#include "ibias/config.hpp"

namespace ibias {

class UnsupportedCase : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct LowerBoundResult {
    double alpha_star_sq = 0.0;
    int iterations = 0;
    double h_residual = 0.0;
    std::pair<double, double> bracket{0.0, 0.0};

    double alpha_star() const;
    double excess(double sigma) const { return alpha_star_sq - sigma * sigma; }
};

double h_of_alpha(double alpha, const ProblemConfig& cfg);
LowerBoundResult solve_lower_bound(const ProblemConfig& cfg);
// sigma^2/(1-delta) + (1-delta)/I(B); isotropic spectrum and atom-free prior only
double isotropic_simplified_bound(const ProblemConfig& cfg);

}  // namespace ibias
