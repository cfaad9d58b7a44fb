#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibias/asymptotics.hpp"
#include "ibias/config.hpp"
#include "ibias/potentials.hpp"

namespace ibias {

// the smoothed prior density is not log-concave, so the table is not a convex potential
class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OptimalLevel {
    double lambda_sq = 1.0;
    double moreau_param = 0.0;
    std::vector<double> v_grid;
    std::vector<double> psi_values;
    std::vector<double> psi_derivative;
    bool convexity_ok = true;
    double max_violation = 0.0;  // most negative second difference (0 when none)
    double violation_v = 0.0;
};

struct OptimalPotentialTable {
    double alpha_star = 0.0;
    std::vector<OptimalLevel> levels;
    std::shared_ptr<const PotentialTable> table;

    bool convexity_ok() const;
    ScalarPotential potential() const { return ScalarPotential::tabulated(table, "opt"); }
    std::string convexity_report() const;
};

struct UStar {
    double value = 0.0;
};

double moreau_parameter(double alpha_star, double delta, double sigma, double lambda);
UStar u_star(double alpha_star, double delta, double sigma);

OptimalPotentialTable build_optimal_potential(const ProblemConfig& cfg, double alpha_star, int grid_points = 2001);
ScalarPotential gaussian_closed_form(const ProblemConfig& cfg);
double gaussian_closed_form_coef(double lambda, double delta, double sigma);

double verify_candidate_identity(const ProblemConfig& cfg, const OptimalPotentialTable& table);
double verify_candidate_identity(const ProblemConfig& cfg, double alpha_star);
KktResiduals verify_kkt_at_optimum(const ProblemConfig& cfg, const OptimalPotentialTable& table);
KktResiduals verify_kkt_at_optimum(const ProblemConfig& cfg, double alpha_star);

}  // namespace ibias
