#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ibias/config.hpp"
#include "ibias/densities.hpp"
#include "ibias/potentials.hpp"

namespace ibias {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct FixedPointSolution {
    double alpha = 0.0;
    double u = 0.0;
    double residual1 = 0.0;
    double residual2 = 0.0;
    int iterations = 0;
    bool converged = false;
    // every outer sign change found on the scan grid, as (alpha_lo, alpha_hi)
    std::vector<std::pair<double, double>> outer_brackets;
};

struct KktResiduals {
    double r1, r2;
};

// Moreau parameter and noise scale of the scalar channel at level lambda
inline double kkt_moreau_t(double alpha, double u, double delta, double lambda) {
    return alpha / (u * std::sqrt(delta) * lambda * lambda);
}
inline double kkt_noise_scale(double alpha, double delta, double lambda) {
    return alpha / (std::sqrt(delta) * lambda);
}

KktResiduals kkt_residuals(double alpha, double u, const ScalarPotential& pot, const ProblemConfig& cfg);
FixedPointSolution solve_kkt(const ScalarPotential& pot, const ProblemConfig& cfg);

double risk(const FixedPointSolution& sol);
double excess_risk(const FixedPointSolution& sol, double sigma);

struct TheoreticalWeightLaw {
    PriorSpec prior;
    SpectrumSpec spectrum;
    double delta = 0.3;
    double alpha = 1.0;
    double u = 1.0;
    ScalarPotential potential = ScalarPotential::power(2);
};

TheoreticalWeightLaw weight_law(const FixedPointSolution& sol, const ScalarPotential& pot, const ProblemConfig& cfg);
std::vector<double> sample_weight_law(const TheoreticalWeightLaw& law, std::size_t count, std::uint64_t seed);
// E[Z^2] and P(Z == 0) of the law by quadrature
double weight_law_second_moment(const TheoreticalWeightLaw& law, const SolverSettings& s = {});
double weight_law_zero_mass(const TheoreticalWeightLaw& law, const SolverSettings& s = {});

// ---- special-case systems (AO parameterization: risk = alpha^2 / delta) ----

enum class AppendixKind { l2, l1, l3, linf };

struct AppendixSolution {
    AppendixKind kind = AppendixKind::l2;
    double alpha = 0.0;
    double theta = 0.0;  // l1, linf
    double k = 0.0;      // l2, l3
    double risk = 0.0;
    int iterations = 0;
    bool converged = false;
    double orth_residual = 0.0;
    double feas_residual = 0.0;

    double excess_risk(double sigma) const { return risk - sigma * sigma; }
};

AppendixSolution solve_l2_appendix(const ProblemConfig& cfg);
AppendixSolution solve_l1_appendix(const ProblemConfig& cfg);
AppendixSolution solve_l3_appendix(const ProblemConfig& cfg);
AppendixSolution solve_linf_appendix(const ProblemConfig& cfg);

// Truncation-set integrals E[(lambda B)^a H^b s^c ; region] with x = alpha H + delta lambda B and
// s = sign(x) (l1) or lambda sign(x) (linf). l1: L = {|x| <= theta/lambda}; linf: L = {|x| < lambda theta}.
enum class Region { L, U };
double l1_family(Region r, int a, int b, int c, double alpha, double theta, const ProblemConfig& cfg);
double linf_family(Region r, int a, int b, int c, double alpha, double theta, const ProblemConfig& cfg);

// orthogonality E[H W] - alpha and feasibility delta (E[W^2] + sigma^2) - alpha^2 at (alpha, parameter)
std::pair<double, double> appendix_equations(AppendixKind kind, double alpha, double param, const ProblemConfig& cfg);

// weight of the special-case law for a coordinate with signal b, Gaussian h, level lambda
double appendix_weight(const AppendixSolution& sol, double b, double h, double lambda, double delta);
std::vector<double> sample_appendix_law(const AppendixSolution& sol, const ProblemConfig& cfg, std::size_t count,
                                        std::uint64_t seed);
// l1: P(estimate == 0); linf: P(|estimate| == theta/delta)
double appendix_atom_mass(const AppendixSolution& sol, const ProblemConfig& cfg);

}  // namespace ibias
