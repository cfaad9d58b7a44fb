#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ibias/config.hpp"
#include "ibias/potentials.hpp"

namespace ibias {

struct Dataset {
    int n = 0;
    int m = 0;
    Eigen::MatrixXd X;  // m x n
    Eigen::VectorXd y;
    Eigen::VectorXd z;
    Eigen::VectorXd beta_star;
    Eigen::VectorXd sigma_diag;  // lambda_i^2
};

struct InterpolationResult {
    Eigen::VectorXd beta_hat;   // exactly feasible
    Eigen::VectorXd beta_prox;  // ADMM prox iterate (exact zeros / saturation); empty for closed forms
    double constraint_residual = 0.0;  // ||X b - y|| / ||y||
    int solver_iterations = 0;
    double objective = 0.0;
    bool converged = true;
    bool certified = false;  // stopped on a verified optimal vertex

    const Eigen::VectorXd& structural() const { return beta_prox.size() ? beta_prox : beta_hat; }
};

struct EmpiricalStats {
    double excess_risk = 0.0;
    double ks_distance = 0.0;
    std::vector<double> weight_samples;
};

Dataset generate_dataset(const ProblemConfig& cfg, int n, std::uint64_t seed);

InterpolationResult solve_quadratic_interpolator(const Dataset& ds, const std::function<double(double)>& a_of_lambda);
InterpolationResult solve_admm_interpolator(const Dataset& ds, const ScalarPotential& pot, const SolverSettings& s);
InterpolationResult solve_linf_interpolator(const Dataset& ds, const SolverSettings& s);

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius = 1.0);
Eigen::VectorXd prox_linf(const Eigen::VectorXd& x, double t);

double empirical_excess_risk(const InterpolationResult& res, const Dataset& ds);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
double compare_weight_distribution(const InterpolationResult& res, const std::vector<double>& law_samples);
double exact_zero_fraction(const InterpolationResult& res);

// the interpolator selected by a potential id: l1, l2, l3, linf, gauss-opt, opt
struct InterpolatorSpec {
    std::string id;
    std::optional<ScalarPotential> potential;  // absent for linf
    std::function<double(double)> quad_coef;   // set for closed-form quadratic potentials
};

InterpolationResult solve_interpolator(const Dataset& ds, const InterpolatorSpec& spec, const SolverSettings& s);

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double excess_risk = 0.0;
    std::optional<double> ks;
    double zero_fraction = 0.0;
    int iterations = 0;
    double constraint_residual = 0.0;
};

struct ReplicateSummary {
    std::vector<SeedResult> per_seed;
    double mean = 0.0;
    double std = 0.0;
    std::optional<double> mean_ks;
    int failures = 0;
};

ReplicateSummary run_replicates(const ProblemConfig& cfg, int n, const InterpolatorSpec& spec,
                                const std::vector<std::uint64_t>& seeds, const std::vector<double>* law_samples = nullptr,
                                int jobs = 1);

}  // namespace ibias
