#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ibias/asymptotics.hpp"
#include "ibias/bounds.hpp"
#include "ibias/config.hpp"
#include "ibias/optpotential.hpp"
#include "ibias/simulator.hpp"

namespace ibias {

// Potential ids understood by the front end.
bool known_potential(const std::string& id);
const std::vector<std::string>& potential_ids();

struct TheoryResult {
    std::string potential;
    std::string method;  // kkt | appendix | closed-form
    double risk = 0.0;
    double excess_risk = 0.0;
    double alpha = 0.0;  // risk scale: risk = alpha^2
    std::string param_name;
    double param = 0.0;
    int iterations = 0;
    bool converged = false;
    double residual1 = 0.0;
    double residual2 = 0.0;

    std::optional<FixedPointSolution> kkt;
    std::optional<AppendixSolution> appendix;
    std::optional<ScalarPotential> scalar;
};

// method: "kkt", "appendix" or "" (kkt where available)
TheoryResult theory_for(const std::string& id, const ProblemConfig& cfg, const std::string& method = "");
InterpolatorSpec make_interpolator(const std::string& id, const ProblemConfig& cfg);
std::vector<double> law_samples(const TheoryResult& th, const ProblemConfig& cfg, std::size_t count,
                                std::uint64_t seed);

}  // namespace ibias
