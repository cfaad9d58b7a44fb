#include "ibias/pipeline.hpp"

#include <algorithm>
#include <memory>

namespace ibias {

const std::vector<std::string>& potential_ids() {
    static const std::vector<std::string> ids{"l1", "l2", "l3", "linf", "gauss-opt", "opt"};
    return ids;
}

bool known_potential(const std::string& id) {
    const auto& ids = potential_ids();
    return std::find(ids.begin(), ids.end(), id) != ids.end();
}

namespace {

ScalarPotential optimal_potential(const ProblemConfig& cfg) {
    auto lb = solve_lower_bound(cfg);
    auto table = build_optimal_potential(cfg, lb.alpha_star());
    if (!table.convexity_ok()) throw AdmissibilityError("optimal potential is not convex: " + table.convexity_report());
    return table.potential();
}

ScalarPotential scalar_for(const std::string& id, const ProblemConfig& cfg) {
    if (id == "l1") return ScalarPotential::power(1);
    if (id == "l2") return ScalarPotential::power(2);
    if (id == "l3") return ScalarPotential::power(3);
    if (id == "gauss-opt") return gaussian_closed_form(cfg);
    if (id == "opt") return optimal_potential(cfg);
    throw std::invalid_argument("potential '" + id + "' is not separable");
}

}  // namespace

TheoryResult theory_for(const std::string& id, const ProblemConfig& cfg, const std::string& method) {
    if (!known_potential(id)) throw std::invalid_argument("unknown potential '" + id + "'");
    if (!method.empty() && method != "kkt" && method != "appendix")
        throw std::invalid_argument("unknown method '" + method + "'");
    TheoryResult th;
    th.potential = id;
    const double s2 = cfg.sigma * cfg.sigma;
    bool use_appendix = id == "linf" || method == "appendix";
    if (use_appendix) {
        AppendixSolution sol;
        if (id == "l1") sol = solve_l1_appendix(cfg);
        else if (id == "l2") sol = solve_l2_appendix(cfg);
        else if (id == "l3") sol = solve_l3_appendix(cfg);
        else if (id == "linf") sol = solve_linf_appendix(cfg);
        else throw std::invalid_argument("potential '" + id + "' has no special-case system");
        th.method = "appendix";
        th.risk = sol.risk;
        th.excess_risk = sol.risk - s2;
        th.alpha = std::sqrt(sol.risk);
        th.param_name = (id == "l2" || id == "l3") ? "k" : "theta";
        th.param = th.param_name == "k" ? sol.k : sol.theta;
        th.iterations = sol.iterations;
        th.converged = sol.converged;
        th.residual1 = sol.orth_residual;
        th.residual2 = sol.feas_residual;
        th.appendix = sol;
        return th;
    }
    ScalarPotential pot = scalar_for(id, cfg);
    FixedPointSolution sol = solve_kkt(pot, cfg);
    th.method = "kkt";
    th.alpha = sol.alpha;
    th.risk = sol.alpha * sol.alpha;
    th.excess_risk = th.risk - s2;
    th.param_name = "u";
    th.param = sol.u;
    th.iterations = sol.iterations;
    th.converged = sol.converged;
    th.residual1 = sol.residual1;
    th.residual2 = sol.residual2;
    th.kkt = sol;
    th.scalar = pot;
    return th;
}

InterpolatorSpec make_interpolator(const std::string& id, const ProblemConfig& cfg) {
    if (!known_potential(id)) throw std::invalid_argument("unknown potential '" + id + "'");
    InterpolatorSpec spec;
    spec.id = id;
    if (id == "linf") return spec;
    if (id == "l2") {
        spec.potential = ScalarPotential::power(2);
        spec.quad_coef = [](double) { return 2.0; };
        return spec;
    }
    if (id == "gauss-opt") {
        double d = cfg.delta, s = cfg.sigma;
        spec.potential = gaussian_closed_form(cfg);
        spec.quad_coef = [d, s](double lambda) { return gaussian_closed_form_coef(lambda, d, s); };
        return spec;
    }
    spec.potential = scalar_for(id, cfg);
    return spec;
}

std::vector<double> law_samples(const TheoryResult& th, const ProblemConfig& cfg, std::size_t count,
                                std::uint64_t seed) {
    if (th.kkt && th.scalar) return sample_weight_law(weight_law(*th.kkt, *th.scalar, cfg), count, seed);
    if (th.appendix) return sample_appendix_law(*th.appendix, cfg, count, seed);
    throw std::invalid_argument("theory result carries no weight law");
}

}  // namespace ibias
