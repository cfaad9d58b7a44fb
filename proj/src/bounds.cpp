#include "ibias/bounds.hpp"

#include <cmath>
#include <sstream>

#include "ibias/asymptotics.hpp"
#include "ibias/densities.hpp"

namespace ibias {

double LowerBoundResult::alpha_star() const { return std::sqrt(alpha_star_sq); }

double h_of_alpha(double alpha, const ProblemConfig& cfg) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (!(cfg.sigma > 0.0)) throw UnsupportedCase("lower bound requires sigma > 0");
    const double d = cfg.delta, a2 = alpha * alpha;
    double I = weighted_fisher_info(cfg.prior, cfg.spectrum, alpha, d, cfg.settings.gh_nodes, cfg.settings.quad_abs_tol);
    return d * cfg.sigma * cfg.sigma / (a2 * (1.0 - d)) + d * (1.0 - d) / (a2 * I);
}

LowerBoundResult solve_lower_bound(const ProblemConfig& cfg) {
    if (!(cfg.sigma > 0.0)) throw UnsupportedCase("lower bound requires sigma > 0 (sigma = 0 is not supported)");
    const auto& st = cfg.settings;
    auto g = [&](double a) { return h_of_alpha(a, cfg) - 1.0; };

    double lo = 1e-4, glo = g(lo);
    double hi = lo, ghi = glo;
    bool found = false;
    while (hi < 1e4) {
        double nx = hi * std::sqrt(std::sqrt(10.0));
        double gn = g(nx);
        if (glo > 0.0 && gn <= 0.0) {
            lo = hi;
            hi = nx;
            ghi = gn;
            found = true;
            break;
        }
        hi = nx;
        glo = gn;
        ghi = gn;
    }
    if (!found) {
        std::ostringstream o;
        o << "lower bound bracket not found on [1e-4, 1e4]: h(1e-4) - 1 = " << g(1e-4) << ", h(1e4) - 1 = " << ghi;
        throw SolverError(o.str());
    }
    glo = g(lo);
    LowerBoundResult res;
    double tol = std::max(st.root_tol, 10.0 * st.quad_abs_tol);
    double mid = 0.5 * (lo + hi), gm = 0.0;
    int it = 0;
    for (; it < std::max(st.max_iter, 200); ++it) {
        mid = 0.5 * (lo + hi);
        gm = g(mid);
        if (gm == 0.0) break;
        if (gm > 0.0) lo = mid;
        else hi = mid;
        bool narrow = (hi - lo) <= tol * mid;
        if ((narrow && std::abs(gm) < st.root_tol) || (hi - lo) <= 1e-15 * mid) break;
    }
    res.alpha_star_sq = mid * mid;
    res.iterations = it + 1;
    res.h_residual = gm;
    res.bracket = {lo, hi};
    return res;
}

double isotropic_simplified_bound(const ProblemConfig& cfg) {
    if (cfg.spectrum.levels.size() != 1 || std::abs(cfg.spectrum.levels[0].lambda_sq - 1.0) > 1e-12)
        throw UnsupportedCase("simplified bound requires an isotropic spectrum");
    if (prior_has_atoms(cfg.prior)) throw UnsupportedCase("I(B) undefined: prior has atoms");
    double I = fisher_info(prior_mixture(cfg.prior), cfg.settings.gh_nodes, cfg.settings.quad_abs_tol);
    const double d = cfg.delta;
    return cfg.sigma * cfg.sigma / (1.0 - d) + (1.0 - d) / I;
}

}  // namespace ibias
