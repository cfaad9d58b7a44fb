#include "ibias/asymptotics.hpp"

#include <cmath>

#include "nested.hpp"

namespace ibias {

namespace {

constexpr double kInnerTol = 1e-14;

struct KktMoments {
    double e1;  // E[(H/L) M']
    double e2;  // E[(M'/L)^2]
};

KktMoments kkt_moments(double alpha, double u, const ScalarPotential& pot, const ProblemConfig& cfg,
                       const ExpectationEngine& eng) {
    const double delta = cfg.delta;
    auto setup = [&](double lambda) {
        double t = kkt_moreau_t(alpha, u, delta, lambda);
        return LevelSetup{kkt_noise_scale(alpha, delta, lambda), pot.breakpoints(t, lambda), pot.smooth()};
    };
    auto f = [&](double lambda, double x, const CondMoments& cm) {
        double t = kkt_moreau_t(alpha, u, delta, lambda);
        double m = (x - prox_point(pot, x, t, lambda)) / t;
        return std::array<double, 2>{cm.eh * m / lambda, m * m / (lambda * lambda)};
    };
    auto r = expect_conditional<2>(cfg.prior, cfg.spectrum, eng, setup, f);
    return {r[0], r[1]};
}

double alpha_scan_hi(const ProblemConfig& cfg) {
    double null_risk = cfg.sigma * cfg.sigma / (1.0 - cfg.delta) +
                       spectrum_moment(cfg.spectrum, 1.0) * prior_second_moment(cfg.prior);
    return 3.0 * std::sqrt(null_risk);
}

}  // namespace

KktResiduals kkt_residuals(double alpha, double u, const ScalarPotential& pot, const ProblemConfig& cfg) {
    if (!(alpha > 0.0) || !(u > 0.0)) throw std::invalid_argument("kkt_residuals needs alpha > 0 and u > 0");
    auto m = kkt_moments(alpha, u, pot, cfg, ExpectationEngine::from(cfg.settings));
    double d = cfg.delta, s2 = cfg.sigma * cfg.sigma;
    return {m.e1 - u * (1.0 - d), m.e2 - u * u * (1.0 - d) + d * s2 * u * u / (alpha * alpha)};
}

FixedPointSolution solve_kkt(const ScalarPotential& pot, const ProblemConfig& cfg) {
    const auto& st = cfg.settings;
    const auto eng = ExpectationEngine::from(st);
    const double d = cfg.delta, s2 = cfg.sigma * cfg.sigma;
    double u_state = 1.0;

    // r1 / u, decreasing in u from delta to -(1 - delta)
    auto inner = [&](double alpha) {
        auto phi = [&](double u) { return kkt_moments(alpha, u, pot, cfg, eng).e1 / u - (1.0 - d); };
        u_state = detail::inner_root(phi, u_state, 1e-8, 1e8, kInnerTol, st.max_iter, "u");
        return u_state;
    };
    // r2 / u^2 at u(alpha)
    auto outer = [&](double alpha) {
        double u = inner(alpha);
        auto m = kkt_moments(alpha, u, pot, cfg, eng);
        return m.e2 / (u * u) - (1.0 - d) + d * s2 / (alpha * alpha);
    };

    double lo = std::max(cfg.sigma, st.alpha_lo) * (1.0 + 1e-9);
    double hi0 = std::max(alpha_scan_hi(cfg), 4.0 * lo);
    auto nr = detail::nested_root(outer, lo, std::min(hi0, st.alpha_hi), st.alpha_hi, 24, kInnerTol, st.max_iter,
                                  "alpha", cfg.sigma == 0.0);

    FixedPointSolution sol;
    if (nr.alpha == 0.0) {
        // exact recovery: u is only defined in the limit, report the value at the grid floor
        sol.u = inner(lo);
        sol.converged = true;
        return sol;
    }
    sol.alpha = nr.alpha;
    sol.u = inner(nr.alpha);
    auto r = kkt_residuals(sol.alpha, sol.u, pot, cfg);
    sol.residual1 = r.r1;
    sol.residual2 = r.r2;
    sol.iterations = nr.iterations;
    sol.outer_brackets = nr.brackets;
    sol.converged = std::abs(r.r1) < st.root_tol && std::abs(r.r2) < st.root_tol && sol.iterations < st.max_iter;
    return sol;
}

double risk(const FixedPointSolution& sol) {
    if (!sol.converged) throw SolverError("risk of an unconverged fixed point");
    return sol.alpha * sol.alpha;
}

double excess_risk(const FixedPointSolution& sol, double sigma) { return risk(sol) - sigma * sigma; }

TheoreticalWeightLaw weight_law(const FixedPointSolution& sol, const ScalarPotential& pot, const ProblemConfig& cfg) {
    return TheoreticalWeightLaw{cfg.prior, cfg.spectrum, cfg.delta, sol.alpha, sol.u, pot};
}

std::vector<double> sample_weight_law(const TheoreticalWeightLaw& law, std::size_t count, std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(count);
    CounterRng rng(seed, 0x5eed1a3ull);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t li = sample_level(law.spectrum, rng);
        double lambda = std::sqrt(law.spectrum.levels[li].lambda_sq);
        double b = sample_prior(law.prior, rng);
        double h = rng.normal();
        if (law.alpha == 0.0) {
            out.push_back(b);
            continue;
        }
        double x = b + kkt_noise_scale(law.alpha, law.delta, lambda) * h;
        out.push_back(prox_point(law.potential, x, kkt_moreau_t(law.alpha, law.u, law.delta, lambda), lambda));
    }
    return out;
}

namespace {
template <class F>
double law_expect(const TheoreticalWeightLaw& law, const SolverSettings& s, F g) {
    auto eng = ExpectationEngine::from(s);
    auto setup = [&](double lambda) {
        double t = kkt_moreau_t(law.alpha, law.u, law.delta, lambda);
        return LevelSetup{kkt_noise_scale(law.alpha, law.delta, lambda), law.potential.breakpoints(t, lambda),
                          law.potential.smooth()};
    };
    auto f = [&](double lambda, double x, const CondMoments&) {
        double t = kkt_moreau_t(law.alpha, law.u, law.delta, lambda);
        return std::array<double, 1>{g(prox_point(law.potential, x, t, lambda))};
    };
    return expect_conditional<1>(law.prior, law.spectrum, eng, setup, f)[0];
}
}  // namespace

double weight_law_second_moment(const TheoreticalWeightLaw& law, const SolverSettings& s) {
    if (law.alpha == 0.0) return prior_second_moment(law.prior);
    return law_expect(law, s, [](double z) { return z * z; });
}

double weight_law_zero_mass(const TheoreticalWeightLaw& law, const SolverSettings& s) {
    if (law.alpha == 0.0) return prior_atom_mass_at(law.prior, 0.0);
    return law_expect(law, s, [](double z) { return z == 0.0 ? 1.0 : 0.0; });
}

}  // namespace ibias
