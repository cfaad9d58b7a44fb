#include <cmath>

#include "ibias/asymptotics.hpp"
#include "nested.hpp"

namespace ibias {

namespace {

constexpr double kInnerTol = 1e-14;

inline double sgn(double x) { return (x > 0) - (x < 0); }

double l3_estimate(double x, double k, double lambda, double delta) {
    double dt = delta / (1.0 - delta);
    double A = k * lambda * lambda * dt;
    double Bq = 2.0 * k * delta * lambda * lambda * std::abs(x) / (1.0 - delta);
    if (Bq == 0.0) return 0.0;
    return sgn(x) * Bq / (std::sqrt(A * A + Bq) + A);
}

LevelSetup appendix_setup(AppendixKind kind, double alpha, double param, double delta, double lambda) {
    LevelSetup ls{alpha / (delta * lambda), {}, false};
    switch (kind) {
        case AppendixKind::l1: {
            double thr = param / (delta * lambda * lambda);
            ls.breaks = {-thr, thr};
            break;
        }
        case AppendixKind::linf:
            ls.breaks = {-param / delta, param / delta};
            break;
        case AppendixKind::l3:
            ls.breaks = {0.0};
            break;
        case AppendixKind::l2:
            ls.smooth = true;
            break;
    }
    return ls;
}

// {E[H W], E[W^2]} with W = lambda (estimate - b)
std::array<double, 2> hw_w2(AppendixKind kind, double alpha, double param, const ProblemConfig& cfg) {
    const double d = cfg.delta;
    auto eng = ExpectationEngine::from(cfg.settings);
    auto setup = [&](double lambda) { return appendix_setup(kind, alpha, param, d, lambda); };
    auto f = [&](double lambda, double x, const CondMoments& cm) -> std::array<double, 2> {
        switch (kind) {
            case AppendixKind::l1: {
                double theta = param;
                double thr = theta / (d * lambda * lambda);
                if (std::abs(x) <= thr) return {-lambda * cm.ebh, lambda * lambda * cm.eb2};
                double sg = sgn(x);
                double a = alpha / d, c = theta * sg / (d * lambda);
                return {a * cm.eh2 - c * cm.eh, a * a * cm.eh2 - 2.0 * a * c * cm.eh + c * c};
            }
            case AppendixKind::linf: {
                double cap = param / d;
                if (std::abs(x) < cap) {
                    double a = alpha / d;
                    return {a * cm.eh2, a * a * cm.eh2};
                }
                double c = cap * sgn(x);
                return {lambda * (c * cm.eh - cm.ebh), lambda * lambda * (c * c - 2.0 * c * cm.eb + cm.eb2)};
            }
            case AppendixKind::l3: {
                double bh = l3_estimate(x, param, lambda, d);
                return {lambda * (bh * cm.eh - cm.ebh), lambda * lambda * (bh * bh - 2.0 * bh * cm.eb + cm.eb2)};
            }
            case AppendixKind::l2: {
                double dt = d / (1.0 - d);
                double g = param * lambda * lambda * dt;
                double bh = x * g / (1.0 + g);
                return {lambda * (bh * cm.eh - cm.ebh), lambda * lambda * (bh * bh - 2.0 * bh * cm.eb + cm.eb2)};
            }
        }
        return {0.0, 0.0};
    };
    return expect_conditional<2>(cfg.prior, cfg.spectrum, eng, setup, f);
}

AppendixSolution nested_appendix(AppendixKind kind, const ProblemConfig& cfg, const char* what) {
    const auto& st = cfg.settings;
    const double d = cfg.delta, s2 = cfg.sigma * cfg.sigma;
    double p_state = 1.0;
    auto inner = [&](double alpha) {
        auto phi = [&](double p) { return hw_w2(kind, alpha, p, cfg)[0] / alpha - 1.0; };
        if (kind == AppendixKind::l1 || kind == AppendixKind::linf) p_state = std::max(p_state, 1e-12);
        p_state = detail::inner_root(phi, p_state, 1e-12, 1e12, kInnerTol, st.max_iter, what);
        return p_state;
    };
    auto outer = [&](double alpha) {
        double p = inner(alpha);
        return d * (hw_w2(kind, alpha, p, cfg)[1] + s2) / (alpha * alpha) - 1.0;
    };
    double sd = std::sqrt(d);
    double lo = sd * std::max(cfg.sigma, st.alpha_lo) * (1.0 + 1e-9);
    double null_risk = s2 / (1.0 - d) + spectrum_moment(cfg.spectrum, 1.0) * prior_second_moment(cfg.prior);
    double hi0 = std::max(3.0 * sd * std::sqrt(null_risk), 4.0 * lo);
    auto nr = detail::nested_root(outer, lo, std::min(hi0, st.alpha_hi), st.alpha_hi, 24, kInnerTol, st.max_iter, what,
                                  cfg.sigma == 0.0);

    AppendixSolution sol;
    sol.kind = kind;
    if (nr.alpha == 0.0) {
        double p0 = inner(lo);
        if (kind == AppendixKind::l3) sol.k = p0;
        else sol.theta = p0;
        sol.converged = true;
        return sol;
    }
    sol.alpha = nr.alpha;
    double p = inner(nr.alpha);
    if (kind == AppendixKind::l3) sol.k = p;
    else sol.theta = p;
    auto [orth, feas] = appendix_equations(kind, sol.alpha, p, cfg);
    sol.orth_residual = orth;
    sol.feas_residual = feas;
    sol.risk = sol.alpha * sol.alpha / d;
    sol.iterations = nr.iterations;
    sol.converged = std::abs(orth) < st.root_tol && std::abs(feas) < st.root_tol && nr.iterations < st.max_iter;
    return sol;
}

}  // namespace

std::pair<double, double> appendix_equations(AppendixKind kind, double alpha, double param, const ProblemConfig& cfg) {
    auto m = hw_w2(kind, alpha, param, cfg);
    return {m[0] - alpha, cfg.delta * (m[1] + cfg.sigma * cfg.sigma) - alpha * alpha};
}

AppendixSolution solve_l2_appendix(const ProblemConfig& cfg) {
    const double d = cfg.delta, dt = d / (1.0 - d);
    const auto& lv = cfg.spectrum.levels;
    auto keq = [&](double k) {
        double acc = 0.0;
        for (const auto& l : lv) acc += l.weight * (k * l.lambda_sq - 1.0) / (1.0 + k * dt * l.lambda_sq);
        return acc;
    };
    double lmin = lv.front().lambda_sq, lmax = lmin;
    for (const auto& l : lv) {
        if (l.weight == 0.0) continue;
        lmin = std::min(lmin, l.lambda_sq);
        lmax = std::max(lmax, l.lambda_sq);
    }
    AppendixSolution sol;
    sol.kind = AppendixKind::l2;
    double klo = 1.0 / lmax, khi = 1.0 / lmin;
    if (klo == khi) {
        sol.k = klo;
    } else {
        auto rr = solve_bracketed(keq, klo, khi, keq(klo), keq(khi), kInnerTol, cfg.settings.max_iter);
        sol.k = rr.x;
        sol.iterations = rr.iterations;
    }
    double A = 0.0, C = 0.0;
    for (const auto& l : lv) {
        double den = sol.k * dt * l.lambda_sq + 1.0;
        double num = sol.k * l.lambda_sq - 1.0;
        A += l.weight * num * num / (den * den);
        C += l.weight * l.lambda_sq / (den * den);
    }
    double denom = 1.0 - dt * A;
    if (!(denom > 0.0)) throw SolverError("l2 special-case system has no positive solution (1 - dt*A <= 0)");
    double a2 = dt * (prior_second_moment(cfg.prior) * C + cfg.sigma * cfg.sigma) / denom;
    sol.alpha = std::sqrt(a2);
    sol.risk = a2 / d;
    sol.orth_residual = keq(sol.k);
    sol.feas_residual = 0.0;
    sol.converged = std::abs(sol.orth_residual) < cfg.settings.root_tol;
    return sol;
}

AppendixSolution solve_l1_appendix(const ProblemConfig& cfg) { return nested_appendix(AppendixKind::l1, cfg, "theta (l1)"); }
AppendixSolution solve_l3_appendix(const ProblemConfig& cfg) { return nested_appendix(AppendixKind::l3, cfg, "k (l3)"); }
AppendixSolution solve_linf_appendix(const ProblemConfig& cfg) {
    return nested_appendix(AppendixKind::linf, cfg, "theta (linf)");
}

namespace {
double family(bool linf, Region r, int a, int b, int c, double alpha, double theta, const ProblemConfig& cfg) {
    if (a < 0 || b < 0 || c < 0 || a + b > 2) throw std::invalid_argument("family needs a + b <= 2");
    const double d = cfg.delta;
    auto eng = ExpectationEngine::from(cfg.settings);
    auto setup = [&](double lambda) {
        return appendix_setup(linf ? AppendixKind::linf : AppendixKind::l1, alpha, theta, d, lambda);
    };
    auto f = [&](double lambda, double x, const CondMoments& cm) {
        bool inL = linf ? std::abs(x) < theta / d : std::abs(x) <= theta / (d * lambda * lambda);
        if (inL != (r == Region::L)) return std::array<double, 1>{0.0};
        double mono;
        if (a == 0) mono = b == 0 ? 1.0 : b == 1 ? cm.eh : cm.eh2;
        else if (a == 1) mono = lambda * (b == 0 ? cm.eb : cm.ebh);
        else mono = lambda * lambda * cm.eb2;
        double s = linf ? lambda * sgn(x) : sgn(x);
        return std::array<double, 1>{mono * std::pow(s, c)};
    };
    return expect_conditional<1>(cfg.prior, cfg.spectrum, eng, setup, f)[0];
}
}  // namespace

double l1_family(Region r, int a, int b, int c, double alpha, double theta, const ProblemConfig& cfg) {
    return family(false, r, a, b, c, alpha, theta, cfg);
}

double linf_family(Region r, int a, int b, int c, double alpha, double theta, const ProblemConfig& cfg) {
    return family(true, r, a, b, c, alpha, theta, cfg);
}

double appendix_weight(const AppendixSolution& sol, double b, double h, double lambda, double delta) {
    if (sol.alpha == 0.0) return b;
    double x = b + sol.alpha * h / (delta * lambda);
    switch (sol.kind) {
        case AppendixKind::l1:
            return soft_threshold(x, sol.theta / (delta * lambda * lambda));
        case AppendixKind::linf: {
            double cap = sol.theta / delta;
            return std::max(-cap, std::min(cap, x));
        }
        case AppendixKind::l3:
            return l3_estimate(x, sol.k, lambda, delta);
        case AppendixKind::l2: {
            double g = sol.k * lambda * lambda * delta / (1.0 - delta);
            return x * g / (1.0 + g);
        }
    }
    return 0.0;
}

std::vector<double> sample_appendix_law(const AppendixSolution& sol, const ProblemConfig& cfg, std::size_t count,
                                        std::uint64_t seed) {
    std::vector<double> out;
    out.reserve(count);
    CounterRng rng(seed, 0xa99e4d1ull);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t li = sample_level(cfg.spectrum, rng);
        double lambda = std::sqrt(cfg.spectrum.levels[li].lambda_sq);
        double b = sample_prior(cfg.prior, rng);
        out.push_back(appendix_weight(sol, b, rng.normal(), lambda, cfg.delta));
    }
    return out;
}

double appendix_atom_mass(const AppendixSolution& sol, const ProblemConfig& cfg) {
    if (sol.kind != AppendixKind::l1 && sol.kind != AppendixKind::linf) return 0.0;
    if (sol.alpha == 0.0) {
        if (sol.kind == AppendixKind::l1) return prior_atom_mass_at(cfg.prior, 0.0);
        // recovered signal: the cap is max |B|, reached only by atoms
        if (!cfg.prior.gaussians.empty()) return 0.0;
        double top = 0.0, mass = 0.0;
        for (const auto& a : cfg.prior.atoms) top = std::max(top, std::abs(a.loc));
        for (const auto& a : cfg.prior.atoms) mass += std::abs(a.loc) == top ? a.weight : 0.0;
        return mass;
    }
    const double d = cfg.delta;
    double total = 0.0;
    for (const auto& l : cfg.spectrum.levels) {
        double lambda = std::sqrt(l.lambda_sq);
        double s = sol.alpha / (d * lambda);
        double thr = sol.kind == AppendixKind::l1 ? sol.theta / (d * l.lambda_sq) : sol.theta / d;
        auto inside = [&](double m, double sd) {
            return std_normal_cdf((thr - m) / sd) - std_normal_cdf((-thr - m) / sd);
        };
        double acc = 0.0;
        for (const auto& a : cfg.prior.atoms) acc += a.weight * inside(a.loc, s);
        for (const auto& g : cfg.prior.gaussians) acc += g.weight * inside(g.mean, std::sqrt(g.var + s * s));
        total += l.weight * (sol.kind == AppendixKind::l1 ? acc : 1.0 - acc);
    }
    return total;
}

}  // namespace ibias
