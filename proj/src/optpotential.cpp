#include "ibias/optpotential.hpp"

#include <cmath>
#include <sstream>

#include "ibias/densities.hpp"

namespace ibias {

double moreau_parameter(double alpha_star, double delta, double sigma, double lambda) {
    double num = alpha_star * alpha_star * (1.0 - delta) - delta * sigma * sigma;
    if (!(num > 0.0)) throw std::invalid_argument("moreau_parameter: alpha_*^2 (1-delta) - delta sigma^2 must be positive");
    return num / (delta * (1.0 - delta) * lambda * lambda);
}

UStar u_star(double alpha_star, double delta, double sigma) {
    double num = alpha_star * alpha_star * (1.0 - delta) - delta * sigma * sigma;
    if (!(num > 0.0)) throw std::invalid_argument("u_star: nonpositive denominator");
    return {alpha_star * std::sqrt(delta) * (1.0 - delta) / num};
}

bool OptimalPotentialTable::convexity_ok() const {
    for (const auto& l : levels)
        if (!l.convexity_ok) return false;
    return true;
}

std::string OptimalPotentialTable::convexity_report() const {
    std::ostringstream o;
    for (const auto& l : levels) {
        if (l.convexity_ok) continue;
        o << "lambda_sq=" << l.lambda_sq << ": second difference " << l.max_violation << " at v=" << l.violation_v
          << " (smoothed density not log-concave); ";
    }
    return o.str();
}

namespace {

// y with y + c xi(y) = v
double stationary_point(const GaussianMixture1D& mix, double c, double v, double guess) {
    auto G = [&](double y, double& dG) {
        double xi, dxi;
        mix.score_and_derivative(y, xi, dxi);
        dG = 1.0 + c * dxi;
        return y + c * xi - v;
    };
    double d;
    double pad = 10.0 * c * (std::abs(mix.score(v)) + 1.0);
    double lo = v - pad, hi = v + pad;
    double glo = G(lo, d), ghi = G(hi, d);
    for (int k = 0; glo > 0.0 && k < 60; ++k) {
        lo -= pad;
        pad *= 2.0;
        glo = G(lo, d);
    }
    for (int k = 0; ghi < 0.0 && k < 60; ++k) {
        hi += pad;
        pad *= 2.0;
        ghi = G(hi, d);
    }
    if (glo > 0.0 || ghi < 0.0) throw std::runtime_error("stationarity root bracket failed");
    double y = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double gy = G(y, d);
        if (gy == 0.0) return y;
        if (gy < 0.0) lo = y;
        else hi = y;
        double ny = y - gy / d;
        if (!(d > 0.0) || !(ny > lo && ny < hi)) ny = 0.5 * (lo + hi);
        if (std::abs(ny - y) <= 1e-15 * std::max(1.0, std::abs(y))) return ny;
        y = ny;
    }
    return y;
}

}  // namespace

OptimalPotentialTable build_optimal_potential(const ProblemConfig& cfg, double alpha_star, int grid_points) {
    if (grid_points < 11 || grid_points % 2 == 0) throw std::invalid_argument("grid_points must be odd and >= 11");
    OptimalPotentialTable out;
    out.alpha_star = alpha_star;
    auto tab = std::make_shared<PotentialTable>();
    const double d = cfg.delta;
    for (const auto& lev : cfg.spectrum.levels) {
        double lambda = std::sqrt(lev.lambda_sq);
        OptimalLevel L;
        L.lambda_sq = lev.lambda_sq;
        L.moreau_param = moreau_parameter(alpha_star, d, cfg.sigma, lambda);
        const double c = L.moreau_param;
        auto mix = convolve(cfg.prior, alpha_star * alpha_star / (d * lev.lambda_sq));
        double center = mix.mean();
        double half = 8.0 * std::sqrt(mix.variance());
        for (const auto& k : mix.components()) half = std::max(half, std::abs(k.mean - center) + 8.0 * std::sqrt(k.var));
        const int n = grid_points;
        double h = 2.0 * half / (n - 1);
        double v0 = center - half;
        L.v_grid.resize(n);
        L.psi_values.resize(n);
        L.psi_derivative.resize(n);
        int mid = n / 2;
        // continuation from the center outward
        std::vector<double> ys(n);
        for (int dir : {1, -1}) {
            double y = center;
            for (int i = mid; i >= 0 && i < n; i += dir) {
                double v = (i == mid) ? center : v0 + h * i;
                y = stationary_point(mix, c, v, y);
                ys[i] = y;
            }
        }
        for (int i = 0; i < n; ++i) {
            double v = (i == mid) ? center : v0 + h * i;
            double yy = ys[i];
            L.v_grid[i] = v;
            L.psi_values[i] = -mix.logpdf(yy) - (v - yy) * (v - yy) / (2.0 * c);
            L.psi_derivative[i] = (yy - v) / c;
        }
        double anchor = L.psi_values[mid];
        for (double& p : L.psi_values) p -= anchor;
        L.max_violation = 0.0;
        for (int i = 1; i + 1 < n; ++i) {
            double sd = L.psi_values[i + 1] - 2.0 * L.psi_values[i] + L.psi_values[i - 1];
            if (sd < L.max_violation) {
                L.max_violation = sd;
                L.violation_v = L.v_grid[i];
            }
        }
        L.convexity_ok = L.max_violation >= -1e-8;
        TableLevel tl = make_table_level(lev.lambda_sq, v0, h, L.psi_derivative);
        tl.guard = 50.0;
        tab->levels.push_back(std::move(tl));
        out.levels.push_back(std::move(L));
    }
    out.table = tab;
    return out;
}

double gaussian_closed_form_coef(double lambda, double delta, double sigma) {
    double l2 = lambda * lambda;
    return l2 / (l2 + sigma * sigma / (1.0 - delta));
}

ScalarPotential gaussian_closed_form(const ProblemConfig& cfg) {
    const auto& p = cfg.prior;
    if (!p.atoms.empty() || p.gaussians.size() != 1 || std::abs(p.gaussians[0].mean) > 1e-12 ||
        std::abs(p.gaussians[0].var - 1.0) > 1e-12)
        throw std::invalid_argument("gaussian_closed_form needs a N(0,1) prior");
    double d = cfg.delta, s = cfg.sigma;
    return ScalarPotential::weighted_quadratic([d, s](double lambda) { return gaussian_closed_form_coef(lambda, d, s); },
                                               "gauss-opt");
}

double verify_candidate_identity(const ProblemConfig& cfg, const OptimalPotentialTable& table) {
    auto pot = table.potential();
    const double d = cfg.delta;
    double worst = 0.0;
    for (const auto& L : table.levels) {
        double lambda = std::sqrt(L.lambda_sq);
        auto mix = convolve(cfg.prior, table.alpha_star * table.alpha_star / (d * L.lambda_sq));
        for (double v : L.v_grid) {
            double c = L.moreau_param;
            double m1 = (v - prox_point(pot, v, c, lambda)) / c;
            worst = std::max(worst, std::abs(m1 + mix.score(v)));
        }
    }
    return worst;
}

double verify_candidate_identity(const ProblemConfig& cfg, double alpha_star) {
    return verify_candidate_identity(cfg, build_optimal_potential(cfg, alpha_star));
}

KktResiduals verify_kkt_at_optimum(const ProblemConfig& cfg, const OptimalPotentialTable& table) {
    double us = u_star(table.alpha_star, cfg.delta, cfg.sigma).value;
    return kkt_residuals(table.alpha_star, us, table.potential(), cfg);
}

KktResiduals verify_kkt_at_optimum(const ProblemConfig& cfg, double alpha_star) {
    return verify_kkt_at_optimum(cfg, build_optimal_potential(cfg, alpha_star));
}

}  // namespace ibias
