#include <doctest.h>

#include <cmath>
#include <vector>

#include "ibias/bounds.hpp"
#include "ibias/densities.hpp"
#include "ibias/optpotential.hpp"
#include "ibias/pipeline.hpp"

using namespace ibias;

namespace {

ProblemConfig make(const PriorSpec& p, double delta, double sigma, SpectrumSpec s = identity_spectrum()) {
    ProblemConfig c;
    c.prior = p;
    c.delta = delta;
    c.sigma = sigma;
    c.spectrum = s;
    return c;
}

double alpha_star(const ProblemConfig& c) { return solve_lower_bound(c).alpha_star(); }

// two bumps closer than their width: log-concave
PriorSpec log_concave_pair() {
    PriorSpec p;
    p.gaussians = {{-0.5, 0.75, 0.5}, {0.5, 0.75, 0.5}};
    return p;
}

// discrete scale mixture: heavy-ish tails, log p'' > 0 near |v| = 1
PriorSpec scale_mixture() {
    PriorSpec p;
    p.gaussians = {{0.0, 0.25, 0.3}, {0.0, 1.0, 0.4}, {0.0, 2.5, 0.3}};
    return normalize_prior(p);
}

}  // namespace

TEST_CASE("moreau parameter") {
    double a2 = 0.09 / 0.7 + 0.7;
    CHECK(std::abs(a2 - 0.828571428571) < 1e-11);
    double c = moreau_parameter(std::sqrt(a2), 0.3, 0.3, 1.0);
    CHECK(std::abs(c - 2.633333333333) < 1e-11);
    CHECK(moreau_parameter(std::sqrt(a2), 0.3, 0.3, 2.0) == doctest::Approx(c / 4).epsilon(1e-14));
    CHECK(moreau_parameter(0.9, 0.4, 0.0, 1.5) == doctest::Approx(0.81 / (0.4 * 2.25)).epsilon(1e-14));
    CHECK_THROWS(moreau_parameter(0.1, 0.3, 0.3, 1.0));
}

TEST_CASE("u star") {
    double a = 0.9, d = 0.3, s = 0.3;
    CHECK(u_star(a, d, s).value == doctest::Approx(a * std::sqrt(d) * 0.7 / (0.81 * 0.7 - 0.027)).epsilon(1e-14));
    CHECK_THROWS(u_star(0.1, d, s));
}

TEST_CASE("gaussian closed form coefficients") {
    CHECK(std::abs(gaussian_closed_form_coef(2.0, 0.3, 0.7) - 4.0 / 4.7) < 1e-12);
    CHECK(std::abs(gaussian_closed_form_coef(2.0, 0.3, 0.7) - 0.851064) < 1e-6);
    CHECK(std::abs(gaussian_closed_form_coef(1.0, 0.3, 0.3) - 0.886076) < 1e-6);
    for (double l : {0.3, 1.0, 4.0}) CHECK(gaussian_closed_form_coef(l, 0.5, 0.0) == 1.0);
    CHECK_THROWS(gaussian_closed_form(make(rademacher_prior(), 0.3, 0.3)));
}

TEST_CASE("gaussian table matches the closed form") {
    for (const auto& spec : {identity_spectrum(), bilevel_spectrum(4.0, 0.3, 0.1)}) {
        for (double sigma : {0.3, 0.7}) {
            auto c = make(gaussian_prior(), 0.3, sigma, spec);
            double a = alpha_star(c);
            auto tab = build_optimal_potential(c, a);
            CHECK(tab.convexity_ok());
            auto g = gaussian_closed_form(c);
            for (const auto& L : tab.levels) {
                double lambda = std::sqrt(L.lambda_sq);
                int mid = static_cast<int>(L.v_grid.size()) / 2;
                REQUIRE(std::abs(L.v_grid[mid]) < 1e-14);
                double worst = 0.0;
                for (std::size_t i = 0; i < L.v_grid.size(); ++i) {
                    double v = L.v_grid[i];
                    worst = std::max(worst, std::abs(L.psi_values[i] - eval(g, v, lambda)));
                }
                CHECK(worst < 1e-6);
                CHECK(L.moreau_param == doctest::Approx(moreau_parameter(a, 0.3, sigma, lambda)).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("symmetric priors give even potentials") {
    for (const auto& p : {rademacher_prior(), sparse_gaussian_prior(0.3), log_concave_pair(), scale_mixture()}) {
        auto c = make(p, 0.3, 0.3);
        auto tab = build_optimal_potential(c, alpha_star(c));
        for (const auto& L : tab.levels) {
            std::size_t n = L.v_grid.size();
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(std::abs(L.v_grid[i] + L.v_grid[n - 1 - i]) < 1e-12);
                CHECK(std::abs(L.psi_values[i] - L.psi_values[n - 1 - i]) < 1e-10);
            }
        }
    }
}

TEST_CASE("rademacher potential: convex, flat at the origin, steep near the atoms") {
    auto c = make(rademacher_prior(), 0.3, 0.3);
    auto tab = build_optimal_potential(c, alpha_star(c));
    REQUIRE(tab.levels.size() == 1);
    CHECK(tab.convexity_ok());
    const auto& L = tab.levels[0];
    for (std::size_t i = 1; i < L.psi_derivative.size(); ++i) CHECK(L.psi_derivative[i] >= L.psi_derivative[i - 1]);
    auto pot = tab.potential();
    // curvature around 0 is well below the curvature near +-1
    double h = 0.05;
    auto curv = [&](double v) { return (eval(pot, v + h, 1.0) - 2 * eval(pot, v, 1.0) + eval(pot, v - h, 1.0)) / (h * h); };
    CHECK(curv(0.0) < 0.5 * curv(1.0));
    CHECK(curv(0.0) < 0.5 * curv(-1.0));
    // and flatter at the origin than the L2 closed form with the same tails
    CHECK(eval(pot, 0.3, 1.0) - eval(pot, 0.0, 1.0) < 0.5 * (eval(pot, 1.3, 1.0) - eval(pot, 1.0, 1.0)));
}

TEST_CASE("candidate identity") {
    auto g = make(gaussian_prior(), 0.3, 0.3);
    CHECK(verify_candidate_identity(g, alpha_star(g)) < 1e-6);
    auto r = make(rademacher_prior(), 0.3, 0.3);
    CHECK(verify_candidate_identity(r, alpha_star(r)) < 1e-5);
    auto gb = make(gaussian_prior(), 0.3, 0.7, bilevel_spectrum(4.0, 0.3, 0.1));
    CHECK(verify_candidate_identity(gb, alpha_star(gb)) < 1e-6);
    // both sides vanish at v = 0 for symmetric priors
    auto tab = build_optimal_potential(r, alpha_star(r));
    double c0 = tab.levels[0].moreau_param;
    CHECK(std::abs(prox_point(tab.potential(), 0.0, c0, 1.0)) < 1e-12);
}

TEST_CASE("kkt at the optimum") {
    auto g = make(gaussian_prior(), 0.3, 0.3);
    auto rg = verify_kkt_at_optimum(g, alpha_star(g));
    CHECK(std::abs(rg.r1) < 1e-6);
    CHECK(std::abs(rg.r2) < 1e-6);
    auto r = make(rademacher_prior(), 0.3, 0.7);
    auto rr = verify_kkt_at_optimum(r, alpha_star(r));
    CHECK(std::abs(rr.r1) < 1e-4);
    CHECK(std::abs(rr.r2) < 1e-4);
    auto s = make(sparse_gaussian_prior(0.3), 0.3, 0.3);
    auto lb = solve_lower_bound(s);
    auto tab = build_optimal_potential(s, lb.alpha_star());
    REQUIRE(tab.convexity_ok());
    auto rs = verify_kkt_at_optimum(s, tab);
    CHECK(std::abs(rs.r1) < 1e-4);
    CHECK(std::abs(rs.r2) < 1e-4);
    auto sol = solve_kkt(tab.potential(), s);
    CHECK(std::abs(risk(sol) - lb.alpha_star_sq) < 1e-4);
}

TEST_CASE("tightness on convex cases") {
    std::vector<ProblemConfig> cfgs = {make(gaussian_prior(), 0.5, 0.5, bilevel_spectrum(4.0, 0.3, 0.1)),
                                       make(rademacher_prior(), 0.3, 0.3), make(rademacher_prior(), 0.6, 0.7),
                                       make(log_concave_pair(), 0.4, 0.3)};
    for (const auto& c : cfgs) {
        auto lb = solve_lower_bound(c);
        auto tab = build_optimal_potential(c, lb.alpha_star());
        REQUIRE(tab.convexity_ok());
        auto sol = solve_kkt(tab.potential(), c);
        CHECK(std::abs(risk(sol) - lb.alpha_star_sq) < 1e-4);
    }
}

TEST_CASE("envelope of the table inverts to the log density") {
    for (const auto& p : {rademacher_prior(), log_concave_pair()}) {
        auto c = make(p, 0.3, 0.3);
        double a = alpha_star(c);
        auto tab = build_optimal_potential(c, a);
        auto pot = tab.potential();
        const auto& L = tab.levels[0];
        auto mix = convolve(c.prior, a * a / c.delta);
        int mid = static_cast<int>(L.v_grid.size()) / 2;
        double c0 = L.moreau_param;
        double base_env = prox(pot, 0.0, c0, 1.0).envelope, base_log = mix.logpdf(0.0);
        double worst = 0.0;
        for (std::size_t i = 0; i < L.v_grid.size(); i += 10) {
            double v = L.v_grid[i];
            double m = prox(pot, v, c0, 1.0).envelope - base_env;
            worst = std::max(worst, std::abs(m + (mix.logpdf(v) - base_log)));
        }
        CHECK(std::abs(L.v_grid[mid]) < 1e-14);
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("log-concave priors pass the convexity check") {
    for (const auto& p : {gaussian_prior(), log_concave_pair()}) {
        for (double delta : {0.1, 0.5, 0.9}) {
            for (double sigma : {0.05, 0.3, 1.0}) {
                auto c = make(p, delta, sigma, bilevel_spectrum(4.0, 0.3, 0.1));
                auto tab = build_optimal_potential(c, alpha_star(c));
                CHECK_MESSAGE(tab.convexity_ok(), delta, " ", sigma, " ", tab.convexity_report());
            }
        }
    }
}

TEST_CASE("non log-concave smoothed prior is reported") {
    auto c = make(rademacher_prior(), 0.2, 0.05);
    auto tab = build_optimal_potential(c, alpha_star(c));
    CHECK(!tab.convexity_ok());
    REQUIRE(!tab.levels.empty());
    CHECK(tab.levels[0].max_violation < -1e-6);
    CHECK(tab.convexity_report().find("lambda_sq=") != std::string::npos);
    CHECK_THROWS_AS(theory_for("opt", c), AdmissibilityError);
    // the scale mixture is only rescued by enough smoothing
    auto sm = make(scale_mixture(), 0.5, 0.05, bilevel_spectrum(4.0, 0.3, 0.1));
    CHECK(!build_optimal_potential(sm, alpha_star(sm)).convexity_ok());
}
