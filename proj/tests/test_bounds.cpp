#include <doctest.h>

#include <cmath>
#include <vector>

#include "ibias/bounds.hpp"
#include "ibias/densities.hpp"

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

// I of Rademacher convolved with N(0, v) by a plain trapezoid rule
double trapezoid_rademacher_fisher(double v) {
    const double pi = 3.14159265358979323846;
    double half = 1.0 + 14.0 * std::sqrt(v);
    const int n = 1000001;
    double h = 2 * half / (n - 1), acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double x = -half + h * i;
        double a = std::exp(-(x - 1) * (x - 1) / (2 * v)), b = std::exp(-(x + 1) * (x + 1) / (2 * v));
        double p = 0.5 * (a + b) / std::sqrt(2 * pi * v);
        double dp = -0.5 * (a * (x - 1) + b * (x + 1)) / (v * std::sqrt(2 * pi * v));
        double f = p > 0 ? dp * dp / p : 0.0;
        acc += (i == 0 || i == n - 1) ? 0.5 * f : f;
    }
    return acc * h;
}

}  // namespace

TEST_CASE("h for the Gaussian prior") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    for (double a : {0.2, 0.7, 1.3, 5.0}) {
        double d = 0.3, s2 = 0.09;
        double expect = d * s2 / (a * a * (1 - d)) + d * (1 - d) * (d + a * a) / (a * a * d);
        CHECK(h_of_alpha(a, c) == doctest::Approx(expect).epsilon(1e-13));
    }
    for (const auto& p : {gaussian_prior(), rademacher_prior(), sparse_gaussian_prior(0.3)}) {
        auto cp = make(p, 0.3, 0.3);
        double h = h_of_alpha(1e4, cp);
        CHECK(h > 0.7 - 1e-3);
        CHECK(h < 0.7 + 1e-3);
        CHECK(h_of_alpha(1e-3, cp) > 1.0);
    }
}

TEST_CASE("h is decreasing for atom-free priors") {
    PriorSpec two;
    two.gaussians = {{-1.0, 0.3, 0.5}, {1.0, 0.3, 0.5}};
    for (const auto& p : {gaussian_prior(), normalize_prior(two)}) {
        for (double sigma : {0.3, 0.7}) {
            auto c = make(p, 0.3, sigma);
            double prev = h_of_alpha(1e-3, c);
            for (double a = 1.5e-3; a < 1e3; a *= 1.5) {
                double cur = h_of_alpha(a, c);
                CHECK(cur < prev);
                prev = cur;
            }
        }
    }
}

TEST_CASE("h crosses one once for atomic priors") {
    // h has a bump where the atoms merge, but stays above one there
    for (const auto& p : {rademacher_prior(), sparse_gaussian_prior(0.3)}) {
        for (double delta : {0.3, 0.6}) {
            for (double sigma : {0.3, 0.7}) {
                auto c = make(p, delta, sigma);
                int crossings = 0;
                double prev = h_of_alpha(1e-3, c) - 1.0;
                for (double a = 1.05e-3; a < 1e3; a *= 1.05) {
                    double cur = h_of_alpha(a, c) - 1.0;
                    crossings += (prev > 0) != (cur > 0);
                    prev = cur;
                }
                CHECK(crossings == 1);
            }
        }
    }
}

TEST_CASE("Gaussian lower bound equals the closed form") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    auto lb = solve_lower_bound(c);
    CHECK(std::abs(lb.alpha_star_sq - 0.828571428571) < 1e-8);
    CHECK(std::abs(lb.h_residual) < c.settings.root_tol);
    CHECK(lb.bracket.first <= lb.alpha_star());
    CHECK(lb.bracket.second >= lb.alpha_star());
    CHECK(std::abs(isotropic_simplified_bound(c) - 0.828571428571) < 1e-11);
    for (double delta : {0.1, 0.5, 0.9}) {
        for (double sigma : {0.2, 1.0}) {
            auto g = make(gaussian_prior(), delta, sigma);
            CHECK(std::abs(solve_lower_bound(g).alpha_star_sq - isotropic_simplified_bound(g)) < 1e-8);
        }
    }
}

TEST_CASE("Rademacher lower bound against a trapezoid fixed point") {
    auto c = make(rademacher_prior(), 0.3, 0.3);
    const double d = 0.3, s2 = 0.09;
    double a2 = 1.0;
    for (int it = 0; it < 400; ++it) {
        double next = d * s2 / (1 - d) + d * (1 - d) / trapezoid_rademacher_fisher(a2 / d);
        bool done = std::abs(next - a2) < 1e-11;
        a2 = next;
        if (done) break;
    }
    auto lb = solve_lower_bound(c);
    CHECK(std::abs(lb.alpha_star_sq - a2) < 1e-8);
    // snapshot
    CHECK(std::abs(lb.alpha_star_sq - 0.8165294106) < 1e-8);
}

TEST_CASE("bound exceeds the noise term") {
    for (const auto& p : {gaussian_prior(), rademacher_prior(), sparse_gaussian_prior(0.3)}) {
        for (double delta : {0.1, 0.5, 0.9}) {
            for (double sigma : {0.1, 0.7}) {
                auto c = make(p, delta, sigma, bilevel_spectrum(4.0, 0.3, 0.1));
                CHECK(solve_lower_bound(c).alpha_star_sq > delta * sigma * sigma / (1 - delta));
            }
        }
    }
}

TEST_CASE("unsupported cases") {
    CHECK_THROWS_AS(solve_lower_bound(make(gaussian_prior(), 0.3, 0.0)), UnsupportedCase);
    try {
        isotropic_simplified_bound(make(sparse_gaussian_prior(0.3), 0.3, 0.3));
        FAIL("expected an error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("I(B) undefined") != std::string::npos);
    }
    CHECK_THROWS(isotropic_simplified_bound(make(gaussian_prior(), 0.3, 0.3, bilevel_spectrum(4, 0.3, 0.1))));
}

TEST_CASE("simplified bound is below the exact bound") {
    std::vector<PriorSpec> priors;
    PriorSpec two;
    two.gaussians = {{-1.0, 0.3, 0.5}, {1.0, 0.3, 0.5}};
    priors.push_back(normalize_prior(two));
    PriorSpec wide;
    wide.gaussians = {{0.0, 0.05, 0.7}, {0.0, 3.0, 0.3}};
    priors.push_back(normalize_prior(wide));
    for (const auto& p : priors) {
        for (double delta : {0.2, 0.6}) {
            for (double sigma : {0.3, 0.7}) {
                auto c = make(p, delta, sigma);
                double exact = solve_lower_bound(c).alpha_star_sq, simple = isotropic_simplified_bound(c);
                CHECK(simple <= exact + 1e-9);
                // genuinely non-Gaussian: strict gap
                CHECK(exact - simple > 1e-6);
            }
        }
    }
}
