#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "ibias/asymptotics.hpp"
#include "ibias/bounds.hpp"

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

double kkt_risk(int p, const ProblemConfig& c) {
    auto s = solve_kkt(ScalarPotential::power(p), c);
    REQUIRE(s.converged);
    return risk(s);
}

AppendixSolution appendix(int p, const ProblemConfig& c) {
    switch (p) {
        case 1: return solve_l1_appendix(c);
        case 2: return solve_l2_appendix(c);
        case 3: return solve_l3_appendix(c);
        default: return solve_linf_appendix(c);
    }
}

std::vector<PriorSpec> test_priors() { return {sparse_gaussian_prior(0.3), rademacher_prior(), gaussian_prior()}; }

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

TEST_CASE("quadratic residuals vanish at the closed-form point") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    double a2 = 0.09 / 0.7 + 0.7;
    double alpha = std::sqrt(a2);
    // r1 = 2s/(1+2t) - u(1-delta) = 0 with s = alpha/sqrt(delta), t = alpha/(u sqrt(delta))
    double u = 2 * alpha * std::sqrt(0.3) / 0.7;
    auto r = kkt_residuals(alpha, u, ScalarPotential::power(2), c);
    CHECK(std::abs(r.r1) < 1e-8);
    CHECK(std::abs(r.r2) < 1e-8);
    auto s = solve_kkt(ScalarPotential::power(2), c);
    CHECK(s.converged);
    CHECK(std::abs(s.u - u) < 1e-7);
}

TEST_CASE("small u makes r1 positive") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    for (double u : {1e-3, 1e-5, 1e-7}) CHECK(kkt_residuals(0.9, u, ScalarPotential::power(2), c).r1 > 0.0);
}

TEST_CASE("noiseless quadratic") {
    auto c = make(gaussian_prior(), 0.5, 0.0);
    CHECK(std::abs(kkt_risk(2, c) - 0.5) < 1e-8);
    for (const auto& p : test_priors()) {
        auto c2 = make(p, 0.4, 0.0);
        CHECK(std::abs(kkt_risk(2, c2) - 0.6 * prior_second_moment(p)) < 1e-8);
        CHECK(std::abs(solve_l2_appendix(c2).risk - 0.6) < 1e-8);
    }
}

TEST_CASE("risk accessors") {
    FixedPointSolution s;
    s.alpha = 0.910258989833;
    s.converged = true;
    CHECK(risk(s) == doctest::Approx(0.828571428571).epsilon(1e-11));
    s.alpha = 0.3;
    CHECK(excess_risk(s, 0.3) == doctest::Approx(0.0));
    s.converged = false;
    CHECK_THROWS(risk(s));
}

TEST_CASE("solve_kkt examples") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    CHECK(std::abs(kkt_risk(2, c) - (0.09 / 0.7 + 0.7)) < 1e-9);
    auto sp = make(sparse_gaussian_prior(0.3), 0.3, 0.3);
    double k1 = kkt_risk(1, sp), a1 = solve_l1_appendix(sp).risk;
    CHECK(std::abs(k1 - a1) < 1e-4 * a1);
}

TEST_CASE("outer scan failure is diagnosed") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    c.settings.alpha_hi = 0.31;
    try {
        solve_kkt(ScalarPotential::power(2), c);
        FAIL("expected SolverError");
    } catch (const SolverError& e) {
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
}

TEST_CASE("weight law sampling") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    auto pot = ScalarPotential::power(2);
    auto s = solve_kkt(pot, c);
    auto law = weight_law(s, pot, c);
    CHECK(sample_weight_law(law, 0, 1).empty());
    auto a = sample_weight_law(law, 1000, 5), b = sample_weight_law(law, 1000, 5);
    CHECK(a == b);

    // Z = (B + sH)/(1 + 2t), Gaussian with variance (1 + s^2)/(1 + 2t)^2
    const std::size_t N = 1000000;
    auto z = sample_weight_law(law, N, 9);
    double sc = kkt_noise_scale(s.alpha, c.delta, 1.0), t = kkt_moreau_t(s.alpha, s.u, c.delta, 1.0);
    double var = (1 + sc * sc) / ((1 + 2 * t) * (1 + 2 * t));
    double m2 = 0.0, m4 = 0.0;
    for (double x : z) {
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m2 /= N;
    m4 /= N;
    double se = std::sqrt((m4 - m2 * m2) / N);
    CHECK(std::abs(m2 - var) < 3 * se);
    CHECK(std::abs(weight_law_second_moment(law) - var) < 1e-9);

    // l1 exact zeros against the branch probability
    auto sp = make(sparse_gaussian_prior(0.3), 0.3, 0.3);
    auto p1 = ScalarPotential::power(1);
    auto s1 = solve_kkt(p1, sp);
    auto law1 = weight_law(s1, p1, sp);
    auto z1 = sample_weight_law(law1, N, 11);
    double zeros = 0.0;
    for (double x : z1) zeros += (x == 0.0);
    zeros /= N;
    double pz = weight_law_zero_mass(law1);
    CHECK(std::abs(zeros - pz) < 3 * std::sqrt(pz * (1 - pz) / N));
    CHECK(std::abs(pz - appendix_atom_mass(solve_l1_appendix(sp), sp)) < 1e-6);
}

TEST_CASE("weight law second moment, sampled against quadrature") {
    for (int p : {1, 3}) {
        for (const auto& pr : test_priors()) {
            auto c = make(pr, 0.3, 0.7);
            auto pot = ScalarPotential::power(p);
            auto law = weight_law(solve_kkt(pot, c), pot, c);
            const std::size_t N = 400000;
            auto z = sample_weight_law(law, N, 3);
            double m2 = 0.0, m4 = 0.0;
            for (double x : z) {
                m2 += x * x;
                m4 += x * x * x * x;
            }
            m2 /= N;
            m4 /= N;
            CHECK(std::abs(m2 - weight_law_second_moment(law)) < 3 * std::sqrt((m4 - m2 * m2) / N));
        }
    }
}

TEST_CASE("l2 special case") {
    auto c = make(gaussian_prior(), 0.3, 0.3);
    auto s = solve_l2_appendix(c);
    CHECK(s.converged);
    CHECK(std::abs(s.k - 1.0) < 1e-12);
    CHECK(std::abs(s.excess_risk(0.3) - (0.7 + 0.3 * 0.09 / 0.7)) < 1e-10);
    CHECK(std::abs(s.excess_risk(0.3) - 0.738571428571) < 1e-10);
    CHECK(std::abs(s.risk - s.alpha * s.alpha / 0.3) < 1e-14);
    auto bl = make(gaussian_prior(), 0.3, 0.7, bilevel_spectrum(4.0, 0.3, 0.1));
    auto sb = solve_l2_appendix(bl);
    CHECK(std::abs(sb.risk - kkt_risk(2, bl)) < 1e-6 * sb.risk);
    // k solves E[(k L - 1)/(1 + k dt L)] = 0 at the two levels
    double dt = 0.3 / 0.7, k = sb.k;
    double e = 0.3 * (4 * k - 1) / (1 + k * dt * 4) + 0.7 * (0.1 * k - 1) / (1 + k * dt * 0.1);
    CHECK(std::abs(e) < 1e-10);
}

TEST_CASE("l1 special case") {
    auto c = make(sparse_gaussian_prior(0.3), 0.3, 0.3);
    auto s = solve_l1_appendix(c);
    CHECK(s.converged);
    CHECK(std::abs(l1_family(Region::L, 0, 0, 0, s.alpha, 1e6, c) - 1.0) < 1e-12);
    CHECK(std::abs(l1_family(Region::U, 0, 0, 0, s.alpha, 1e6, c)) < 1e-12);
    // at unit spectrum the solution satisfies the truncation-integral form of orthogonality
    double a = s.alpha, th = s.theta, d = c.delta;
    double lhs = a * l1_family(Region::U, 0, 2, 0, a, th, c);
    double rhs = a * d + d * l1_family(Region::L, 1, 1, 0, a, th, c) + th * l1_family(Region::U, 0, 1, 1, a, th, c);
    CHECK(std::abs(lhs - rhs) < 1e-8);
    auto g = make(gaussian_prior(), 0.3, 0.3);
    CHECK(solve_l1_appendix(g).risk >= solve_l2_appendix(g).risk);
}

TEST_CASE("l3 special case") {
    auto c = make(rademacher_prior(), 0.5, 0.3);
    auto s3 = solve_l3_appendix(c);
    CHECK(s3.converged);
    CHECK(s3.k > 0.0);
    CHECK(std::abs(s3.risk - kkt_risk(3, c)) < 1e-4 * s3.risk);
    auto s2 = solve_l2_appendix(c), sinf = solve_linf_appendix(c);
    double lb = solve_lower_bound(c).alpha_star_sq;
    CHECK(lb <= s3.risk);
    CHECK(s3.risk < s2.risk);
    CHECK(s3.risk < sinf.risk);
    CHECK(s2.risk < sinf.risk);
}

TEST_CASE("linf special case") {
    auto c = make(rademacher_prior(), 0.5, 0.3);
    auto s = solve_linf_appendix(c);
    CHECK(s.converged);
    CHECK(s.risk >= solve_l3_appendix(c).risk);
    CHECK(std::abs(linf_family(Region::U, 0, 0, 0, s.alpha, 1e-12, c) - 1.0) < 1e-9);
    CHECK(std::abs(linf_family(Region::L, 0, 0, 0, s.alpha, 1e-12, c)) < 1e-9);
    // saturation probability against Monte Carlo of the law
    const std::size_t N = 1000000;
    auto z = sample_appendix_law(s, c, N, 4);
    double cap = s.theta / c.delta, sat = 0.0;
    for (double x : z) sat += (std::abs(x) == cap);
    sat /= N;
    double p = appendix_atom_mass(s, c);
    CHECK(std::abs(sat - p) < 3 * std::sqrt(p * (1 - p) / N));
    auto eq = appendix_equations(AppendixKind::linf, s.alpha, s.theta, c);
    CHECK(std::abs(eq.first) < 1e-8);
    CHECK(std::abs(eq.second) < 1e-8);
}

TEST_CASE("dual formulation equivalence") {
    for (const auto& pr : test_priors()) {
        for (double sigma : {0.3, 0.7}) {
            for (double delta : {0.2, 0.6}) {
                auto c = make(pr, delta, sigma);
                for (int p : {1, 2, 3}) {
                    double k = kkt_risk(p, c), a = appendix(p, c).risk;
                    CHECK(std::abs(k - a) < 1e-4 * a);
                }
            }
        }
    }
    auto bl = make(sparse_gaussian_prior(0.3), 0.3, 0.5, bilevel_spectrum(4.0, 0.3, 0.1));
    for (int p : {1, 2, 3}) {
        double k = kkt_risk(p, bl), a = appendix(p, bl).risk;
        CHECK(std::abs(k - a) < 1e-4 * a);
    }
}

TEST_CASE("risk floors, monotonicity and dominance") {
    for (const auto& pr : test_priors()) {
        for (double delta : {0.2, 0.5, 0.8}) {
            double prev[4] = {0, 0, 0, 0};
            for (double sigma : {0.1, 0.3, 0.5, 0.7, 1.0}) {
                auto c = make(pr, delta, sigma);
                double lb = solve_lower_bound(c).alpha_star_sq;
                for (int p : {1, 2, 3, 4}) {
                    double r = p == 4 ? solve_linf_appendix(c).risk : kkt_risk(p, c);
                    CHECK(r - sigma * sigma >= delta * sigma * sigma / (1 - delta) - 1e-9);
                    CHECK(r >= lb - 1e-8);
                    CHECK(r >= prev[p - 1] - 1e-10);
                    prev[p - 1] = r;
                }
            }
        }
    }
}

TEST_CASE("appendix law samples are deterministic") {
    auto c = make(sparse_gaussian_prior(0.3), 0.3, 0.3);
    auto s = solve_l1_appendix(c);
    auto a = sample_appendix_law(s, c, 5000, 8), b = sample_appendix_law(s, c, 5000, 8);
    CHECK(a == b);
    CHECK(std::abs(mean_of(a)) < 0.1);
}

TEST_CASE("noiseless recovery transitions") {
    ProblemConfig c;
    c.prior = sparse_gaussian_prior(0.1);
    c.sigma = 0.0;
    c.delta = 0.3;
    double above = solve_kkt(ScalarPotential::power(1), c).alpha;
    CHECK(above > 0.1);
    CHECK(std::abs(solve_l1_appendix(c).risk - above * above) < 1e-4 * above * above);
    c.delta = 0.4;
    auto rec = solve_kkt(ScalarPotential::power(1), c);
    CHECK(rec.converged);
    CHECK(rec.alpha == 0.0);
    CHECK(solve_l1_appendix(c).risk == 0.0);
    auto law = weight_law(rec, ScalarPotential::power(1), c);
    CHECK(weight_law_zero_mass(law) == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(weight_law_second_moment(law) == doctest::Approx(1.0).epsilon(1e-12));
    // l2 never recovers
    CHECK(solve_kkt(ScalarPotential::power(2), c).alpha > 0.5);

    ProblemConfig r;
    r.prior = rademacher_prior();
    r.sigma = 0.0;
    r.delta = 0.4;
    CHECK(solve_linf_appendix(r).risk > 1e-3);
    r.delta = 0.6;
    auto sol = solve_linf_appendix(r);
    CHECK(sol.risk == 0.0);
    CHECK(appendix_atom_mass(sol, r) == 1.0);
    auto z = sample_appendix_law(sol, r, 1000, 3);
    for (double v : z) CHECK(std::abs(v) == 1.0);
    // noisy labels: the solvers still insist on a sign change
    r.sigma = 0.3;
    CHECK(solve_linf_appendix(r).risk > 0.09);
}
