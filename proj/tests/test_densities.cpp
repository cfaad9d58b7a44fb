#include <doctest.h>

#include <cmath>
#include <vector>

#include "ibias/densities.hpp"
#include "ibias/potentials.hpp"

using namespace ibias;

namespace {

const double kPi = 3.14159265358979323846;

// p and p' of a mixture written out directly
void mix_density(const std::vector<MixComp>& comps, double v, double& p, double& dp) {
    p = dp = 0.0;
    for (const auto& c : comps) {
        double d = v - c.mean;
        double phi = c.weight * std::exp(-d * d / (2 * c.var)) / std::sqrt(2 * kPi * c.var);
        p += phi;
        dp += -phi * d / c.var;
    }
}

double trapezoid_fisher(const std::vector<MixComp>& comps, double lo, double hi, int n) {
    double h = (hi - lo) / (n - 1), acc = 0.0;
    for (int i = 0; i < n; ++i) {
        double p, dp;
        mix_density(comps, lo + h * i, p, dp);
        double f = p > 0 ? dp * dp / p : 0.0;
        acc += (i == 0 || i == n - 1) ? 0.5 * f : f;
    }
    return acc * h;
}

std::vector<GaussianMixture1D> zero_mean_mixtures() {
    return {GaussianMixture1D({{1.0, 0.0, 1.0}}),
            GaussianMixture1D({{0.5, -1.0, 0.09}, {0.5, 1.0, 0.09}}),
            GaussianMixture1D({{0.7, 0.0, 0.5}, {0.3, 0.0, 1.0 / 0.3 + 0.5}}),
            GaussianMixture1D({{0.2, -1.5, 0.3}, {0.5, 0.3, 1.0}, {0.3, 0.5, 0.2}})};
}

}  // namespace

TEST_CASE("convolve examples") {
    auto g = convolve(gaussian_prior(), 0.25);
    REQUIRE(g.components().size() == 1);
    CHECK(g.components()[0].var == 1.25);
    auto r = convolve(rademacher_prior(), 0.09);
    REQUIRE(r.components().size() == 2);
    CHECK(r.components()[0].mean == -1.0);
    CHECK(r.components()[1].mean == 1.0);
    CHECK(r.components()[0].var == 0.09);
    CHECK(r.components()[0].weight == 0.5);
    auto s = convolve(sparse_gaussian_prior(0.3), 0.5);
    REQUIRE(s.components().size() == 2);
    CHECK(s.components()[0].weight == doctest::Approx(0.7));
    CHECK(s.components()[0].var == 0.5);
    CHECK(s.components()[1].var == doctest::Approx(1.0 / 0.3 + 0.5).epsilon(1e-14));
    CHECK_THROWS(convolve(gaussian_prior(), 0.0));
    CHECK_THROWS(prior_mixture(rademacher_prior()));
}

TEST_CASE("scores") {
    GaussianMixture1D n01({{1.0, 0.0, 1.0}});
    CHECK(n01.score(1.7) == doctest::Approx(-1.7).epsilon(1e-15));
    auto r = convolve(rademacher_prior(), 0.09);
    CHECK(r.score(0.0) == doctest::Approx(0.0).epsilon(1e-15));
    for (double v : {1.0, -0.3, 2.4}) {
        double h = 1e-6;
        double fd = (r.logpdf(v + h) - r.logpdf(v - h)) / (2 * h);
        CHECK(std::abs(fd - r.score(v)) < 1e-5);
        double p, dp;
        mix_density(r.components(), v, p, dp);
        CHECK(std::abs(r.score(v) - dp / p) < 1e-10 * std::max(1.0, std::abs(dp / p)));
        double fd2 = (r.score(v + h) - r.score(v - h)) / (2 * h);
        CHECK(std::abs(fd2 - r.score_derivative(v)) < 1e-4 * std::max(1.0, std::abs(fd2)));
    }
    // log-sum-exp keeps far tails finite
    CHECK(std::isfinite(r.logpdf(60.0)));
    CHECK(std::isfinite(r.score(60.0)));
}

TEST_CASE("fisher information examples") {
    CHECK(fisher_info(GaussianMixture1D({{1.0, 0.0, 2.0}})) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(fisher_info(GaussianMixture1D({{1.0, 3.0, 1.0}})) == doctest::Approx(1.0).epsilon(1e-15));
    auto r = convolve(rademacher_prior(), 0.25);
    double ref = trapezoid_fisher(r.components(), -6.0, 6.0, 1000001);
    CHECK(std::abs(fisher_info(r) - ref) < 1e-8 * ref);
    for (const auto& m : zero_mean_mixtures()) {
        double tr = trapezoid_fisher(m.components(), -14.0, 14.0, 400001);
        CHECK(std::abs(fisher_info(m) - tr) < 1e-8 * tr);
    }
}

TEST_CASE("fisher information with disparate component scales") {
    // narrow spike inside a wide component
    GaussianMixture1D m({{0.7, 0.0, 3e-8}, {0.3, 0.0, 10.0}});
    // fine grid across the spike, coarser outside
    double lo = trapezoid_fisher(m.components(), -0.01, 0.01, 2000001);
    double hi_res = lo + trapezoid_fisher(m.components(), -40.0, -0.01, 400001) +
                    trapezoid_fisher(m.components(), 0.01, 40.0, 400001);
    CHECK(std::abs(fisher_info(m) - hi_res) < 1e-6 * hi_res);
}

TEST_CASE("weighted fisher information") {
    CHECK(weighted_fisher_info(gaussian_prior(), identity_spectrum(), 1.0, 0.3) ==
          doctest::Approx(1.0 / (1.0 + 1.0 / 0.3)).epsilon(1e-14));
    CHECK(weighted_fisher_info(gaussian_prior(), identity_spectrum(), 1.0, 0.3) ==
          doctest::Approx(0.230769230769).epsilon(1e-11));
    double a = 0.8, d = 0.3;
    double expect = 0.3 * (1 / 4.0) / (1 + a * a / (4 * d)) + 0.7 * (1 / 0.1) / (1 + a * a / (0.1 * d));
    CHECK(weighted_fisher_info(gaussian_prior(), bilevel_spectrum(4.0, 0.3, 0.1), a, d) ==
          doctest::Approx(expect).epsilon(1e-13));
    auto r = rademacher_prior();
    CHECK(weighted_fisher_info(r, identity_spectrum(), 0.7, 0.4) ==
          doctest::Approx(fisher_info(convolve(r, 0.49 / 0.4))).epsilon(1e-14));
}

TEST_CASE("cramer-rao") {
    auto ms = zero_mean_mixtures();
    for (std::size_t i = 0; i < ms.size(); ++i) {
        double I = fisher_info(ms[i]), bound = 1.0 / ms[i].variance();
        CHECK(I >= bound - 1e-9);
        if (ms[i].components().size() == 1) CHECK(std::abs(I - bound) < 1e-9);
        else CHECK(I - bound > 1e-6);
    }
}

TEST_CASE("stam") {
    for (const auto& m : zero_mean_mixtures()) {
        for (double v2 : {0.1, 1.0, 4.0}) {
            double I1 = fisher_info(m), I2 = 1.0 / v2;
            double Ic = fisher_info(m.convolved(v2));
            double rhs = I1 * I2 / (I1 + I2);
            CHECK(Ic <= rhs + 1e-9);
            if (m.components().size() == 1) CHECK(std::abs(Ic - rhs) < 1e-9);
        }
    }
}

TEST_CASE("scaling") {
    for (const auto& m : zero_mean_mixtures()) {
        double I = fisher_info(m);
        for (double c : {0.3, 2.0, 7.5}) {
            double Is = fisher_info(m.scaled(c));
            CHECK(std::abs(Is - I / (c * c)) < 1e-9 * std::max(1.0, Is));
        }
    }
}

TEST_CASE("fisher limits in the noise scale") {
    std::vector<PriorSpec> priors;
    priors.push_back(gaussian_prior());
    PriorSpec two;
    two.gaussians = {{-1.0, 0.3, 0.5}, {1.0, 0.3, 0.5}};
    priors.push_back(normalize_prior(two));
    PriorSpec wide;
    wide.gaussians = {{0.0, 0.05, 0.7}, {0.0, 3.0, 0.3}};
    priors.push_back(normalize_prior(wide));
    for (const auto& p : priors) {
        double a = 1e-4;
        CHECK(a * a * fisher_info(convolve(p, a * a)) < 1e-3);
        a = 1e4;
        CHECK(std::abs(a * a * fisher_info(convolve(p, a * a)) - 1.0) < 1e-3);
    }
    // atomic priors: large-noise limit only
    for (const auto& p : {rademacher_prior(), sparse_gaussian_prior(0.3)}) {
        double a = 1e4;
        CHECK(std::abs(a * a * fisher_info(convolve(p, a * a)) - 1.0) < 1e-3);
    }
}

TEST_CASE("density normalization and zero-mean score") {
    for (const auto& m : zero_mean_mixtures()) {
        const int n = 400001;
        double lo = -20.0, hi = 20.0, h = (hi - lo) / (n - 1), mass = 0.0, sc = 0.0;
        for (int i = 0; i < n; ++i) {
            double v = lo + h * i, w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
            mass += w * m.pdf(v);
            sc += w * m.pdf(v) * m.score(v);
        }
        CHECK(std::abs(mass * h - 1.0) < 1e-10);
        CHECK(std::abs(sc * h) < 1e-8);
    }
}

TEST_CASE("expectation engine basics") {
    auto eng = ExpectationEngine::from(SolverSettings{});
    auto sp = sparse_gaussian_prior(0.3);
    auto bl = bilevel_spectrum(4.0, 0.3, 0.1);
    CHECK(std::abs(expect_bhl([](double, double h, double) { return h * h; }, sp, bl, eng) - 1.0) < 1e-12);
    CHECK(std::abs(expect_bhl([](double b, double, double) { return b * b; }, sp, bl, eng) - 1.0) < 1e-12);
    CHECK(std::abs(expect_bhl([](double, double, double l) { return l * l; }, sp, bl, eng) - spectrum_moment(bl, 1.0)) <
          1e-12);
}

TEST_CASE("soft-threshold integrand: quadrature against Monte Carlo") {
    auto sp = sparse_gaussian_prior(0.3);
    auto spec = identity_spectrum();
    const double alpha = 0.9, delta = 0.3, t = 0.8, s = alpha / std::sqrt(delta);
    auto f = [&](double b, double h, double) {
        double x = b + s * h;
        return h * (x - soft_threshold(x, t)) / t;
    };
    auto eng = ExpectationEngine::from(SolverSettings{});
    auto breaks = [&](double b, double) { return std::vector<double>{(-t - b) / s, (t - b) / s}; };
    double q = expect_bhl(f, sp, spec, eng, breaks);
    auto mc = expect_bhl_mc(f, sp, spec, 10000000, 17, 1);
    CHECK(std::abs(q - mc.mean) < 3 * mc.std_error);

    // the conditional-moment engine gives the same value in one dimension
    auto cond = expect_conditional<1>(
        sp, spec, eng,
        [&](double) {
            LevelSetup ls;
            ls.s = s;
            ls.breaks = {-t, t};
            return ls;
        },
        [&](double, double x, const CondMoments& cm) {
            return std::array<double, 1>{cm.eh * (x - soft_threshold(x, t)) / t};
        });
    CHECK(std::abs(cond[0] - q) < 1e-9);
}
