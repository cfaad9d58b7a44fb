#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "ibias/config.hpp"
#include "ibias/numerics.hpp"

namespace ibias {

struct MixComp {
    double weight;
    double mean;
    double var;
};

class GaussianMixture1D {
public:
    GaussianMixture1D() = default;
    explicit GaussianMixture1D(std::vector<MixComp> comps);

    const std::vector<MixComp>& components() const { return comps_; }
    double mean() const;
    double variance() const;
    double min_var() const;

    double logpdf(double v) const;
    double pdf(double v) const { return std::exp(logpdf(v)); }
    double score(double v) const;
    // d score / dv
    double score_derivative(double v) const;
    // score and derivative in one pass
    void score_and_derivative(double v, double& xi, double& dxi) const;

    GaussianMixture1D scaled(double c) const;
    GaussianMixture1D convolved(double noise_var) const;

private:
    // responsibilities r_i(v) (normalized), returned through buffer
    void posterior(double v, std::vector<double>& r) const;
    std::vector<MixComp> comps_;
};

GaussianMixture1D convolve(const PriorSpec& prior, double noise_var);
// the prior itself, only when atom-free
GaussianMixture1D prior_mixture(const PriorSpec& prior);

double fisher_info(const GaussianMixture1D& mix, int gh_nodes = 200, double tol = 1e-10);
double weighted_fisher_info(const PriorSpec& prior, const SpectrumSpec& spectrum, double alpha, double delta,
                            int gh_nodes = 200, double tol = 1e-10);

// random draws from the configuration distributions
double sample_prior(const PriorSpec& prior, CounterRng& rng);
std::size_t sample_level(const SpectrumSpec& spectrum, CounterRng& rng);

struct ExpectationEngine {
    int gh_nodes = 200;
    std::optional<long> mc_samples;
    double tol = 1e-10;
    SplitRule split{};

    static ExpectationEngine from(const SolverSettings& s) {
        ExpectationEngine e;
        e.gh_nodes = s.gh_nodes;
        e.tol = s.quad_abs_tol;
        return e;
    }
};

// E[H | x], E[H^2 | x], E[B | x], E[B H | x], E[B^2 | x] where x = B + s H for one prior component.
struct CondMoments {
    double eh, eh2, eb, ebh, eb2;
};

struct LevelSetup {
    double s;                   // x = b + s h
    std::vector<double> breaks; // kinks of the integrand in x
    bool smooth = false;        // plain Gauss–Hermite suffices
};

// Sum over levels and prior components of E[f(lambda, x, moments)], where f must be affine in the
// conditional monomials (h, h^2, b, bh, b^2) for fixed x. This is exact for all integrands in the
// KKT and special-case systems, and reduces every (b, h) integral to a 1D integral in x.
template <std::size_t K, class Setup, class F>
std::array<double, K> expect_conditional(const PriorSpec& prior, const SpectrumSpec& spectrum,
                                         const ExpectationEngine& eng, Setup&& setup, F&& f) {
    std::array<double, K> total{};
    thread_local std::vector<QuadNode> nodes;
    thread_local std::vector<double> zbreaks;
    for (const auto& lev : spectrum.levels) {
        if (lev.weight == 0.0) continue;
        double lambda = std::sqrt(lev.lambda_sq);
        LevelSetup ls = setup(lambda);
        std::array<double, K> acc_level{};
        auto run = [&](double center, double sd, double wcomp, auto&& moments) {
            if (ls.smooth) {
                const QuadRule& gh = gauss_hermite(eng.gh_nodes);
                nodes.resize(gh.nodes.size());
                for (std::size_t i = 0; i < gh.nodes.size(); ++i) nodes[i] = {gh.nodes[i], gh.weights[i]};
            } else {
                zbreaks.clear();
                for (double b : ls.breaks) zbreaks.push_back((b - center) / sd);
                normal_split_nodes(zbreaks, nodes, eng.split);
            }
            std::array<double, K> acc{};
            for (const auto& nd : nodes) {
                double x = center + sd * nd.z;
                CondMoments cm = moments(x, nd.z);
                auto val = f(lambda, x, cm);
                for (std::size_t k = 0; k < K; ++k) acc[k] += nd.w * val[k];
            }
            for (std::size_t k = 0; k < K; ++k) acc_level[k] += wcomp * acc[k];
        };
        for (const auto& a : prior.atoms) {
            if (a.weight == 0.0) continue;
            double loc = a.loc;
            run(loc, ls.s, a.weight, [loc](double, double z) {
                return CondMoments{z, z * z, loc, loc * z, loc * loc};
            });
        }
        for (const auto& g : prior.gaussians) {
            if (g.weight == 0.0) continue;
            double s = ls.s;
            double tau2 = g.var + s * s;
            double var_h = g.var / tau2;
            double var_b = s * s * var_h;
            double m = g.mean;
            run(m, std::sqrt(tau2), g.weight, [=](double x, double) {
                double eh = s * (x - m) / tau2;
                double eh2 = var_h + eh * eh;
                double eb = x - s * eh;
                return CondMoments{eh, eh2, eb, x * eh - s * eh2, var_b + eb * eb};
            });
        }
        for (std::size_t k = 0; k < K; ++k) total[k] += lev.weight * acc_level[k];
    }
    return total;
}

using BhlIntegrand = std::function<double(double b, double h, double lambda)>;
using HBreaks = std::function<std::vector<double>(double b, double lambda)>;

// Generic E f(B, H, Lambda): atoms enumerated, Gaussian components by 2D tensor quadrature
// (Gauss–Hermite in b, Gauss–Hermite or kink-split Gauss–Legendre in h).
double expect_bhl(const BhlIntegrand& f, const PriorSpec& prior, const SpectrumSpec& spectrum,
                  const ExpectationEngine& eng, const HBreaks& h_breaks = nullptr);

struct McEstimate {
    double mean;
    double std_error;
};

McEstimate expect_bhl_mc(const BhlIntegrand& f, const PriorSpec& prior, const SpectrumSpec& spectrum, long samples,
                         std::uint64_t seed, std::uint64_t integrand_id);

}  // namespace ibias
