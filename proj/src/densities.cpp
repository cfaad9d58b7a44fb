#include "ibias/densities.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace ibias {

GaussianMixture1D::GaussianMixture1D(std::vector<MixComp> comps) : comps_(std::move(comps)) {
    if (comps_.empty()) throw std::invalid_argument("mixture needs at least one component");
    double s = 0.0;
    for (const auto& c : comps_) {
        if (!(c.var > 0.0)) throw std::invalid_argument("mixture variances must be positive");
        if (!(c.weight >= 0.0)) throw std::invalid_argument("mixture weights must be nonnegative");
        s += c.weight;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
    comps_.erase(std::remove_if(comps_.begin(), comps_.end(), [](const MixComp& c) { return c.weight == 0.0; }),
                 comps_.end());
}

double GaussianMixture1D::mean() const {
    double m = 0.0;
    for (const auto& c : comps_) m += c.weight * c.mean;
    return m;
}

double GaussianMixture1D::variance() const {
    double m = mean(), s = 0.0;
    for (const auto& c : comps_) s += c.weight * (c.var + (c.mean - m) * (c.mean - m));
    return s;
}

double GaussianMixture1D::min_var() const {
    double v = std::numeric_limits<double>::infinity();
    for (const auto& c : comps_) v = std::min(v, c.var);
    return v;
}

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

inline double comp_log(const MixComp& c, double v) {
    double d = v - c.mean;
    return std::log(c.weight) - 0.5 * (kLog2Pi + std::log(c.var)) - d * d / (2.0 * c.var);
}
}  // namespace

double GaussianMixture1D::logpdf(double v) const {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& c : comps_) mx = std::max(mx, comp_log(c, v));
    double s = 0.0;
    for (const auto& c : comps_) s += std::exp(comp_log(c, v) - mx);
    return mx + std::log(s);
}

void GaussianMixture1D::posterior(double v, std::vector<double>& r) const {
    r.resize(comps_.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        r[i] = comp_log(comps_[i], v);
        mx = std::max(mx, r[i]);
    }
    double s = 0.0;
    for (double& x : r) {
        x = std::exp(x - mx);
        s += x;
    }
    for (double& x : r) x /= s;
}

double GaussianMixture1D::score(double v) const {
    if (comps_.size() == 1) return -(v - comps_[0].mean) / comps_[0].var;
    thread_local std::vector<double> r;
    posterior(v, r);
    double xi = 0.0;
    for (std::size_t i = 0; i < comps_.size(); ++i) xi -= r[i] * (v - comps_[i].mean) / comps_[i].var;
    return xi;
}

void GaussianMixture1D::score_and_derivative(double v, double& xi, double& dxi) const {
    thread_local std::vector<double> r;
    posterior(v, r);
    double e1 = 0.0, e2 = 0.0, einv = 0.0;
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        double si = -(v - comps_[i].mean) / comps_[i].var;
        e1 += r[i] * si;
        e2 += r[i] * si * si;
        einv += r[i] / comps_[i].var;
    }
    xi = e1;
    dxi = -einv + (e2 - e1 * e1);
}

double GaussianMixture1D::score_derivative(double v) const {
    double xi, dxi;
    score_and_derivative(v, xi, dxi);
    return dxi;
}

GaussianMixture1D GaussianMixture1D::scaled(double c) const {
    std::vector<MixComp> out = comps_;
    for (auto& k : out) {
        k.mean *= c;
        k.var *= c * c;
    }
    return GaussianMixture1D(std::move(out));
}

GaussianMixture1D GaussianMixture1D::convolved(double noise_var) const {
    if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
    std::vector<MixComp> out = comps_;
    for (auto& k : out) k.var += noise_var;
    return GaussianMixture1D(std::move(out));
}

GaussianMixture1D convolve(const PriorSpec& prior, double noise_var) {
    if (!(noise_var > 0.0)) throw std::invalid_argument("noise variance must be positive");
    std::vector<MixComp> comps;
    for (const auto& a : prior.atoms) comps.push_back({a.weight, a.loc, noise_var});
    for (const auto& g : prior.gaussians) comps.push_back({g.weight, g.mean, g.var + noise_var});
    return GaussianMixture1D(std::move(comps));
}

GaussianMixture1D prior_mixture(const PriorSpec& prior) {
    if (prior_has_atoms(prior)) throw std::invalid_argument("I(B) undefined: prior has atoms");
    std::vector<MixComp> comps;
    for (const auto& g : prior.gaussians) comps.push_back({g.weight, g.mean, g.var});
    return GaussianMixture1D(std::move(comps));
}

namespace {
// panel edges at every component's mean + k sd, so each component's scale is resolved
std::vector<double> fisher_edges(const GaussianMixture1D& mix) {
    std::vector<double> e;
    for (const auto& c : mix.components()) {
        double sd = std::sqrt(c.var);
        for (int k = -12; k <= 12; ++k) e.push_back(c.mean + k * sd);
    }
    std::sort(e.begin(), e.end());
    std::vector<double> out;
    for (double x : e)
        if (out.empty() || x - out.back() > 1e-12 * std::max(1.0, std::abs(x))) out.push_back(x);
    return out;
}

double fisher_panels(const GaussianMixture1D& mix, const std::vector<double>& edges, int order) {
    const QuadRule& gl = gauss_legendre(order);
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        double a = edges[s], b = edges[s + 1], half = 0.5 * (b - a), mid = 0.5 * (a + b), acc = 0.0;
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
            double x = mid + half * gl.nodes[i];
            double xi = mix.score(x);
            acc += gl.weights[i] * mix.pdf(x) * xi * xi;
        }
        total += half * acc;
    }
    return total;
}
}  // namespace

double fisher_info(const GaussianMixture1D& mix, int gh_nodes, double tol) {
    if (mix.components().size() == 1) return 1.0 / mix.components()[0].var;
    auto edges = fisher_edges(mix);
    // order grows with the requested Gauss–Hermite budget; doubled until stable
    int order = std::max(8, std::min(gh_nodes / 10, 32));
    double prev = fisher_panels(mix, edges, order);
    for (int k = 0; k < 3; ++k) {
        order *= 2;
        double cur = fisher_panels(mix, edges, order);
        if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) return cur;
        prev = cur;
    }
    throw NumericalError("Fisher information quadrature did not converge");
}

double weighted_fisher_info(const PriorSpec& prior, const SpectrumSpec& spectrum, double alpha, double delta,
                            int gh_nodes, double tol) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    double acc = 0.0;
    for (const auto& l : spectrum.levels) {
        if (l.weight == 0.0) continue;
        auto mix = convolve(prior, alpha * alpha / (delta * l.lambda_sq));
        acc += l.weight * fisher_info(mix, gh_nodes, tol) / l.lambda_sq;
    }
    return acc;
}

double sample_prior(const PriorSpec& prior, CounterRng& rng) {
    double u = rng.uniform();
    double c = 0.0;
    for (const auto& a : prior.atoms) {
        c += a.weight;
        if (u < c) return a.loc;
    }
    for (const auto& g : prior.gaussians) {
        c += g.weight;
        if (u < c) return g.mean + std::sqrt(g.var) * rng.normal();
    }
    // rounding slack: last component
    if (!prior.gaussians.empty()) {
        const auto& g = prior.gaussians.back();
        return g.mean + std::sqrt(g.var) * rng.normal();
    }
    return prior.atoms.back().loc;
}

std::size_t sample_level(const SpectrumSpec& spectrum, CounterRng& rng) {
    double u = rng.uniform();
    double c = 0.0;
    for (std::size_t i = 0; i < spectrum.levels.size(); ++i) {
        c += spectrum.levels[i].weight;
        if (u < c) return i;
    }
    return spectrum.levels.size() - 1;
}

double expect_bhl(const BhlIntegrand& f, const PriorSpec& prior, const SpectrumSpec& spectrum,
                  const ExpectationEngine& eng, const HBreaks& h_breaks) {
    const QuadRule& gh = gauss_hermite(eng.gh_nodes);
    std::vector<QuadNode> nodes;
    auto h_integral = [&](double b, double lambda) {
        double acc = 0.0;
        if (h_breaks) {
            normal_split_nodes(h_breaks(b, lambda), nodes, eng.split);
            for (const auto& nd : nodes) acc += nd.w * f(b, nd.z, lambda);
        } else {
            for (std::size_t i = 0; i < gh.nodes.size(); ++i) acc += gh.weights[i] * f(b, gh.nodes[i], lambda);
        }
        return acc;
    };
    double total = 0.0;
    for (const auto& lev : spectrum.levels) {
        double lambda = std::sqrt(lev.lambda_sq);
        double acc = 0.0;
        for (const auto& a : prior.atoms) acc += a.weight * h_integral(a.loc, lambda);
        for (const auto& g : prior.gaussians) {
            double sd = std::sqrt(g.var), inner = 0.0;
            for (std::size_t j = 0; j < gh.nodes.size(); ++j) inner += gh.weights[j] * h_integral(g.mean + sd * gh.nodes[j], lambda);
            acc += g.weight * inner;
        }
        total += lev.weight * acc;
    }
    return total;
}

McEstimate expect_bhl_mc(const BhlIntegrand& f, const PriorSpec& prior, const SpectrumSpec& spectrum, long samples,
                         std::uint64_t seed, std::uint64_t integrand_id) {
    if (samples < 2) throw std::invalid_argument("need at least 2 Monte Carlo samples");
    CounterRng rng(seed, integrand_id);
    double mean = 0.0, m2 = 0.0;
    for (long k = 0; k < samples; ++k) {
        std::size_t li = sample_level(spectrum, rng);
        double lambda = std::sqrt(spectrum.levels[li].lambda_sq);
        double b = sample_prior(prior, rng);
        double h = rng.normal();
        double v = f(b, h, lambda);
        double d = v - mean;
        mean += d / static_cast<double>(k + 1);
        m2 += d * (v - mean);
    }
    double var = m2 / static_cast<double>(samples - 1);
    return {mean, std::sqrt(var / static_cast<double>(samples))};
}

}  // namespace ibias
