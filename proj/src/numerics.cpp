#include "ibias/numerics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <map>
#include <memory>
#include <mutex>

namespace ibias {

namespace {

std::mutex rule_mutex;
std::map<int, std::unique_ptr<QuadRule>> gh_cache;
std::map<int, std::unique_ptr<QuadRule>> gl_cache;

// Golub–Welsch for the probabilists' Hermite recurrence: off-diagonal sqrt(k).
QuadRule build_gh(int n) {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(n - 1);
    for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigenproblem failed");
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = es.eigenvalues()[i];
        double v0 = es.eigenvectors()(0, i);
        r.weights[i] = v0 * v0;
    }
    // symmetrize to remove eigen-solver asymmetry
    for (int i = 0; i < n / 2; ++i) {
        int j = n - 1 - i;
        double z = 0.5 * (r.nodes[j] - r.nodes[i]);
        double w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -z;
        r.nodes[j] = z;
        r.weights[i] = r.weights[j] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    double s = 0.0;
    for (double w : r.weights) s += w;
    for (double& w : r.weights) w /= s;
    return r;
}

QuadRule build_gl(int n) {
    QuadRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        r.weights[i] = r.weights[n - 1 - i] = w;
    }
    return r;
}

const QuadRule& cached(std::map<int, std::unique_ptr<QuadRule>>& cache, int n, QuadRule (*build)(int)) {
    std::lock_guard<std::mutex> lock(rule_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    auto rule = std::make_unique<QuadRule>(build(n));
    auto& ref = *rule;
    cache.emplace(n, std::move(rule));
    return ref;
}

}  // namespace

const QuadRule& gauss_hermite(int n) {
    if (n < 1) throw std::invalid_argument("Gauss-Hermite order must be positive");
    return cached(gh_cache, n, build_gh);
}

const QuadRule& gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("Gauss-Legendre order must be positive");
    return cached(gl_cache, n, build_gl);
}

void normal_split_nodes(const std::vector<double>& breaks_z, std::vector<QuadNode>& out, const SplitRule& rule) {
    out.clear();
    const QuadRule& gl = gauss_legendre(rule.order);
    double edges[64];
    int ne = 0;
    edges[ne++] = -rule.z_max;
    for (double b : breaks_z)
        if (b > -rule.z_max && b < rule.z_max && ne < 62) edges[ne++] = b;
    edges[ne++] = rule.z_max;
    std::sort(edges, edges + ne);
    for (int s = 0; s + 1 < ne; ++s) {
        double a = edges[s], b = edges[s + 1];
        double len = b - a;
        if (len <= 0.0) continue;
        int panels = std::max(1, static_cast<int>(std::ceil(len / rule.panel_width)));
        double h = len / panels;
        for (int p = 0; p < panels; ++p) {
            double c = a + (p + 0.5) * h;
            double half = 0.5 * h;
            for (int i = 0; i < rule.order; ++i) {
                double z = c + half * gl.nodes[i];
                out.push_back({z, gl.weights[i] * half * std_normal_pdf(z)});
            }
        }
    }
}

RootResult solve_bracketed(const std::function<double(double)>& f, double a, double b, double fa, double fb,
                           double xtol, int max_iter) {
    RootResult r;
    if (fa == 0.0) return {a, 0.0, 0};
    if (fb == 0.0) return {b, 0.0, 0};
    if ((fa > 0) == (fb > 0)) throw NumericalError("root not bracketed");
    if (a > b) {
        std::swap(a, b);
        std::swap(fa, fb);
    }
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
    auto tol = [xtol](double lo, double hi) { return std::abs(hi - lo) <= xtol * std::max(1.0, std::abs(lo)); };
    auto pr = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    r.x = 0.5 * (pr.first + pr.second);
    r.fx = f(r.x);
    r.iterations = static_cast<int>(iters);
    return r;
}

std::optional<Bracket> expand_bracket_geometric(const std::function<double(double)>& f, double x0, double factor,
                                                double xmin, double xmax) {
    x0 = std::clamp(x0, xmin, xmax);
    double f0 = f(x0);
    if (f0 == 0.0) return Bracket{x0, x0, 0.0, 0.0};
    double up = x0, fup = f0, dn = x0, fdn = f0;
    while (up < xmax || dn > xmin) {
        if (up < xmax) {
            double nx = std::min(up * factor, xmax);
            double fn = f(nx);
            if ((fn > 0) != (fup > 0) || fn == 0.0) return Bracket{up, nx, fup, fn};
            up = nx;
            fup = fn;
        }
        if (dn > xmin) {
            double nx = std::max(dn / factor, xmin);
            double fn = f(nx);
            if ((fn > 0) != (fdn > 0) || fn == 0.0) return Bracket{nx, dn, fn, fdn};
            dn = nx;
            fdn = fn;
        }
    }
    return std::nullopt;
}

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + 0x9e3779b97f4a7c15ull))) {}

CounterRng::result_type CounterRng::operator()() {
    return mix64(key_ + 0x9e3779b97f4a7c15ull * (++counter_));
}

double CounterRng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double CounterRng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
}

}  // namespace ibias
