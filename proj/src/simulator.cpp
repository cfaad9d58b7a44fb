#include "ibias/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "ibias/densities.hpp"
#include "ibias/numerics.hpp"
#include "ibias/parallel.hpp"

namespace ibias {

Dataset generate_dataset(const ProblemConfig& cfg, int n, std::uint64_t seed) {
    if (n < 10) throw std::invalid_argument("n must be at least 10");
    int m = static_cast<int>(std::lround(cfg.delta * n));
    if (m < 1) throw std::invalid_argument("round(delta n) must be at least 1");
    Dataset ds;
    ds.n = n;
    ds.m = m;
    ds.X.resize(m, n);
    ds.beta_star.resize(n);
    ds.sigma_diag.resize(n);
    CounterRng coords(seed, 1), feats(seed, 2), noise(seed, 3);
    for (int i = 0; i < n; ++i) {
        ds.sigma_diag[i] = cfg.spectrum.levels[sample_level(cfg.spectrum, coords)].lambda_sq;
        ds.beta_star[i] = sample_prior(cfg.prior, coords);
    }
    double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    for (int i = 0; i < n; ++i) {
        double sc = std::sqrt(ds.sigma_diag[i]) * inv_sqrt_n;
        for (int j = 0; j < m; ++j) ds.X(j, i) = sc * feats.normal();
    }
    ds.z.resize(m);
    for (int j = 0; j < m; ++j) ds.z[j] = cfg.sigma * noise.normal();
    ds.y = ds.X * ds.beta_star + ds.z;
    return ds;
}

namespace {

double rel_residual(const Dataset& ds, const Eigen::VectorXd& b) {
    double ny = ds.y.norm();
    double r = (ds.X * b - ds.y).norm();
    return ny > 0.0 ? r / ny : r;
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& Xs) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(Xs.rows(), Xs.rows());
    G.selfadjointView<Eigen::Lower>().rankUpdate(Xs);
    return G;
}

struct AffineProjector {
    const Dataset& ds;
    Eigen::LLT<Eigen::MatrixXd> llt;

    explicit AffineProjector(const Dataset& d) : ds(d), llt(gram(d.X)) {
        if (llt.info() != Eigen::Success) throw std::runtime_error("Cholesky of X X^T failed");
    }
    Eigen::VectorXd operator()(const Eigen::VectorXd& v) const {
        Eigen::VectorXd r = ds.X * v - ds.y;
        return v - ds.X.transpose() * llt.solve(r);
    }
};

// Certificate for a candidate vertex of a polyhedral problem; fills beta on success.
using VertexCheck = std::function<bool(const Eigen::VectorXd& z, Eigen::VectorXd& beta)>;

template <class Prox>
InterpolationResult admm(const Dataset& ds, const SolverSettings& s, Prox&& prox_step,
                         const VertexCheck& certify = nullptr) {
    AffineProjector proj(ds);
    const double rho = s.admm_rho;
    const double tol = s.admm_tol * std::sqrt(static_cast<double>(ds.n));
    Eigen::VectorXd z = proj(Eigen::VectorXd::Zero(ds.n));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(ds.n);
    Eigen::VectorXd beta(ds.n), zold(ds.n);
    InterpolationResult res;
    res.converged = false;
    int it = 0;
    for (; it < s.admm_max_iter; ++it) {
        beta = proj(z - u);
        zold = z;
        z = beta + u;
        prox_step(z, 1.0 / rho);
        u += beta - z;
        double pr = (beta - z).norm();
        double du = rho * (z - zold).norm();
        if (pr <= tol && du <= tol) {
            res.converged = true;
            ++it;
            break;
        }
        if (certify && it >= 50 && it % 25 == 0) {
            Eigen::VectorXd exact;
            if (certify(z, exact)) {
                res.converged = true;
                res.certified = true;
                ++it;
                res.solver_iterations = it;
                res.beta_prox = exact;
                res.beta_hat = exact;
                res.constraint_residual = rel_residual(ds, exact);
                return res;
            }
        }
    }
    res.solver_iterations = it;
    res.beta_prox = z;
    res.beta_hat = proj(z);
    res.constraint_residual = rel_residual(ds, res.beta_hat);
    return res;
}

}  // namespace

InterpolationResult solve_quadratic_interpolator(const Dataset& ds, const std::function<double(double)>& a_of_lambda) {
    Eigen::VectorXd ainv(ds.n);
    for (int i = 0; i < ds.n; ++i) {
        double a = a_of_lambda(std::sqrt(ds.sigma_diag[i]));
        if (!(a > 0.0)) throw std::invalid_argument("quadratic coefficients must be positive");
        ainv[i] = 1.0 / a;
    }
    Eigen::MatrixXd Xs = ds.X * ainv.cwiseSqrt().asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(gram(Xs));
    if (llt.info() != Eigen::Success) throw std::runtime_error("Cholesky of X A^-1 X^T failed");
    Eigen::VectorXd w = llt.solve(ds.y);
    InterpolationResult res;
    res.beta_hat = ainv.asDiagonal() * (ds.X.transpose() * w);
    res.constraint_residual = rel_residual(ds, res.beta_hat);
    res.objective = 0.0;
    for (int i = 0; i < ds.n; ++i) res.objective += 0.5 * res.beta_hat[i] * res.beta_hat[i] / ainv[i];
    return res;
}

namespace {

std::vector<int> top_indices(const Eigen::VectorXd& score, int k) {
    std::vector<int> idx(score.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::nth_element(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) { return score[a] > score[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& X, const std::vector<int>& idx) {
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(k) = X.col(idx[k]);
    return out;
}

constexpr double kCertSlack = 1e-9;

// min ||b||_1 s.t. Xb = y: basis from the m largest |z|, dual w with X_S^T w = sign(b_S), |X^T w| <= 1
VertexCheck l1_vertex_check(const Dataset& ds) {
    auto last = std::make_shared<std::vector<int>>();
    return [&ds, last](const Eigen::VectorXd& z, Eigen::VectorXd& beta) {
        int nnz = static_cast<int>((z.array() != 0.0).count());
        if (nnz < ds.m) return false;
        auto S = top_indices(z.cwiseAbs(), ds.m);
        if (S == *last) return false;
        *last = S;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(columns(ds.X, S));
        Eigen::VectorXd bS = lu.solve(ds.y);
        Eigen::VectorXd sg(ds.m);
        for (int k = 0; k < ds.m; ++k) {
            if (bS[k] == 0.0 || (bS[k] > 0) != (z[S[k]] > 0)) return false;
            sg[k] = bS[k] > 0 ? 1.0 : -1.0;
        }
        Eigen::VectorXd w = lu.transpose().solve(sg);
        if ((ds.X.transpose() * w).cwiseAbs().maxCoeff() > 1.0 + kCertSlack) return false;
        beta = Eigen::VectorXd::Zero(ds.n);
        for (int k = 0; k < ds.m; ++k) beta[S[k]] = bS[k];
        return true;
    };
}

// min max|b| s.t. Xb = y: m-1 free coordinates, the rest at +-c; dual w with X_F^T w = 0,
// sum_T s_i (X^T w)_i = 1 and s_i (X^T w)_i >= 0 on T
VertexCheck linf_vertex_check(const Dataset& ds) {
    auto last = std::make_shared<std::vector<int>>();
    return [&ds, last](const Eigen::VectorXd& z, Eigen::VectorXd& beta) {
        const int nf = ds.m - 1;
        double cap = z.cwiseAbs().maxCoeff();
        if (!(cap > 0.0)) return false;
        // free set: coordinates furthest below the cap
        Eigen::VectorXd below = (cap - z.cwiseAbs().array()).matrix();
        auto F = nf > 0 ? top_indices(below, nf) : std::vector<int>{};
        if (F == *last) return false;
        *last = F;
        std::vector<char> is_free(ds.n, 0);
        for (int i : F) is_free[i] = 1;
        Eigen::VectorXd sT = Eigen::VectorXd::Zero(ds.n);
        for (int i = 0; i < ds.n; ++i)
            if (!is_free[i]) sT[i] = z[i] >= 0 ? 1.0 : -1.0;
        Eigen::MatrixXd A(ds.m, ds.m);
        for (int k = 0; k < nf; ++k) A.col(k) = ds.X.col(F[k]);
        A.col(nf) = ds.X * sT;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
        Eigen::VectorXd sol = lu.solve(ds.y);
        double c = sol[nf];
        if (!(c > 0.0)) return false;
        for (int k = 0; k < nf; ++k)
            if (std::abs(sol[k]) > c * (1.0 + kCertSlack)) return false;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ds.m);
        rhs[nf] = 1.0;
        Eigen::VectorXd w = lu.transpose().solve(rhs);
        Eigen::VectorXd g = ds.X.transpose() * w;
        double scale = 0.0;
        for (int i = 0; i < ds.n; ++i) scale = std::max(scale, std::abs(g[i]));
        for (int i = 0; i < ds.n; ++i)
            if (!is_free[i] && sT[i] * g[i] < -kCertSlack * scale) return false;
        beta = c * sT;
        for (int k = 0; k < nf; ++k) beta[F[k]] = sol[k];
        return true;
    };
}

}  // namespace

InterpolationResult solve_admm_interpolator(const Dataset& ds, const ScalarPotential& pot, const SolverSettings& s) {
    Eigen::VectorXd lam = ds.sigma_diag.cwiseSqrt();
    bool l1 = pot.kind() == ScalarPotential::Kind::power && pot.p() == 1;
    auto res = admm(
        ds, s,
        [&](Eigen::VectorXd& v, double t) {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = prox_point(pot, v[i], t, lam[i]);
        },
        l1 ? l1_vertex_check(ds) : VertexCheck{});
    res.objective = 0.0;
    for (int i = 0; i < ds.n; ++i) res.objective += eval(pot, res.beta_hat[i], lam[i]);
    return res;
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("l1-ball radius must be positive");
    if (v.lpNorm<1>() <= radius) return v;
    std::vector<double> a(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) a[i] = std::abs(v[i]);
    std::sort(a.begin(), a.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        cum += a[k];
        double t = (cum - radius) / static_cast<double>(k + 1);
        if (a[k] - t > 0.0) theta = t;
        else break;
    }
    Eigen::VectorXd w(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double m = std::max(std::abs(v[i]) - theta, 0.0);
        w[i] = v[i] < 0 ? -m : m;
    }
    return w;
}

Eigen::VectorXd prox_linf(const Eigen::VectorXd& x, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("prox parameter t must be positive");
    // Moreau decomposition with the dual-norm ball
    return x - t * project_l1_ball(x / t, 1.0);
}

InterpolationResult solve_linf_interpolator(const Dataset& ds, const SolverSettings& s) {
    const double scale = static_cast<double>(ds.n);
    auto res = admm(ds, s, [&](Eigen::VectorXd& v, double t) {
        // prox of scale * max|.|: subtract the projection onto the radius scale*t l1 ball
        Eigen::VectorXd p = project_l1_ball(v, scale * t);
        double cap = (v - p).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            // exact saturation: coordinates hitting the cap share one magnitude
            double r = v[i] - p[i];
            v[i] = (p[i] != 0.0) ? (v[i] < 0 ? -cap : cap) : r;
        }
    }, linf_vertex_check(ds));
    res.objective = res.beta_hat.cwiseAbs().maxCoeff();
    return res;
}

double empirical_excess_risk(const InterpolationResult& res, const Dataset& ds) {
    double acc = 0.0;
    for (int i = 0; i < ds.n; ++i) {
        double d = res.beta_hat[i] - ds.beta_star[i];
        acc += ds.sigma_diag[i] * d * d;
    }
    return acc / ds.n;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("KS needs nonempty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        double v;
        if (i == a.size()) v = b[j];
        else if (j == b.size()) v = a[i];
        else v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    return d;
}

double compare_weight_distribution(const InterpolationResult& res, const std::vector<double>& law_samples) {
    const auto& b = res.structural();
    return ks_two_sample(std::vector<double>(b.data(), b.data() + b.size()), law_samples);
}

double exact_zero_fraction(const InterpolationResult& res) {
    const auto& b = res.structural();
    return static_cast<double>((b.array() == 0.0).count()) / static_cast<double>(b.size());
}

InterpolationResult solve_interpolator(const Dataset& ds, const InterpolatorSpec& spec, const SolverSettings& s) {
    if (spec.quad_coef) return solve_quadratic_interpolator(ds, spec.quad_coef);
    if (spec.potential) return solve_admm_interpolator(ds, *spec.potential, s);
    if (spec.id == "linf") return solve_linf_interpolator(ds, s);
    throw std::invalid_argument("interpolator '" + spec.id + "' has no solver");
}

ReplicateSummary run_replicates(const ProblemConfig& cfg, int n, const InterpolatorSpec& spec,
                                const std::vector<std::uint64_t>& seeds, const std::vector<double>* law_samples,
                                int jobs) {
    ReplicateSummary out;
    out.per_seed.resize(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t k) {
        SeedResult& r = out.per_seed[k];
        r.seed = seeds[k];
        try {
            Dataset ds = generate_dataset(cfg, n, seeds[k]);
            InterpolationResult res = solve_interpolator(ds, spec, cfg.settings);
            r.iterations = res.solver_iterations;
            r.constraint_residual = res.constraint_residual;
            if (!res.converged) throw std::runtime_error("ADMM did not converge within admm_max_iter");
            if (!(res.constraint_residual < 10.0 * cfg.settings.admm_tol))
                throw std::runtime_error("interpolation residual above tolerance");
            r.excess_risk = empirical_excess_risk(res, ds);
            r.zero_fraction = exact_zero_fraction(res);
            if (law_samples) r.ks = compare_weight_distribution(res, *law_samples);
            r.ok = true;
        } catch (const std::exception& e) {
            r.ok = false;
            r.error = e.what();
        }
    });
    std::vector<double> vals, kss;
    for (const auto& r : out.per_seed) {
        if (!r.ok) {
            ++out.failures;
            continue;
        }
        vals.push_back(r.excess_risk);
        if (r.ks) kss.push_back(*r.ks);
    }
    if (!vals.empty()) {
        out.mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
        double ss = 0.0;
        for (double v : vals) ss += (v - out.mean) * (v - out.mean);
        out.std = vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1)) : 0.0;
    }
    if (!kss.empty()) out.mean_ks = std::accumulate(kss.begin(), kss.end(), 0.0) / kss.size();
    return out;
}

}  // namespace ibias
