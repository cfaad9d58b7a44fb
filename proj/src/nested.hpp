#pragma once

#include <functional>
#include <sstream>
#include <utility>
#include <vector>

#include "ibias/asymptotics.hpp"
#include "ibias/numerics.hpp"

namespace ibias::detail {

// root of phi over a positive parameter, bracket grown geometrically from guess
inline double inner_root(const std::function<double(double)>& phi, double guess, double pmin, double pmax, double xtol,
                         int max_iter, const char* what) {
    auto br = expand_bracket_geometric(phi, guess, 4.0, pmin, pmax);
    if (!br) {
        std::ostringstream o;
        o << "no inner root for " << what << " in [" << pmin << ", " << pmax << "]: phi(" << pmin << ")=" << phi(pmin)
          << ", phi(" << pmax << ")=" << phi(pmax);
        throw SolverError(o.str());
    }
    if (br->lo == br->hi) return br->lo;
    return solve_bracketed(phi, br->lo, br->hi, br->flo, br->fhi, xtol, max_iter).x;
}

struct NestedResult {
    double alpha = 0.0;
    double value = 0.0;
    int iterations = 0;
    std::vector<std::pair<double, double>> brackets;
};

// Scan a geometric alpha grid for sign changes of outer(alpha), then refine the smallest one.
// zero_ok: with no sign change anywhere the fixed point is alpha = 0 (noiseless exact recovery).
inline NestedResult nested_root(const std::function<double(double)>& outer, double lo, double hi0, double hi_max,
                                int grid, double xtol, int max_iter, const char* what, bool zero_ok = false) {
    NestedResult res;
    std::vector<double> as, vs;
    double ratio = std::pow(hi0 / lo, 1.0 / (grid - 1));
    for (int i = 0; i < grid; ++i) {
        double a = (i == grid - 1) ? hi0 : lo * std::pow(ratio, i);
        as.push_back(a);
        vs.push_back(outer(a));
    }
    auto collect = [&](std::size_t from) {
        for (std::size_t i = from; i + 1 < as.size(); ++i)
            if ((vs[i] > 0) != (vs[i + 1] > 0) || vs[i + 1] == 0.0) res.brackets.emplace_back(as[i], as[i + 1]);
    };
    collect(0);
    while (res.brackets.empty() && as.back() < hi_max) {
        double a = std::min(as.back() * 2.0, hi_max);
        as.push_back(a);
        vs.push_back(outer(a));
        collect(as.size() - 2);
    }
    if (res.brackets.empty() && zero_ok) {
        res.alpha = 0.0;
        res.value = vs.front();
        return res;
    }
    if (res.brackets.empty()) {
        std::ostringstream o;
        o << "no outer sign change for " << what << " on alpha grid:";
        for (std::size_t i = 0; i < as.size(); i += std::max<std::size_t>(1, as.size() / 8))
            o << " (" << as[i] << ", " << vs[i] << ")";
        o << " (" << as.back() << ", " << vs.back() << ")";
        throw SolverError(o.str());
    }
    auto [a, b] = res.brackets.front();
    std::size_t ia = 0;
    while (as[ia] != a) ++ia;
    auto rr = solve_bracketed(outer, a, b, vs[ia], vs[ia + 1], xtol, max_iter);
    res.alpha = rr.x;
    res.value = rr.fx;
    res.iterations = rr.iterations;
    return res;
}

}  // namespace ibias::detail
