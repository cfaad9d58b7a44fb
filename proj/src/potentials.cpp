#include "ibias/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ibias {

namespace {

double pchip_end_slope(double h0, double h1, double d0, double d1) {
    double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if ((m > 0) != (d0 > 0) || m == 0.0) return 0.0;
    if ((d0 > 0) != (d1 > 0) && std::abs(m) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return m;
}

struct Locate {
    std::size_t i;
    double tau;
};

Locate locate(const TableLevel& L, double v) {
    double s = (v - L.v0) / L.h;
    auto last = static_cast<double>(L.size() - 2);
    double fi = std::floor(s);
    if (fi < 0.0) fi = 0.0;
    if (fi > last) fi = last;
    return {static_cast<std::size_t>(fi), s - fi};
}

void check_guard(const TableLevel& L, double v) {
    double half = 0.5 * (L.v_last() - L.v0);
    if (!(std::abs(v - L.center()) <= L.guard * half))
        throw std::out_of_range("tabulated potential queried outside its range");
}

}  // namespace

TableLevel make_table_level(double lambda_sq, double v0, double h, std::vector<double> dpsi) {
    if (dpsi.size() < 3) throw std::invalid_argument("table needs at least 3 points");
    if (!(h > 0.0)) throw std::invalid_argument("table spacing must be positive");
    TableLevel L;
    L.lambda_sq = lambda_sq;
    L.v0 = v0;
    L.h = h;
    L.dpsi = std::move(dpsi);
    const std::size_t n = L.dpsi.size();
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (L.dpsi[i + 1] - L.dpsi[i]) / h;
    L.slope.assign(n, 0.0);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (d[k - 1] == 0.0 || d[k] == 0.0 || (d[k - 1] > 0) != (d[k] > 0)) L.slope[k] = 0.0;
        else L.slope[k] = 2.0 / (1.0 / d[k - 1] + 1.0 / d[k]);
    }
    L.slope[0] = pchip_end_slope(h, h, d[0], d[1]);
    L.slope[n - 1] = pchip_end_slope(h, h, d[n - 2], d[n - 3]);

    L.psi_knot.assign(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        // exact integral of the cubic Hermite segment
        double seg = h * (0.5 * (L.dpsi[i] + L.dpsi[i + 1]) + h * (L.slope[i] - L.slope[i + 1]) / 12.0);
        L.psi_knot[i + 1] = L.psi_knot[i] + seg;
    }
    L.psi_knot.shrink_to_fit();
    double c = L.value(L.center());
    for (double& p : L.psi_knot) p -= c;

    L.argmin = L.center();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double a = L.dpsi[i], b = L.dpsi[i + 1];
        if (a <= 0.0 && b >= 0.0) {
            L.argmin = (b == a) ? L.v0 + h * i : L.v0 + h * (i + a / (a - b));
            break;
        }
    }
    if (L.dpsi.front() > 0.0) L.argmin = L.v0;
    if (L.dpsi.back() < 0.0) L.argmin = L.v_last();
    return L;
}

double TableLevel::derivative(double v) const {
    check_guard(*this, v);
    if (v < v0) return dpsi.front() + slope.front() * (v - v0);
    double vl = v_last();
    if (v > vl) return dpsi.back() + slope.back() * (v - vl);
    auto [i, t] = locate(*this, v);
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t, h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    return h00 * dpsi[i] + h10 * h * slope[i] + h01 * dpsi[i + 1] + h11 * h * slope[i + 1];
}

double TableLevel::second_derivative(double v) const {
    check_guard(*this, v);
    if (v < v0) return slope.front();
    if (v > v_last()) return slope.back();
    auto [i, t] = locate(*this, v);
    double t2 = t * t;
    double d00 = 6 * t2 - 6 * t, d10 = 3 * t2 - 4 * t + 1, d01 = -6 * t2 + 6 * t, d11 = 3 * t2 - 2 * t;
    return (d00 * dpsi[i] + d01 * dpsi[i + 1]) / h + d10 * slope[i] + d11 * slope[i + 1];
}

double TableLevel::value(double v) const {
    check_guard(*this, v);
    if (v < v0) {
        double d = v - v0;
        return psi_knot.front() + dpsi.front() * d + 0.5 * slope.front() * d * d;
    }
    double vl = v_last();
    if (v > vl) {
        double d = v - vl;
        return psi_knot.back() + dpsi.back() * d + 0.5 * slope.back() * d * d;
    }
    auto [i, t] = locate(*this, v);
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    double i00 = t - t3 + 0.5 * t4;
    double i10 = 0.5 * t2 - 2.0 * t3 / 3.0 + 0.25 * t4;
    double i01 = t3 - 0.5 * t4;
    double i11 = -t3 / 3.0 + 0.25 * t4;
    return psi_knot[i] + h * (i00 * dpsi[i] + i10 * h * slope[i] + i01 * dpsi[i + 1] + i11 * h * slope[i + 1]);
}

const TableLevel& PotentialTable::level_for(double lambda) const {
    double lsq = lambda * lambda;
    for (const auto& L : levels)
        if (std::abs(L.lambda_sq - lsq) <= 1e-9 * std::max(1.0, lsq)) return L;
    throw std::out_of_range("tabulated potential has no level for lambda^2 = " + std::to_string(lsq));
}

ScalarPotential ScalarPotential::power(int p) {
    if (p < 1 || p > 3) throw std::invalid_argument("power potential needs p in {1,2,3}");
    ScalarPotential s;
    s.kind_ = Kind::power;
    s.p_ = p;
    s.name_ = "l" + std::to_string(p);
    return s;
}

ScalarPotential ScalarPotential::weighted_quadratic(std::function<double(double)> coef_of_lambda, std::string name) {
    ScalarPotential s;
    s.kind_ = Kind::weighted_quadratic;
    s.coef_ = std::move(coef_of_lambda);
    s.name_ = std::move(name);
    return s;
}

ScalarPotential ScalarPotential::tabulated(std::shared_ptr<const PotentialTable> table, std::string name) {
    if (!table || table->levels.empty()) throw std::invalid_argument("empty potential table");
    ScalarPotential s;
    s.kind_ = Kind::tabulated;
    s.table_ = std::move(table);
    s.name_ = std::move(name);
    return s;
}

bool ScalarPotential::smooth() const {
    return kind_ == Kind::weighted_quadratic || (kind_ == Kind::power && p_ == 2);
}

std::vector<double> ScalarPotential::breakpoints(double t, double) const {
    if (kind_ == Kind::power && p_ == 1) return {-t, t};
    if (kind_ == Kind::power && p_ == 3) return {0.0};
    return {};
}

double eval(const ScalarPotential& pot, double v, double lambda) {
    switch (pot.kind()) {
        case ScalarPotential::Kind::power: {
            double a = std::abs(v);
            return pot.p() == 1 ? a : pot.p() == 2 ? a * a : a * a * a;
        }
        case ScalarPotential::Kind::weighted_quadratic:
            return 0.5 * pot.coef(lambda) * v * v;
        case ScalarPotential::Kind::tabulated:
            return pot.table().level_for(lambda).value(v);
    }
    return 0.0;
}

double derivative(const ScalarPotential& pot, double v, double lambda) {
    switch (pot.kind()) {
        case ScalarPotential::Kind::power: {
            double s = (v > 0) - (v < 0);
            return pot.p() == 1 ? s : pot.p() == 2 ? 2.0 * v : 3.0 * v * std::abs(v);
        }
        case ScalarPotential::Kind::weighted_quadratic:
            return pot.coef(lambda) * v;
        case ScalarPotential::Kind::tabulated:
            return pot.table().level_for(lambda).derivative(v);
    }
    return 0.0;
}

namespace {

// root of y + t psi'(y) = x
double table_prox(const TableLevel& L, double x, double t) {
    auto g = [&](double y) { return y + t * L.derivative(y) - x; };
    double lo = std::min(x, L.argmin), hi = std::max(x, L.argmin);
    double glo = g(lo), ghi = g(hi);
    double span = std::max(1.0, hi - lo);
    int expand = 0;
    while (glo > 0.0 && expand++ < 60) {
        lo -= span;
        span *= 2.0;
        glo = g(lo);
    }
    expand = 0;
    span = std::max(1.0, hi - lo);
    while (ghi < 0.0 && expand++ < 60) {
        hi += span;
        span *= 2.0;
        ghi = g(hi);
    }
    if (glo > 0.0 || ghi < 0.0) throw std::runtime_error("tabulated prox: bracket expansion failed");
    if (glo == 0.0) return lo;
    if (ghi == 0.0) return hi;
    double y = lo + (hi - lo) * (-glo) / (ghi - glo);
    for (int it = 0; it < 200; ++it) {
        double gy = g(y);
        if (gy == 0.0) return y;
        if (gy < 0.0) lo = y;
        else hi = y;
        double dg = 1.0 + t * L.second_derivative(y);
        double ny = y - gy / dg;
        if (!(dg > 0.0) || !(ny > lo && ny < hi)) ny = 0.5 * (lo + hi);
        if (std::abs(ny - y) <= 1e-15 * std::max(1.0, std::abs(y)) || hi - lo <= 1e-15 * std::max(1.0, std::abs(y)))
            return ny;
        y = ny;
    }
    return y;
}

}  // namespace

double prox_point(const ScalarPotential& pot, double x, double t, double lambda) {
    switch (pot.kind()) {
        case ScalarPotential::Kind::power:
            if (pot.p() == 1) return soft_threshold(x, t);
            if (pot.p() == 2) return x / (1.0 + 2.0 * t);
            {
                double a = std::abs(x);
                double r = 2.0 * a / (1.0 + std::sqrt(1.0 + 12.0 * t * a));
                return x < 0 ? -r : r;
            }
        case ScalarPotential::Kind::weighted_quadratic:
            return x / (1.0 + t * pot.coef(lambda));
        case ScalarPotential::Kind::tabulated:
            return table_prox(pot.table().level_for(lambda), x, t);
    }
    return 0.0;
}

ProxEval prox(const ScalarPotential& pot, double x, double t, double lambda) {
    if (!(t > 0.0)) throw std::invalid_argument("prox parameter t must be positive");
    ProxEval e;
    e.prox = prox_point(pot, x, t, lambda);
    double d = x - e.prox;
    e.envelope = eval(pot, e.prox, lambda) + d * d / (2.0 * t);
    e.envelope_grad_x = d / t;
    return e;
}

double min_value(const ScalarPotential& pot, double lambda) {
    if (pot.kind() == ScalarPotential::Kind::tabulated) {
        const auto& L = pot.table().level_for(lambda);
        return L.value(L.argmin);
    }
    return 0.0;
}

std::pair<double, double> moreau_limits_check(const ScalarPotential& pot, double x, double lambda) {
    return {prox(pot, x, 1e-8, lambda).envelope, prox(pot, x, 1e8, lambda).envelope};
}

}  // namespace ibias
