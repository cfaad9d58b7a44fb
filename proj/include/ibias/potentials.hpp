#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace ibias {

// Derivative table for one spectrum level on a uniform grid. psi'(v) is the monotone cubic (PCHIP)
// interpolant of dpsi; psi is its exact antiderivative, anchored at psi(center) = 0.
struct TableLevel {
    double lambda_sq = 1.0;
    double v0 = 0.0;
    double h = 1.0;
    std::vector<double> dpsi;
    std::vector<double> slope;     // d(dpsi)/dv at the knots
    std::vector<double> psi_knot;  // antiderivative at the knots
    double argmin = 0.0;           // a zero of psi'
    double guard = 4.0;            // queries allowed up to guard * half-span from the center

    std::size_t size() const { return dpsi.size(); }
    double v_last() const { return v0 + h * static_cast<double>(dpsi.size() - 1); }
    double center() const { return 0.5 * (v0 + v_last()); }

    double derivative(double v) const;
    double second_derivative(double v) const;
    double value(double v) const;
};

TableLevel make_table_level(double lambda_sq, double v0, double h, std::vector<double> dpsi);

struct PotentialTable {
    std::vector<TableLevel> levels;
    const TableLevel& level_for(double lambda) const;
};

class ScalarPotential {
public:
    enum class Kind { power, weighted_quadratic, tabulated };

    static ScalarPotential power(int p);
    static ScalarPotential weighted_quadratic(std::function<double(double)> coef_of_lambda, std::string name = "wquad");
    static ScalarPotential tabulated(std::shared_ptr<const PotentialTable> table, std::string name = "opt");

    Kind kind() const { return kind_; }
    int p() const { return p_; }
    const std::string& name() const { return name_; }
    double coef(double lambda) const { return coef_(lambda); }
    const PotentialTable& table() const { return *table_; }

    // true when M'(x; t) is smooth in x (plain Gauss–Hermite is adequate)
    bool smooth() const;
    // kinks of the prox map in x for Moreau parameter t
    std::vector<double> breakpoints(double t, double lambda) const;

private:
    Kind kind_ = Kind::power;
    int p_ = 2;
    std::function<double(double)> coef_;
    std::shared_ptr<const PotentialTable> table_;
    std::string name_;
};

struct ProxEval {
    double prox = 0.0;
    double envelope = 0.0;
    double envelope_grad_x = 0.0;
};

double eval(const ScalarPotential& pot, double v, double lambda);
double derivative(const ScalarPotential& pot, double v, double lambda);
double prox_point(const ScalarPotential& pot, double x, double t, double lambda);
ProxEval prox(const ScalarPotential& pot, double x, double t, double lambda);
double min_value(const ScalarPotential& pot, double lambda);
std::pair<double, double> moreau_limits_check(const ScalarPotential& pot, double x, double lambda);

inline double soft_threshold(double x, double t) {
    double a = (x < 0 ? -x : x) - t;
    if (a <= 0.0) return 0.0;
    return x < 0 ? -a : a;
}

}  // namespace ibias
