#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ibias {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double std_normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Probabilists' Gauss–Hermite: sum w_i f(z_i) ~ E f(Z), Z ~ N(0,1). Cached per order.
const QuadRule& gauss_hermite(int n);
// Gauss–Legendre on [-1, 1]. Cached per order.
const QuadRule& gauss_legendre(int n);

struct QuadNode {
    double z;
    double w;  // includes the standard normal density
};

struct SplitRule {
    double z_max = 11.0;
    double panel_width = 1.5;
    int order = 16;
};

// Composite Gauss–Legendre nodes for E f(Z), Z ~ N(0,1), with panel edges at the given breakpoints.
void normal_split_nodes(const std::vector<double>& breaks_z, std::vector<QuadNode>& out, const SplitRule& rule = {});

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
};

// Bracketed root of f on [a, b] (f(a), f(b) of opposite sign) via TOMS 748.
RootResult solve_bracketed(const std::function<double(double)>& f, double a, double b, double fa, double fb,
                           double xtol, int max_iter);

struct Bracket {
    double lo, hi, flo, fhi;
};

// Scan outward from x0 multiplying/dividing by factor until f changes sign, within [xmin, xmax].
std::optional<Bracket> expand_bracket_geometric(const std::function<double(double)>& f, double x0, double factor,
                                                double xmin, double xmax);

// Counter-based generator keyed by (seed, stream).
class CounterRng {
public:
    using result_type = std::uint64_t;
    CounterRng(std::uint64_t seed, std::uint64_t stream);
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();
    double uniform();  // in (0, 1)
    double normal();
    void seek(std::uint64_t counter) {
        counter_ = counter;
        have_spare_ = false;
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace ibias
