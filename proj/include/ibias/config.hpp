#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ibias {

struct Atom {
    double loc = 0.0;
    double weight = 0.0;
    bool operator==(const Atom&) const = default;
};

struct GaussComp {
    double mean = 0.0;
    double var = 1.0;
    double weight = 0.0;
    bool operator==(const GaussComp&) const = default;
};

struct PriorSpec {
    std::vector<Atom> atoms;
    std::vector<GaussComp> gaussians;
    bool operator==(const PriorSpec&) const = default;
};

struct Level {
    double lambda_sq = 1.0;
    double weight = 1.0;
    bool operator==(const Level&) const = default;
};

struct SpectrumSpec {
    std::vector<Level> levels{Level{}};
    bool operator==(const SpectrumSpec&) const = default;
};

struct SolverSettings {
    int gh_nodes = 200;
    double quad_abs_tol = 1e-10;
    double root_tol = 1e-10;
    int max_iter = 200;
    double alpha_lo = 1e-6;
    double alpha_hi = 1e3;
    double admm_rho = 1.0;
    double admm_tol = 1e-8;
    int admm_max_iter = 50000;
    bool operator==(const SolverSettings&) const = default;
};

struct ProblemConfig {
    double delta = 0.3;
    double sigma = 0.3;
    PriorSpec prior;
    SpectrumSpec spectrum;
    SolverSettings settings;
    std::uint64_t seed = 0;
    bool operator==(const ProblemConfig&) const = default;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

PriorSpec gaussian_prior(double mean = 0.0, double var = 1.0);
PriorSpec rademacher_prior();
// atom at 0 with mass 1-s plus N(0, 1/s) with mass s
PriorSpec sparse_gaussian_prior(double sparsity);
SpectrumSpec identity_spectrum();
SpectrumSpec bilevel_spectrum(double hi_sq, double hi_w, double lo_sq);

double prior_second_moment(const PriorSpec& prior);
double prior_variance(const PriorSpec& prior);
double prior_atom_mass_at(const PriorSpec& prior, double loc);
PriorSpec normalize_prior(const PriorSpec& prior);
bool prior_has_atoms(const PriorSpec& prior);

double spectrum_moment(const SpectrumSpec& s, double power);

// Throws ConfigError on violation. Returns non-fatal notes (e.g. sigma == 0).
std::vector<std::string> validate(const ProblemConfig& cfg);

ProblemConfig parse_config(const std::string& text);
ProblemConfig load_config(const std::string& path);
std::string serialize_config(const ProblemConfig& cfg);
std::string config_hash(const ProblemConfig& cfg);

}  // namespace ibias
