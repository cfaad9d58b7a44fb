#include "ibias/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>

#include "ibias/parallel.hpp"
#include "ibias/pipeline.hpp"
#include "ibias/report.hpp"

namespace ibias {

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    auto num = [&](const std::string& s) {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "' in grid");
        return v;
    };
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        if (parts.size() != 3) throw std::invalid_argument("grid range must be start:stop:step");
        double a = num(parts[0]), b = num(parts[1]), h = num(parts[2]);
        if (!(h > 0.0) || b < a) throw std::invalid_argument("grid range needs step > 0 and stop >= start");
        long count = std::lround(std::floor((b - a) / h + 1e-9)) + 1;
        for (long i = 0; i < count; ++i) out.push_back(std::round((a + i * h) * 1e12) / 1e12);
        return out;
    }
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');)
        if (!p.empty()) out.push_back(num(p));
    if (out.empty()) throw std::invalid_argument("empty grid");
    return out;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');)
        if (!p.empty()) out.push_back(p);
    return out;
}

struct Globals {
    std::string config_path;
    std::string format = "csv";
    int jobs = 1;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    bool stamp = false;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ProblemConfig load(const Globals& g) {
    if (g.config_path.empty()) throw UsageError("--config is required");
    ProblemConfig cfg = load_config(g.config_path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

void emit(const Globals& g, const Table& t, std::ostream& out) {
    std::ostringstream buf;
    if (g.format == "json") write_json(t, buf);
    else write_csv(t, buf);
    if (g.out_path.empty()) {
        out << buf.str();
        return;
    }
    std::ofstream f(g.out_path, std::ios::binary);
    if (!f) throw UsageError("cannot open output file '" + g.out_path + "'");
    f << buf.str();
}

std::vector<std::uint64_t> resolve_seeds(const std::string& list, int replicates, std::uint64_t base) {
    std::vector<std::uint64_t> seeds;
    if (!list.empty()) {
        for (const auto& s : split_list(list)) seeds.push_back(std::stoull(s));
        return seeds;
    }
    for (int k = 0; k < replicates; ++k) seeds.push_back(base + static_cast<std::uint64_t>(k));
    return seeds;
}

const std::vector<std::string> kSweepColumns{"delta",        "sigma",         "potential", "theory_excess_risk",
                                             "lower_bound",  "empirical_mean", "empirical_std", "ks", "error"};

struct SimOptions {
    int n = 0;
    std::vector<std::uint64_t> seeds;
    bool compare_law = false;
    std::size_t law_count = 1000000;
};

struct SweepCell {
    std::optional<double> theory, bound, emp_mean, emp_std, ks;
    std::string error;
};

SweepCell evaluate_point(const ProblemConfig& cfg, const std::string& pot, const std::optional<double>& bound,
                         const SimOptions& sim) {
    SweepCell c;
    c.bound = bound;
    if (pot == "bound") return c;
    try {
        TheoryResult th = theory_for(pot, cfg);
        c.theory = th.excess_risk;
        if (!th.converged) c.error = "theory solver not converged";
        if (sim.n > 0) {
            auto spec = make_interpolator(pot, cfg);
            std::vector<double> law;
            if (sim.compare_law) law = law_samples(th, cfg, sim.law_count, cfg.seed ^ 0x1a3u);
            auto rep = run_replicates(cfg, sim.n, spec, sim.seeds, sim.compare_law ? &law : nullptr, 1);
            if (rep.failures < static_cast<int>(rep.per_seed.size())) {
                c.emp_mean = rep.mean;
                c.emp_std = rep.std;
                c.ks = rep.mean_ks;
            }
            if (rep.failures > 0) {
                if (!c.error.empty()) c.error += "; ";
                c.error += std::to_string(rep.failures) + " simulation seed(s) failed: " + rep.per_seed[0].error;
            }
        }
    } catch (const std::exception& e) {
        c.error = e.what();
    }
    return c;
}

Table sweep_table(const Globals& g, const std::string& cmd, const ProblemConfig& cfg) {
    Table t;
    t.columns = kSweepColumns;
    t.meta = header_meta(cmd, cfg, g.stamp);
    return t;
}

void add_sweep_row(Table& t, const ProblemConfig& cfg, const std::string& pot, const SweepCell& c) {
    t.add({cfg.delta, cfg.sigma, pot, opt_cell(c.theory), opt_cell(c.bound), opt_cell(c.emp_mean), opt_cell(c.emp_std),
           opt_cell(c.ks), c.error});
}

std::optional<double> bound_excess(const ProblemConfig& cfg) {
    if (!(cfg.sigma > 0.0)) return std::nullopt;
    return solve_lower_bound(cfg).excess(cfg.sigma);
}

// ---- commands ----

int cmd_theory(const Globals& g, const std::string& pot, const std::string& method, std::ostream& out) {
    ProblemConfig cfg = load(g);
    TheoryResult th = theory_for(pot, cfg, method);
    std::optional<double> bound = bound_excess(cfg);
    Table t;
    t.columns = {"delta",     "sigma",      "potential", "method",   "risk",       "theory_excess_risk", "lower_bound",
                 "alpha",     "param_name", "param",     "iterations", "converged", "residual1",           "residual2"};
    t.meta = header_meta("theory", cfg, g.stamp);
    t.add({cfg.delta, cfg.sigma, pot, th.method, th.risk, th.excess_risk, opt_cell(bound), th.alpha, th.param_name,
           th.param, static_cast<long long>(th.iterations), th.converged, th.residual1,
           th.residual2});
    emit(g, t, out);
    return th.converged ? exit_ok : exit_solver;
}

int cmd_lower_bound(const Globals& g, std::ostream& out) {
    ProblemConfig cfg = load(g);
    LowerBoundResult lb = solve_lower_bound(cfg);
    std::optional<double> simple;
    try {
        simple = isotropic_simplified_bound(cfg);
    } catch (const UnsupportedCase&) {
    }
    Table t;
    t.columns = {"delta",          "sigma",             "alpha_star_sq",    "lower_bound", "iterations",
                 "h_residual",     "simplified_applies", "simplified_bound"};
    t.meta = header_meta("lower-bound", cfg, g.stamp);
    t.add({cfg.delta, cfg.sigma, lb.alpha_star_sq, lb.excess(cfg.sigma), static_cast<long long>(lb.iterations),
           lb.h_residual, simple.has_value(), opt_cell(simple)});
    emit(g, t, out);
    return exit_ok;
}

int cmd_opt_potential(const Globals& g, int points, std::ostream& out, std::ostream& err) {
    ProblemConfig cfg = load(g);
    LowerBoundResult lb = solve_lower_bound(cfg);
    OptimalPotentialTable tab = build_optimal_potential(cfg, lb.alpha_star(), points);
    double ident = verify_candidate_identity(cfg, tab);
    Table t;
    t.columns = {"lambda_sq", "v", "psi", "dpsi"};
    t.meta = header_meta("opt-potential", cfg, g.stamp);
    t.meta["alpha_star_sq"] = lb.alpha_star_sq;
    t.meta["convexity_ok"] = tab.convexity_ok();
    t.meta["candidate_identity_max_error"] = ident;
    nlohmann::ordered_json lv = nlohmann::ordered_json::array();
    for (const auto& L : tab.levels)
        lv.push_back({{"lambda_sq", L.lambda_sq},
                      {"moreau_param", L.moreau_param},
                      {"convexity_ok", L.convexity_ok},
                      {"max_violation", L.max_violation},
                      {"violation_v", L.violation_v}});
    t.meta["levels"] = lv;
    for (const auto& L : tab.levels)
        for (std::size_t i = 0; i < L.v_grid.size(); ++i)
            t.add({L.lambda_sq, L.v_grid[i], L.psi_values[i], L.psi_derivative[i]});
    emit(g, t, out);
    std::ostream& info = g.out_path.empty() ? err : out;
    info << "alpha_star_sq=" << format_number(lb.alpha_star_sq) << " convexity_ok=" << (tab.convexity_ok() ? "true" : "false")
         << " candidate_identity_max_error=" << format_number(ident) << "\n";
    if (!tab.convexity_ok()) {
        err << "optimal potential is not convex: " << tab.convexity_report() << "\n";
        return exit_admissibility;
    }
    return exit_ok;
}

int cmd_simulate(const Globals& g, const std::string& pot, const SimOptions& sim, std::ostream& out) {
    ProblemConfig cfg = load(g);
    if (sim.n < 10) throw UsageError("--n must be at least 10");
    auto spec = make_interpolator(pot, cfg);
    std::vector<double> law;
    if (sim.compare_law) law = law_samples(theory_for(pot, cfg), cfg, sim.law_count, cfg.seed ^ 0x1a3u);
    auto rep = run_replicates(cfg, sim.n, spec, sim.seeds, sim.compare_law ? &law : nullptr, g.jobs);
    Table t;
    t.columns = {"seed",      "n",          "potential",  "empirical_excess_risk", "empirical_std",
                 "ks",        "zero_fraction", "iterations", "constraint_residual",   "error"};
    t.meta = header_meta("simulate", cfg, g.stamp);
    for (const auto& r : rep.per_seed) {
        if (r.ok)
            t.add({std::to_string(r.seed), static_cast<long long>(sim.n), pot, r.excess_risk, Cell{}, opt_cell(r.ks),
                   r.zero_fraction, static_cast<long long>(r.iterations), r.constraint_residual, std::string()});
        else
            t.add({std::to_string(r.seed), static_cast<long long>(sim.n), pot, Cell{}, Cell{}, Cell{}, Cell{},
                   static_cast<long long>(r.iterations), Cell{}, r.error});
    }
    bool any = rep.failures < static_cast<int>(rep.per_seed.size());
    t.add({std::string("all"), static_cast<long long>(sim.n), pot, any ? Cell{rep.mean} : Cell{},
           any ? Cell{rep.std} : Cell{}, opt_cell(rep.mean_ks), Cell{}, Cell{}, Cell{},
           rep.failures ? std::to_string(rep.failures) + " failed" : std::string()});
    emit(g, t, out);
    return any ? exit_ok : exit_solver;
}

int cmd_sweep(const Globals& g, const std::string& variable, const std::string& grid_text,
              const std::vector<std::string>& pots_in, const SimOptions& sim, std::ostream& out) {
    ProblemConfig base = load(g);
    if (variable != "delta" && variable != "sigma") throw UsageError("--variable must be delta or sigma");
    std::vector<double> grid = parse_grid(grid_text);
    for (const auto& p : pots_in)
        if (!known_potential(p)) throw UsageError("unknown potential '" + p + "'");
    std::vector<std::string> pots = pots_in.empty() ? std::vector<std::string>{"bound"} : pots_in;

    std::vector<ProblemConfig> cfgs(grid.size(), base);
    std::vector<std::vector<SweepCell>> cells(grid.size());
    parallel_for(grid.size(), g.jobs, [&](std::size_t i) {
        ProblemConfig& c = cfgs[i];
        (variable == "delta" ? c.delta : c.sigma) = grid[i];
        std::optional<double> bound;
        std::string point_error;
        bool valid = true;
        try {
            validate(c);
        } catch (const std::exception& e) {
            point_error = e.what();
            valid = false;
        }
        if (valid) {
            try {
                bound = bound_excess(c);
            } catch (const std::exception& e) {
                point_error = std::string("lower bound: ") + e.what();
            }
        }
        for (const auto& p : pots) {
            SweepCell cell;
            if (valid) cell = evaluate_point(c, p, bound, sim);
            if (!point_error.empty()) cell.error = point_error + (cell.error.empty() ? "" : "; " + cell.error);
            cells[i].push_back(cell);
        }
    });
    Table t = sweep_table(g, "sweep", base);
    t.meta["variable"] = variable;
    t.meta["grid"] = grid;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t k = 0; k < pots.size(); ++k) add_sweep_row(t, cfgs[i], pots[k], cells[i][k]);
    emit(g, t, out);
    return exit_ok;
}

int cmd_compare(const Globals& g, const std::string& pot, const SimOptions& sim, std::ostream& out) {
    ProblemConfig cfg = load(g);
    if (sim.n < 10) throw UsageError("--n must be at least 10");
    SweepCell c = evaluate_point(cfg, pot, bound_excess(cfg), sim);
    Table t = sweep_table(g, "compare", cfg);
    add_sweep_row(t, cfg, pot, c);
    emit(g, t, out);
    return c.theory ? exit_ok : exit_solver;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"asymptotic risk of convex-potential interpolators"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed_value = 0;
    app.add_option("--config", g.config_path, "configuration file");
    app.add_option("--format", g.format, "output format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
    auto* seed_opt = app.add_option("--seed", seed_value, "override the configured seed");
    app.add_option("--out", g.out_path, "output file (default: standard output)");
    app.add_flag("--stamp", g.stamp, "add a timestamp to the output header");

    std::string pot = "l2", method;
    auto* theory = app.add_subcommand("theory", "asymptotic risk of one interpolator");
    theory->add_option("--potential", pot, "l1, l2, l3, linf, gauss-opt or opt");
    theory->add_option("--method", method, "kkt or appendix")->check(CLI::IsMember({"kkt", "appendix"}));

    auto* lower = app.add_subcommand("lower-bound", "fundamental lower bound over separable convex potentials");

    int points = 2001;
    auto* optpot = app.add_subcommand("opt-potential", "tabulate the optimal convex potential");
    optpot->add_option("--points", points, "grid points per spectrum level");

    SimOptions sim;
    std::string seeds_text;
    int replicates = 1;
    auto add_sim = [&](CLI::App* sc, bool required_n) {
        auto* o = sc->add_option("--n", sim.n, "dimension");
        if (required_n) o->required();
        sc->add_option("--seeds", seeds_text, "comma-separated seeds");
        sc->add_option("--replicates", replicates, "seeds seed, seed+1, ... when --seeds is absent")
            ->check(CLI::PositiveNumber);
        sc->add_flag("--compare-law", sim.compare_law, "KS distance to the theoretical weight law");
        sc->add_option("--law-samples", sim.law_count, "law draws for the KS comparison");
    };
    auto* simulate = app.add_subcommand("simulate", "finite-sample interpolation experiments");
    simulate->add_option("--potential", pot, "l1, l2, l3, linf, gauss-opt or opt");
    add_sim(simulate, true);

    std::string variable = "delta", grid_text, pots_text;
    auto* sweep = app.add_subcommand("sweep", "theory (and optional simulation) over a delta or sigma grid");
    sweep->add_option("--variable", variable, "delta or sigma");
    sweep->add_option("--grid", grid_text, "start:stop:step or comma list")->required();
    sweep->add_option("--potentials", pots_text, "comma-separated potential ids (empty: bound only)");
    add_sim(sweep, false);

    auto* compare = app.add_subcommand("compare", "theory against simulation for one potential");
    compare->add_option("--potential", pot, "l1, l2, l3, linf, gauss-opt or opt");
    add_sim(compare, true);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n" << app.help();
        return exit_usage;
    }
    if (seed_opt->count()) g.seed = seed_value;

    try {
        if ((theory->parsed() || simulate->parsed() || compare->parsed()) && !known_potential(pot))
            throw UsageError("unknown potential '" + pot + "' (expected l1, l2, l3, linf, gauss-opt or opt)");
        if (simulate->parsed() || sweep->parsed() || compare->parsed()) {
            std::uint64_t base = g.seed ? *g.seed : 0;
            if (!g.config_path.empty() && !g.seed) base = load(g).seed;
            sim.seeds = resolve_seeds(seeds_text, replicates, base);
        }
        if (theory->parsed()) return cmd_theory(g, pot, method, out);
        if (lower->parsed()) return cmd_lower_bound(g, out);
        if (optpot->parsed()) return cmd_opt_potential(g, points, out, err);
        if (simulate->parsed()) return cmd_simulate(g, pot, sim, out);
        if (sweep->parsed()) return cmd_sweep(g, variable, grid_text, split_list(pots_text), sim, out);
        if (compare->parsed()) return cmd_compare(g, pot, sim, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const AdmissibilityError& e) {
        err << "error: " << e.what() << "\n";
        return exit_admissibility;
    } catch (const UnsupportedCase& e) {
        err << "unsupported: " << e.what() << "\n";
        return exit_solver;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "solver error: " << e.what() << "\n";
        return exit_solver;
    }
    return exit_usage;
}

}  // namespace ibias
