#include "ibias/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <variant>

namespace ibias {

PriorSpec gaussian_prior(double mean, double var) {
    PriorSpec p;
    p.gaussians.push_back({mean, var, 1.0});
    return p;
}

PriorSpec rademacher_prior() {
    PriorSpec p;
    p.atoms = {{-1.0, 0.5}, {1.0, 0.5}};
    return p;
}

PriorSpec sparse_gaussian_prior(double s) {
    if (!(s > 0.0 && s <= 1.0)) throw ConfigError("sparsity must lie in (0,1]");
    PriorSpec p;
    if (s < 1.0) p.atoms.push_back({0.0, 1.0 - s});
    p.gaussians.push_back({0.0, 1.0 / s, s});
    return p;
}

SpectrumSpec identity_spectrum() { return SpectrumSpec{}; }

SpectrumSpec bilevel_spectrum(double hi_sq, double hi_w, double lo_sq) {
    SpectrumSpec s;
    s.levels = {{hi_sq, hi_w}, {lo_sq, 1.0 - hi_w}};
    return s;
}

double prior_second_moment(const PriorSpec& prior) {
    double m2 = 0.0;
    for (const auto& a : prior.atoms) m2 += a.weight * a.loc * a.loc;
    for (const auto& g : prior.gaussians) m2 += g.weight * (g.mean * g.mean + g.var);
    return m2;
}

double prior_atom_mass_at(const PriorSpec& prior, double loc) {
    double w = 0.0;
    for (const auto& a : prior.atoms) w += a.loc == loc ? a.weight : 0.0;
    return w;
}

double prior_variance(const PriorSpec& prior) {
    double m1 = 0.0;
    for (const auto& a : prior.atoms) m1 += a.weight * a.loc;
    for (const auto& g : prior.gaussians) m1 += g.weight * g.mean;
    return prior_second_moment(prior) - m1 * m1;
}

PriorSpec normalize_prior(const PriorSpec& prior) {
    double m2 = prior_second_moment(prior);
    if (!(m2 > 0.0) || !std::isfinite(m2)) throw ConfigError("prior second moment must be finite and nonzero");
    double sc = 1.0 / std::sqrt(m2);
    PriorSpec out = prior;
    for (auto& a : out.atoms) a.loc *= sc;
    for (auto& g : out.gaussians) {
        g.mean *= sc;
        g.var /= m2;
    }
    // land exactly on 1 when a single scale factor leaves rounding residue
    double r = prior_second_moment(out);
    if (std::abs(r - 1.0) > 1e-15) {
        double sc2 = 1.0 / std::sqrt(r);
        for (auto& a : out.atoms) a.loc *= sc2;
        for (auto& g : out.gaussians) {
            g.mean *= sc2;
            g.var /= r;
        }
    }
    return out;
}

bool prior_has_atoms(const PriorSpec& prior) {
    for (const auto& a : prior.atoms)
        if (a.weight > 0.0) return true;
    return false;
}

double spectrum_moment(const SpectrumSpec& s, double power) {
    double acc = 0.0;
    for (const auto& l : s.levels) acc += l.weight * std::pow(l.lambda_sq, power);
    return acc;
}

std::vector<std::string> validate(const ProblemConfig& cfg) {
    std::vector<std::string> notes;
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    if (!(cfg.sigma >= 0.0) || !std::isfinite(cfg.sigma)) throw ConfigError("sigma must be nonnegative");
    if (cfg.sigma == 0.0) notes.push_back("sigma = 0: lower-bound and optimal-potential commands are unsupported");

    double wsum = 0.0;
    for (const auto& a : cfg.prior.atoms) {
        if (!(a.weight >= 0.0) || !std::isfinite(a.loc)) throw ConfigError("prior atom weights must be nonnegative");
        wsum += a.weight;
    }
    for (const auto& g : cfg.prior.gaussians) {
        if (!(g.var > 0.0)) throw ConfigError("prior Gaussian variances must be positive");
        if (!(g.weight >= 0.0) || !std::isfinite(g.mean)) throw ConfigError("prior component weights must be nonnegative");
        wsum += g.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-12) throw ConfigError("prior weights must sum to 1");
    double m2 = prior_second_moment(cfg.prior);
    if (!(m2 > 0.0) || !std::isfinite(m2)) throw ConfigError("prior second moment must be finite and nonzero");

    if (cfg.spectrum.levels.empty()) throw ConfigError("spectrum must have at least one level");
    double lsum = 0.0;
    for (const auto& l : cfg.spectrum.levels) {
        if (!(l.lambda_sq > 0.0) || !std::isfinite(l.lambda_sq)) throw ConfigError("spectrum must be strictly positive");
        if (!(l.weight >= 0.0)) throw ConfigError("spectrum weights must be nonnegative");
        lsum += l.weight;
    }
    if (std::abs(lsum - 1.0) > 1e-12) throw ConfigError("spectrum weights must sum to 1");

    const auto& s = cfg.settings;
    if (s.gh_nodes < 16) throw ConfigError("gh_nodes must be at least 16");
    if (!(s.quad_abs_tol > 0.0 && s.root_tol > 0.0 && s.admm_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (s.max_iter < 1 || s.admm_max_iter < 1) throw ConfigError("iteration limits must be positive");
    if (!(s.alpha_lo > 0.0 && s.alpha_hi > s.alpha_lo)) throw ConfigError("alpha_bracket must satisfy 0 < lo < hi");
    if (!(s.admm_rho > 0.0)) throw ConfigError("admm_rho must be positive");
    return notes;
}

// ---- parsing ----

namespace {

struct Value;
using List = std::vector<Value>;

struct Value {
    enum class Kind { number, boolean, word, list } kind = Kind::number;
    double num = 0.0;
    bool flag = false;
    std::string text;  // raw token for numbers, content for words
    List items;
    int line = 0;
};

class Lexer {
public:
    Lexer(const std::string& src, int line) : s_(src), line_(line) {}

    Value parse_value() {
        skip_ws();
        if (pos_ >= s_.size()) throw ConfigError("missing value", line_);
        char c = s_[pos_];
        Value v;
        v.line = line_;
        if (c == '[') {
            ++pos_;
            v.kind = Value::Kind::list;
            skip_ws();
            if (peek() == ']') {
                ++pos_;
                return v;
            }
            while (true) {
                v.items.push_back(parse_value());
                skip_ws();
                char d = peek();
                if (d == ',') {
                    ++pos_;
                    skip_ws();
                    if (peek() == ']') {  // trailing comma
                        ++pos_;
                        return v;
                    }
                    continue;
                }
                if (d == ']') {
                    ++pos_;
                    return v;
                }
                throw ConfigError("expected ',' or ']' in list", line_);
            }
        }
        if (c == '"') {
            auto end = s_.find('"', pos_ + 1);
            if (end == std::string::npos) throw ConfigError("unterminated string", line_);
            v.kind = Value::Kind::word;
            v.text = s_.substr(pos_ + 1, end - pos_ - 1);
            pos_ = end + 1;
            return v;
        }
        std::size_t start = pos_;
        while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != ',' &&
               s_[pos_] != ']' && s_[pos_] != '[')
            ++pos_;
        std::string tok = s_.substr(start, pos_ - start);
        if (tok.empty()) throw ConfigError("unexpected character '" + std::string(1, c) + "'", line_);
        if (tok == "true" || tok == "false") {
            v.kind = Value::Kind::boolean;
            v.flag = tok == "true";
            return v;
        }
        char* endp = nullptr;
        double d = std::strtod(tok.c_str(), &endp);
        if (endp && *endp == '\0') {
            v.kind = Value::Kind::number;
            v.num = d;
            v.text = tok;
            return v;
        }
        v.kind = Value::Kind::word;
        v.text = tok;
        return v;
    }

    void expect_end() {
        skip_ws();
        if (pos_ != s_.size()) throw ConfigError("trailing characters after value", line_);
    }

private:
    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    const std::string& s_;
    std::size_t pos_ = 0;
    int line_;
};

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (!in_str && (line[i] == '#' || line[i] == ';')) return line.substr(0, i);
    }
    return line;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int bracket_balance(const std::string& s) {
    int depth = 0;
    bool in_str = false;
    for (char c : s) {
        if (c == '"') in_str = !in_str;
        if (in_str) continue;
        if (c == '[') ++depth;
        if (c == ']') --depth;
    }
    return depth;
}

double as_number(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::number) throw ConfigError(key + " must be a number", v.line);
    return v.num;
}

int as_int(const Value& v, const std::string& key) {
    double d = as_number(v, key);
    if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError(key + " must be an integer", v.line);
    return static_cast<int>(d);
}

bool as_bool(const Value& v, const std::string& key) {
    if (v.kind != Value::Kind::boolean) throw ConfigError(key + " must be true or false", v.line);
    return v.flag;
}

std::vector<std::vector<double>> as_rows(const Value& v, const std::string& key, std::size_t width) {
    if (v.kind != Value::Kind::list) throw ConfigError(key + " must be a list of lists", v.line);
    std::vector<std::vector<double>> rows;
    for (const auto& it : v.items) {
        if (it.kind != Value::Kind::list || it.items.size() != width)
            throw ConfigError(key + " entries must have " + std::to_string(width) + " numbers", it.line);
        std::vector<double> row;
        for (const auto& x : it.items) row.push_back(as_number(x, key));
        rows.push_back(row);
    }
    return rows;
}

struct Entry {
    Value value;
    int line;
};

}  // namespace

ProblemConfig parse_config(const std::string& text) {
    std::map<std::string, std::map<std::string, Entry>> sections;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[' && line.find('=') == std::string::npos) {
            if (line.back() != ']') throw ConfigError("malformed section header", lineno);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "problem" && section != "prior" && section != "spectrum" && section != "solver")
                throw ConfigError("unknown section [" + section + "]", lineno);
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
        if (section.empty()) throw ConfigError("key outside of any section", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        int start_line = lineno;
        while (bracket_balance(val) > 0) {
            if (!std::getline(in, raw)) throw ConfigError("unterminated list", start_line);
            ++lineno;
            val += " " + trim(strip_comment(raw));
        }
        if (bracket_balance(val) < 0) throw ConfigError("unbalanced ']'", start_line);
        if (key.empty()) throw ConfigError("empty key", start_line);
        Lexer lx(val, start_line);
        Value v = lx.parse_value();
        lx.expect_end();
        auto& sec = sections[section];
        if (sec.count(key)) throw ConfigError("duplicate key '" + key + "'", start_line);
        sec[key] = Entry{v, start_line};
    }

    ProblemConfig cfg;
    auto unknown = [](const std::string& sec, const std::string& key, int line) {
        throw ConfigError("unknown key '" + key + "' in [" + sec + "]", line);
    };

    for (auto& [key, e] : sections["problem"]) {
        if (key == "delta") cfg.delta = as_number(e.value, key);
        else if (key == "sigma") cfg.sigma = as_number(e.value, key);
        else if (key == "seed") {
            if (e.value.kind != Value::Kind::number) throw ConfigError("seed must be an integer", e.line);
            char* endp = nullptr;
            cfg.seed = std::strtoull(e.value.text.c_str(), &endp, 10);
            if (!endp || *endp != '\0' || e.value.text.front() == '-') throw ConfigError("seed must be a nonnegative integer", e.line);
        } else unknown("problem", key, e.line);
    }

    {
        auto& sec = sections["prior"];
        std::string kind = "gaussian";
        if (sec.count("kind")) {
            const auto& v = sec["kind"].value;
            if (v.kind != Value::Kind::word) throw ConfigError("prior kind must be a name", v.line);
            kind = v.text;
        }
        auto num = [&](const std::string& k, double def) {
            return sec.count(k) ? as_number(sec[k].value, k) : def;
        };
        std::map<std::string, bool> allowed{{"kind", true}, {"normalize", true}};
        int kind_line = sec.count("kind") ? sec["kind"].line : 0;
        if (kind == "gaussian") {
            allowed["mean"] = allowed["variance"] = true;
            double var = num("variance", 1.0);
            if (!(var > 0.0)) throw ConfigError("prior Gaussian variances must be positive", sec.count("variance") ? sec["variance"].line : 0);
            cfg.prior = gaussian_prior(num("mean", 0.0), var);
        } else if (kind == "rademacher") {
            cfg.prior = rademacher_prior();
        } else if (kind == "sparse_gaussian") {
            allowed["sparsity"] = true;
            if (!sec.count("sparsity")) throw ConfigError("sparse_gaussian prior needs 'sparsity'", kind_line);
            double s = as_number(sec["sparsity"].value, "sparsity");
            if (!(s > 0.0 && s <= 1.0)) throw ConfigError("sparsity must lie in (0,1]", sec["sparsity"].line);
            cfg.prior = sparse_gaussian_prior(s);
        } else if (kind == "mixture") {
            allowed["atoms"] = allowed["gaussians"] = true;
            cfg.prior = PriorSpec{};
            if (sec.count("atoms"))
                for (auto& r : as_rows(sec["atoms"].value, "atoms", 2)) cfg.prior.atoms.push_back({r[0], r[1]});
            if (sec.count("gaussians"))
                for (auto& r : as_rows(sec["gaussians"].value, "gaussians", 3))
                    cfg.prior.gaussians.push_back({r[0], r[1], r[2]});
            if (cfg.prior.atoms.empty() && cfg.prior.gaussians.empty())
                throw ConfigError("mixture prior needs atoms or gaussians", kind_line);
        } else {
            throw ConfigError("unknown prior kind '" + kind + "'", kind_line);
        }
        for (auto& [key, e] : sec)
            if (!allowed.count(key)) unknown("prior", key, e.line);
        if (sec.count("normalize") && as_bool(sec["normalize"].value, "normalize")) {
            double m2 = prior_second_moment(cfg.prior);
            if (!(m2 > 0.0)) throw ConfigError("prior second moment must be finite and nonzero", sec["normalize"].line);
            cfg.prior = normalize_prior(cfg.prior);
        }
    }

    for (auto& [key, e] : sections["spectrum"]) {
        if (key == "levels") {
            cfg.spectrum.levels.clear();
            for (auto& r : as_rows(e.value, key, 2)) cfg.spectrum.levels.push_back({r[0], r[1]});
        } else unknown("spectrum", key, e.line);
    }

    auto& st = cfg.settings;
    for (auto& [key, e] : sections["solver"]) {
        const auto& v = e.value;
        if (key == "gh_nodes") st.gh_nodes = as_int(v, key);
        else if (key == "quad_abs_tol") st.quad_abs_tol = as_number(v, key);
        else if (key == "root_tol") st.root_tol = as_number(v, key);
        else if (key == "max_iter") st.max_iter = as_int(v, key);
        else if (key == "alpha_bracket") {
            if (v.kind != Value::Kind::list || v.items.size() != 2) throw ConfigError("alpha_bracket must be [lo, hi]", e.line);
            st.alpha_lo = as_number(v.items[0], key);
            st.alpha_hi = as_number(v.items[1], key);
        } else if (key == "admm_rho") st.admm_rho = as_number(v, key);
        else if (key == "admm_tol") st.admm_tol = as_number(v, key);
        else if (key == "admm_max_iter") st.admm_max_iter = as_int(v, key);
        else unknown("solver", key, e.line);
    }

    validate(cfg);
    return cfg;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

namespace {
std::string num17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    std::string s = buf;
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}
}  // namespace

std::string serialize_config(const ProblemConfig& cfg) {
    std::ostringstream o;
    o << "[problem]\n";
    o << "delta = " << num17(cfg.delta) << "\n";
    o << "sigma = " << num17(cfg.sigma) << "\n";
    o << "seed = " << cfg.seed << "\n\n";
    o << "[prior]\n";
    o << "kind = mixture\n";
    o << "atoms = [";
    for (std::size_t i = 0; i < cfg.prior.atoms.size(); ++i) {
        const auto& a = cfg.prior.atoms[i];
        o << (i ? ", " : "") << "[" << num17(a.loc) << ", " << num17(a.weight) << "]";
    }
    o << "]\n";
    o << "gaussians = [";
    for (std::size_t i = 0; i < cfg.prior.gaussians.size(); ++i) {
        const auto& g = cfg.prior.gaussians[i];
        o << (i ? ", " : "") << "[" << num17(g.mean) << ", " << num17(g.var) << ", " << num17(g.weight) << "]";
    }
    o << "]\n\n";
    o << "[spectrum]\n";
    o << "levels = [";
    for (std::size_t i = 0; i < cfg.spectrum.levels.size(); ++i) {
        const auto& l = cfg.spectrum.levels[i];
        o << (i ? ", " : "") << "[" << num17(l.lambda_sq) << ", " << num17(l.weight) << "]";
    }
    o << "]\n\n";
    const auto& s = cfg.settings;
    o << "[solver]\n";
    o << "gh_nodes = " << s.gh_nodes << "\n";
    o << "quad_abs_tol = " << num17(s.quad_abs_tol) << "\n";
    o << "root_tol = " << num17(s.root_tol) << "\n";
    o << "max_iter = " << s.max_iter << "\n";
    o << "alpha_bracket = [" << num17(s.alpha_lo) << ", " << num17(s.alpha_hi) << "]\n";
    o << "admm_rho = " << num17(s.admm_rho) << "\n";
    o << "admm_tol = " << num17(s.admm_tol) << "\n";
    o << "admm_max_iter = " << s.admm_max_iter << "\n";
    return o.str();
}

std::string config_hash(const ProblemConfig& cfg) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : serialize_config(cfg)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace ibias
