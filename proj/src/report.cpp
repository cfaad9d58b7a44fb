#include "ibias/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace ibias {

void Table::add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("row width does not match the table columns");
    rows.push_back(std::move(row));
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

nlohmann::ordered_json config_to_json(const ProblemConfig& cfg) {
    using J = nlohmann::ordered_json;
    J atoms = J::array(), gauss = J::array(), levels = J::array();
    for (const auto& a : cfg.prior.atoms) atoms.push_back({a.loc, a.weight});
    for (const auto& g : cfg.prior.gaussians) gauss.push_back({g.mean, g.var, g.weight});
    for (const auto& l : cfg.spectrum.levels) levels.push_back({l.lambda_sq, l.weight});
    const auto& s = cfg.settings;
    J j;
    j["delta"] = cfg.delta;
    j["sigma"] = cfg.sigma;
    j["seed"] = cfg.seed;
    j["prior"] = {{"atoms", atoms}, {"gaussians", gauss}};
    j["spectrum"] = levels;
    j["solver"] = {{"gh_nodes", s.gh_nodes},         {"quad_abs_tol", s.quad_abs_tol}, {"root_tol", s.root_tol},
                   {"max_iter", s.max_iter},         {"alpha_bracket", {s.alpha_lo, s.alpha_hi}},
                   {"admm_rho", s.admm_rho},         {"admm_tol", s.admm_tol},
                   {"admm_max_iter", s.admm_max_iter}};
    return j;
}

nlohmann::ordered_json header_meta(const std::string& command, const ProblemConfig& cfg, bool stamp) {
    nlohmann::ordered_json m;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg);
    m["config"] = config_to_json(cfg);
    if (stamp) {
        std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        m["timestamp"] = buf;
    }
    return m;
}

namespace {

std::string cell_text(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return "";
    if (auto b = std::get_if<bool>(&c)) return *b ? "true" : "false";
    if (auto d = std::get_if<double>(&c)) return format_number(*d);
    if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
    const auto& s = std::get<std::string>(c);
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch == '\n' ? ' ' : ch;
    }
    return q + "\"";
}

nlohmann::ordered_json cell_json(const Cell& c) {
    if (std::holds_alternative<std::monostate>(c)) return nullptr;
    if (auto b = std::get_if<bool>(&c)) return *b;
    if (auto d = std::get_if<double>(&c)) {
        if (!std::isfinite(*d)) return format_number(*d);
        return std::strtod(format_number(*d).c_str(), nullptr);
    }
    if (auto i = std::get_if<long long>(&c)) return *i;
    return std::get<std::string>(c);
}

}  // namespace

void write_csv(const Table& t, std::ostream& out) {
    out << "# " << t.meta.dump() << "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
    out << "\n";
    for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << cell_text(r[i]);
        out << "\n";
    }
}

void write_json(const Table& t, std::ostream& out) {
    nlohmann::ordered_json j;
    j["meta"] = t.meta;
    j["columns"] = t.columns;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
        nlohmann::ordered_json o;
        for (std::size_t i = 0; i < r.size(); ++i) o[t.columns[i]] = cell_json(r[i]);
        rows.push_back(o);
    }
    j["rows"] = rows;
    out << j.dump(2) << "\n";
}

}  // namespace ibias
