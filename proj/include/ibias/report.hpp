#pragma once

#include <json.hpp>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "ibias/config.hpp"

namespace ibias {

using Cell = std::variant<std::monostate, bool, double, long long, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();

    void add(std::vector<Cell> row);
};

inline Cell opt_cell(const std::optional<double>& v) { return v ? Cell{*v} : Cell{}; }

std::string format_number(double x);  // %.12g
nlohmann::ordered_json config_to_json(const ProblemConfig& cfg);
nlohmann::ordered_json header_meta(const std::string& command, const ProblemConfig& cfg, bool stamp);

void write_csv(const Table& t, std::ostream& out);
void write_json(const Table& t, std::ostream& out);

}  // namespace ibias
