#pragma once

// Build-internal JSON plumbing shared by the core .cpp files. Not installed.

#include <json.hpp>

#include "teq/exposure.hpp"
#include "teq/layout.hpp"

namespace teq::detail {

inline nlohmann::json exposure_to_json(const ExposureConfig& e) {
    return nlohmann::json{{"t_s", e.t_s},
                          {"ratio", e.ratio},
                          {"gains", {e.gain_s, e.gain_m, e.gain_l}},
                          {"sigma_s", e.sigma_s}};
}

inline ExposureConfig exposure_from_json(const nlohmann::json& j) {
    ExposureConfig e;
    e.t_s = j.value("t_s", e.t_s);
    e.ratio = j.value("ratio", e.ratio);
    if (j.contains("gains")) {
        auto g = j.at("gains");
        e.gain_s = g.at(0).get<double>();
        e.gain_m = g.at(1).get<double>();
        e.gain_l = g.at(2).get<double>();
    }
    e.sigma_s = j.value("sigma_s", e.sigma_s);
    return e;
}

inline nlohmann::json layout_to_json(const TeqLayout& layout) {
    auto table = layout.to_table();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& cell : row) r.push_back(cell);
        rows.push_back(r);
    }
    return rows;
}

inline TeqLayout layout_from_json(const nlohmann::json& rows) {
    std::array<std::array<std::string, 4>, 4> table;
    if (rows.size() != 4) throw std::invalid_argument("layout: table must be 4x4");
    for (int y = 0; y < 4; ++y) {
        if (rows.at(y).size() != 4)
            throw std::invalid_argument("layout: table must be 4x4");
        for (int x = 0; x < 4; ++x) table[y][x] = rows.at(y).at(x).get<std::string>();
    }
    return TeqLayout::from_table(table);
}

} // namespace teq::detail
