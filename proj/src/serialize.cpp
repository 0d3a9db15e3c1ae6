#include "xlsynth/serialize.hpp"

#include <cmath>
#include <stdexcept>

namespace xlsynth {

Json number_to_json(double v) {
    constexpr double kExact = 9007199254740992.0;  // 2^53
    if (std::trunc(v) == v && std::fabs(v) < kExact) return static_cast<std::int64_t>(v);
    return v;
}

Json cell_to_json(const CellValue& v) {
    if (v.is_blank()) return nullptr;
    if (v.is_number()) return number_to_json(v.as_number());
    if (v.is_text()) return v.as_text();
    if (v.is_bool()) return v.as_bool();
    return Json{{"error", std::string(error_code(v.as_error()))}};
}

CellValue cell_from_json(const Json& j) {
    if (j.is_null()) return CellValue::blank();
    if (j.is_boolean()) return CellValue::boolean(j.get<bool>());
    if (j.is_number()) return CellValue::number(j.get<double>());
    if (j.is_string()) return CellValue::text(j.get<std::string>());
    if (j.is_object() && j.contains("error")) {
        auto kind = parse_error_kind(j.at("error").get<std::string>());
        if (!kind) throw std::invalid_argument("unknown error kind in cell JSON: " + j.dump());
        return CellValue::error(*kind);
    }
    throw std::invalid_argument("invalid cell JSON: " + j.dump());
}

Json grid_to_json(const Grid& g) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < g.n_rows(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < g.n_cols(); ++c) row.push_back(cell_to_json(g.at(r, c)));
        rows.push_back(std::move(row));
    }
    return Json{{"source_id", g.source_id()}, {"rows", std::move(rows)}};
}

Grid grid_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("rows") || !j.at("rows").is_array()) {
        throw std::invalid_argument("grid JSON must be an object with a \"rows\" array");
    }
    std::vector<std::vector<CellValue>> rows;
    for (const auto& row : j.at("rows")) {
        if (!row.is_array()) throw std::invalid_argument("grid JSON row is not an array");
        std::vector<CellValue> cells;
        for (const auto& c : row) cells.push_back(cell_from_json(c));
        rows.push_back(std::move(cells));
    }
    return Grid::from_rows(std::move(rows), j.value("source_id", std::string()));
}

Json outcome_to_json(const EvalOutcome& o) {
    if (o.is_plain()) return Json{{"kind", "plain"}, {"value", cell_to_json(o.value())}};
    const ArrayValue& a = o.array_value();
    Json values = Json::array();
    for (const auto& v : a.values) values.push_back(cell_to_json(v));
    return Json{{"kind", "array"}, {"rows", a.rows}, {"cols", a.cols}, {"values", std::move(values)}};
}

EvalOutcome outcome_from_json(const Json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "plain") return EvalOutcome::plain(cell_from_json(j.at("value")));
    if (kind != "array") throw std::invalid_argument("unknown outcome kind: " + kind);
    ArrayValue a;
    for (const auto& v : j.at("values")) a.values.push_back(cell_from_json(v));
    a.rows = j.value("rows", std::size_t{1});
    a.cols = j.value("cols", a.values.size());
    return EvalOutcome::array(std::move(a));
}

}  // namespace xlsynth
