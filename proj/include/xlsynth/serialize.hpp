#pragma once

// JSON forms of cells, grids and evaluation outcomes.
//
// Cells: number, string, bool, null (Blank) or {"error": "DIV0"}.
// Grids: {"source_id": str, "rows": [[cell, ...], ...]}.
// Outcomes: {"kind": "plain", "value": cell} or
//           {"kind": "array", "rows": n, "cols": m, "values": [cell, ...]}.

#include <json.hpp>

#include "xlsynth/engine.hpp"
#include "xlsynth/grid.hpp"

namespace xlsynth {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// Integral doubles within the exact range serialize as JSON integers.
Json number_to_json(double v);

Json cell_to_json(const CellValue& v);
CellValue cell_from_json(const Json& j);

Json grid_to_json(const Grid& g);
Grid grid_from_json(const Json& j);

Json outcome_to_json(const EvalOutcome& o);
EvalOutcome outcome_from_json(const Json& j);

}  // namespace xlsynth
