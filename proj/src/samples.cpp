#include "xlsynth/samples.hpp"

namespace xlsynth {

std::string SynSample::id() const { return std::to_string(batch) + "/" + func + "/" + std::to_string(index); }

Json sample_to_json(const SynSample& s) {
    Json j = {{"id", s.id()},
              {"func", s.func},
              {"demo_argument", s.demo_argument},
              {"query", s.query},
              {"func_explanation", s.func_explanation},
              {"step_by_step", s.step_by_step},
              {"answer", s.answer},
              {"formula", s.formula},
              {"structure", s.structure},
              {"table_id", s.table_id},
              {"batch", s.batch},
              {"index", s.index}};
    j["executed"] = s.executed ? outcome_to_json(*s.executed) : Json(nullptr);
    return j;
}

SynSample sample_from_json(const Json& j) {
    SynSample s;
    s.func = j.at("func").get<std::string>();
    s.demo_argument = j.value("demo_argument", "");
    s.query = j.at("query").get<std::string>();
    s.func_explanation = j.value("func_explanation", "");
    s.step_by_step = j.value("step_by_step", std::vector<std::string>{});
    s.answer = j.value("answer", "");
    s.formula = j.at("formula").get<std::string>();
    s.structure = j.value("structure", std::vector<std::string>{});
    s.table_id = j.value("table_id", "");
    s.batch = j.value("batch", 0);
    s.index = j.value("index", 0);
    if (j.contains("executed") && !j["executed"].is_null()) {
        // Teacher transcripts wrap the outcome in a one-element list.
        const Json& e = j["executed"];
        s.executed = outcome_from_json(e.is_array() && e.size() == 1 ? e[0] : e);
    }
    return s;
}

}  // namespace xlsynth
