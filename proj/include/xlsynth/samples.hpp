#pragma once

// Generated tutorial samples (q, e, a) and their JSON forms.

#include <optional>
#include <string>
#include <vector>

#include "xlsynth/engine.hpp"
#include "xlsynth/serialize.hpp"

namespace xlsynth {

struct SynSample {
    std::string func;
    std::string demo_argument;  // e.g. "match_type <optional>"
    std::string query;
    std::string func_explanation;
    std::vector<std::string> step_by_step;
    std::string answer;
    std::string formula;
    std::vector<std::string> structure;
    std::string table_id;
    int batch = 0;
    int index = 0;  // position within its sample set
    std::optional<EvalOutcome> executed;

    // "<batch>/<func>/<index>"
    std::string id() const;
};

struct SampleSet {
    std::string func;
    std::vector<SynSample> samples;
};

Json sample_to_json(const SynSample& s);
SynSample sample_from_json(const Json& j);

}  // namespace xlsynth
