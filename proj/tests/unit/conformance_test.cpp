#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <set>

#include "test_support.hpp"
#include "xlsynth/engine.hpp"
#include "xlsynth/serialize.hpp"

namespace xlsynth {
namespace {

struct GoldenCase {
    std::string id;
    std::string formula;
    Grid grid{1, 1, {CellValue::blank()}};
    Json expect;
};

std::vector<GoldenCase> load_golden() {
    std::ifstream in(testing::data_dir() / "conformance/golden.jsonl");
    std::vector<GoldenCase> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line);
        out.push_back({j.at("id"), j.at("formula"), grid_from_json(j.at("grid")), j.at("expect")});
    }
    return out;
}

Json expected_of(const EvalOutcome& o) {
    if (o.is_plain()) return cell_to_json(o.value());
    Json values = Json::array();
    for (const auto& v : o.array_value().values) values.push_back(cell_to_json(v));
    return Json{{"array", values}, {"rows", o.array_value().rows}, {"cols", o.array_value().cols}};
}

// Numbers compare exactly; JSON integer/float spellings of one double agree.
bool same(const Json& a, const Json& b) {
    if (a.is_number() && b.is_number()) return a.get<double>() == b.get<double>();
    if (a.is_array() && b.is_array()) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!same(a[i], b[i])) return false;
        }
        return true;
    }
    if (a.is_object() && b.is_object()) {
        if (a.size() != b.size()) return false;
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key()) || !same(it.value(), b.at(it.key()))) return false;
        }
        return true;
    }
    return a == b;
}

TEST(Conformance, CorpusIsLargeEnough) {
    EXPECT_GE(load_golden().size(), 200u);
}

TEST(Conformance, EveryCaseMatchesExactly) {
    const auto cases = load_golden();
    const auto t0 = std::chrono::steady_clock::now();
    int failures = 0;
    for (const auto& c : cases) {
        Json got = expected_of(evaluate_formula(c.formula, c.grid));
        if (!same(got, c.expect)) {
            ++failures;
            ADD_FAILURE() << c.id << " " << c.formula << " on " << c.grid.source_id() << ": got " << got.dump()
                          << ", expected " << c.expect.dump();
        }
    }
    const auto elapsed = std::chrono::steady_clock::now() - t0;
    EXPECT_EQ(failures, 0);
    EXPECT_LT(std::chrono::duration<double>(elapsed).count(), 5.0);
}

TEST(Conformance, CoversCoreBuiltinsAndErrorKinds) {
    std::set<std::string> called;
    std::set<std::string> errors;
    for (const auto& c : load_golden()) {
        for (const auto& f : extract_functions(*parse_formula(c.formula))) called.insert(f);
        if (c.expect.is_object() && c.expect.contains("error")) errors.insert(c.expect.at("error"));
    }
    for (const char* name :
         {"SUM",    "AVERAGE", "COUNT",  "COUNTA",  "COUNTBLANK", "COUNTIF",     "COUNTIFS", "SUMIF",   "SUMIFS",
          "AVERAGEIF", "MIN",  "MAX",    "LARGE",   "SMALL",      "RANK",        "IF",       "IFERROR", "AND",
          "OR",     "NOT",     "INDEX",  "MATCH",   "VLOOKUP",    "HLOOKUP",     "ROW",      "COLUMN",  "ROWS",
          "COLUMNS", "LEFT",   "RIGHT",  "MID",     "LEN",        "FIND",        "SEARCH",   "TRIM",    "UPPER",
          "LOWER",  "SUBSTITUTE", "CONCATENATE", "TEXTJOIN", "VALUE", "TEXT",    "ROUND",    "ABS",     "MOD",
          "SUMPRODUCT"}) {
        EXPECT_TRUE(called.count(name)) << name;
    }
    EXPECT_EQ(errors, (std::set<std::string>{"DIV0", "NA", "VALUE", "REF", "NAME", "NUM"}));
}

}  // namespace
}  // namespace xlsynth
