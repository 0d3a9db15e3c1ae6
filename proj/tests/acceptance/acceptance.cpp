// Acceptance suite: one PASS/FAIL line per acceptance criterion. Exit status
// is nonzero when any criterion fails.
//
//   acceptance                      run every criterion
//   acceptance --emit-transcripts D record the hermetic teacher transcripts into D

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "scripted_teacher.hpp"
#include "xlsynth/engine.hpp"
#include "xlsynth/evalbench.hpp"
#include "xlsynth/formula.hpp"
#include "xlsynth/genpipe.hpp"
#include "xlsynth/orchestrator.hpp"
#include "xlsynth/serialize.hpp"
#include "xlsynth/text.hpp"
#include "xlsynth/util.hpp"
#include "xlsynth/validator.hpp"

namespace fs = std::filesystem;
using namespace xlsynth;

namespace {

const fs::path kData = XLSYNTH_TEST_DATA_DIR;

// Collects failed checks for one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok) failures_.push_back(what);
    }
    bool ok() const { return failures_.empty(); }
    std::string summary() const {
        std::string s;
        for (std::size_t i = 0; i < failures_.size() && i < 3; ++i) s += (i ? "; " : "") + failures_[i];
        if (failures_.size() > 3) s += "; +" + std::to_string(failures_.size() - 3) + " more";
        return s;
    }

private:
    std::vector<std::string> failures_;
};

class TempDir {
public:
    TempDir() {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("xlsynth-accept-" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

struct Golden {
    std::string id;
    std::string formula;
    Grid grid;
    Json expect;
};

std::vector<Golden> load_golden() {
    std::vector<Golden> out;
    for (const auto& j : read_jsonl(kData / "conformance/golden.jsonl")) {
        out.push_back({j.at("id"), j.at("formula"), grid_from_json(j.at("grid")), j.at("expect")});
    }
    return out;
}

Json outcome_shape(const EvalOutcome& o) {
    if (o.is_plain()) return cell_to_json(o.value());
    Json values = Json::array();
    for (const auto& v : o.array_value().values) values.push_back(cell_to_json(v));
    return Json{{"array", values}, {"rows", o.array_value().rows}, {"cols", o.array_value().cols}};
}

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

void collect_errors(const Json& j, std::set<std::string>& out) {
    if (j.is_object() && j.contains("error")) out.insert(j["error"].get<std::string>());
    if (j.is_structured()) {
        for (const auto& e : j) collect_errors(e, out);
    }
}

const std::vector<std::string> kCoreBuiltins = {
    "SUM",    "AVERAGE", "COUNT",  "COUNTA", "COUNTBLANK", "COUNTIF",   "COUNTIFS",    "SUMIF",       "SUMIFS",
    "AVERAGEIF", "MIN", "MAX",    "LARGE",  "SMALL",      "RANK",      "IF",          "IFERROR",     "AND",
    "OR",     "NOT",     "INDEX",  "MATCH",  "VLOOKUP",    "HLOOKUP",   "ROW",         "COLUMN",      "ROWS",
    "COLUMNS", "LEFT",   "RIGHT",  "MID",    "LEN",        "FIND",      "SEARCH",      "TRIM",        "UPPER",
    "LOWER",  "SUBSTITUTE", "CONCATENATE", "TEXTJOIN", "VALUE", "TEXT", "ROUND",       "ABS",         "MOD",
    "SUMPRODUCT"};

Grid medals() { return load_grid_file(kData / "fixtures/tables/medals.md"); }
Grid teams() { return load_grid_file(kData / "fixtures/tables/teams.csv"); }

Check interpreter_conformance() {
    Check c;
    const auto cases = load_golden();
    c.expect(cases.size() >= 200, "only " + std::to_string(cases.size()) + " golden triples");
    std::set<std::string> used, errors;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& g : cases) {
        const Json got = outcome_shape(evaluate_formula(g.formula, g.grid));
        c.expect(same(got, g.expect), g.id + " " + g.formula + " gave " + got.dump() + ", want " + g.expect.dump());
        for (const auto& f : extract_functions(*parse_formula(g.formula))) used.insert(f);
        collect_errors(g.expect, errors);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(secs < 5.0, "suite took " + std::to_string(secs) + " s");
    const auto& lib = core_library();
    for (const auto& n : kCoreBuiltins) {
        c.expect(lib.contains(n), "builtin " + n + " not registered");
        c.expect(used.count(n) > 0, "builtin " + n + " not covered");
    }
    c.expect(errors.size() == 6, "corpus covers " + std::to_string(errors.size()) + " of 6 error kinds");
    return c;
}

Check anchored_evaluations() {
    Check c;
    const Grid abs_table = ingest_table("Data\n-4\n", TableFormat::Csv, "abs");
    const std::vector<std::pair<std::string, double>> abs_cases = {{"=ABS(2)", 2}, {"=ABS(-2)", 2}, {"=ABS(A2)", 4}};
    for (const auto& [f, want] : abs_cases) {
        const EvalOutcome o = evaluate_formula(f, abs_table);
        c.expect(o.is_plain() && o.value() == CellValue::number(want), f);
    }
    const EvalOutcome chile = evaluate_formula("=MATCH(\"Chile\", B2:B11, 0)", medals());
    c.expect(chile.is_plain() && chile.value() == CellValue::number(3), "MATCH Chile");
    const std::string hp = hyperparams_json();
    const std::vector<std::pair<std::string, std::string>> hyperparams = {
        {"batch_size", "4"},  {"learning_rate", "5e-5"},       {"lora_r", "64"},           {"lora_alpha", "1"},
        {"max_epochs", "6"}, {"early_stop_patience", "3"}, {"lr_scheduler", "\"cosine\""}, {"warmup_ratio", "0.5"}};
    for (const auto& [k, v] : hyperparams) {
        const std::string needle = "\"" + k + "\": " + v;
        const auto pos = hp.find(needle);
        const bool ends = pos != std::string::npos &&
                          (hp[pos + needle.size()] == ',' || hp[pos + needle.size()] == '\n');
        c.expect(ends, "hyperparameter " + k + " != " + v);
    }
    return c;
}

Check parser_properties() {
    Check c;
    for (const auto& g : load_golden()) {
        const auto ast = parse_formula(g.formula);
        const std::string printed = print_formula(*ast);
        const auto again = parse_formula(printed);
        c.expect(*again == *ast && print_formula(*again) == printed, "round trip " + g.formula);
    }
    std::mt19937_64 rng(100000);
    const std::string alphabet = "=+-*/^&%<>(),:$\"!#.{} 0123456789ABCSUMIFabc_\t\n";
    std::size_t outcomes = 0;
    for (int i = 0; i < 100000; ++i) {
        const std::size_t len = rng() % 48;
        std::string s = i % 3 == 0 ? "=" : "";
        for (std::size_t k = 0; k < len; ++k) {
            s.push_back(i % 2 ? static_cast<char>(rng() & 0xFF) : alphabet[rng() % alphabet.size()]);
        }
        try {
            parse_formula(s);
            ++outcomes;
        } catch (const SyntaxError&) {
            ++outcomes;
        } catch (const std::exception& e) {
            c.expect(false, "fuzz input raised " + std::string(e.what()));
        }
    }
    c.expect(outcomes == 100000, "fuzz outcomes " + std::to_string(outcomes));
    return c;
}

Check tutorial_compilation() {
    Check c;
    SynSample s;
    s.func = "MATCH";
    s.query = "What is the position of the nation 'Chile' in the list of nations?";
    s.func_explanation =
        "The MATCH function searches for a specified item in a range of cells and returns the relative position of that "
        "item in the range.";
    s.step_by_step = {"Identify the lookup_value, which is 'Chile'.",
                      "Identify the lookup_array, which is the range B2:B11 containing the list of nations.",
                      "Use the MATCH function to find the position of 'Chile' in the range B2:B11.",
                      "Since we are looking for an exact match, set match_type to 0."};
    s.formula = "=MATCH(\"Chile\", B2:B11, 0)";
    s.table_id = "medals";
    const TutorialDoc doc = compile_tutorial(s, medals());
    c.expect(doc.text == read_text_file(kData / "fixtures/tutorials/match_chile.txt"), "document differs from reference");
    c.expect(doc.template_version == "tutorial-v1", "template version " + doc.template_version);
    return c;
}

PipelineConfig e2e_config(const fs::path& out) {
    PipelineConfig cfg = load_config(kData / "fixtures/e2e/config.json");
    cfg.output = out;
    cfg.oracle_runner = {XLSYNTH_ORACLE_STUB};
    return cfg;
}

Check hermetic_e2e() {
    Check c;
    const fs::path transcripts = kData / "fixtures/e2e/transcripts";
    TempDir dir;
    std::vector<std::string> digests;
    for (const char* run : {"first", "second"}) {
        ReplayChatClient replay(transcripts);
        Pipeline p(e2e_config(dir.path() / run), replay);
        const auto stages = p.run_e2e();
        c.expect(replay.misses() == 0, std::string(run) + ": " + std::to_string(replay.misses()) + " transcript misses");
        for (const auto& s : stages) c.expect(fs::exists(s.manifest), s.stage + " manifest missing");
        const Json report = Json::parse(read_text_file(p.artifact("validation_report.json")));
        c.expect(report["attempted"] == 10, "attempted " + report["attempted"].dump());
        c.expect(report["counts"]["Validated"] == 5, "validated " + report["counts"]["Validated"].dump());
        c.expect(report["keep_rate"] == 0.5, "keep rate " + report["keep_rate"].dump());
        c.expect(read_jsonl(p.artifact("datasets/train.jsonl")).size() == 5, "train.jsonl line count");
        digests.push_back(file_sha256(p.artifact("datasets/train.jsonl")) + path_digest(p.artifact("datasets")));
        bool all_skipped = true;
        for (const auto& s : p.run_e2e()) all_skipped = all_skipped && s.skipped;
        c.expect(all_skipped, std::string(run) + ": rerun was not a no-op");
    }
    c.expect(digests[0] == digests[1], "dataset digests differ across reruns");
    return c;
}

Check em_scoring() {
    Check c;
    const auto tasks = load_tasks(kData / "fixtures/eval/tasks.jsonl");
    c.expect(tasks.size() == 20, "fixture has " + std::to_string(tasks.size()) + " tasks");
    OfflineCompletions all(kData / "fixtures/eval/completions.jsonl");
    const EvalReport full = run_eval(tasks, all, RagMode::BaseOnly, {});
    c.expect(format_hundredths(full.em_hundredths()) == "45.00", "EM " + format_hundredths(full.em_hundredths()));
    TempDir dir;
    auto lines = read_jsonl(kData / "fixtures/eval/completions.jsonl");
    lines.erase(lines.begin());  // t01 is correct
    write_text_file(dir.path() / "fewer.jsonl", to_jsonl(lines));
    OfflineCompletions fewer(dir.path() / "fewer.jsonl");
    const EvalReport less = run_eval(tasks, fewer, RagMode::BaseOnly, {});
    c.expect(format_hundredths(less.em_hundredths()) == "40.00", "EM after removal " + format_hundredths(less.em_hundredths()));
    return c;
}

std::vector<std::string> signature_entries(const std::string& prompt) {
    std::vector<std::string> out;
    std::istringstream in(prompt);
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("- ", 0) == 0) out.push_back(line);
    }
    return out;
}

Check rag_assembly() {
    Check c;
    const auto lib = load_function_docs(kData / "fixtures/docs", {"ABS", "COUNTIF", "IF", "MATCH", "SUM"});
    QATask t;
    t.id = "chile";
    t.grid = medals();
    t.question = "What is the position of the nation 'Chile' in the list of nations?";
    t.gold_answers = {"3"};
    t.oracle_formula = "=MATCH(\"Chile\", B2:B11, 0)";
    const auto oracle = signature_entries(build_eval_prompt(t, RagMode::Oracle, lib));
    c.expect(oracle.size() == 1 && oracle[0].rfind("- MATCH(", 0) == 0, "oracle mode blocks: " + std::to_string(oracle.size()));
    c.expect(signature_entries(build_eval_prompt(t, RagMode::All, lib)).size() == lib.size(), "all mode block count");
    c.expect(signature_entries(build_eval_prompt(t, RagMode::BaseOnly, lib)).empty(), "base mode has signatures");

    std::vector<FunctionSpec> big;
    for (const auto& n : core_library().names()) big.push_back({n, n + "(value)", {{"value", true}}, "Summary of " + n + ".", ""});
    std::mt19937_64 rng(50);
    const auto names = core_library().names();
    for (int i = 0; i < 50; ++i) {
        std::set<std::string> chosen;
        std::string formula = "=";
        const int calls = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < calls; ++k) {
            const auto& n = names[rng() % names.size()];
            chosen.insert(n);
            formula += (k ? "+" : "") + n + "(A1)";
        }
        t.oracle_formula = formula;
        const auto o = signature_entries(build_eval_prompt(t, RagMode::Oracle, big));
        const auto a = signature_entries(build_eval_prompt(t, RagMode::All, big));
        const std::set<std::string> all_set(a.begin(), a.end());
        c.expect(a.size() == big.size(), "all mode size");
        c.expect(o.size() == chosen.size(), formula + ": oracle entries " + std::to_string(o.size()));
        for (const auto& e : o) c.expect(all_set.count(e) > 0, "oracle entry outside all mode: " + e);
    }
    return c;
}

Check paired_analysis() {
    Check c;
    EvalReport base, ft;
    auto add = [&](const std::string& id, const std::string& bf, bool bm, const std::string& ff, bool fm) {
        EvalRecord b, f;
        b.task_id = f.task_id = id;
        b.formula = bf;
        b.matched = bm;
        f.formula = ff;
        f.matched = fm;
        base.records.push_back(b);
        ft.records.push_back(f);
    };
    int n = 0;
    auto id = [&] { return "task" + std::to_string(n++); };
    for (int i = 0; i < 39; ++i) add(id(), "=SUM(B2:B5)", false, "=SUM(B2:B9)", true);
    for (int i = 0; i < 50; ++i) add(id(), "=MAX(B2:B5)", false, "=SUM(B2:B9)", true);
    for (int i = 0; i < 42; ++i) add(id(), "=SUM(B2:B5)+MAX(B2:B5)", false, "=SUM(B2:B9)", true);
    for (int i = 0; i < 5; ++i) add(id(), "=MATCH(1,A1:A4,0)", true, "=MATCH(1,A1:A4,1)", false);
    for (int i = 0; i < 41; ++i) add(id(), "=SUM(A1)", true, "=COUNT(A1)", false);
    for (int i = 0; i < 60; ++i) add(id(), "=SUM(A1)", true, "=SUM(A1)", true);
    std::shuffle(ft.records.begin(), ft.records.end(), std::mt19937_64(7));
    const PairedStats s = paired_improvements(base, ft);
    c.expect(s.improvements.samples() == "39/131", "improvements " + s.improvements.samples());
    c.expect(s.improvements.percent() == "29.77", "percent " + s.improvements.percent());
    c.expect(s.regressions.samples() == "5/46", "regressions " + s.regressions.samples());
    c.expect(s.regressions.percent() == "10.87", "regression percent " + s.regressions.percent());
    return c;
}

Check equivalence_policy() {
    Check c;
    EquivalencePolicy p;
    auto num = [](double x) { return EvalOutcome::plain(CellValue::number(x)); };
    c.expect(values_equivalent(num(3), 2, p, "MATCH"), "0-index MATCH example rejected");
    EquivalencePolicy strict = p;
    strict.allow_offset = false;
    c.expect(!values_equivalent(num(3), 2, strict, "MATCH"), "offset accepted with allow_offset=false");
    c.expect(!values_equivalent(num(3), 2, p, "SUM"), "offset accepted for SUM");
    c.expect(!values_equivalent(num(3.5), 2.5, p, "MATCH"), "offset accepted for non-integral values");

    std::mt19937_64 rng(2024);
    const std::vector<std::string> words = {"Chile", " chile ", "1,000", "$1000", "TRUE", "false", "3", "3.0000001", "x"};
    std::vector<CellValue> cells;
    for (int i = 0; i < 80; ++i) {
        switch (rng() % 4) {
            case 0: cells.push_back(CellValue::number(static_cast<double>(rng() % 7) - 2)); break;
            case 1: cells.push_back(CellValue::text(words[rng() % words.size()])); break;
            case 2: cells.push_back(CellValue::boolean(rng() % 2)); break;
            default: cells.push_back(CellValue::number(1000 + static_cast<double>(rng() % 4) * 1e-4)); break;
        }
    }
    auto as_json = [](const CellValue& v) -> Json {
        if (v.is_number()) return v.as_number();
        if (v.is_bool()) return v.as_bool();
        return v.as_text();
    };
    EquivalencePolicy loose = p;
    loose.numeric_rel_tol = 1e-3;
    for (const auto& a : cells) {
        c.expect(values_equivalent(EvalOutcome::plain(a), as_json(a), p), "not reflexive: " + describe(a));
        for (const auto& b : cells) {
            const bool ab = values_equivalent(EvalOutcome::plain(a), as_json(b), p);
            const bool ba = values_equivalent(EvalOutcome::plain(b), as_json(a), p);
            c.expect(ab == ba, "not symmetric: " + describe(a) + " / " + describe(b));
            if (ab) c.expect(values_equivalent(EvalOutcome::plain(a), as_json(b), loose), "not monotone: " + describe(a));
            for (const std::string f : {"MATCH", "SUM"}) {
                const bool with = values_equivalent(EvalOutcome::plain(a), as_json(b), p, f);
                if (with && !ab) {
                    const bool integral = a.is_number() && b.is_number() && std::trunc(a.as_number()) == a.as_number() &&
                                          a.as_number() == b.as_number() + 1;
                    c.expect(f == "MATCH" && integral, "offset misapplied: " + f + " " + describe(a) + " / " + describe(b));
                }
            }
        }
    }
    return c;
}

int emit_transcripts(const fs::path& dir) {
    auto teacher = std::make_shared<testing::ScriptedTeacher>(read_text_file(kData / "fixtures/teacher/abs_doc_qa_response.txt"));
    fs::remove_all(dir);
    TranscriptLogger recorder(teacher, dir / "teacher.jsonl");
    TempDir out;
    Pipeline p(e2e_config(out.path()), recorder);
    p.run_e2e();
    std::cout << "recorded " << read_jsonl(dir / "teacher.jsonl").size() << " exchanges into " << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc == 3 && std::strcmp(argv[1], "--emit-transcripts") == 0) return emit_transcripts(argv[2]);
    const std::vector<std::pair<std::string, std::function<Check()>>> criteria = {
        {"interpreter conformance", interpreter_conformance},
        {"anchored evaluations", anchored_evaluations},
        {"parser properties", parser_properties},
        {"tutorial compilation", tutorial_compilation},
        {"hermetic end-to-end", hermetic_e2e},
        {"EM scoring", em_scoring},
        {"RAG assembly", rag_assembly},
        {"paired analysis", paired_analysis},
        {"equivalence policy", equivalence_policy},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Check c;
        try {
            c = fn();
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << (c.ok() ? "PASS " : "FAIL ") << name << (c.ok() ? "" : " -- " + c.summary()) << "\n";
        failed += !c.ok();
    }
    return failed == 0 ? 0 : 1;
}
