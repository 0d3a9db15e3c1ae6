#include "xlsynth/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "xlsynth/formula.hpp"
#include "xlsynth/prompts.hpp"
#include "xlsynth/serialize.hpp"
#include "xlsynth/text.hpp"
#include "xlsynth/util.hpp"

namespace xlsynth {

namespace {

constexpr int kReportSchemaVersion = 1;
constexpr double kAnswerRelTol = 1e-6;

std::vector<std::string> string_list(const Json& j) {
    std::vector<std::string> out;
    for (const auto& e : j) out.push_back(e.get<std::string>());
    return out;
}

// Gold answers may be numbers in the raw data; keep their literal text.
std::string answer_text(const Json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number()) return text::format_number(j.get<double>());
    if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
    throw std::invalid_argument("unsupported answer value " + j.dump());
}

Grid grid_from_rows_json(const Json& rows, const std::string& id) {
    if (!rows.is_array() || rows.empty()) throw std::invalid_argument("table has no rows");
    std::vector<std::vector<CellValue>> out;
    for (const auto& r : rows) {
        if (!r.is_array()) throw std::invalid_argument("table row is not a list");
        std::vector<CellValue> row;
        for (const auto& c : r) row.push_back(c.is_string() ? classify_field(c.get<std::string>()) : cell_from_json(c));
        out.push_back(std::move(row));
    }
    return Grid::from_rows(std::move(out), id);
}

struct GoldNumber {
    double value;
    bool percent;
};

std::optional<GoldNumber> answer_number(std::string_view raw) {
    std::string s = text::trim(raw);
    for (const char* sym : {",", "$", "€", "£", "¥"}) {
        const std::string needle(sym);
        for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos)) s.erase(pos, needle.size());
    }
    s = text::trim(s);
    bool percent = false;
    if (!s.empty() && s.back() == '%') {
        percent = true;
        s.pop_back();
    }
    if (s.empty()) return std::nullopt;
    auto v = text::coerce_number(s);
    if (!v) return std::nullopt;
    return GoldNumber{*v, percent};
}

bool close(double a, double b) { return a == b || std::fabs(a - b) <= kAnswerRelTol * std::max(std::fabs(a), std::fabs(b)); }

bool scalar_matches(const CellValue& v, const std::string& gold) {
    if (v.is_error()) return false;
    std::optional<double> x;
    if (v.is_number()) {
        x = v.as_number();
    } else if (v.is_text()) {
        if (auto n = answer_number(v.as_text()); n && !n->percent) x = n->value;
    }
    if (x) {
        if (auto g = answer_number(gold)) return close(*x, g->value) || (g->percent && close(*x, g->value / 100.0));
    }
    return text::casefold(text::trim(value_to_text(v))) == text::casefold(text::trim(gold));
}

// Perfect matching between executed cells and gold answers.
bool multiset_matches(const std::vector<CellValue>& cells, const std::vector<std::string>& gold) {
    if (cells.size() != gold.size()) return false;
    const std::size_t n = cells.size();
    std::vector<int> owner(n, -1);
    std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t i, std::vector<bool>& seen) {
        for (std::size_t g = 0; g < n; ++g) {
            if (seen[g] || !scalar_matches(cells[i], gold[g])) continue;
            seen[g] = true;
            if (owner[g] < 0 || augment(static_cast<std::size_t>(owner[g]), seen)) {
                owner[g] = static_cast<int>(i);
                return true;
            }
        }
        return false;
    };
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<bool> seen(n, false);
        if (!augment(i, seen)) return false;
    }
    return true;
}

std::string context_section(const QATask& t) {
    if (t.context_paragraphs.empty()) return "";
    return "## Context:\n" + text::join(t.context_paragraphs, "\n\n") + "\n\n";
}

}  // namespace

Json qa_task_to_json(const QATask& t) {
    Json j = {{"id", t.id}, {"grid", grid_to_json(t.grid)}, {"question", t.question}, {"gold_answers", t.gold_answers}};
    if (!t.context_paragraphs.empty()) j["context_paragraphs"] = t.context_paragraphs;
    if (t.oracle_formula) j["oracle_formula"] = *t.oracle_formula;
    return j;
}

QATask qa_task_from_json(const Json& j) {
    QATask t;
    t.id = j.at("id").get<std::string>();
    t.grid = grid_from_json(j.at("grid"));
    t.question = j.at("question").get<std::string>();
    t.gold_answers = string_list(j.at("gold_answers"));
    if (t.gold_answers.empty()) throw std::invalid_argument("task " + t.id + " has no gold answers");
    if (j.contains("context_paragraphs")) t.context_paragraphs = string_list(j["context_paragraphs"]);
    if (j.contains("oracle_formula") && j["oracle_formula"].is_string()) t.oracle_formula = j["oracle_formula"].get<std::string>();
    return t;
}

std::vector<QATask> load_tasks(const std::filesystem::path& jsonl) {
    std::vector<QATask> out;
    for (const auto& j : read_jsonl(jsonl)) out.push_back(qa_task_from_json(j));
    return out;
}

RecastResult recast_dataset(std::istream& raw, DatasetFormat format) {
    RecastResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(raw, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        try {
            const Json j = Json::parse(line);
            if (format == DatasetFormat::WikiTQ) {
                QATask t;
                t.id = j.at("id").get<std::string>();
                t.question = j.at("question").get<std::string>();
                for (const auto& a : j.at("answers")) t.gold_answers.push_back(answer_text(a));
                if (t.gold_answers.empty()) throw std::invalid_argument("empty answer list");
                t.grid = grid_from_rows_json(j.at("table"), t.id);
                out.tasks.push_back(std::move(t));
                continue;
            }
            const Json& table = j.at("table");
            const std::string table_id = table.value("uid", "");
            const Grid grid = grid_from_rows_json(table.at("table"), table_id);
            std::vector<std::string> paragraphs;
            for (const auto& p : j.value("paragraphs", Json::array())) paragraphs.push_back(p.at("text").get<std::string>());
            for (const auto& q : j.at("questions")) {
                try {
                    QATask t;
                    t.id = q.at("uid").get<std::string>();
                    t.question = q.at("question").get<std::string>();
                    const Json& a = q.at("answer");
                    if (a.is_array()) {
                        for (const auto& e : a) t.gold_answers.push_back(answer_text(e));
                    } else {
                        t.gold_answers.push_back(answer_text(a));
                    }
                    if (t.gold_answers.empty()) throw std::invalid_argument("empty answer list");
                    t.grid = grid;
                    t.context_paragraphs = paragraphs;
                    out.tasks.push_back(std::move(t));
                } catch (const std::exception& e) {
                    out.skipped.push_back(where + "question " + q.value("uid", "?") + ": " + e.what());
                }
            }
        } catch (const std::exception& e) {
            out.skipped.push_back(where + e.what());
        }
    }
    return out;
}

bool answers_match(const EvalOutcome& executed, const std::vector<std::string>& gold) {
    if (gold.empty()) return false;
    if (executed.is_plain()) return gold.size() == 1 && scalar_matches(executed.value(), gold[0]);
    return multiset_matches(executed.flatten(), gold);
}

Json answer_normalization_metadata() {
    return {{"numeric_rel_tol", kAnswerRelTol},
            {"strip", Json::array({",", "$", "€", "£", "¥"})},
            {"gold_percent", "a trailing % on the gold side also accepts the value divided by 100"},
            {"text", "trimmed, casefolded equality"},
            {"arrays", "order-insensitive multiset against the gold list"},
            {"errors", "never match"}};
}

std::optional<FormulaExtraction> extract_formula(const std::string& generation) {
    try {
        std::string f = extract_fenced_block(generation, "excel");
        if (!f.empty()) {
            // A fenced block may hold explanation lines before the formula.
            const auto lines = text::split_lines(f);
            for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
                const std::string t = text::trim(*it);
                if (!t.empty() && t.front() == '=') return FormulaExtraction{t, false};
            }
            return FormulaExtraction{text::trim(f), false};
        }
    } catch (const NoBlockFound&) {
    }
    const auto lines = text::split_lines(generation);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        const std::string t = text::trim(*it);
        if (!t.empty() && t.front() == '=') return FormulaExtraction{t, true};
    }
    return std::nullopt;
}

OracleBuildResult build_oracle_solutions(const std::vector<QATask>& tasks, ChatClient& client,
                                         const OracleBuildOptions& opts) {
    auto attempt = [&](std::size_t i) -> std::optional<std::string> {
        const QATask& t = tasks[i];
        const std::string prompt = render_prompt(prompt_template(TemplateId::OracleSolution),
                                                 {{"context", context_section(t)},
                                                  {"table", render_markdown(t.grid, opts.max_table_rows)},
                                                  {"query", t.question}});
        std::string reply;
        try {
            reply = client.chat(single_turn(opts.model_id, prompt, opts.temperature));
        } catch (const TransportError& e) {
            return "error:teacher call failed: " + std::string(e.what());
        }
        auto f = extract_formula(reply);
        if (!f) return "error:no formula in reply";
        auto ast = try_parse_formula(f->formula);
        if (!ast) return "error:unparseable formula " + f->formula;
        if (!answers_match(evaluate(*ast, t.grid), t.gold_answers)) return "error:wrong answer from " + f->formula;
        return f->formula;
    };
    auto results = parallel_map(tasks.size(), opts.workers, attempt);
    OracleBuildResult out;
    out.attempted = tasks.size();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const std::string& r = *results[i];
        if (r.rfind("error:", 0) == 0) {
            out.dropped.emplace_back(tasks[i].id, r.substr(6));
            continue;
        }
        QATask t = tasks[i];
        t.oracle_formula = r;
        out.retained.push_back(std::move(t));
    }
    return out;
}

std::string_view rag_mode_name(RagMode m) {
    switch (m) {
        case RagMode::BaseOnly: return "base";
        case RagMode::All: return "rag-all";
        case RagMode::Oracle: return "rag-oracle";
    }
    return "base";
}

RagMode parse_rag_mode(std::string_view s) {
    if (s == "base") return RagMode::BaseOnly;
    if (s == "rag-all") return RagMode::All;
    if (s == "rag-oracle") return RagMode::Oracle;
    throw std::invalid_argument("unknown mode " + std::string(s) + " (expected base, rag-all or rag-oracle)");
}

std::string signature_line(const FunctionSpec& f) { return "- " + f.signature + ": " + f.summary; }

std::string build_eval_prompt(const QATask& task, RagMode mode, const std::vector<FunctionSpec>& library,
                              std::size_t max_table_rows) {
    std::vector<const FunctionSpec*> shown;
    if (mode == RagMode::All) {
        for (const auto& f : library) shown.push_back(&f);
    } else if (mode == RagMode::Oracle) {
        if (!task.oracle_formula) throw MissingOracle("task " + task.id + " has no oracle formula");
        const auto used = extract_functions(*parse_formula(*task.oracle_formula));
        for (const auto& f : library) {
            if (used.count(text::to_upper(f.name))) shown.push_back(&f);
        }
    }
    std::string signatures;
    if (!shown.empty()) {
        signatures = "## Function Signatures:\n";
        for (const auto* f : shown) signatures += signature_line(*f) + "\n";
        signatures += "\n";
    }
    return render_prompt(prompt_template(TemplateId::EvalTask), {{"signatures", signatures},
                                                                  {"context", context_section(task)},
                                                                  {"table", render_markdown(task.grid, max_table_rows)},
                                                                  {"query", task.question}});
}

std::string_view failure_stage_name(FailureStage s) {
    switch (s) {
        case FailureStage::NoFormula: return "no_formula";
        case FailureStage::Parse: return "parse";
        case FailureStage::Execute: return "execute";
        case FailureStage::Mismatch: return "mismatch";
    }
    return "no_formula";
}

namespace {

FailureStage parse_failure_stage(std::string_view s) {
    for (auto f : {FailureStage::NoFormula, FailureStage::Parse, FailureStage::Execute, FailureStage::Mismatch}) {
        if (failure_stage_name(f) == s) return f;
    }
    throw std::invalid_argument("unknown failure stage " + std::string(s));
}

bool parses_as_single_function(const std::optional<std::string>& formula) {
    if (!formula) return false;
    auto ast = try_parse_formula(*formula);
    return ast && is_single_function(*ast);
}

}  // namespace

long long percent_hundredths(std::size_t part, std::size_t whole) {
    if (whole == 0) return 0;
    const auto m = static_cast<long long>(part), n = static_cast<long long>(whole);
    return (20000 * m + n) / (2 * n);
}

std::string format_hundredths(long long h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", h / 100, h % 100);
    return buf;
}

std::size_t EvalReport::matched() const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.matched; }));
}

long long EvalReport::em_hundredths() const { return percent_hundredths(matched(), records.size()); }

long long EvalReport::single_function_hundredths() const {
    std::size_t parsed = 0, single = 0;
    for (const auto& r : records) {
        if (!r.formula) continue;
        auto ast = try_parse_formula(*r.formula);
        if (!ast) continue;
        ++parsed;
        if (is_single_function(*ast)) ++single;
    }
    return percent_hundredths(single, parsed);
}

Json EvalReport::to_json() const {
    Json recs = Json::array();
    for (const auto& r : records) {
        recs.push_back({{"task_id", r.task_id},
                        {"raw_generation", r.raw_generation},
                        {"formula", r.formula ? Json(*r.formula) : Json(nullptr)},
                        {"executed", r.executed ? outcome_to_json(*r.executed) : Json(nullptr)},
                        {"matched", r.matched},
                        {"failure_stage", r.failure_stage ? Json(failure_stage_name(*r.failure_stage)) : Json(nullptr)},
                        {"fallback_extraction", r.fallback_extraction}});
    }
    return {{"schema_version", kReportSchemaVersion},
            {"model_id", model_id},
            {"rag_mode", rag_mode_name(rag_mode)},
            {"em_percent", format_hundredths(em_hundredths())},
            {"single_function_percent", format_hundredths(single_function_hundredths())},
            {"answer_normalization", answer_normalization_metadata()},
            {"records", recs}};
}

EvalReport EvalReport::from_json(const Json& j) {
    if (j.value("schema_version", 0) != kReportSchemaVersion) throw std::invalid_argument("unsupported report schema version");
    EvalReport r;
    r.model_id = j.value("model_id", "");
    r.rag_mode = parse_rag_mode(j.value("rag_mode", "base"));
    for (const auto& e : j.at("records")) {
        EvalRecord rec;
        rec.task_id = e.at("task_id").get<std::string>();
        rec.raw_generation = e.value("raw_generation", "");
        if (e.contains("formula") && e["formula"].is_string()) rec.formula = e["formula"].get<std::string>();
        if (e.contains("executed") && !e["executed"].is_null()) rec.executed = outcome_from_json(e["executed"]);
        rec.matched = e.at("matched").get<bool>();
        if (e.contains("failure_stage") && e["failure_stage"].is_string()) {
            rec.failure_stage = parse_failure_stage(e["failure_stage"].get<std::string>());
        }
        rec.fallback_extraction = e.value("fallback_extraction", false);
        r.records.push_back(std::move(rec));
    }
    return r;
}

ChatStudent::ChatStudent(ChatClient& client, std::string model_id, double temperature)
    : client_(client), model_id_(std::move(model_id)), temperature_(temperature) {}

std::string ChatStudent::complete(const QATask&, const std::string& prompt) {
    return client_.chat(single_turn(model_id_, prompt, temperature_));
}

OfflineCompletions::OfflineCompletions(const std::filesystem::path& jsonl, std::string model_id)
    : model_id_(std::move(model_id)) {
    for (const auto& j : read_jsonl(jsonl)) by_id_[j.at("id").get<std::string>()] = j.at("completion").get<std::string>();
}

std::string OfflineCompletions::complete(const QATask& task, const std::string&) {
    auto it = by_id_.find(task.id);
    if (it == by_id_.end()) throw TransportError("no offline completion for task " + task.id);
    return it->second;
}

EvalReport run_eval(const std::vector<QATask>& tasks, StudentSource& student, RagMode mode,
                    const std::vector<FunctionSpec>& library, const EvalOptions& opts) {
    auto score = [&](std::size_t i) {
        const QATask& t = tasks[i];
        EvalRecord r;
        r.task_id = t.id;
        const std::string prompt = build_eval_prompt(t, mode, library, opts.max_table_rows);
        try {
            r.raw_generation = student.complete(t, prompt);
        } catch (const TransportError&) {
            r.failure_stage = FailureStage::NoFormula;
            return r;
        }
        auto f = extract_formula(r.raw_generation);
        if (!f) {
            r.failure_stage = FailureStage::NoFormula;
            return r;
        }
        r.formula = f->formula;
        r.fallback_extraction = f->fallback;
        auto ast = try_parse_formula(f->formula);
        if (!ast) {
            r.failure_stage = FailureStage::Parse;
            return r;
        }
        EvalOutcome out = evaluate(*ast, t.grid);
        const auto cells = out.flatten();
        const bool errored = std::any_of(cells.begin(), cells.end(), [](const CellValue& c) { return c.is_error(); });
        r.executed = std::move(out);
        if (errored) {
            r.failure_stage = FailureStage::Execute;
            return r;
        }
        r.matched = answers_match(*r.executed, t.gold_answers);
        if (!r.matched) r.failure_stage = FailureStage::Mismatch;
        return r;
    };
    EvalReport report;
    report.rag_mode = mode;
    report.model_id = student.model_id();
    report.records = parallel_map(tasks.size(), opts.workers, score);
    return report;
}

std::pair<std::string, std::string> split_tutorial(const std::string& text) {
    static const std::string marker = "## Formula:\n";
    const auto pos = text.rfind(marker);
    if (pos == std::string::npos) throw std::invalid_argument("tutorial has no formula section");
    return {text.substr(0, pos + marker.size()), text.substr(pos + marker.size())};
}

ExportSummary export_sft_dataset(const std::vector<TutorialDoc>& tutorials, const std::vector<QATask>& heldout_pool,
                                 const std::vector<DocQaExample>& doc_qa, const std::vector<FunctionSpec>& library,
                                 const SplitSpec& split, const std::filesystem::path& out_dir) {
    if (split.heldout > heldout_pool.size()) {
        throw SplitTooLarge("heldout split of " + std::to_string(split.heldout) + " exceeds " +
                            std::to_string(heldout_pool.size()) + " available tasks");
    }
    ExportSummary summary;
    std::vector<Json> train;
    for (const auto& t : tutorials) {
        auto [prompt, completion] = split_tutorial(t.text);
        train.push_back({{"prompt", prompt}, {"completion", completion}, {"sample_id", t.sample_id}});
    }
    summary.train = train.size();

    std::vector<std::size_t> order(heldout_pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(split.seed, 0, "heldout"));
    for (std::size_t i = 0; i < split.heldout; ++i) std::swap(order[i], order[i + uniform_index(rng, order.size() - i)]);
    std::vector<Json> heldout;
    for (std::size_t i = 0; i < split.heldout; ++i) {
        const QATask& t = heldout_pool[order[i]];
        Json j = qa_task_to_json(t);
        j["prompt"] = build_eval_prompt(t, RagMode::BaseOnly, library);
        heldout.push_back(std::move(j));
    }
    summary.heldout = heldout.size();

    std::vector<Json> qa;
    for (const auto& e : doc_qa) {
        std::string prompt = "## Function:\n" + e.func + "\n\n";
        if (e.context_table) prompt += "## Table:\n" + *e.context_table + "\n\n";
        prompt += "## Query:\n" + e.description + "\n\n## Formula:\n";
        qa.push_back({{"prompt", prompt},
                      {"completion", "```excel\n" + e.formula + "\n```"},
                      {"expected_output", e.expected_output}});
    }
    summary.doc_qa = qa.size();

    std::vector<Json> docs;
    for (const auto& f : library) docs.push_back({{"func", f.name}, {"text", f.doc_text}});
    summary.raw_docs = docs.size();

    write_text_file(out_dir / "train.jsonl", to_jsonl(train));
    write_text_file(out_dir / "heldout.jsonl", to_jsonl(heldout));
    write_text_file(out_dir / "doc_qa_train.jsonl", to_jsonl(qa));
    write_text_file(out_dir / "raw_docs_train.jsonl", to_jsonl(docs));
    return summary;
}

namespace {

struct HyperParam {
    const char* name;
    const char* value;        // JSON literal, written verbatim
    const char* search_range; // JSON literal or nullptr
};

constexpr HyperParam kHyperParams[] = {
    {"batch_size", "4", "[2, 4, 8, 16, 32]"},
    {"learning_rate", "5e-5", "[1e-5, 5e-5, 1e-4, 5e-4]"},
    {"lora_r", "64", "[32, 64, 128]"},
    {"lora_alpha", "1", nullptr},
    {"max_epochs", "6", nullptr},
    {"early_stop_patience", "3", nullptr},
    {"lr_scheduler", "\"cosine\"", "[\"linear\", \"cosine\"]"},
    {"warmup_ratio", "0.5", nullptr},
};

}  // namespace

std::string hyperparams_json(const Json& overrides) {
    if (!overrides.is_object()) throw std::invalid_argument("hyperparameter overrides must be an object");
    for (const auto& [key, _] : overrides.items()) {
        const bool known = std::any_of(std::begin(kHyperParams), std::end(kHyperParams), [&](const HyperParam& h) { return key == h.name; });
        if (!known) throw std::invalid_argument("unknown hyperparameter " + key);
    }
    // Hand-assembled so values keep their literal spelling (5e-5, not 5e-05).
    std::string out = "{\n  \"hyperparameters\": {\n";
    std::string ranges, provenance;
    bool first_range = true;
    for (std::size_t i = 0; i < std::size(kHyperParams); ++i) {
        const HyperParam& h = kHyperParams[i];
        const bool over = overrides.contains(h.name);
        const std::string value = over ? overrides[h.name].dump() : h.value;
        out += "    \"" + std::string(h.name) + "\": " + value + (i + 1 < std::size(kHyperParams) ? ",\n" : "\n");
        provenance += "    \"" + std::string(h.name) + "\": \"" + (over ? "overridden" : "default") + "\"" +
                      (i + 1 < std::size(kHyperParams) ? ",\n" : "\n");
        if (h.search_range) {
            ranges += std::string(first_range ? "" : ",\n") + "    \"" + h.name + "\": " + h.search_range;
            first_range = false;
        }
    }
    out += "  },\n  \"search_ranges\": {\n" + ranges + "\n  },\n  \"provenance\": {\n" + provenance + "  }\n}\n";
    return out;
}

void export_hyperparams(const std::filesystem::path& path, const Json& overrides) {
    write_text_file(path, hyperparams_json(overrides));
}

std::string PairedCount::samples() const { return std::to_string(same_single) + "/" + std::to_string(total); }

std::string PairedCount::percent() const { return format_hundredths(percent_hundredths(same_single, total)); }

Json PairedStats::to_json() const {
    auto one = [](const PairedCount& c) {
        return Json{{"samples", c.samples()}, {"percent", c.percent()}, {"same_single_function", c.same_single}, {"total", c.total}};
    };
    return {{"improvements", one(improvements)}, {"regressions", one(regressions)}};
}

PairedStats paired_improvements(const EvalReport& base, const EvalReport& ft) {
    std::map<std::string, const EvalRecord*> by_id;
    for (const auto& r : base.records) by_id[r.task_id] = &r;
    if (by_id.size() != base.records.size()) throw IdSetMismatch("base report has duplicate task ids");
    std::size_t seen = 0;
    PairedStats stats;
    for (const auto& f : ft.records) {
        auto it = by_id.find(f.task_id);
        if (it == by_id.end()) throw IdSetMismatch("task " + f.task_id + " missing from base report");
        ++seen;
        const EvalRecord& b = *it->second;
        if (b.matched == f.matched) continue;
        PairedCount& bucket = f.matched ? stats.improvements : stats.regressions;
        ++bucket.total;
        if (parses_as_single_function(b.formula) && parses_as_single_function(f.formula) &&
            extract_functions(*parse_formula(*b.formula)) == extract_functions(*parse_formula(*f.formula))) {
            ++bucket.same_single;
        }
    }
    if (seen != base.records.size() || ft.records.size() != base.records.size()) {
        throw IdSetMismatch("base and finetuned reports cover different task sets");
    }
    return stats;
}

}  // namespace xlsynth
