#pragma once

// Table-QA evaluation: dataset recasting, oracle formulas, prompt
// assembly, execution-match scoring, dataset export and paired analysis.

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlsynth/chat.hpp"
#include "xlsynth/engine.hpp"
#include "xlsynth/genpipe.hpp"
#include "xlsynth/libprep.hpp"

namespace xlsynth {

struct QATask {
    std::string id;
    Grid grid{1, 1, {CellValue::blank()}, {}};
    std::string question;
    std::vector<std::string> gold_answers;
    std::vector<std::string> context_paragraphs;
    std::optional<std::string> oracle_formula;
};

Json qa_task_to_json(const QATask& t);
QATask qa_task_from_json(const Json& j);
std::vector<QATask> load_tasks(const std::filesystem::path& jsonl);

enum class DatasetFormat { WikiTQ, TatQA };

struct RecastResult {
    std::vector<QATask> tasks;
    std::vector<std::string> skipped;  // one log line per dropped record
};

// One JSON object per line.
//   wikitq: {"id", "question", "answers": [...], "table": [[header...], [row...]...]}
//   tatqa:  {"table": {"uid", "table": [[...]]}, "paragraphs": [{"text"}...],
//            "questions": [{"uid", "question", "answer"}...]}
RecastResult recast_dataset(std::istream& raw, DatasetFormat format);

// Normalization ladder for gold answers; see answers_match.
bool answers_match(const EvalOutcome& executed, const std::vector<std::string>& gold);

// Description of the ladder recorded in report metadata.
Json answer_normalization_metadata();

struct FormulaExtraction {
    std::string formula;
    bool fallback = false;  // taken from the last "=" line, not a fence
};

std::optional<FormulaExtraction> extract_formula(const std::string& generation);

struct OracleBuildOptions {
    std::string model_id = "teacher";
    double temperature = 0.0;
    std::size_t max_table_rows = 20;
    std::size_t workers = 1;
};

struct OracleBuildResult {
    std::vector<QATask> retained;
    std::vector<std::pair<std::string, std::string>> dropped;  // task id, reason
    std::size_t attempted = 0;
};

OracleBuildResult build_oracle_solutions(const std::vector<QATask>& tasks, ChatClient& client,
                                         const OracleBuildOptions& opts = {});

enum class RagMode { BaseOnly, All, Oracle };

std::string_view rag_mode_name(RagMode m);  // base | rag-all | rag-oracle
RagMode parse_rag_mode(std::string_view s);

class MissingOracle : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// "- SIGNATURE: summary"
std::string signature_line(const FunctionSpec& f);

std::string build_eval_prompt(const QATask& task, RagMode mode, const std::vector<FunctionSpec>& library,
                              std::size_t max_table_rows = 20);

enum class FailureStage { NoFormula, Parse, Execute, Mismatch };

std::string_view failure_stage_name(FailureStage s);

struct EvalRecord {
    std::string task_id;
    std::string raw_generation;
    std::optional<std::string> formula;
    std::optional<EvalOutcome> executed;
    bool matched = false;
    std::optional<FailureStage> failure_stage;
    bool fallback_extraction = false;
};

// Percentage with two decimals as integer hundredths, rounded half-up.
long long percent_hundredths(std::size_t part, std::size_t whole);
std::string format_hundredths(long long h);  // 4500 -> "45.00"

struct EvalReport {
    std::vector<EvalRecord> records;
    RagMode rag_mode = RagMode::BaseOnly;
    std::string model_id;

    std::size_t matched() const;
    long long em_hundredths() const;
    double em_percent() const { return static_cast<double>(em_hundredths()) / 100.0; }
    // Over records whose formula parsed.
    long long single_function_hundredths() const;
    double single_function_percent() const { return static_cast<double>(single_function_hundredths()) / 100.0; }

    Json to_json() const;
    static EvalReport from_json(const Json& j);
};

// Where a student's answer comes from.
class StudentSource {
public:
    virtual ~StudentSource() = default;
    virtual std::string complete(const QATask& task, const std::string& prompt) = 0;
    virtual std::string model_id() const = 0;
};

class ChatStudent : public StudentSource {
public:
    ChatStudent(ChatClient& client, std::string model_id, double temperature = 0.0);
    std::string complete(const QATask& task, const std::string& prompt) override;
    std::string model_id() const override { return model_id_; }

private:
    ChatClient& client_;
    std::string model_id_;
    double temperature_;
};

// Pre-generated completions: JSONL of {"id", "completion"}.
class OfflineCompletions : public StudentSource {
public:
    explicit OfflineCompletions(const std::filesystem::path& jsonl, std::string model_id = "offline");
    std::string complete(const QATask& task, const std::string& prompt) override;
    std::string model_id() const override { return model_id_; }

private:
    std::map<std::string, std::string> by_id_;
    std::string model_id_;
};

struct EvalOptions {
    std::size_t workers = 1;
    std::size_t max_table_rows = 20;
};

EvalReport run_eval(const std::vector<QATask>& tasks, StudentSource& student, RagMode mode,
                    const std::vector<FunctionSpec>& library, const EvalOptions& opts = {});

class SplitTooLarge : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SplitSpec {
    std::size_t heldout = 100;
    std::uint64_t seed = 0;
};

struct ExportSummary {
    std::size_t train = 0;
    std::size_t heldout = 0;
    std::size_t doc_qa = 0;
    std::size_t raw_docs = 0;
};

// Splits a tutorial document into (prompt, completion) at "## Formula:\n".
std::pair<std::string, std::string> split_tutorial(const std::string& text);

// Writes train.jsonl, heldout.jsonl, doc_qa_train.jsonl and
// raw_docs_train.jsonl under out_dir.
ExportSummary export_sft_dataset(const std::vector<TutorialDoc>& tutorials, const std::vector<QATask>& heldout_pool,
                                 const std::vector<DocQaExample>& doc_qa, const std::vector<FunctionSpec>& library,
                                 const SplitSpec& split, const std::filesystem::path& out_dir);

// Overrides use the field names of the exported file (e.g. "batch_size").
void export_hyperparams(const std::filesystem::path& path, const Json& overrides = Json::object());
std::string hyperparams_json(const Json& overrides = Json::object());

class IdSetMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PairedCount {
    std::size_t same_single = 0;
    std::size_t total = 0;
    std::string samples() const;  // "39/131"
    std::string percent() const;  // "29.77"
};

struct PairedStats {
    PairedCount improvements;
    PairedCount regressions;
    Json to_json() const;
};

PairedStats paired_improvements(const EvalReport& base, const EvalReport& ft);

}  // namespace xlsynth
