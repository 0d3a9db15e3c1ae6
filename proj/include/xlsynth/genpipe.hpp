#pragma once

// Generation pipeline: table assignment, argument-rotation sample
// generation, tutorial compilation and doc-to-QA reformatting.

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlsynth/chat.hpp"
#include "xlsynth/grid.hpp"
#include "xlsynth/libprep.hpp"
#include "xlsynth/samples.hpp"

namespace xlsynth {

class TableStoreExhausted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training tables addressed by source id.
class TableStore {
public:
    TableStore() = default;
    explicit TableStore(std::vector<Grid> grids);
    // Every .json/.csv/.tsv/.md file, sorted by file name.
    static TableStore load_dir(const std::filesystem::path& dir);

    std::size_t size() const { return grids_.size(); }
    const Grid& at(std::size_t i) const { return grids_.at(i); }
    const Grid* find(const std::string& id) const;

    // Up to n distinct tables drawn uniformly; throws TableStoreExhausted
    // when the store is empty.
    std::vector<Grid> draw_pool(std::mt19937_64& rng, std::size_t n) const;

private:
    std::vector<Grid> grids_;
};

struct GenOptions {
    std::string model_id = "teacher";
    double temperature = 0.7;
    std::size_t pool_size = 10;
    std::size_t max_table_rows = 20;
};

struct GenRecord {
    int batch = 0;
    std::string func;
    std::string kind;  // failure | reject | warning
    std::string message;
};

Json gen_record_to_json(const GenRecord& r);

struct AssignResult {
    std::size_t choice = 0;  // 0-based index into the pool
    bool reprompted = false;
    bool fell_back = false;
};

// Numbered candidate listing used in the table-choice prompt.
std::string render_table_candidates(std::span<const Grid> pool, std::size_t max_rows);

AssignResult assign_table(const FunctionSpec& f, std::span<const Grid> pool, ChatClient& client, const GenOptions& opts);

struct GenerationResult {
    SampleSet set;
    std::vector<std::string> rejects;
    std::optional<std::string> failure;
};

GenerationResult generate_samples(const FunctionSpec& f, const Grid& t, ChatClient& client, const GenOptions& opts);

struct TutorialDoc {
    std::string text;
    std::string sample_id;
    std::string template_version;
};

Json tutorial_to_json(const TutorialDoc& d);
TutorialDoc tutorial_from_json(const Json& j);

TutorialDoc compile_tutorial(const SynSample& s, const Grid& t, std::size_t max_rows = 20);

struct DocQaExample {
    std::string func;
    std::string description;
    std::optional<std::string> context_table;  // markdown excerpt
    std::string formula;
    std::string expected_output;
};

Json doc_qa_to_json(const DocQaExample& e);
DocQaExample doc_qa_from_json(const Json& j);

struct DocQaResult {
    std::vector<DocQaExample> examples;
    std::vector<std::string> rejects;
};

DocQaResult parse_doc_qa_response(const std::string& func, const std::string& response);
DocQaResult reformat_docs_qa(const FunctionSpec& f, ChatClient& client, const GenOptions& opts);

struct BatchOptions {
    int batches = 1;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::optional<std::filesystem::path> checkpoint;
    GenOptions gen;
};

struct BatchResult {
    std::vector<SynSample> samples;
    std::vector<GenRecord> records;
    std::size_t attempted = 0;  // (batch, func) units run in this call
    std::size_t resumed = 0;    // units restored from the checkpoint
};

// Seed for the pool draw of one (batch, func) unit.
std::uint64_t unit_seed(std::uint64_t seed, int batch, const std::string& func);

// Runs every (batch, func) unit. Units already in the checkpoint are
// restored instead of rerun. Credential failures and an empty table store
// abort; everything else is recorded per unit.
BatchResult run_generation_batch(const std::vector<FunctionSpec>& library, const TableStore& store, ChatClient& client,
                                 const BatchOptions& opts);

}  // namespace xlsynth
