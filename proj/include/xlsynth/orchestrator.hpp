#pragma once

// Pipeline configuration and stage execution with audit manifests.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlsynth/chat.hpp"
#include "xlsynth/evalbench.hpp"
#include "xlsynth/validator.hpp"

namespace xlsynth {

class MissingFile : public std::runtime_error {
public:
    explicit MissingFile(const std::filesystem::path& p) : std::runtime_error("file not found: " + p.string()) {}
};

class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& msg)
        : std::runtime_error(field + ": " + msg), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct TeacherConfig {
    std::string endpoint;
    std::string model = "teacher";
    std::string api_key_env = "XLSYNTH_API_KEY";
    double temperature = 0.7;
    std::size_t requests_per_minute = 0;
    int max_retries = 5;
};

struct PipelineConfig {
    // Relative paths in the file are resolved against its directory.
    std::filesystem::path corpus;
    std::filesystem::path docs;
    std::filesystem::path tables;
    std::filesystem::path output = "out";
    std::optional<std::filesystem::path> tasks;  // heldout pool for export
    std::size_t k = 100;
    int batches = 1;
    std::uint64_t seed = 0;
    TeacherConfig teacher;
    std::map<std::string, std::string> students;  // model id -> endpoint
    EquivalencePolicy policy;
    std::size_t workers = 1;
    std::vector<std::string> oracle_runner{"xlsynth-oracle-runner"};
    int runner_timeout_ms = 5000;
    std::size_t pool_size = 10;
    std::size_t max_table_rows = 20;
    std::size_t heldout = 100;
    Json hyperparams = Json::object();

    Json to_json() const;
};

PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

enum class Stage { Libprep, Gen, Validate, Compile, Export };

std::string_view stage_name(Stage s);

class PrerequisiteMissing : public std::runtime_error {
public:
    PrerequisiteMissing(std::string artifact, const std::filesystem::path& path)
        : std::runtime_error("missing prerequisite " + artifact + " (" + path.string() + "); run the producing stage first"),
          artifact_(std::move(artifact)) {}
    const std::string& artifact() const { return artifact_; }

private:
    std::string artifact_;
};

class StageFailed : public std::runtime_error {
public:
    StageFailed(std::string stage, const std::string& why)
        : std::runtime_error("stage " + stage + " failed: " + why), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct StageOutcome {
    std::string stage;
    bool skipped = false;  // manifest matched; nothing rerun
    std::filesystem::path manifest;
};

// SHA-256 of a file, or of the sorted (relative name, digest) list of a
// directory's regular files.
std::string path_digest(const std::filesystem::path& p);

// Records inputs, outputs and config; reruns become no-ops when every
// digest matches.
class ManifestedStep {
public:
    ManifestedStep(std::string stage, std::filesystem::path manifest, Json config_snapshot);
    void input(std::string artifact, std::filesystem::path p);
    void output(std::filesystem::path p);
    StageOutcome run(const std::function<void()>& body);

private:
    Json current_inputs() const;
    std::string stage_;
    std::filesystem::path manifest_;
    Json config_;
    std::vector<std::pair<std::string, std::filesystem::path>> inputs_;
    std::vector<std::filesystem::path> outputs_;
};

using RunnerFactory = std::function<std::unique_ptr<OracleRunner>()>;

class Pipeline {
public:
    // Without a factory, config.oracle_runner is spawned as a subprocess.
    Pipeline(PipelineConfig cfg, ChatClient& teacher, RunnerFactory runners = {});

    StageOutcome run(Stage s);
    std::vector<StageOutcome> run_e2e();

    std::filesystem::path artifact(const std::string& rel) const { return cfg_.output / rel; }
    const PipelineConfig& config() const { return cfg_; }

private:
    void libprep();
    void gen();
    void validate();
    void compile();
    void export_datasets();

    PipelineConfig cfg_;
    ChatClient& teacher_;
    RunnerFactory runners_;
};

// Scores a student; writes the report and `<report>.manifest.json`.
// `completions` is recorded as an input when scoring offline.
StageOutcome run_eval_stage(const std::filesystem::path& tasks, RagMode mode, const std::filesystem::path& library,
                            StudentSource& student, const std::filesystem::path& report,
                            const std::optional<std::filesystem::path>& completions = std::nullopt,
                            const EvalOptions& opts = {});

StageOutcome run_analyze_stage(const std::filesystem::path& base, const std::filesystem::path& ft,
                               const std::filesystem::path& out);

}  // namespace xlsynth
