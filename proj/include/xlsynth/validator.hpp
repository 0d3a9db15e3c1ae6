#pragma once

// Sample validation: execution filtering, parallel oracle solutions,
// oracle-runner protocol client and value equivalence.

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlsynth/chat.hpp"
#include "xlsynth/engine.hpp"
#include "xlsynth/genpipe.hpp"
#include "xlsynth/samples.hpp"

namespace xlsynth {

struct EquivalencePolicy {
    double numeric_rel_tol = 1e-6;
    double numeric_abs_tol = 1e-9;
    bool trim = true;
    bool casefold = true;
    bool strip_commas_currency = true;
    std::set<std::string> positional_offset_functions{"MATCH", "ROW", "COLUMN", "RANK"};
    bool allow_offset = true;

    void validate() const;  // throws std::invalid_argument on negative tolerances
};

Json policy_to_json(const EquivalencePolicy& p);
// Missing keys keep their defaults; unknown keys are rejected.
EquivalencePolicy policy_from_json(const Json& j);

// Compares an Excel outcome with an oracle JSON value. `func` gates the
// positional offset rule (oracle + 1 == excel).
bool values_equivalent(const EvalOutcome& excel, const Json& oracle, const EquivalencePolicy& policy,
                       const std::string& func = "");

struct ExecResult {
    std::optional<EvalOutcome> pass;
    std::string failure;  // error code or parse error when !pass
};

// Parses and evaluates s.formula on t; on success stores the value in
// s.executed.
ExecResult execute_filter(SynSample& s, const Grid& t, const FunctionRegistry& registry = core_library());

class OracleGenFail : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OracleOptions {
    std::string model_id = "teacher";
    double temperature = 0.0;
    std::size_t max_table_rows = 20;
};

std::string generate_oracle_solution(const SynSample& s, const Grid& t, ChatClient& client, const OracleOptions& opts = {});

enum class RunnerStatus { Ok, Error, Timeout };

struct RunnerResponse {
    std::string id;
    RunnerStatus status = RunnerStatus::Error;
    Json value;  // null unless Ok
    std::string error_msg;
};

std::string_view runner_status_name(RunnerStatus s);
Json runner_request_json(const std::string& id, const Grid& table, const std::string& code, int timeout_ms);
RunnerResponse runner_response_from_json(const Json& j);

class RunnerDied : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OracleRunner {
public:
    virtual ~OracleRunner() = default;
    virtual RunnerResponse run(const Grid& table, const std::string& code, int timeout_ms) = 0;
};

// Child process speaking the line-delimited JSON protocol. The banner
// {"protocol": 1} is checked at start. A response slower than twice the
// requested timeout (plus a grace period) kills and restarts the child.
class SubprocessOracleRunner : public OracleRunner {
public:
    explicit SubprocessOracleRunner(std::vector<std::string> argv,
                                    std::chrono::milliseconds grace = std::chrono::milliseconds(1000));
    ~SubprocessOracleRunner() override;
    SubprocessOracleRunner(const SubprocessOracleRunner&) = delete;
    SubprocessOracleRunner& operator=(const SubprocessOracleRunner&) = delete;

    RunnerResponse run(const Grid& table, const std::string& code, int timeout_ms) override;
    std::size_t restarts() const { return restarts_; }

private:
    void start();
    void stop();
    std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline);

    std::vector<std::string> argv_;
    std::chrono::milliseconds grace_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::size_t next_id_ = 0;
    std::size_t restarts_ = 0;
};

// R runners, each used by one request at a time.
class RunnerPool : public OracleRunner {
public:
    explicit RunnerPool(std::vector<std::unique_ptr<OracleRunner>> runners);
    RunnerResponse run(const Grid& table, const std::string& code, int timeout_ms) override;

private:
    std::vector<std::unique_ptr<OracleRunner>> runners_;
    std::vector<bool> busy_;
    std::mutex mu_;
    std::condition_variable cv_;
};

enum class VerdictKind { ExecFail, OracleGenFail, OracleExecFail, Mismatch, Validated };

std::string_view verdict_name(VerdictKind k);

struct ValidationVerdict {
    VerdictKind kind = VerdictKind::ExecFail;
    std::string detail;
    std::optional<EvalOutcome> excel;
    Json oracle;
};

Json verdict_to_json(const ValidationVerdict& v);

ValidationVerdict cross_validate(const SynSample& s, const Grid& t, const std::string& code, OracleRunner& runner,
                                 const EquivalencePolicy& policy, int timeout_ms = 5000);

struct ValidateOptions {
    std::size_t workers = 1;
    int runner_timeout_ms = 5000;
    OracleOptions oracle;
};

struct ValidationReport {
    std::size_t attempted = 0;
    std::map<VerdictKind, std::size_t> counts;
    std::vector<std::pair<std::string, ValidationVerdict>> records;  // sample id -> verdict

    double keep_rate() const;
    Json to_json() const;
};

struct ValidationResult {
    std::vector<SynSample> validated;
    ValidationReport report;
};

// execute_filter -> generate_oracle_solution -> cross_validate per
// sample. Credential failures and runner death abort.
ValidationResult validate_batch(std::vector<SynSample> samples, const TableStore& tables, ChatClient& client,
                                OracleRunner& runner, const EquivalencePolicy& policy, const ValidateOptions& opts = {});

}  // namespace xlsynth
