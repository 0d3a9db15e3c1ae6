#include "xlsynth/validator.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <variant>

#include "xlsynth/formula.hpp"
#include "xlsynth/prompts.hpp"
#include "xlsynth/text.hpp"
#include "xlsynth/util.hpp"

namespace xlsynth {

void EquivalencePolicy::validate() const {
    if (!(numeric_rel_tol >= 0) || !(numeric_abs_tol >= 0)) throw std::invalid_argument("tolerances must be non-negative");
}

Json policy_to_json(const EquivalencePolicy& p) {
    return {{"numeric_rel_tol", p.numeric_rel_tol},
            {"numeric_abs_tol", p.numeric_abs_tol},
            {"text_normalize", {{"trim", p.trim}, {"casefold", p.casefold}, {"strip_commas_currency", p.strip_commas_currency}}},
            {"positional_offset_functions", p.positional_offset_functions},
            {"allow_offset", p.allow_offset}};
}

EquivalencePolicy policy_from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("policy must be an object");
    EquivalencePolicy p;
    for (const auto& [key, v] : j.items()) {
        if (key == "numeric_rel_tol") {
            p.numeric_rel_tol = v.get<double>();
        } else if (key == "numeric_abs_tol") {
            p.numeric_abs_tol = v.get<double>();
        } else if (key == "allow_offset") {
            p.allow_offset = v.get<bool>();
        } else if (key == "positional_offset_functions") {
            p.positional_offset_functions.clear();
            for (const auto& n : v) p.positional_offset_functions.insert(text::to_upper(n.get<std::string>()));
        } else if (key == "text_normalize") {
            for (const auto& [k2, v2] : v.items()) {
                if (k2 == "trim") p.trim = v2.get<bool>();
                else if (k2 == "casefold") p.casefold = v2.get<bool>();
                else if (k2 == "strip_commas_currency") p.strip_commas_currency = v2.get<bool>();
                else throw std::invalid_argument("policy.text_normalize: unknown key " + k2);
            }
        } else {
            throw std::invalid_argument("policy: unknown key " + key);
        }
    }
    p.validate();
    return p;
}

namespace {

using Scalar = std::variant<std::monostate, double, std::string, bool>;

Scalar scalar_of(const CellValue& v) {
    if (v.is_number()) return v.as_number();
    if (v.is_text()) return v.as_text();
    if (v.is_bool()) return v.as_bool();
    return std::monostate{};
}

Scalar scalar_of(const Json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    return std::monostate{};
}

std::string normalize_text(const std::string& s, const EquivalencePolicy& p) {
    std::string t = s;
    if (p.strip_commas_currency) {
        for (const char* sym : {",", "$", "€", "£", "¥"}) {
            const std::string needle(sym);
            for (auto pos = t.find(needle); pos != std::string::npos; pos = t.find(needle, pos)) t.erase(pos, needle.size());
        }
    }
    if (p.casefold) t = text::casefold(t);
    if (p.trim) t = text::trim(t);
    return t;
}

bool numbers_close(double a, double b, const EquivalencePolicy& p) {
    return std::fabs(a - b) <= std::max(p.numeric_abs_tol, p.numeric_rel_tol * std::max(std::fabs(a), std::fabs(b)));
}

std::optional<double> as_number(const Scalar& s, const EquivalencePolicy& p) {
    if (auto d = std::get_if<double>(&s)) return *d;
    if (auto t = std::get_if<std::string>(&s)) return text::coerce_number(normalize_text(*t, p));
    return std::nullopt;
}

bool scalar_equal(const Scalar& a, const Scalar& b, const EquivalencePolicy& p) {
    if (std::holds_alternative<std::monostate>(a) || std::holds_alternative<std::monostate>(b)) return false;
    const bool a_text = std::holds_alternative<std::string>(a), b_text = std::holds_alternative<std::string>(b);
    const bool a_bool = std::holds_alternative<bool>(a), b_bool = std::holds_alternative<bool>(b);
    if (a_bool || b_bool) {
        if (a_bool && b_bool) return std::get<bool>(a) == std::get<bool>(b);
        const bool flag = a_bool ? std::get<bool>(a) : std::get<bool>(b);
        const Scalar& other = a_bool ? b : a;
        if (auto d = std::get_if<double>(&other)) return *d == (flag ? 1.0 : 0.0);
        return normalize_text(std::get<std::string>(other), p) == (flag ? "true" : "false");
    }
    if (a_text && b_text) {
        const std::string na = normalize_text(std::get<std::string>(a), p);
        const std::string nb = normalize_text(std::get<std::string>(b), p);
        if (na == nb) return true;
        return false;
    }
    auto x = as_number(a, p), y = as_number(b, p);
    return x && y && numbers_close(*x, *y, p);
}

bool offset_equal(const Scalar& excel, const Scalar& oracle) {
    auto e = std::get_if<double>(&excel);
    auto o = std::get_if<double>(&oracle);
    if (!e || !o) return false;
    if (std::trunc(*e) != *e || std::trunc(*o) != *o) return false;
    return *o + 1 == *e;
}

void flatten_json(const Json& j, std::vector<Scalar>& out) {
    if (j.is_array()) {
        for (const auto& e : j) flatten_json(e, out);
    } else {
        out.push_back(scalar_of(j));
    }
}

}  // namespace

bool values_equivalent(const EvalOutcome& excel, const Json& oracle, const EquivalencePolicy& policy, const std::string& func) {
    std::vector<Scalar> lhs;
    for (const auto& c : excel.flatten()) {
        if (c.is_error()) return false;
        lhs.push_back(scalar_of(c));
    }
    std::vector<Scalar> rhs;
    flatten_json(oracle, rhs);
    if (lhs.size() != rhs.size() || lhs.empty()) return false;
    bool exact = true;
    for (std::size_t i = 0; i < lhs.size() && exact; ++i) exact = scalar_equal(lhs[i], rhs[i], policy);
    if (exact) return true;
    if (!policy.allow_offset || !policy.positional_offset_functions.count(text::to_upper(func))) return false;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        if (!offset_equal(lhs[i], rhs[i])) return false;
    }
    return true;
}

ExecResult execute_filter(SynSample& s, const Grid& t, const FunctionRegistry& registry) {
    ExecResult r;
    ExprPtr ast;
    try {
        ast = parse_formula(s.formula);
    } catch (const SyntaxError& e) {
        r.failure = std::string("parse: ") + e.what();
        return r;
    }
    EvalOutcome out = evaluate(*ast, t, registry);
    for (const auto& c : out.flatten()) {
        if (c.is_error()) {
            r.failure = std::string(error_code(c.as_error()));
            return r;
        }
    }
    s.executed = out;
    r.pass = std::move(out);
    return r;
}

std::string generate_oracle_solution(const SynSample& s, const Grid& t, ChatClient& client, const OracleOptions& opts) {
    const std::string prompt = render_prompt(prompt_template(TemplateId::ParallelSolution),
                                             {{"table", render_markdown(t, opts.max_table_rows)}, {"query", s.query}});
    std::string reply;
    try {
        reply = client.chat(single_turn(opts.model_id, prompt, opts.temperature));
    } catch (const TransportError& e) {
        throw OracleGenFail(std::string("teacher call failed: ") + e.what());
    }
    try {
        return extract_fenced_block(reply, "python");
    } catch (const NoBlockFound& e) {
        throw OracleGenFail(e.what());
    }
}

std::string_view runner_status_name(RunnerStatus s) {
    switch (s) {
        case RunnerStatus::Ok: return "ok";
        case RunnerStatus::Error: return "error";
        case RunnerStatus::Timeout: return "timeout";
    }
    return "error";
}

Json runner_request_json(const std::string& id, const Grid& table, const std::string& code, int timeout_ms) {
    return {{"id", id}, {"table", grid_to_json(table)}, {"code", code}, {"timeout_ms", timeout_ms}};
}

RunnerResponse runner_response_from_json(const Json& j) {
    RunnerResponse r;
    r.id = j.value("id", "");
    const std::string status = j.value("status", "error");
    r.status = status == "ok" ? RunnerStatus::Ok : status == "timeout" ? RunnerStatus::Timeout : RunnerStatus::Error;
    if (j.contains("value")) r.value = j["value"];
    if (j.contains("error_msg") && j["error_msg"].is_string()) r.error_msg = j["error_msg"].get<std::string>();
    if (r.status == RunnerStatus::Ok && r.value.is_null()) {
        r.status = RunnerStatus::Error;
        r.error_msg = "ok response without a value";
    }
    return r;
}

SubprocessOracleRunner::SubprocessOracleRunner(std::vector<std::string> argv, std::chrono::milliseconds grace)
    : argv_(std::move(argv)), grace_(grace) {
    if (argv_.empty()) throw std::invalid_argument("oracle runner command is empty");
    start();
}

SubprocessOracleRunner::~SubprocessOracleRunner() { stop(); }

void SubprocessOracleRunner::start() {
    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0) throw RunnerDied("pipe failed");
    const pid_t pid = fork();
    if (pid < 0) throw RunnerDied("fork failed");
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        std::vector<char*> args;
        for (auto& a : argv_) args.push_back(a.data());
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    signal(SIGPIPE, SIG_IGN);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
    auto banner = read_line(std::chrono::steady_clock::now() + std::chrono::seconds(30));
    Json b;
    try {
        if (banner) b = Json::parse(*banner);
    } catch (const Json::parse_error&) {
    }
    if (!b.is_object() || b.value("protocol", 0) != 1) {
        stop();
        throw RunnerDied("oracle runner did not announce protocol 1: " + argv_[0]);
    }
}

void SubprocessOracleRunner::stop() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        kill(pid_, SIGKILL);
        waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
}

std::optional<std::string> SubprocessOracleRunner::read_line(std::chrono::steady_clock::time_point deadline) {
    while (true) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) return std::nullopt;
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno == EINTR) continue;
        if (rc <= 0) return std::nullopt;
        char buf[4096];
        const ssize_t n = read(from_child_, buf, sizeof buf);
        if (n <= 0) throw RunnerDied("oracle runner closed its output");
        buffer_.append(buf, static_cast<std::size_t>(n));
    }
}

RunnerResponse SubprocessOracleRunner::run(const Grid& table, const std::string& code, int timeout_ms) {
    if (pid_ < 0) start();
    const std::string id = std::to_string(next_id_++);
    const std::string line = runner_request_json(id, table, code, timeout_ms).dump() + "\n";
    RunnerResponse res;
    res.id = id;
    try {
        std::size_t off = 0;
        while (off < line.size()) {
            const ssize_t n = write(to_child_, line.data() + off, line.size() - off);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw RunnerDied("cannot write to oracle runner");
            off += static_cast<std::size_t>(n);
        }
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(2 * timeout_ms) + grace_;
        auto reply = read_line(deadline);
        if (!reply) {
            stop();
            ++restarts_;
            start();
            res.status = RunnerStatus::Timeout;
            res.error_msg = "killed after " + std::to_string(2 * timeout_ms) + " ms";
            return res;
        }
        Json j;
        try {
            j = Json::parse(*reply);
        } catch (const Json::parse_error&) {
            res.error_msg = "malformed runner response";
            return res;
        }
        res = runner_response_from_json(j);
        if (res.id != id) {
            res.status = RunnerStatus::Error;
            res.value = nullptr;
            res.error_msg = "runner response id mismatch";
        }
        return res;
    } catch (const RunnerDied&) {
        // One restart; a runner that cannot come back is fatal.
        stop();
        ++restarts_;
        start();
        res.status = RunnerStatus::Error;
        res.error_msg = "oracle runner exited during the request";
        return res;
    }
}

RunnerPool::RunnerPool(std::vector<std::unique_ptr<OracleRunner>> runners)
    : runners_(std::move(runners)), busy_(runners_.size(), false) {
    if (runners_.empty()) throw std::invalid_argument("runner pool is empty");
}

RunnerResponse RunnerPool::run(const Grid& table, const std::string& code, int timeout_ms) {
    std::size_t slot = 0;
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] {
            for (std::size_t i = 0; i < busy_.size(); ++i) {
                if (!busy_[i]) {
                    slot = i;
                    return true;
                }
            }
            return false;
        });
        busy_[slot] = true;
    }
    struct Release {
        RunnerPool* pool;
        std::size_t slot;
        ~Release() {
            {
                std::lock_guard lock(pool->mu_);
                pool->busy_[slot] = false;
            }
            pool->cv_.notify_one();
        }
    } release{this, slot};
    return runners_[slot]->run(table, code, timeout_ms);
}

std::string_view verdict_name(VerdictKind k) {
    switch (k) {
        case VerdictKind::ExecFail: return "ExecFail";
        case VerdictKind::OracleGenFail: return "OracleGenFail";
        case VerdictKind::OracleExecFail: return "OracleExecFail";
        case VerdictKind::Mismatch: return "Mismatch";
        case VerdictKind::Validated: return "Validated";
    }
    return "ExecFail";
}

Json verdict_to_json(const ValidationVerdict& v) {
    Json j = {{"verdict", verdict_name(v.kind)}, {"detail", v.detail}};
    j["excel"] = v.excel ? outcome_to_json(*v.excel) : Json(nullptr);
    j["oracle"] = v.oracle;
    return j;
}

ValidationVerdict cross_validate(const SynSample& s, const Grid& t, const std::string& code, OracleRunner& runner,
                                 const EquivalencePolicy& policy, int timeout_ms) {
    ValidationVerdict v;
    v.excel = s.executed;
    if (!s.executed) {
        v.kind = VerdictKind::ExecFail;
        v.detail = "sample has no executed value";
        return v;
    }
    const RunnerResponse res = runner.run(t, code, timeout_ms);
    if (res.status != RunnerStatus::Ok) {
        v.kind = VerdictKind::OracleExecFail;
        v.detail = std::string(runner_status_name(res.status)) + (res.error_msg.empty() ? "" : ": " + res.error_msg);
        return v;
    }
    v.oracle = res.value;
    v.kind = values_equivalent(*s.executed, res.value, policy, s.func) ? VerdictKind::Validated : VerdictKind::Mismatch;
    return v;
}

double ValidationReport::keep_rate() const {
    if (attempted == 0) return 0.0;
    auto it = counts.find(VerdictKind::Validated);
    return static_cast<double>(it == counts.end() ? 0 : it->second) / static_cast<double>(attempted);
}

Json ValidationReport::to_json() const {
    Json c = Json::object();
    for (auto k : {VerdictKind::ExecFail, VerdictKind::OracleGenFail, VerdictKind::OracleExecFail, VerdictKind::Mismatch,
                   VerdictKind::Validated}) {
        auto it = counts.find(k);
        c[std::string(verdict_name(k))] = it == counts.end() ? 0 : it->second;
    }
    Json recs = Json::array();
    for (const auto& [id, v] : records) {
        Json r = verdict_to_json(v);
        r["sample_id"] = id;
        recs.push_back(r);
    }
    return {{"attempted", attempted}, {"counts", c}, {"keep_rate", keep_rate()}, {"records", recs}};
}

ValidationResult validate_batch(std::vector<SynSample> samples, const TableStore& tables, ChatClient& client,
                                OracleRunner& runner, const EquivalencePolicy& policy, const ValidateOptions& opts) {
    policy.validate();
    auto check = [&](std::size_t i) {
        SynSample& s = samples[i];
        ValidationVerdict v;
        const Grid* t = tables.find(s.table_id);
        if (!t) {
            v.kind = VerdictKind::ExecFail;
            v.detail = "unknown table " + s.table_id;
            return v;
        }
        ExecResult exec = execute_filter(s, *t);
        if (!exec.pass) {
            v.kind = VerdictKind::ExecFail;
            v.detail = exec.failure;
            return v;
        }
        std::string code;
        try {
            code = generate_oracle_solution(s, *t, client, opts.oracle);
        } catch (const OracleGenFail& e) {
            v.kind = VerdictKind::OracleGenFail;
            v.detail = e.what();
            v.excel = s.executed;
            return v;
        }
        return cross_validate(s, *t, code, runner, policy, opts.runner_timeout_ms);
    };
    auto verdicts = parallel_map(samples.size(), opts.workers, check);

    ValidationResult out;
    out.report.attempted = samples.size();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        ++out.report.counts[verdicts[i].kind];
        if (verdicts[i].kind == VerdictKind::Validated) out.validated.push_back(samples[i]);
        out.report.records.emplace_back(samples[i].id(), std::move(verdicts[i]));
    }
    return out;
}

}  // namespace xlsynth
