#include <gtest/gtest.h>

#include <atomic>
#include <random>

#include "test_support.hpp"
#include "xlsynth/util.hpp"
#include "xlsynth/validator.hpp"

namespace xlsynth {
namespace {

EvalOutcome plain(CellValue v) { return EvalOutcome::plain(std::move(v)); }
EvalOutcome num(double x) { return plain(CellValue::number(x)); }
EvalOutcome txt(std::string s) { return plain(CellValue::text(std::move(s))); }

std::vector<SynSample> teacher_samples() {
    std::vector<SynSample> out;
    int i = 0;
    for (const auto& j : Json::parse(testing::read_fixture("fixtures/teacher/match_samples.json"))) {
        SynSample s = sample_from_json(j);
        s.executed.reset();
        s.table_id = "teams";
        s.index = i++;
        out.push_back(s);
    }
    return out;
}

// Runner that answers from a table of code -> response and counts calls.
class ScriptedRunner : public OracleRunner {
public:
    std::atomic<int> calls{0};
    RunnerResponse run(const Grid&, const std::string& code, int) override {
        ++calls;
        RunnerResponse r;
        r.status = RunnerStatus::Ok;
        r.value = Json::parse(code.substr(code.find('=') + 1));
        return r;
    }
};

TEST(ExecuteFilter, TeacherSampleOnTeams) {
    auto samples = teacher_samples();
    auto res = execute_filter(samples[0], testing::teams_grid());
    ASSERT_TRUE(res.pass);
    EXPECT_TRUE(res.pass->is_plain());
    EXPECT_EQ(res.pass->value(), CellValue::number(4));
    ASSERT_TRUE(samples[0].executed);
    auto third = execute_filter(samples[2], testing::teams_grid());
    EXPECT_EQ(third.pass->value(), CellValue::number(7));
}

TEST(ExecuteFilter, ErrorsAndParseFailures) {
    SynSample s;
    s.formula = "=NOSUCH(1)";
    EXPECT_EQ(execute_filter(s, testing::teams_grid()).failure, "NAME");
    s.formula = "=1/0";
    EXPECT_EQ(execute_filter(s, testing::teams_grid()).failure, "DIV0");
    EXPECT_FALSE(s.executed);
    s.formula = "=SUM(";
    EXPECT_EQ(execute_filter(s, testing::teams_grid()).failure.rfind("parse:", 0), 0u);
}

TEST(Equivalence, Examples) {
    EquivalencePolicy p;
    EXPECT_TRUE(values_equivalent(num(4), 4, p));
    EXPECT_TRUE(values_equivalent(num(0.1 + 0.2), 0.3, p));
    EXPECT_FALSE(values_equivalent(num(4), 5, p));
    EXPECT_TRUE(values_equivalent(txt("  Boston Red Sox "), "boston red sox", p));
    EXPECT_TRUE(values_equivalent(txt("$1,234"), 1234, p));
    EXPECT_TRUE(values_equivalent(num(1234), "1,234", p));
    EXPECT_TRUE(values_equivalent(plain(CellValue::boolean(true)), true, p));
    EXPECT_TRUE(values_equivalent(plain(CellValue::boolean(true)), 1, p));
    EXPECT_TRUE(values_equivalent(plain(CellValue::boolean(false)), "FALSE", p));
    EXPECT_FALSE(values_equivalent(plain(CellValue::error(ErrorKind::NA)), nullptr, p));
    EXPECT_FALSE(values_equivalent(num(0), nullptr, p));
    EXPECT_FALSE(values_equivalent(txt("a"), "b", p));
}

TEST(Equivalence, PositionalOffsetIsGatedByFunction) {
    EquivalencePolicy p;
    EXPECT_TRUE(values_equivalent(num(4), 3, p, "MATCH"));
    EXPECT_FALSE(values_equivalent(num(4), 3, p, "SUM"));
    EXPECT_FALSE(values_equivalent(num(3), 4, p, "MATCH"));
    EXPECT_FALSE(values_equivalent(num(4.5), 3.5, p, "MATCH"));
    EXPECT_FALSE(values_equivalent(num(4), "3", p, "MATCH"));
    p.allow_offset = false;
    EXPECT_FALSE(values_equivalent(num(4), 3, p, "MATCH"));
}

TEST(Equivalence, Arrays) {
    EquivalencePolicy p;
    ArrayValue a{2, 1, {CellValue::number(1), CellValue::number(2)}};
    EXPECT_TRUE(values_equivalent(EvalOutcome::array(a), Json::array({1, 2}), p));
    EXPECT_TRUE(values_equivalent(EvalOutcome::array(a), Json::parse("[[1],[2]]"), p));
    EXPECT_FALSE(values_equivalent(EvalOutcome::array(a), Json::array({1, 2, 3}), p));
    EXPECT_FALSE(values_equivalent(EvalOutcome::array(a), 1, p));
    EXPECT_TRUE(values_equivalent(EvalOutcome::array(a), Json::array({0, 1}), p, "ROW"));
    EXPECT_FALSE(values_equivalent(EvalOutcome::array(a), Json::array({1, 1}), p, "ROW"));
    EXPECT_TRUE(values_equivalent(num(7), Json::array({7}), p));
}

std::vector<CellValue> random_cells(std::mt19937_64& rng, int n) {
    static const std::vector<std::string> words = {"a", " A", "1,000", "$5", "true", "False", "x y", "3", "3.0000001"};
    std::vector<CellValue> out;
    std::uniform_int_distribution<int> kind(0, 3);
    for (int i = 0; i < n; ++i) {
        switch (kind(rng)) {
            case 0: out.push_back(CellValue::number(std::uniform_int_distribution<int>(-3, 6)(rng) / 2.0)); break;
            case 1: out.push_back(CellValue::text(words[rng() % words.size()])); break;
            case 2: out.push_back(CellValue::boolean(rng() % 2)); break;
            default: out.push_back(CellValue::number(1000 + (rng() % 3) * 1e-4)); break;
        }
    }
    return out;
}

Json cell_json(const CellValue& v) {
    if (v.is_number()) return v.as_number();
    if (v.is_bool()) return v.as_bool();
    return v.as_text();
}

TEST(Equivalence, SymmetricReflexiveMonotone) {
    std::mt19937_64 rng(42);
    auto cells = random_cells(rng, 60);
    EquivalencePolicy tight, loose;
    loose.numeric_rel_tol = 1e-3;
    for (const auto& a : cells) {
        EXPECT_TRUE(values_equivalent(plain(a), cell_json(a), tight)) << describe(a);
        for (const auto& b : cells) {
            const bool ab = values_equivalent(plain(a), cell_json(b), tight);
            EXPECT_EQ(ab, values_equivalent(plain(b), cell_json(a), tight)) << describe(a) << " vs " << describe(b);
            if (ab) EXPECT_TRUE(values_equivalent(plain(a), cell_json(b), loose));
        }
    }
}

TEST(Equivalence, PolicyJson) {
    EquivalencePolicy p;
    p.numeric_rel_tol = 1e-3;
    p.positional_offset_functions = {"MATCH"};
    auto back = policy_from_json(policy_to_json(p));
    EXPECT_EQ(back.numeric_rel_tol, 1e-3);
    EXPECT_EQ(back.positional_offset_functions, p.positional_offset_functions);
    EXPECT_THROW(policy_from_json(Json{{"numeric_rel_tol", -1}}), std::invalid_argument);
    EXPECT_THROW(policy_from_json(Json{{"tolerance", 1}}), std::invalid_argument);
}

TEST(Protocol, RequestAndResponseShapes) {
    auto req = runner_request_json("7", testing::teams_grid(), "result = 1", 500);
    EXPECT_EQ(req["id"], "7");
    EXPECT_EQ(req["timeout_ms"], 500);
    EXPECT_EQ(req["table"]["rows"][1][0], "New York Yankees");
    auto ok = runner_response_from_json(Json::parse(R"({"id":"7","status":"ok","value":3,"error_msg":null})"));
    EXPECT_EQ(ok.status, RunnerStatus::Ok);
    EXPECT_EQ(ok.value, 3);
    auto bad = runner_response_from_json(Json::parse(R"({"id":"7","status":"ok"})"));
    EXPECT_EQ(bad.status, RunnerStatus::Error);
    EXPECT_EQ(runner_response_from_json(Json::parse(R"({"id":"1","status":"timeout"})")).status, RunnerStatus::Timeout);
}

TEST(SubprocessRunner, SpeaksProtocolAgainstStub) {
    SubprocessOracleRunner runner({XLSYNTH_ORACLE_STUB}, std::chrono::milliseconds(100));
    auto t = testing::teams_grid();
    auto ok = runner.run(t, "result = df.iloc[3, 0]", 200);
    EXPECT_EQ(ok.status, RunnerStatus::Ok);
    EXPECT_EQ(ok.value, "Boston Red Sox");
    EXPECT_EQ(ok.id, "0");
    auto err = runner.run(t, "raise ValueError()", 200);
    EXPECT_EQ(err.status, RunnerStatus::Error);
    auto forbidden = runner.run(t, "open('/etc/passwd')", 200);
    EXPECT_EQ(forbidden.error_msg, "forbidden operation");
    EXPECT_EQ(runner.run(t, "result = [1, 2]", 200).value, Json::array({1, 2}));
    EXPECT_EQ(runner.restarts(), 0u);
}

TEST(SubprocessRunner, TimeoutKillsAndRestarts) {
    SubprocessOracleRunner runner({XLSYNTH_ORACLE_STUB}, std::chrono::milliseconds(100));
    auto t = testing::teams_grid();
    const auto start = std::chrono::steady_clock::now();
    auto res = runner.run(t, "while True: pass", 100);
    EXPECT_EQ(res.status, RunnerStatus::Timeout);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
    EXPECT_EQ(runner.restarts(), 1u);
    EXPECT_EQ(runner.run(t, "result = 5", 100).value, 5);
}

TEST(SubprocessRunner, ExitRestartsOrDies) {
    SubprocessOracleRunner runner({XLSYNTH_ORACLE_STUB});
    auto t = testing::teams_grid();
    auto res = runner.run(t, "exit()", 100);
    EXPECT_EQ(res.status, RunnerStatus::Error);
    EXPECT_EQ(runner.run(t, "result = 1", 100).value, 1);
    EXPECT_THROW(SubprocessOracleRunner({"/nonexistent/runner"}), RunnerDied);
}

TEST(RunnerPool, ParallelRequestsAllAnswered) {
    std::vector<std::unique_ptr<OracleRunner>> runners;
    for (int i = 0; i < 3; ++i) runners.push_back(std::make_unique<SubprocessOracleRunner>(std::vector<std::string>{XLSYNTH_ORACLE_STUB}));
    RunnerPool pool(std::move(runners));
    auto t = testing::teams_grid();
    auto results = parallel_map(12, 4, [&](std::size_t i) { return pool.run(t, "result = " + std::to_string(i), 500); });
    for (std::size_t i = 0; i < results.size(); ++i) EXPECT_EQ(results[i].value, static_cast<int>(i));
}

std::string oracle_reply(const std::string& code) { return "Here you go.\n```python\n" + code + "\n```\n"; }

TEST(ValidateBatch, TeacherSamplesVerdicts) {
    TableStore store({testing::teams_grid()});
    // Oracle answers: 1-based position 4, 0-based position 2 (offset), wrong
    // position 3 for the approximate match.
    std::vector<std::string> codes = {"result = 4", "result = 2", "result = 3"};
    std::atomic<int> k{0};
    CallbackChatClient client([&](const ChatRequest& r) {
        const auto& p = r.messages.front().content;
        for (std::size_t i = 0; i < codes.size(); ++i) {
            if (p.find(teacher_samples()[i].query) != std::string::npos) return oracle_reply(codes[i]);
        }
        ++k;
        return std::string("no");
    });
    ScriptedRunner runner;
    auto res = validate_batch(teacher_samples(), store, client, runner, EquivalencePolicy{});
    EXPECT_EQ(k.load(), 0);
    ASSERT_EQ(res.report.records.size(), 3u);
    EXPECT_EQ(res.report.records[0].second.kind, VerdictKind::Validated);
    EXPECT_EQ(res.report.records[1].second.kind, VerdictKind::Validated);
    EXPECT_EQ(res.report.records[2].second.kind, VerdictKind::Mismatch);
    EXPECT_EQ(res.validated.size(), 2u);
    ASSERT_TRUE(res.validated[0].executed);
    EXPECT_EQ(res.report.to_json()["counts"]["Mismatch"], 1);
}

TEST(ValidateBatch, KeepRateAndShortCircuits) {
    TableStore store({testing::teams_grid()});
    std::vector<SynSample> samples;
    auto add = [&](std::string formula) {
        SynSample s;
        s.func = "SUM";
        s.query = "q" + std::to_string(samples.size());
        s.formula = std::move(formula);
        s.table_id = "teams";
        s.index = static_cast<int>(samples.size());
        samples.push_back(s);
    };
    for (int i = 0; i < 5; ++i) add("=SUM(B2:B3)");     // validated
    for (int i = 0; i < 3; ++i) add("=SUM(B2:B3)/0");   // exec fail
    for (int i = 0; i < 2; ++i) add("=SUM(B2:B4)");     // mismatch
    CallbackChatClient client([](const ChatRequest&) { return oracle_reply("result = 188"); });
    ScriptedRunner runner;
    ValidateOptions opts;
    opts.workers = 3;
    auto res = validate_batch(samples, store, client, runner, EquivalencePolicy{}, opts);
    EXPECT_EQ(res.report.attempted, 10u);
    EXPECT_DOUBLE_EQ(res.report.keep_rate(), 0.5);
    EXPECT_EQ(res.report.counts[VerdictKind::ExecFail], 3u);
    EXPECT_EQ(res.report.counts[VerdictKind::Mismatch], 2u);
    EXPECT_EQ(runner.calls.load(), 7);
    for (const auto& s : res.validated) EXPECT_EQ(s.formula, "=SUM(B2:B3)");
}

TEST(ValidateBatch, OracleFailures) {
    TableStore store({testing::teams_grid()});
    auto samples = teacher_samples();
    samples.resize(1);
    CallbackChatClient prose([](const ChatRequest&) { return "cannot"; });
    ScriptedRunner runner;
    auto res = validate_batch(samples, store, prose, runner, EquivalencePolicy{});
    EXPECT_EQ(res.report.records[0].second.kind, VerdictKind::OracleGenFail);
    EXPECT_EQ(runner.calls.load(), 0);

    SubprocessOracleRunner stub({XLSYNTH_ORACLE_STUB});
    CallbackChatClient raising([](const ChatRequest&) { return oracle_reply("raise KeyError('Team')"); });
    res = validate_batch(samples, store, raising, stub, EquivalencePolicy{});
    EXPECT_EQ(res.report.records[0].second.kind, VerdictKind::OracleExecFail);
    EXPECT_EQ(res.report.keep_rate(), 0.0);
}

}  // namespace
}  // namespace xlsynth
