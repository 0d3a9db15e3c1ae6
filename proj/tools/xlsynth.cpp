// Command-line entry point: one subcommand per pipeline stage.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "xlsynth/evalbench.hpp"
#include "xlsynth/orchestrator.hpp"
#include "xlsynth/util.hpp"

namespace fs = std::filesystem;
using namespace xlsynth;

namespace {

struct CommonFlags {
    std::string config;
    std::string mock_transcripts;
    std::string record_transcripts;
};

std::shared_ptr<ChatClient> make_http_client(const std::string& endpoint, const TeacherConfig& t) {
    if (endpoint.empty()) throw ValidationError("teacher.endpoint", "required unless --mock-transcripts is given");
    HttpClientOptions opts;
    opts.endpoint = endpoint;
    if (const char* key = std::getenv(t.api_key_env.c_str())) opts.api_key = key;
    opts.max_retries = t.max_retries;
    opts.requests_per_minute = t.requests_per_minute;
    return std::make_shared<HttpChatClient>(opts);
}

std::shared_ptr<ChatClient> make_teacher(const CommonFlags& f, const PipelineConfig& cfg) {
    std::shared_ptr<ChatClient> client;
    if (!f.mock_transcripts.empty()) {
        client = std::make_shared<ReplayChatClient>(f.mock_transcripts);
    } else if (cfg.teacher.endpoint.empty()) {
        // Deferred so stages that never reach the teacher still report
        // their own prerequisites first.
        client = std::make_shared<CallbackChatClient>([](const ChatRequest&) -> std::string {
            throw CredentialError("teacher.endpoint is not configured and no --mock-transcripts given");
        });
    } else {
        client = make_http_client(cfg.teacher.endpoint, cfg.teacher);
    }
    if (!f.record_transcripts.empty()) client = std::make_shared<TranscriptLogger>(client, f.record_transcripts);
    return client;
}

PipelineConfig config_for(const CommonFlags& f) {
    if (f.config.empty()) throw ValidationError("config", "--config is required for this command");
    return load_config(f.config);
}

void report_stage(const StageOutcome& o) {
    std::cout << o.stage << ": " << (o.skipped ? "up to date" : "done") << " (" << o.manifest.string() << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic Excel tutorial pipeline and table-QA evaluation"};
    app.require_subcommand(1);
    CommonFlags common;
    app.add_option("--config", common.config, "Pipeline config (JSON)");
    app.add_option("--mock-transcripts", common.mock_transcripts, "Replay teacher responses from a transcript file or directory");
    app.add_option("--record-transcripts", common.record_transcripts, "Append every teacher exchange to this JSONL file");

    std::map<std::string, Stage> stages = {{"libprep", Stage::Libprep}, {"gen", Stage::Gen}, {"validate", Stage::Validate},
                                           {"compile", Stage::Compile}};
    std::map<std::string, CLI::App*> stage_cmds;
    for (const auto& [name, _] : stages) stage_cmds[name] = app.add_subcommand(name, "Run the " + name + " stage");
    auto* e2e = app.add_subcommand("e2e", "Run libprep, gen, validate, compile and export");

    auto* exp = app.add_subcommand("export", "Export finetuning datasets and hyperparameters");
    std::string exp_tutorials, exp_doc_qa, exp_library, exp_tasks, exp_out;
    std::size_t exp_heldout = 100;
    std::uint64_t exp_seed = 0;
    exp->add_option("--tutorials", exp_tutorials, "Tutorials JSONL (standalone mode; otherwise uses --config)");
    exp->add_option("--doc-qa", exp_doc_qa, "Doc-QA examples JSONL");
    exp->add_option("--library", exp_library, "Function library JSON");
    exp->add_option("--tasks", exp_tasks, "Heldout task pool JSONL");
    exp->add_option("--heldout", exp_heldout, "Heldout task count");
    exp->add_option("--seed", exp_seed, "Split seed");
    exp->add_option("--out", exp_out, "Output directory");

    auto* eval = app.add_subcommand("eval", "Score a student on QA tasks");
    std::string ev_tasks, ev_mode = "base", ev_library, ev_endpoint, ev_completions, ev_report, ev_model = "student";
    std::size_t ev_workers = 1;
    eval->add_option("--tasks", ev_tasks, "Tasks JSONL")->required();
    eval->add_option("--mode", ev_mode, "base | rag-all | rag-oracle")->check(CLI::IsMember({"base", "rag-all", "rag-oracle"}));
    eval->add_option("--library", ev_library, "Function library JSON (RAG modes)");
    auto* ep = eval->add_option("--student-endpoint", ev_endpoint, "Chat endpoint of the student");
    auto* cp = eval->add_option("--completions", ev_completions, "Offline completions JSONL keyed by task id");
    ep->excludes(cp);
    eval->add_option("--model", ev_model, "Student model id");
    eval->add_option("--report", ev_report, "Report JSON path")->required();
    eval->add_option("--workers", ev_workers, "Parallel tasks");

    auto* analyze = app.add_subcommand("analyze", "Paired improvements between two reports");
    std::string an_base, an_ft, an_out;
    analyze->add_option("--base", an_base, "Base model report")->required();
    analyze->add_option("--ft", an_ft, "Finetuned model report")->required();
    analyze->add_option("--out", an_out, "Output JSON")->required();

    auto* recast = app.add_subcommand("recast", "Convert raw WikiTQ/TAT-QA records into tasks");
    std::string rc_format, rc_in, rc_out;
    recast->add_option("--format", rc_format, "wikitq | tatqa")->required()->check(CLI::IsMember({"wikitq", "tatqa"}));
    recast->add_option("--in", rc_in, "Raw records JSONL")->required();
    recast->add_option("--out", rc_out, "Tasks JSONL")->required();

    auto* oracles = app.add_subcommand("oracles", "Attach teacher-written oracle formulas to tasks");
    std::string or_tasks, or_out;
    oracles->add_option("--tasks", or_tasks, "Tasks JSONL")->required();
    oracles->add_option("--out", or_out, "Retained tasks JSONL")->required();

    auto* hyper = app.add_subcommand("hyperparams", "Write the finetuning hyperparameter file");
    std::string hp_out;
    hyper->add_option("--out", hp_out, "Output JSON")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        for (const auto& [name, stage] : stages) {
            if (!*stage_cmds[name]) continue;
            const PipelineConfig cfg = config_for(common);
            auto teacher = make_teacher(common, cfg);
            report_stage(Pipeline(cfg, *teacher).run(stage));
            return 0;
        }
        if (*e2e) {
            const PipelineConfig cfg = config_for(common);
            auto teacher = make_teacher(common, cfg);
            Pipeline p(cfg, *teacher);
            for (const auto& o : p.run_e2e()) report_stage(o);
            const Json report = Json::parse(read_text_file(p.artifact("validation_report.json")));
            std::cout << "validated " << report["counts"]["Validated"] << " of " << report["attempted"] << " samples\n";
            return 0;
        }
        if (*exp) {
            if (exp_tutorials.empty()) {
                const PipelineConfig cfg = config_for(common);
                auto teacher = make_teacher(common, cfg);
                report_stage(Pipeline(cfg, *teacher).run(Stage::Export));
                return 0;
            }
            if (exp_out.empty()) throw ValidationError("out", "--out is required with --tutorials");
            std::vector<TutorialDoc> tutorials;
            for (const auto& j : read_jsonl(exp_tutorials)) tutorials.push_back(tutorial_from_json(j));
            std::vector<DocQaExample> qa;
            if (!exp_doc_qa.empty()) {
                for (const auto& j : read_jsonl(exp_doc_qa)) qa.push_back(doc_qa_from_json(j));
            }
            const auto library = exp_library.empty() ? std::vector<FunctionSpec>{} : load_library(exp_library);
            const auto pool = exp_tasks.empty() ? std::vector<QATask>{} : load_tasks(exp_tasks);
            const auto sum = export_sft_dataset(tutorials, pool, qa, library, {exp_heldout, exp_seed}, exp_out);
            export_hyperparams(fs::path(exp_out) / "hyperparams.json");
            std::cout << "train " << sum.train << ", heldout " << sum.heldout << ", doc_qa " << sum.doc_qa << ", raw_docs "
                      << sum.raw_docs << "\n";
            return 0;
        }
        if (*eval) {
            const RagMode mode = parse_rag_mode(ev_mode);
            if (mode != RagMode::BaseOnly && ev_library.empty()) throw ValidationError("library", "required for RAG modes");
            std::unique_ptr<StudentSource> student;
            std::shared_ptr<ChatClient> client;
            if (!ev_completions.empty()) {
                student = std::make_unique<OfflineCompletions>(ev_completions, ev_model);
            } else if (!ev_endpoint.empty()) {
                client = make_http_client(ev_endpoint, TeacherConfig{});
                student = std::make_unique<ChatStudent>(*client, ev_model);
            } else {
                throw ValidationError("student", "give --student-endpoint or --completions");
            }
            const auto o = run_eval_stage(ev_tasks, mode, ev_library, *student, ev_report,
                                          ev_completions.empty() ? std::nullopt : std::optional<fs::path>(ev_completions),
                                          {ev_workers, 20});
            report_stage(o);
            const Json r = Json::parse(read_text_file(ev_report));
            std::cout << "EM " << r["em_percent"].get<std::string>() << "%, single-function "
                      << r["single_function_percent"].get<std::string>() << "%\n";
            return 0;
        }
        if (*analyze) {
            report_stage(run_analyze_stage(an_base, an_ft, an_out));
            const Json r = Json::parse(read_text_file(an_out));
            for (const char* k : {"improvements", "regressions"}) {
                std::cout << k << ": " << r[k]["samples"].get<std::string>() << " " << r[k]["percent"].get<std::string>() << "\n";
            }
            return 0;
        }
        if (*recast) {
            std::ifstream in(rc_in, std::ios::binary);
            if (!in) throw MissingFile(rc_in);
            const auto res = recast_dataset(in, rc_format == "wikitq" ? DatasetFormat::WikiTQ : DatasetFormat::TatQA);
            for (const auto& s : res.skipped) std::cerr << "skipped " << s << "\n";
            std::vector<Json> out;
            for (const auto& t : res.tasks) out.push_back(qa_task_to_json(t));
            write_text_file(rc_out, to_jsonl(out));
            std::cout << res.tasks.size() << " tasks, " << res.skipped.size() << " skipped\n";
            return 0;
        }
        if (*oracles) {
            const PipelineConfig cfg = config_for(common);
            auto teacher = make_teacher(common, cfg);
            OracleBuildOptions opts;
            opts.model_id = cfg.teacher.model;
            opts.workers = cfg.workers;
            const auto res = build_oracle_solutions(load_tasks(or_tasks), *teacher, opts);
            std::vector<Json> out;
            for (const auto& t : res.retained) out.push_back(qa_task_to_json(t));
            write_text_file(or_out, to_jsonl(out));
            for (const auto& [id, why] : res.dropped) std::cerr << "dropped " << id << ": " << why << "\n";
            std::cout << res.retained.size() << " of " << res.attempted << " tasks retained\n";
            return 0;
        }
        if (*hyper) {
            Json overrides = Json::object();
            if (!common.config.empty()) overrides = load_config(common.config).hyperparams;
            export_hyperparams(hp_out, overrides);
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const MissingFile& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
