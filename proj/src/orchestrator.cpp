#include "xlsynth/orchestrator.hpp"

#include <algorithm>
#include <fstream>

#include "xlsynth/genpipe.hpp"
#include "xlsynth/libprep.hpp"
#include "xlsynth/util.hpp"

namespace xlsynth {

namespace fs = std::filesystem;

namespace {

// Walks a JSON object, rejecting unknown keys and reporting the field path
// of any type or range error.
class Fields {
public:
    Fields(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ValidationError(path_.empty() ? "config" : path_, "expected an object");
    }

    std::string path_of(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const Json* get(const std::string& key) {
        seen_.push_back(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        if (const Json* v = get(key)) {
            try {
                out = v->get<T>();
            } catch (const Json::exception&) {
                throw ValidationError(path_of(key), "wrong type " + std::string(v->type_name()));
            }
        }
    }

    void read_count(const std::string& key, std::size_t& out) {
        if (const Json* v = get(key)) {
            if (!v->is_number_integer() || v->get<long long>() < 0) throw ValidationError(path_of(key), "expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }

    void finish() const {
        for (const auto& [key, _] : j_.items()) {
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) throw ValidationError(path_of(key), "unknown key");
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_relative() && !base.empty() ? base / path : path;
}

std::string config_digest(const Json& snapshot) { return sha256_hex(snapshot.dump()); }

Json read_json_file(const fs::path& p) { return Json::parse(read_text_file(p)); }

}  // namespace

Json PipelineConfig::to_json() const {
    Json students_j = Json::object();
    for (const auto& [k2, v] : students) students_j[k2] = v;
    Json j = {{"paths", {{"corpus", corpus.string()}, {"docs", docs.string()}, {"tables", tables.string()}, {"output", output.string()}}},
              {"k", k},
              {"batches", batches},
              {"seed", seed},
              {"teacher",
               {{"endpoint", teacher.endpoint},
                {"model", teacher.model},
                {"api_key_env", teacher.api_key_env},
                {"temperature", teacher.temperature},
                {"requests_per_minute", teacher.requests_per_minute},
                {"max_retries", teacher.max_retries}}},
              {"students", students_j},
              {"policy", policy_to_json(policy)},
              {"workers", workers},
              {"oracle_runner", {{"command", oracle_runner}, {"timeout_ms", runner_timeout_ms}}},
              {"pool_size", pool_size},
              {"max_table_rows", max_table_rows},
              {"heldout", heldout},
              {"hyperparams", hyperparams}};
    if (tasks) j["paths"]["tasks"] = tasks->string();
    return j;
}

PipelineConfig config_from_json(const Json& j, const fs::path& base_dir) {
    PipelineConfig c;
    Fields top(j, "");
    if (const Json* paths = top.get("paths")) {
        Fields f(*paths, "paths");
        std::string corpus, docs, tables, output = c.output.string(), tasks;
        f.read("corpus", corpus);
        f.read("docs", docs);
        f.read("tables", tables);
        f.read("output", output);
        f.read("tasks", tasks);
        f.finish();
        if (!corpus.empty()) c.corpus = resolve(base_dir, corpus);
        if (!docs.empty()) c.docs = resolve(base_dir, docs);
        if (!tables.empty()) c.tables = resolve(base_dir, tables);
        c.output = resolve(base_dir, output);
        if (!tasks.empty()) c.tasks = resolve(base_dir, tasks);
    }
    if (const Json* k = top.get("k")) {
        if (!k->is_number_integer() || k->get<long long>() < 1) throw ValidationError("k", "must be an integer >= 1");
        c.k = k->get<std::size_t>();
    }
    if (const Json* b = top.get("batches")) {
        if (!b->is_number_integer() || b->get<long long>() < 1) throw ValidationError("batches", "must be an integer >= 1");
        c.batches = b->get<int>();
    }
    if (const Json* s = top.get("seed")) {
        if (!s->is_number_unsigned()) throw ValidationError("seed", "expected a non-negative integer");
        c.seed = s->get<std::uint64_t>();
    }
    if (const Json* t = top.get("teacher")) {
        Fields f(*t, "teacher");
        f.read("endpoint", c.teacher.endpoint);
        f.read("model", c.teacher.model);
        f.read("api_key_env", c.teacher.api_key_env);
        f.read("temperature", c.teacher.temperature);
        f.read_count("requests_per_minute", c.teacher.requests_per_minute);
        f.read("max_retries", c.teacher.max_retries);
        f.finish();
        if (c.teacher.max_retries < 0) throw ValidationError("teacher.max_retries", "must be >= 0");
        if (c.teacher.temperature < 0 || c.teacher.temperature > 2) throw ValidationError("teacher.temperature", "must be in [0, 2]");
    }
    if (const Json* s = top.get("students")) {
        if (!s->is_object()) throw ValidationError("students", "expected an object of model id to endpoint");
        for (const auto& [id, ep] : s->items()) {
            if (!ep.is_string()) throw ValidationError("students." + id, "expected an endpoint string");
            c.students[id] = ep.get<std::string>();
        }
    }
    if (const Json* p = top.get("policy")) {
        try {
            c.policy = policy_from_json(*p);
        } catch (const std::exception& e) {
            throw ValidationError("policy", e.what());
        }
    }
    top.read_count("workers", c.workers);
    if (c.workers < 1) throw ValidationError("workers", "must be >= 1");
    if (const Json* r = top.get("oracle_runner")) {
        Fields f(*r, "oracle_runner");
        f.read("command", c.oracle_runner);
        f.read("timeout_ms", c.runner_timeout_ms);
        f.finish();
        if (c.oracle_runner.empty()) throw ValidationError("oracle_runner.command", "must not be empty");
        if (c.runner_timeout_ms < 1) throw ValidationError("oracle_runner.timeout_ms", "must be >= 1");
    }
    top.read_count("pool_size", c.pool_size);
    if (c.pool_size < 1) throw ValidationError("pool_size", "must be >= 1");
    top.read_count("max_table_rows", c.max_table_rows);
    if (c.max_table_rows < 2) throw ValidationError("max_table_rows", "must be >= 2");
    top.read_count("heldout", c.heldout);
    if (const Json* h = top.get("hyperparams")) {
        try {
            hyperparams_json(*h);
        } catch (const std::exception& e) {
            throw ValidationError("hyperparams", e.what());
        }
        c.hyperparams = *h;
    }
    top.finish();
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw MissingFile(path);
    Json j;
    try {
        j = Json::parse(read_text_file(path));
    } catch (const Json::parse_error& e) {
        throw ValidationError("config", std::string("not valid JSON: ") + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::Libprep: return "libprep";
        case Stage::Gen: return "gen";
        case Stage::Validate: return "validate";
        case Stage::Compile: return "compile";
        case Stage::Export: return "export";
    }
    return "libprep";
}

std::string path_digest(const fs::path& p) {
    if (!fs::is_directory(p)) return file_sha256(p);
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string listing;
    for (const auto& f : files) listing += fs::relative(f, p).generic_string() + "  " + file_sha256(f) + "\n";
    return sha256_hex(listing);
}

ManifestedStep::ManifestedStep(std::string stage, fs::path manifest, Json config_snapshot)
    : stage_(std::move(stage)), manifest_(std::move(manifest)), config_(std::move(config_snapshot)) {}

void ManifestedStep::input(std::string artifact, fs::path p) { inputs_.emplace_back(std::move(artifact), std::move(p)); }

void ManifestedStep::output(fs::path p) { outputs_.push_back(std::move(p)); }

Json ManifestedStep::current_inputs() const {
    Json in = Json::object();
    for (const auto& [artifact, p] : inputs_) {
        if (p.empty() || !fs::exists(p)) throw PrerequisiteMissing(artifact, p);
        in[p.generic_string()] = path_digest(p);
    }
    return in;
}

StageOutcome ManifestedStep::run(const std::function<void()>& body) {
    StageOutcome outcome{stage_, false, manifest_};
    const Json inputs = current_inputs();
    const std::string cfg_digest = config_digest(config_);
    if (fs::exists(manifest_)) {
        try {
            const Json old = read_json_file(manifest_);
            bool fresh = old.value("config_digest", "") == cfg_digest && old.value("inputs", Json()) == inputs;
            const Json outs = old.value("outputs", Json::object());
            fresh = fresh && outs.size() == outputs_.size();
            for (const auto& o : outputs_) {
                fresh = fresh && fs::exists(o) && outs.value(o.generic_string(), "") == path_digest(o);
            }
            if (fresh) {
                outcome.skipped = true;
                return outcome;
            }
        } catch (const Json::exception&) {
            // An unreadable manifest means the stage reruns.
        }
    }
    try {
        body();
    } catch (const PrerequisiteMissing&) {
        throw;
    } catch (const StageFailed&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailed(stage_, e.what());
    }
    Json outs = Json::object();
    for (const auto& o : outputs_) {
        if (!fs::exists(o)) throw StageFailed(stage_, "expected output missing: " + o.string());
        outs[o.generic_string()] = path_digest(o);
    }
    const Json manifest = {{"stage", stage_}, {"inputs", inputs}, {"outputs", outs}, {"config_digest", cfg_digest}, {"config", config_}};
    write_text_file(manifest_, manifest.dump(2) + "\n");
    return outcome;
}

Pipeline::Pipeline(PipelineConfig cfg, ChatClient& teacher, RunnerFactory runners)
    : cfg_(std::move(cfg)), teacher_(teacher), runners_(std::move(runners)) {
    if (!runners_) {
        runners_ = [this] { return std::make_unique<SubprocessOracleRunner>(cfg_.oracle_runner); };
    }
}

StageOutcome Pipeline::run(Stage s) {
    const std::string name(stage_name(s));
    ManifestedStep step(name, artifact("manifests/" + name + ".json"), cfg_.to_json());
    std::function<void()> body;
    switch (s) {
        case Stage::Libprep:
            step.input("corpus", cfg_.corpus);
            step.input("docs", cfg_.docs);
            step.output(artifact("library.json"));
            step.output(artifact("usage.json"));
            body = [this] { libprep(); };
            break;
        case Stage::Gen:
            step.input("library", artifact("library.json"));
            step.input("tables", cfg_.tables);
            step.output(artifact("raw_samples.jsonl"));
            step.output(artifact("gen_records.jsonl"));
            body = [this] { gen(); };
            break;
        case Stage::Validate:
            step.input("raw_samples", artifact("raw_samples.jsonl"));
            step.input("tables", cfg_.tables);
            step.output(artifact("validated.jsonl"));
            step.output(artifact("validation_report.json"));
            body = [this] { validate(); };
            break;
        case Stage::Compile:
            step.input("validated", artifact("validated.jsonl"));
            step.input("library", artifact("library.json"));
            step.input("tables", cfg_.tables);
            step.output(artifact("tutorials.jsonl"));
            step.output(artifact("doc_qa.jsonl"));
            body = [this] { compile(); };
            break;
        case Stage::Export:
            step.input("tutorials", artifact("tutorials.jsonl"));
            step.input("doc_qa", artifact("doc_qa.jsonl"));
            step.input("library", artifact("library.json"));
            if (cfg_.heldout > 0) step.input("tasks", cfg_.tasks.value_or(fs::path()));
            step.output(artifact("datasets"));
            body = [this] { export_datasets(); };
            break;
    }
    return step.run(body);
}

std::vector<StageOutcome> Pipeline::run_e2e() {
    std::vector<StageOutcome> out;
    for (Stage s : {Stage::Libprep, Stage::Gen, Stage::Validate, Stage::Compile, Stage::Export}) out.push_back(run(s));
    return out;
}

void Pipeline::libprep() {
    std::ifstream corpus(cfg_.corpus, std::ios::binary);
    if (!corpus) throw MissingFile(cfg_.corpus);
    const UsageStats stats = count_function_usage(corpus);
    const auto names = select_top_k(stats, cfg_.k);
    const auto library = load_function_docs(cfg_.docs, names);
    write_text_file(artifact("library.json"), library_to_json(library).dump(2) + "\n");
    write_text_file(artifact("usage.json"), usage_stats_to_json(stats).dump(2) + "\n");
}

void Pipeline::gen() {
    const auto library = load_library(artifact("library.json"));
    const TableStore store = TableStore::load_dir(cfg_.tables);
    BatchOptions opts;
    opts.batches = cfg_.batches;
    opts.seed = cfg_.seed;
    opts.workers = cfg_.workers;
    opts.gen.model_id = cfg_.teacher.model;
    opts.gen.temperature = cfg_.teacher.temperature;
    opts.gen.pool_size = cfg_.pool_size;
    opts.gen.max_table_rows = cfg_.max_table_rows;
    // Keyed by config so a changed config never resumes stale units.
    opts.checkpoint = artifact("gen." + config_digest(cfg_.to_json()).substr(0, 12) + ".ckpt.jsonl");
    const BatchResult res = run_generation_batch(library, store, teacher_, opts);
    std::vector<Json> samples, records;
    for (const auto& s : res.samples) samples.push_back(sample_to_json(s));
    for (const auto& r : res.records) records.push_back(gen_record_to_json(r));
    write_text_file(artifact("raw_samples.jsonl"), to_jsonl(samples));
    write_text_file(artifact("gen_records.jsonl"), to_jsonl(records));
    fs::remove(*opts.checkpoint);
}

void Pipeline::validate() {
    std::vector<SynSample> samples;
    for (const auto& j : read_jsonl(artifact("raw_samples.jsonl"))) samples.push_back(sample_from_json(j));
    const TableStore store = TableStore::load_dir(cfg_.tables);
    std::vector<std::unique_ptr<OracleRunner>> runners;
    for (std::size_t i = 0; i < cfg_.workers; ++i) runners.push_back(runners_());
    RunnerPool pool(std::move(runners));
    ValidateOptions opts;
    opts.workers = cfg_.workers;
    opts.runner_timeout_ms = cfg_.runner_timeout_ms;
    opts.oracle.model_id = cfg_.teacher.model;
    opts.oracle.max_table_rows = cfg_.max_table_rows;
    const ValidationResult res = validate_batch(std::move(samples), store, teacher_, pool, cfg_.policy, opts);
    std::vector<Json> kept;
    for (const auto& s : res.validated) kept.push_back(sample_to_json(s));
    write_text_file(artifact("validated.jsonl"), to_jsonl(kept));
    write_text_file(artifact("validation_report.json"), res.report.to_json().dump(2) + "\n");
}

void Pipeline::compile() {
    const auto library = load_library(artifact("library.json"));
    const TableStore store = TableStore::load_dir(cfg_.tables);
    std::vector<Json> tutorials;
    for (const auto& j : read_jsonl(artifact("validated.jsonl"))) {
        const SynSample s = sample_from_json(j);
        const Grid* t = store.find(s.table_id);
        if (!t) throw std::runtime_error("sample " + s.id() + " names unknown table " + s.table_id);
        tutorials.push_back(tutorial_to_json(compile_tutorial(s, *t, cfg_.max_table_rows)));
    }
    GenOptions gen;
    gen.model_id = cfg_.teacher.model;
    gen.temperature = cfg_.teacher.temperature;
    auto qa = parallel_map(library.size(), cfg_.workers, [&](std::size_t i) { return reformat_docs_qa(library[i], teacher_, gen); });
    std::vector<Json> examples;
    for (const auto& r : qa) {
        for (const auto& e : r.examples) examples.push_back(doc_qa_to_json(e));
    }
    write_text_file(artifact("tutorials.jsonl"), to_jsonl(tutorials));
    write_text_file(artifact("doc_qa.jsonl"), to_jsonl(examples));
}

void Pipeline::export_datasets() {
    std::vector<TutorialDoc> tutorials;
    for (const auto& j : read_jsonl(artifact("tutorials.jsonl"))) tutorials.push_back(tutorial_from_json(j));
    std::vector<DocQaExample> qa;
    for (const auto& j : read_jsonl(artifact("doc_qa.jsonl"))) qa.push_back(doc_qa_from_json(j));
    std::vector<QATask> pool;
    if (cfg_.heldout > 0) pool = load_tasks(*cfg_.tasks);
    const fs::path out = artifact("datasets");
    fs::remove_all(out);
    export_sft_dataset(tutorials, pool, qa, load_library(artifact("library.json")), {cfg_.heldout, cfg_.seed}, out);
    export_hyperparams(out / "hyperparams.json", cfg_.hyperparams);
}

StageOutcome run_eval_stage(const fs::path& tasks, RagMode mode, const fs::path& library, StudentSource& student,
                            const fs::path& report, const std::optional<fs::path>& completions, const EvalOptions& opts) {
    const Json snapshot = {{"mode", rag_mode_name(mode)}, {"model_id", student.model_id()}, {"max_table_rows", opts.max_table_rows}};
    ManifestedStep step("eval", fs::path(report.string() + ".manifest.json"), snapshot);
    step.input("tasks", tasks);
    if (mode != RagMode::BaseOnly) step.input("library", library);
    if (completions) step.input("completions", *completions);
    step.output(report);
    return step.run([&] {
        const auto lib = mode == RagMode::BaseOnly ? std::vector<FunctionSpec>{} : load_library(library);
        const EvalReport r = run_eval(load_tasks(tasks), student, mode, lib, opts);
        write_text_file(report, r.to_json().dump(2) + "\n");
    });
}

StageOutcome run_analyze_stage(const fs::path& base, const fs::path& ft, const fs::path& out) {
    ManifestedStep step("analyze", fs::path(out.string() + ".manifest.json"), Json::object());
    step.input("base_report", base);
    step.input("ft_report", ft);
    step.output(out);
    return step.run([&] {
        const auto stats = paired_improvements(EvalReport::from_json(read_json_file(base)), EvalReport::from_json(read_json_file(ft)));
        write_text_file(out, stats.to_json().dump(2) + "\n");
    });
}

}  // namespace xlsynth
