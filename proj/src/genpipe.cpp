#include "xlsynth/genpipe.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>

#include "xlsynth/formula.hpp"
#include "xlsynth/prompts.hpp"
#include "xlsynth/text.hpp"
#include "xlsynth/util.hpp"

namespace xlsynth {

TableStore::TableStore(std::vector<Grid> grids) : grids_(std::move(grids)) {
    std::map<std::string, int> seen;
    for (const auto& g : grids_) {
        if (seen[g.source_id()]++) throw std::invalid_argument("duplicate table id: " + g.source_id());
    }
}

TableStore TableStore::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("table directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (ext == ".json" || ext == ".csv" || ext == ".tsv" || ext == ".md") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Grid> grids;
    for (const auto& f : files) grids.push_back(load_grid_file(f));
    return TableStore(std::move(grids));
}

const Grid* TableStore::find(const std::string& id) const {
    for (const auto& g : grids_) {
        if (g.source_id() == id) return &g;
    }
    return nullptr;
}

std::vector<Grid> TableStore::draw_pool(std::mt19937_64& rng, std::size_t n) const {
    if (grids_.empty()) throw TableStoreExhausted("table store is empty");
    std::vector<std::size_t> idx(grids_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const std::size_t take = std::min(n, idx.size());
    std::vector<Grid> pool;
    for (std::size_t i = 0; i < take; ++i) {
        std::swap(idx[i], idx[i + uniform_index(rng, idx.size() - i)]);
        pool.push_back(grids_[idx[i]]);
    }
    return pool;
}

Json gen_record_to_json(const GenRecord& r) {
    return {{"batch", r.batch}, {"func", r.func}, {"kind", r.kind}, {"message", r.message}};
}

namespace {

GenRecord gen_record_from_json(const Json& j) {
    return {j.at("batch").get<int>(), j.at("func").get<std::string>(), j.at("kind").get<std::string>(),
            j.at("message").get<std::string>()};
}

std::optional<std::size_t> chosen_index(const std::string& reply, std::size_t n) {
    try {
        const long long k = parse_last_line_integer(reply);
        if (k >= 1 && static_cast<std::size_t>(k) <= n) return static_cast<std::size_t>(k - 1);
    } catch (const NoIntegerFound&) {
    }
    return std::nullopt;
}

}  // namespace

std::string render_table_candidates(std::span<const Grid> pool, std::size_t max_rows) {
    std::string out;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (i) out += "\n\n";
        out += "Table " + std::to_string(i + 1) + ":\n" + render_markdown(pool[i], max_rows);
    }
    return out;
}

AssignResult assign_table(const FunctionSpec& f, std::span<const Grid> pool, ChatClient& client, const GenOptions& opts) {
    if (pool.empty()) throw TableStoreExhausted("empty candidate pool");
    const std::string prompt = render_prompt(prompt_template(TemplateId::TableChoice),
                                             {{"func", f.name}, {"docs", f.doc_text}, {"tables", render_table_candidates(pool, opts.max_table_rows)}});
    ChatRequest req = single_turn(opts.model_id, prompt, opts.temperature);
    const std::string reply = client.chat(req);
    AssignResult result;
    if (auto k = chosen_index(reply, pool.size())) {
        result.choice = *k;
        return result;
    }
    result.reprompted = true;
    req.messages.push_back({Role::Assistant, reply});
    req.messages.push_back({Role::User, "Write only the number of the chosen table, between 1 and " +
                                            std::to_string(pool.size()) + ", on the last line."});
    if (auto k = chosen_index(client.chat(req), pool.size())) {
        result.choice = *k;
        return result;
    }
    result.fell_back = true;
    result.choice = 0;
    return result;
}

GenerationResult generate_samples(const FunctionSpec& f, const Grid& t, ChatClient& client, const GenOptions& opts) {
    GenerationResult out;
    out.set.func = f.name;
    if (f.args.empty()) {
        out.failure = "function has no arguments to demonstrate";
        return out;
    }
    const std::string prompt = render_prompt(prompt_template(TemplateId::ExampleGen),
                                             {{"func", f.name}, {"docs", f.doc_text}, {"table", render_markdown(t, opts.max_table_rows)}});
    std::string reply;
    try {
        reply = client.chat(single_turn(opts.model_id, prompt, opts.temperature));
    } catch (const TransportError& e) {
        out.failure = std::string("teacher call failed: ") + e.what();
        return out;
    }
    std::string json_text;
    try {
        json_text = extract_fenced_block(reply, "json");
    } catch (const NoBlockFound& e) {
        const std::string trimmed = text::trim(reply);
        if (trimmed.empty() || trimmed.front() != '[') {
            out.failure = e.what();
            return out;
        }
        json_text = trimmed;
    }
    ParsedSampleSet parsed;
    try {
        parsed = parse_sample_set(json_text);
    } catch (const NotAList& e) {
        out.failure = e.what();
        return out;
    }
    for (const auto& r : parsed.rejects) out.rejects.push_back("element " + std::to_string(r.element) + ": " + r.reason);
    const std::size_t cap = f.args.size() + 1;
    for (auto& s : parsed.samples) {
        if (!text::iequals(s.func, f.name)) {
            out.rejects.push_back("sample for " + s.func + " does not demonstrate " + f.name);
            continue;
        }
        try {
            parse_formula(s.formula);
        } catch (const SyntaxError& e) {
            out.rejects.push_back("unparseable formula " + s.formula + ": " + e.what());
            continue;
        }
        if (out.set.samples.size() == cap) {
            out.rejects.push_back("over-generation truncated at " + std::to_string(cap) + " samples");
            break;
        }
        s.func = f.name;
        s.table_id = t.source_id();
        s.index = static_cast<int>(out.set.samples.size());
        out.set.samples.push_back(std::move(s));
    }
    return out;
}

Json tutorial_to_json(const TutorialDoc& d) {
    return {{"sample_id", d.sample_id}, {"template_version", d.template_version}, {"text", d.text}};
}

TutorialDoc tutorial_from_json(const Json& j) {
    return {j.at("text").get<std::string>(), j.value("sample_id", ""), j.value("template_version", "")};
}

TutorialDoc compile_tutorial(const SynSample& s, const Grid& t, std::size_t max_rows) {
    std::string reasoning = s.func_explanation;
    if (!s.step_by_step.empty()) reasoning += "\n\n" + text::join(s.step_by_step, "\n");
    const auto& tpl = prompt_template(TemplateId::Tutorial);
    TutorialDoc doc;
    doc.text = render_prompt(tpl, {{"table", render_markdown(t, max_rows)},
                                   {"query", s.query},
                                   {"reasoning", reasoning},
                                   {"formula", s.formula}});
    doc.sample_id = s.id();
    doc.template_version = tpl.name + "-v" + tpl.version;
    return doc;
}

Json doc_qa_to_json(const DocQaExample& e) {
    return {{"func", e.func},
            {"description", e.description},
            {"context_table", e.context_table ? Json(*e.context_table) : Json(nullptr)},
            {"formula", e.formula},
            {"expected_output", e.expected_output}};
}

DocQaExample doc_qa_from_json(const Json& j) {
    DocQaExample e;
    e.func = j.value("func", "");
    e.description = j.at("description").get<std::string>();
    if (j.contains("context_table") && j["context_table"].is_string()) e.context_table = j["context_table"].get<std::string>();
    e.formula = j.at("formula").get<std::string>();
    e.expected_output = j.at("expected_output").get<std::string>();
    return e;
}

DocQaResult parse_doc_qa_response(const std::string& func, const std::string& response) {
    DocQaResult out;
    if (text::trim(response) == "[No examples provided]") return out;
    std::vector<std::vector<std::string>> blocks(1);
    for (const auto& line : text::split_lines(response)) {
        if (text::trim(line) == "-----") {
            blocks.emplace_back();
        } else {
            blocks.back().push_back(line);
        }
    }
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& lines = blocks[b];
        if (std::all_of(lines.begin(), lines.end(), [](const std::string& l) { return text::trim(l).empty(); })) continue;
        const std::string tag = "block " + std::to_string(b + 1) + ": ";
        std::size_t open = lines.size(), close = lines.size();
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const std::string t = text::trim(lines[i]);
            if (open == lines.size() && t.rfind("```", 0) == 0) {
                open = i;
            } else if (open != lines.size() && t == "```") {
                close = i;
                break;
            }
        }
        if (close == lines.size()) {
            out.rejects.push_back(tag + "no fenced formula");
            continue;
        }
        DocQaExample ex;
        ex.func = func;
        std::vector<std::string> desc, table;
        for (std::size_t i = 0; i < open; ++i) {
            const std::string t = text::trim(lines[i]);
            if (t.empty()) continue;
            (t.front() == '|' ? table : desc).push_back(t);
        }
        ex.description = text::join(desc, "\n");
        if (!table.empty()) ex.context_table = text::join(table, "\n");
        std::vector<std::string> body(lines.begin() + static_cast<long>(open) + 1, lines.begin() + static_cast<long>(close));
        ex.formula = text::trim(text::join(body, "\n"));
        bool have_output = false;
        for (std::size_t i = close + 1; i < lines.size(); ++i) {
            const std::string t = text::trim(lines[i]);
            if (t.rfind(">>>", 0) == 0) {
                ex.expected_output = text::trim(std::string_view(t).substr(3));
                have_output = true;
                break;
            }
        }
        if (!have_output) {
            out.rejects.push_back(tag + "no >>> output line");
            continue;
        }
        if (!try_parse_formula(ex.formula)) {
            out.rejects.push_back(tag + "unparseable formula " + ex.formula);
            continue;
        }
        out.examples.push_back(std::move(ex));
    }
    return out;
}

DocQaResult reformat_docs_qa(const FunctionSpec& f, ChatClient& client, const GenOptions& opts) {
    const std::string prompt = render_prompt(prompt_template(TemplateId::DocQa), {{"function_docs", f.doc_text}});
    return parse_doc_qa_response(f.name, client.chat(single_turn(opts.model_id, prompt, opts.temperature)));
}

std::uint64_t unit_seed(std::uint64_t seed, int batch, const std::string& func) {
    return derive_seed(seed, static_cast<std::uint64_t>(batch), func);
}

namespace {

struct UnitOutcome {
    std::vector<SynSample> samples;
    std::vector<GenRecord> records;
};

Json unit_to_json(int batch, const std::string& func, const UnitOutcome& u) {
    Json samples = Json::array(), records = Json::array();
    for (const auto& s : u.samples) samples.push_back(sample_to_json(s));
    for (const auto& r : u.records) records.push_back(gen_record_to_json(r));
    return {{"batch", batch}, {"func", func}, {"samples", samples}, {"records", records}};
}

std::string unit_key(int batch, const std::string& func) { return std::to_string(batch) + "|" + func; }

}  // namespace

BatchResult run_generation_batch(const std::vector<FunctionSpec>& library, const TableStore& store, ChatClient& client,
                                 const BatchOptions& opts) {
    if (opts.batches < 1) throw std::invalid_argument("batches must be at least 1");
    if (store.size() == 0) throw TableStoreExhausted("table store is empty");

    std::map<std::string, UnitOutcome> restored;
    if (opts.checkpoint && std::filesystem::exists(*opts.checkpoint)) {
        for (const auto& j : read_jsonl(*opts.checkpoint)) {
            UnitOutcome u;
            for (const auto& s : j.at("samples")) u.samples.push_back(sample_from_json(s));
            for (const auto& r : j.at("records")) u.records.push_back(gen_record_from_json(r));
            restored[unit_key(j.at("batch").get<int>(), j.at("func").get<std::string>())] = std::move(u);
        }
    }

    struct Unit {
        int batch;
        const FunctionSpec* f;
    };
    std::vector<Unit> units, pending;
    for (int b = 0; b < opts.batches; ++b) {
        for (const auto& f : library) units.push_back({b, &f});
    }
    for (const auto& u : units) {
        if (!restored.count(unit_key(u.batch, u.f->name))) pending.push_back(u);
    }

    std::mutex checkpoint_mu;
    auto run_unit = [&](std::size_t i) {
        const Unit& u = pending[i];
        UnitOutcome out;
        auto record = [&](std::string kind, std::string msg) {
            out.records.push_back({u.batch, u.f->name, std::move(kind), std::move(msg)});
        };
        std::mt19937_64 rng(unit_seed(opts.seed, u.batch, u.f->name));
        const std::vector<Grid> pool = store.draw_pool(rng, opts.gen.pool_size);
        try {
            const AssignResult choice = assign_table(*u.f, pool, client, opts.gen);
            if (choice.fell_back) record("warning", "table choice out of range after reprompt; using candidate 1");
            const Grid& table = pool[choice.choice];
            GenerationResult gen = generate_samples(*u.f, table, client, opts.gen);
            for (auto& r : gen.rejects) record("reject", std::move(r));
            if (gen.failure) record("failure", *gen.failure);
            for (auto& s : gen.set.samples) {
                s.batch = u.batch;
                out.samples.push_back(std::move(s));
            }
        } catch (const TransportError& e) {
            record("failure", std::string("teacher call failed: ") + e.what());
        }
        if (opts.checkpoint) {
            std::lock_guard lock(checkpoint_mu);
            std::ofstream cp(*opts.checkpoint, std::ios::app | std::ios::binary);
            cp << unit_to_json(u.batch, u.f->name, out).dump() << '\n';
            cp.flush();
        }
        return out;
    };
    if (opts.checkpoint && opts.checkpoint->has_parent_path()) std::filesystem::create_directories(opts.checkpoint->parent_path());
    auto fresh = parallel_map(pending.size(), opts.workers, run_unit);

    BatchResult result;
    result.attempted = pending.size();
    result.resumed = units.size() - pending.size();
    std::size_t next_fresh = 0;
    for (const auto& u : units) {
        auto it = restored.find(unit_key(u.batch, u.f->name));
        UnitOutcome& o = it != restored.end() ? it->second : fresh[next_fresh++];
        for (auto& s : o.samples) result.samples.push_back(std::move(s));
        for (auto& r : o.records) result.records.push_back(std::move(r));
    }
    return result;
}

}  // namespace xlsynth
