#include "xlsynth/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "xlsynth/text.hpp"

namespace xlsynth {

namespace assets {
std::string_view table_choice();
std::string_view example_gen();
std::string_view doc_qa();
std::string_view parallel_solution();
std::string_view oracle_solution();
std::string_view eval_task();
std::string_view tutorial();
}  // namespace assets

const std::vector<PromptTemplate>& all_templates() {
    static const std::vector<PromptTemplate> templates = {
        {TemplateId::TableChoice, "table_choice", "1", true, assets::table_choice()},
        {TemplateId::ExampleGen, "example_gen", "1", true, assets::example_gen()},
        {TemplateId::DocQa, "doc_qa", "1", true, assets::doc_qa()},
        {TemplateId::ParallelSolution, "parallel_solution", "1", false, assets::parallel_solution()},
        {TemplateId::OracleSolution, "oracle_solution", "1", false, assets::oracle_solution()},
        {TemplateId::EvalTask, "eval_task", "1", false, assets::eval_task()},
        {TemplateId::Tutorial, "tutorial", "1", true, assets::tutorial()},
    };
    return templates;
}

const PromptTemplate& prompt_template(TemplateId id) {
    for (const auto& t : all_templates()) {
        if (t.id == id) return t;
    }
    throw std::invalid_argument("unknown template id");
}

namespace {

// Walks the body, calling on_text for literal runs and on_field for
// placeholder names.
template <typename Text, typename Field>
void scan_template(std::string_view body, Text on_text, Field on_field) {
    std::size_t i = 0;
    while (i < body.size()) {
        const char c = body[i];
        if (c == '{') {
            if (i + 1 < body.size() && body[i + 1] == '{') {
                on_text(std::string_view("{"));
                i += 2;
                continue;
            }
            const auto close = body.find('}', i + 1);
            if (close == std::string_view::npos) throw TemplateSyntaxError("unterminated '{' at offset " + std::to_string(i));
            const std::string_view name = body.substr(i + 1, close - i - 1);
            const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char ch) {
                return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
            });
            if (!ok) throw TemplateSyntaxError("bad placeholder '{" + std::string(name) + "}'");
            on_field(std::string(name));
            i = close + 1;
        } else if (c == '}') {
            if (i + 1 < body.size() && body[i + 1] == '}') {
                on_text(std::string_view("}"));
                i += 2;
                continue;
            }
            throw TemplateSyntaxError("single '}' at offset " + std::to_string(i));
        } else {
            const auto next = body.find_first_of("{}", i);
            const auto end = next == std::string_view::npos ? body.size() : next;
            on_text(body.substr(i, end - i));
            i = end;
        }
    }
}

}  // namespace

std::string render_template(std::string_view body, const Bindings& bindings) {
    std::string out;
    out.reserve(body.size());
    scan_template(
        body, [&](std::string_view s) { out += s; },
        [&](const std::string& name) {
            auto it = bindings.find(name);
            if (it == bindings.end()) throw UnboundPlaceholder(name);
            out += it->second;
        });
    return out;
}

std::vector<std::string> template_placeholders(std::string_view body) {
    std::vector<std::string> names;
    scan_template(
        body, [](std::string_view) {},
        [&](const std::string& name) {
            if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
        });
    return names;
}

std::vector<std::string> PromptTemplate::placeholders() const { return template_placeholders(body); }

std::string render_prompt(const PromptTemplate& tpl, const Bindings& bindings) { return render_template(tpl.body, bindings); }

std::string extract_fenced_block(std::string_view text, std::string_view tag) {
    const auto lines = text::split_lines(text);
    std::optional<std::string> tagged, untagged;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string open = text::trim(lines[i]);
        if (open.rfind("```", 0) != 0) continue;
        const std::string info = text::trim(std::string_view(open).substr(3));
        std::size_t j = i + 1;
        while (j < lines.size() && text::trim(lines[j]) != "```") ++j;
        if (j >= lines.size()) break;  // unterminated
        std::vector<std::string> body(lines.begin() + static_cast<long>(i) + 1, lines.begin() + static_cast<long>(j));
        std::string content = text::trim(text::join(body, "\n"));
        if (info.empty()) {
            untagged = std::move(content);
        } else if (text::iequals(info, tag)) {
            tagged = std::move(content);
        }
        i = j;
    }
    if (tagged) return *tagged;
    if (untagged) return *untagged;
    throw NoBlockFound("no fenced " + std::string(tag) + " block in response");
}

long long parse_last_line_integer(std::string_view text) {
    const auto lines = text::split_lines(text);
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        std::string s = text::trim(*it);
        while (!s.empty() && (s.front() == '*' || s.front() == '_' || s.front() == '`')) s.erase(s.begin());
        while (!s.empty() && (s.back() == '*' || s.back() == '_' || s.back() == '`' || s.back() == '.')) s.pop_back();
        s = text::trim(s);
        if (s.empty()) continue;
        std::size_t k = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        if (k == s.size() || s.size() - k > 18) continue;
        if (!std::all_of(s.begin() + static_cast<long>(k), s.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
        return std::stoll(s);
    }
    throw NoIntegerFound("no line with a bare integer");
}

namespace {

std::optional<std::string> string_field(const Json& e, const char* key, bool allow_number) {
    if (!e.contains(key)) return std::nullopt;
    const Json& v = e[key];
    if (v.is_string()) return v.get<std::string>();
    if (allow_number && v.is_number()) return describe(cell_from_json(v));
    return std::nullopt;
}

std::optional<std::vector<std::string>> list_field(const Json& e, const char* key) {
    if (!e.contains(key) || !e[key].is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& v : e[key]) {
        if (!v.is_string()) return std::nullopt;
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

ParsedSampleSet parse_sample_set(std::string_view json_text) {
    Json j;
    try {
        j = Json::parse(json_text);
    } catch (const Json::parse_error& e) {
        throw NotAList(std::string("sample set is not valid JSON: ") + e.what());
    }
    if (!j.is_array()) throw NotAList("sample set JSON is not a list");
    ParsedSampleSet out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Json& e = j[i];
        if (!e.is_object()) {
            out.rejects.push_back({i, "element is not an object"});
            continue;
        }
        SynSample s;
        std::string missing;
        auto need = [&](const char* key, std::optional<std::string> v, std::string& dst) {
            if (!v) missing += missing.empty() ? key : std::string(", ") + key;
            else dst = std::move(*v);
        };
        need("func", string_field(e, "func", false), s.func);
        need("demo_argument", string_field(e, "demo_argument", false), s.demo_argument);
        need("query", string_field(e, "query", false), s.query);
        need("func_explanation", string_field(e, "func_explanation", false), s.func_explanation);
        need("answer", string_field(e, "answer", true), s.answer);
        need("formula", string_field(e, "formula", false), s.formula);
        if (auto steps = list_field(e, "step_by_step")) s.step_by_step = std::move(*steps);
        else missing += missing.empty() ? "step_by_step" : ", step_by_step";
        if (auto st = list_field(e, "structure")) s.structure = std::move(*st);
        else missing += missing.empty() ? "structure" : ", structure";
        if (!missing.empty()) {
            out.rejects.push_back({i, "missing or mistyped field(s): " + missing});
            continue;
        }
        s.index = static_cast<int>(out.samples.size());
        out.samples.push_back(std::move(s));
    }
    return out;
}

}  // namespace xlsynth
