#include "xlsynth/libprep.hpp"

#include <algorithm>
#include <regex>
#include <sstream>

#include "xlsynth/formula.hpp"
#include "xlsynth/text.hpp"
#include "xlsynth/util.hpp"

namespace xlsynth {

void UsageStats::merge(const UsageStats& other) {
    for (const auto& [name, n] : other.counts) counts[name] += n;
    total_formulas += other.total_formulas;
    skipped += other.skipped;
}

namespace {

void count_calls_into(const Expr& e, std::map<std::string, std::size_t>& counts) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, UnaryExpr>) {
                count_calls_into(*n.operand, counts);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                count_calls_into(*n.lhs, counts);
                count_calls_into(*n.rhs, counts);
            } else if constexpr (std::is_same_v<T, CallExpr>) {
                ++counts[n.name];
                for (const auto& a : n.args) count_calls_into(*a, counts);
            }
        },
        e.node);
}

void count_one(std::string_view formula, UsageStats& stats) {
    auto ast = try_parse_formula(formula);
    if (!ast) {
        ++stats.skipped;
        return;
    }
    ++stats.total_formulas;
    count_calls_into(*ast, stats.counts);
}

}  // namespace

UsageStats count_function_usage(const std::vector<std::string>& corpus) {
    UsageStats stats;
    for (const auto& f : corpus) count_one(f, stats);
    return stats;
}

UsageStats count_function_usage(std::istream& corpus) {
    UsageStats stats;
    std::string line;
    while (std::getline(corpus, line)) {
        const std::string t = text::trim(line);
        if (!t.empty()) count_one(t, stats);
    }
    return stats;
}

std::vector<std::string> select_top_k(const UsageStats& stats, std::size_t k) {
    if (k == 0) throw std::invalid_argument("select_top_k: k must be at least 1");
    std::vector<std::pair<std::string, std::size_t>> items(stats.counts.begin(), stats.counts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < items.size() && i < k; ++i) out.push_back(items[i].first);
    return out;
}

std::string render_signature(const std::string& name, const std::vector<ArgSpec>& args) {
    std::string out = name + "(";
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) out += ", ";
        out += args[i].required ? args[i].name : "[" + args[i].name + "]";
    }
    return out + ")";
}

namespace {

bool is_section_heading(const std::string& line, std::string_view title) {
    std::string t = text::trim(line);
    while (!t.empty() && t.front() == '#') t.erase(t.begin());
    return text::iequals(text::trim(t), title);
}

std::vector<ArgSpec> parse_signature_args(const std::string& inner) {
    std::vector<ArgSpec> args;
    int depth = 0;
    std::string cur;
    bool optional = false;
    auto flush = [&] {
        std::string n = text::trim(cur);
        if (!n.empty() && n != "..." && n != "…") args.push_back({n, !optional});
        cur.clear();
        optional = false;
    };
    for (char ch : inner) {
        if (ch == '[') {
            ++depth;
            optional = true;
        } else if (ch == ']') {
            --depth;
        } else if (ch == ',' && depth <= 0) {
            flush();
        } else if (ch == ',') {
            // "[a, b]" groups: split inside the bracket too.
            flush();
            optional = true;
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    return args;
}

}  // namespace

FunctionSpec parse_function_doc(const std::string& name, const std::string& doc_text) {
    FunctionSpec spec;
    spec.name = text::to_upper(name);
    spec.doc_text = doc_text;
    const auto lines = text::split_lines(doc_text);

    enum class Section { None, Description, Syntax, Example, Other } section = Section::None;
    std::optional<std::string> signature_line;
    std::map<std::string, bool> markers;  // casefolded arg name -> required
    std::map<std::string, std::string> marker_spelling;
    static const std::regex marker_re(R"(^\s*(?:[-*]\s*)?([A-Za-z_][A-Za-z0-9_.]*)\s*<\s*(required|optional)\s*>)",
                                      std::regex::icase);

    for (const auto& raw : lines) {
        if (is_section_heading(raw, "Description")) {
            section = Section::Description;
            continue;
        }
        if (is_section_heading(raw, "Syntax")) {
            section = Section::Syntax;
            continue;
        }
        if (is_section_heading(raw, "Example") || is_section_heading(raw, "Examples")) {
            section = Section::Example;
            continue;
        }
        if (is_section_heading(raw, "See Also") || is_section_heading(raw, "Remarks")) {
            section = Section::Other;
            continue;
        }
        const std::string line = text::trim(raw);
        if (line.empty()) continue;
        if (section == Section::Description && spec.summary.empty()) spec.summary = line;
        if (section != Section::Syntax) continue;
        if (!signature_line && text::starts_with_icase(line, spec.name + "(") && line.back() == ')') {
            signature_line = line;
            continue;
        }
        std::smatch m;
        if (std::regex_search(raw, m, marker_re)) {
            const std::string key = text::casefold(m[1].str());
            markers[key] = text::iequals(m[2].str(), "required");
            marker_spelling[key] = m[1].str();
        }
    }
    if (!signature_line) throw MalformedSignature(spec.name);
    const std::string& sig = *signature_line;
    const std::string inner = sig.substr(spec.name.size() + 1, sig.size() - spec.name.size() - 2);
    spec.args = parse_signature_args(inner);
    for (auto& a : spec.args) {
        auto it = markers.find(text::casefold(a.name));
        if (it != markers.end()) a.required = it->second;
    }
    // Required arguments render first.
    std::stable_partition(spec.args.begin(), spec.args.end(), [](const ArgSpec& a) { return a.required; });
    spec.signature = render_signature(spec.name, spec.args);
    return spec;
}

std::vector<FunctionSpec> load_function_docs(const std::filesystem::path& dir, const std::vector<std::string>& names) {
    std::vector<FunctionSpec> out;
    for (const auto& name : names) {
        const auto path = dir / (name + ".md");
        if (!std::filesystem::exists(path)) throw MissingDoc(name);
        out.push_back(parse_function_doc(name, read_text_file(path)));
    }
    return out;
}

Json function_spec_to_json(const FunctionSpec& f) {
    Json args = Json::array();
    for (const auto& a : f.args) args.push_back({{"name", a.name}, {"required", a.required}});
    return {{"name", f.name}, {"signature", f.signature}, {"args", args}, {"summary", f.summary}, {"doc_text", f.doc_text}};
}

FunctionSpec function_spec_from_json(const Json& j) {
    FunctionSpec f;
    f.name = j.at("name").get<std::string>();
    f.signature = j.at("signature").get<std::string>();
    for (const auto& a : j.at("args")) f.args.push_back({a.at("name").get<std::string>(), a.at("required").get<bool>()});
    f.summary = j.value("summary", "");
    f.doc_text = j.value("doc_text", "");
    return f;
}

Json library_to_json(const std::vector<FunctionSpec>& library) {
    Json out = Json::array();
    for (const auto& f : library) out.push_back(function_spec_to_json(f));
    return out;
}

std::vector<FunctionSpec> library_from_json(const Json& j) {
    if (!j.is_array()) throw std::runtime_error("library JSON must be a list");
    std::vector<FunctionSpec> out;
    for (const auto& e : j) out.push_back(function_spec_from_json(e));
    return out;
}

std::vector<FunctionSpec> load_library(const std::filesystem::path& path) {
    return library_from_json(Json::parse(read_text_file(path)));
}

Json usage_stats_to_json(const UsageStats& s) {
    Json counts = Json::object();
    for (const auto& [k, v] : s.counts) counts[k] = v;
    return {{"counts", counts},
            {"total_formulas", s.total_formulas},
            {"skipped", s.skipped},
            {"counting", "per_call_node"}};
}

}  // namespace xlsynth
