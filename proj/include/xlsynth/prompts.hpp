#pragma once

// Prompt templates and parsers for teacher responses.

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "xlsynth/samples.hpp"

namespace xlsynth {

enum class TemplateId { TableChoice, ExampleGen, DocQa, ParallelSolution, OracleSolution, EvalTask, Tutorial };

struct PromptTemplate {
    TemplateId id;
    std::string name;
    std::string version;
    bool verbatim;  // transcribed rather than authored
    std::string_view body;

    std::vector<std::string> placeholders() const;
};

const PromptTemplate& prompt_template(TemplateId id);
const std::vector<PromptTemplate>& all_templates();

using Bindings = std::map<std::string, std::string>;

class UnboundPlaceholder : public std::runtime_error {
public:
    explicit UnboundPlaceholder(std::string name)
        : std::runtime_error("unbound placeholder {" + name + "}"), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class TemplateSyntaxError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// str.format-style substitution: {name} is replaced by its binding,
// {{ and }} produce literal braces. Values are inserted verbatim.
std::string render_template(std::string_view body, const Bindings& bindings);
std::vector<std::string> template_placeholders(std::string_view body);
std::string render_prompt(const PromptTemplate& tpl, const Bindings& bindings);

class NoBlockFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Content of the last ``` block tagged `tag` (case-insensitive), else the
// last untagged block; trimmed.
std::string extract_fenced_block(std::string_view text, std::string_view tag);

class NoIntegerFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bottom-up scan for a line holding only an integer, ignoring markdown
// emphasis around it.
long long parse_last_line_integer(std::string_view text);

class NotAList : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SampleReject {
    std::size_t element;
    std::string reason;
};

struct ParsedSampleSet {
    std::vector<SynSample> samples;
    std::vector<SampleReject> rejects;
};

// Elements missing a required field are rejected individually; unknown
// fields are ignored.
ParsedSampleSet parse_sample_set(std::string_view json_text);

}  // namespace xlsynth
