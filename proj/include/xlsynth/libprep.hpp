#pragma once

// Function-library preparation: usage counting over a formula corpus,
// top-K selection and documentation loading.

#include <filesystem>
#include <istream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "xlsynth/serialize.hpp"

namespace xlsynth {

struct ArgSpec {
    std::string name;
    bool required = true;

    bool operator==(const ArgSpec&) const = default;
};

/// One library function with its documentation page.
struct FunctionSpec {
    std::string name;
    std::string signature;  // e.g. "MATCH(lookup_value, lookup_array, [match_type])"
    std::vector<ArgSpec> args;
    std::string summary;
    std::string doc_text;

    bool operator==(const FunctionSpec&) const = default;
};

struct UsageStats {
    std::map<std::string, std::size_t> counts;
    std::size_t total_formulas = 0;  // successfully parsed
    std::size_t skipped = 0;         // unparseable

    void merge(const UsageStats& other);
};

// Each parsed formula contributes one count per Call node, nested
// calls included.
UsageStats count_function_usage(const std::vector<std::string>& corpus);
// One formula per line; blank lines are ignored.
UsageStats count_function_usage(std::istream& corpus);

// Descending by count, ties alphabetical; at most k names.
std::vector<std::string> select_top_k(const UsageStats& stats, std::size_t k);

class MissingDoc : public std::runtime_error {
public:
    explicit MissingDoc(std::string name) : std::runtime_error("missing documentation for " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class MalformedSignature : public std::runtime_error {
public:
    explicit MalformedSignature(std::string name)
        : std::runtime_error("no usable signature line for " + name), name_(std::move(name)) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

// Parses a doc page with Description / Syntax / Example sections. The
// signature is the first `NAME(...)` line under Syntax; bracketed
// arguments are optional unless a `Name <Required>` marker says otherwise.
FunctionSpec parse_function_doc(const std::string& name, const std::string& doc_text);

// Reads `<dir>/<NAME>.md` for each name.
std::vector<FunctionSpec> load_function_docs(const std::filesystem::path& dir, const std::vector<std::string>& names);

// "NAME(a, b, [c])" from the argument list.
std::string render_signature(const std::string& name, const std::vector<ArgSpec>& args);

Json function_spec_to_json(const FunctionSpec& f);
FunctionSpec function_spec_from_json(const Json& j);
Json library_to_json(const std::vector<FunctionSpec>& library);
std::vector<FunctionSpec> library_from_json(const Json& j);
std::vector<FunctionSpec> load_library(const std::filesystem::path& path);

Json usage_stats_to_json(const UsageStats& s);

}  // namespace xlsynth
