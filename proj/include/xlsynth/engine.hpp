#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xlsynth/formula.hpp"
#include "xlsynth/grid.hpp"

namespace xlsynth {

/// Rectangular block of values. `origin` is set when the block came from a
/// sheet reference; reference-aware builtins (ROW, SUMIF, ...) use it.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<CellValue> cells;
    std::optional<RangeRef> origin;

    const CellValue& at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
    std::size_t size() const { return cells.size(); }
    bool is_single() const { return rows == 1 && cols == 1; }
};

// Intermediate value flowing between operators and builtins.
using Value = std::variant<CellValue, Matrix>;

struct ArrayValue {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<CellValue> values;  // row-major, never empty

    bool operator==(const ArrayValue&) const = default;
};

/// Result of evaluating a formula: one value, or a spilled array.
class EvalOutcome {
public:
    EvalOutcome() : v_(CellValue::blank()) {}

    static EvalOutcome plain(CellValue v) { return EvalOutcome(std::move(v)); }
    static EvalOutcome array(ArrayValue a);

    bool is_plain() const { return std::holds_alternative<CellValue>(v_); }
    bool is_array() const { return std::holds_alternative<ArrayValue>(v_); }
    const CellValue& value() const { return std::get<CellValue>(v_); }
    const ArrayValue& array_value() const { return std::get<ArrayValue>(v_); }

    bool is_error() const { return is_plain() && value().is_error(); }
    // Row-major elements; a plain outcome yields one element.
    std::vector<CellValue> flatten() const;

    bool operator==(const EvalOutcome&) const = default;

private:
    explicit EvalOutcome(CellValue v) : v_(std::move(v)) {}
    explicit EvalOutcome(ArrayValue a) : v_(std::move(a)) {}
    std::variant<CellValue, ArrayValue> v_;
};

class FunctionRegistry;

struct EvalContext {
    const Grid& grid;
    const FunctionRegistry& registry;
    // Cell hosting the formula, used by ROW()/COLUMN() without arguments.
    std::optional<CellRef> host;
};

using BuiltinFn = std::function<Value(std::span<const Value> args, const EvalContext& ctx)>;

struct BuiltinSpec {
    std::string name;
    std::size_t min_args = 0;
    std::optional<std::size_t> max_args;  // nullopt: unbounded
    BuiltinFn impl;
};

class DuplicateName : public std::runtime_error {
public:
    explicit DuplicateName(const std::string& name) : std::runtime_error("builtin already registered: " + name) {}
};

class FunctionRegistry {
public:
    // Throws DuplicateName, or std::invalid_argument when min_args > max_args.
    const BuiltinSpec& register_builtin(BuiltinSpec spec);

    const BuiltinSpec* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }
    std::vector<std::string> names() const;
    std::size_t size() const { return builtins_.size(); }

private:
    std::map<std::string, BuiltinSpec, std::less<>> builtins_;
};

// Registry holding the builtin library; built once and immutable.
const FunctionRegistry& core_library();
// Fresh mutable copy of the builtin library, for extension.
FunctionRegistry make_core_library();

EvalOutcome evaluate(const Expr& ast, const Grid& grid, const FunctionRegistry& registry = core_library(),
                     std::optional<CellRef> host = std::nullopt);

// Parses then evaluates; propagates SyntaxError.
EvalOutcome evaluate_formula(std::string_view formula, const Grid& grid,
                             const FunctionRegistry& registry = core_library());

// Lower-level entry point used by builtins that re-enter evaluation.
Value evaluate_value(const Expr& ast, const EvalContext& ctx);

// Spreadsheet text form of a value ("TRUE", "3.5", "#N/A", "").
std::string value_to_text(const CellValue& v);

}  // namespace xlsynth
