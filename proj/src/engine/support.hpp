#pragma once

// Coercion and argument helpers shared by the evaluator and builtins.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "xlsynth/engine.hpp"

namespace xlsynth::detail {

template <class T>
using Result = std::variant<T, ErrorKind>;

template <class T>
bool failed(const Result<T>& r) {
    return std::holds_alternative<ErrorKind>(r);
}

inline CellValue err(ErrorKind k) { return CellValue::error(k); }

// Binds `var` to the numeric coercion of `expr`, returning the error cell
// from the enclosing function on failure.
#define XL_NUM_OR_RETURN(var, expr)                                          \
    auto var##_res = ::xlsynth::detail::to_number(expr);                     \
    if (::xlsynth::detail::failed(var##_res))                                \
        return ::xlsynth::detail::err(std::get<ErrorKind>(var##_res));       \
    const double var = std::get<double>(var##_res)

// Number result with the finiteness invariant: non-finite becomes #NUM!.
CellValue num(double v);

Result<double> to_number(const CellValue& v);
Result<std::string> to_text(const CellValue& v);
Result<bool> to_bool(const CellValue& v);

// Three-way comparison with spreadsheet ordering Number < Text < Bool;
// Blank takes the type of the other side. Neither side may be an error.
int compare_values(const CellValue& a, const CellValue& b);

// Scalar view of a value: single-cell matrices collapse to their cell,
// larger matrices yield nullopt.
std::optional<CellValue> as_scalar(const Value& v);

Matrix to_matrix(const Value& v);
Matrix make_matrix(std::size_t rows, std::size_t cols, std::vector<CellValue> cells);
const Matrix* matrix_of(const Value& v);

// First error in a span of scalar cells, if any.
std::optional<ErrorKind> first_error(std::span<const CellValue> cells);

// Elementwise application over scalar positions with spreadsheet
// broadcasting: singleton dimensions stretch, mismatched extents give #N/A.
using ScalarFn = std::function<CellValue(std::span<const CellValue>)>;
Value lift(std::span<const Value> args, const ScalarFn& fn);

// Builtin taking only scalar arguments; arrays are mapped elementwise.
// With `propagate_errors` the first error argument short-circuits.
BuiltinSpec scalar_builtin(std::string name, std::size_t min_args, std::optional<std::size_t> max_args, ScalarFn fn,
                           bool propagate_errors = true);

// Spreadsheet round-half-away-from-zero at `digits` decimals, stabilized
// to 15 significant digits first.
double round_half_away(double x, int digits);

// Truncation toward zero used for integer arguments.
double trunc_arg(double x);

struct Criterion {
    enum class Op { Eq, Ne, Lt, Le, Gt, Ge };
    enum class Kind { Number, Text, Bool, Empty };
    Op op = Op::Eq;
    Kind kind = Kind::Text;
    double number = 0;
    std::string text;
    bool boolean = false;
};

Result<Criterion> parse_criterion(const CellValue& raw);
bool criterion_matches(const Criterion& c, const CellValue& cell);

// Extends a reference-backed matrix to rows x cols from its top-left
// (SUMIF-style sum ranges); arrays must already have that shape.
std::optional<Matrix> conform_range(const Matrix& m, std::size_t rows, std::size_t cols, const Grid& grid);

// Numbers for aggregate functions: arrays and references contribute only
// their Number cells, direct scalar arguments are coerced. Errors anywhere
// propagate.
Result<std::vector<double>> collect_numbers(std::span<const Value> args);

// Arguments for builtins that take a whole range.
inline Value first_arg_or(std::span<const Value> args, std::size_t i, Value fallback) {
    return i < args.size() ? args[i] : std::move(fallback);
}

void register_math(FunctionRegistry& reg);
void register_stats(FunctionRegistry& reg);
void register_logic(FunctionRegistry& reg);
void register_lookup(FunctionRegistry& reg);
void register_text(FunctionRegistry& reg);

}  // namespace xlsynth::detail
