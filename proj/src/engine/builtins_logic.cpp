#include <cmath>

#include "support.hpp"

namespace xlsynth::detail {

namespace {

// IF only evaluates the chosen branch's value; an error in the other
// branch does not propagate. Array conditions select elementwise.
Value if_fn(std::span<const Value> args, const EvalContext&) {
    const Value otherwise = args.size() > 2 ? args[2] : Value(CellValue::boolean(false));
    if (auto cond = as_scalar(args[0])) {
        if (cond->is_error()) return *cond;
        auto b = to_bool(*cond);
        if (failed(b)) return err(std::get<ErrorKind>(b));
        return std::get<bool>(b) ? args[1] : otherwise;
    }
    Value triple[3] = {args[0], args[1], otherwise};
    return lift(triple, [](std::span<const CellValue> c) -> CellValue {
        if (c[0].is_error()) return c[0];
        auto b = to_bool(c[0]);
        if (failed(b)) return err(std::get<ErrorKind>(b));
        return std::get<bool>(b) ? c[1] : c[2];
    });
}

// AND/OR: range cells contribute Numbers and Bools only; direct scalars
// are coerced. No logical values at all is #VALUE!.
Value fold_logical(std::span<const Value> args, bool is_and) {
    bool seen = false;
    bool acc = is_and;
    for (const auto& a : args) {
        if (auto m = matrix_of(a)) {
            for (const auto& c : m->cells) {
                if (c.is_error()) return c;
                if (!c.is_number() && !c.is_bool()) continue;
                const bool b = c.is_bool() ? c.as_bool() : c.as_number() != 0;
                acc = is_and ? acc && b : acc || b;
                seen = true;
            }
            continue;
        }
        auto b = to_bool(std::get<CellValue>(a));
        if (failed(b)) return err(std::get<ErrorKind>(b));
        acc = is_and ? acc && std::get<bool>(b) : acc || std::get<bool>(b);
        seen = true;
    }
    if (!seen) return err(ErrorKind::Value);
    return CellValue::boolean(acc);
}

Value choose(std::span<const Value> args, const EvalContext&) {
    auto idx = as_scalar(args[0]);
    if (!idx) return err(ErrorKind::Value);
    XL_NUM_OR_RETURN(i, *idx);
    const double k = std::trunc(i);
    if (k < 1 || k >= static_cast<double>(args.size())) return err(ErrorKind::Value);
    return args[static_cast<std::size_t>(k)];
}

BuiltinSpec predicate(std::string name, bool (*test)(const CellValue&)) {
    return scalar_builtin(
        std::move(name), 1, 1, [test](std::span<const CellValue> c) { return CellValue::boolean(test(c[0])); }, false);
}

}  // namespace

void register_logic(FunctionRegistry& reg) {
    reg.register_builtin({"IF", 2, 3, if_fn});
    reg.register_builtin(scalar_builtin(
        "IFERROR", 2, 2, [](std::span<const CellValue> c) { return c[0].is_error() ? c[1] : c[0]; }, false));
    reg.register_builtin(scalar_builtin(
        "IFNA", 2, 2,
        [](std::span<const CellValue> c) { return c[0].is_error() && c[0].as_error() == ErrorKind::NA ? c[1] : c[0]; },
        false));
    reg.register_builtin({"AND", 1, std::nullopt, [](auto a, const auto&) { return fold_logical(a, true); }});
    reg.register_builtin({"OR", 1, std::nullopt, [](auto a, const auto&) { return fold_logical(a, false); }});
    reg.register_builtin(scalar_builtin("NOT", 1, 1, [](std::span<const CellValue> c) -> CellValue {
        auto b = to_bool(c[0]);
        if (failed(b)) return err(std::get<ErrorKind>(b));
        return CellValue::boolean(!std::get<bool>(b));
    }));
    reg.register_builtin({"CHOOSE", 2, std::nullopt, choose});

    reg.register_builtin(predicate("ISNUMBER", [](const CellValue& v) { return v.is_number(); }));
    reg.register_builtin(predicate("ISTEXT", [](const CellValue& v) { return v.is_text(); }));
    reg.register_builtin(predicate("ISBLANK", [](const CellValue& v) { return v.is_blank(); }));
    reg.register_builtin(predicate("ISERROR", [](const CellValue& v) { return v.is_error(); }));
    reg.register_builtin(
        predicate("ISNA", [](const CellValue& v) { return v.is_error() && v.as_error() == ErrorKind::NA; }));
}

}  // namespace xlsynth::detail
