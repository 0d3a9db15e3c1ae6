#include <cmath>
#include <exception>

#include "support.hpp"
#include "xlsynth/engine.hpp"
#include "xlsynth/text.hpp"

namespace xlsynth {

using namespace detail;

EvalOutcome EvalOutcome::array(ArrayValue a) {
    if (a.values.empty() || a.values.size() != a.rows * a.cols) {
        throw std::invalid_argument("EvalOutcome::array: shape mismatch or empty array");
    }
    return EvalOutcome(std::move(a));
}

std::vector<CellValue> EvalOutcome::flatten() const {
    if (is_plain()) return {value()};
    return array_value().values;
}

std::string value_to_text(const CellValue& v) {
    if (v.is_blank()) return "";
    if (v.is_number()) return text::format_general(v.as_number());
    if (v.is_text()) return v.as_text();
    if (v.is_bool()) return v.as_bool() ? "TRUE" : "FALSE";
    return std::string(error_display(v.as_error()));
}

const BuiltinSpec& FunctionRegistry::register_builtin(BuiltinSpec spec) {
    spec.name = text::to_upper(spec.name);
    if (spec.max_args && *spec.max_args < spec.min_args) {
        throw std::invalid_argument("builtin " + spec.name + ": min_args exceeds max_args");
    }
    if (!spec.impl) throw std::invalid_argument("builtin " + spec.name + ": missing implementation");
    if (builtins_.count(spec.name)) throw DuplicateName(spec.name);
    auto name = spec.name;
    return builtins_.emplace(std::move(name), std::move(spec)).first->second;
}

const BuiltinSpec* FunctionRegistry::find(std::string_view name) const {
    auto it = builtins_.find(name);
    return it == builtins_.end() ? nullptr : &it->second;
}

std::vector<std::string> FunctionRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(builtins_.size());
    for (const auto& [k, _] : builtins_) out.push_back(k);
    return out;
}

FunctionRegistry make_core_library() {
    FunctionRegistry reg;
    register_math(reg);
    register_stats(reg);
    register_logic(reg);
    register_lookup(reg);
    register_text(reg);
    return reg;
}

const FunctionRegistry& core_library() {
    static const FunctionRegistry registry = make_core_library();
    return registry;
}

namespace {

CellValue arithmetic(BinaryOp op, const CellValue& a, const CellValue& b) {
    if (a.is_error()) return a;
    if (b.is_error()) return b;
    if (op == BinaryOp::Concat) {
        return CellValue::text(value_to_text(a) + value_to_text(b));
    }
    if (op == BinaryOp::Eq || op == BinaryOp::Ne || op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt ||
        op == BinaryOp::Ge) {
        const int c = compare_values(a, b);
        bool r = false;
        switch (op) {
            case BinaryOp::Eq: r = c == 0; break;
            case BinaryOp::Ne: r = c != 0; break;
            case BinaryOp::Lt: r = c < 0; break;
            case BinaryOp::Le: r = c <= 0; break;
            case BinaryOp::Gt: r = c > 0; break;
            case BinaryOp::Ge: r = c >= 0; break;
            default: break;
        }
        return CellValue::boolean(r);
    }
    auto x = to_number(a);
    if (failed(x)) return err(std::get<ErrorKind>(x));
    auto y = to_number(b);
    if (failed(y)) return err(std::get<ErrorKind>(y));
    const double l = std::get<double>(x);
    const double r = std::get<double>(y);
    switch (op) {
        case BinaryOp::Add: return num(l + r);
        case BinaryOp::Sub: return num(l - r);
        case BinaryOp::Mul: return num(l * r);
        case BinaryOp::Div:
            if (r == 0) return err(ErrorKind::Div0);
            return num(l / r);
        case BinaryOp::Pow:
            if (l == 0 && r == 0) return err(ErrorKind::Num);
            if (l == 0 && r < 0) return err(ErrorKind::Div0);
            if (l < 0 && std::trunc(r) != r) return err(ErrorKind::Num);
            return num(std::pow(l, r));
        default: break;
    }
    return err(ErrorKind::Value);
}

Value call_builtin(const CallExpr& call, const EvalContext& ctx) {
    const BuiltinSpec* spec = ctx.registry.find(call.name);
    if (!spec) return err(ErrorKind::Name);
    if (call.args.size() < spec->min_args || (spec->max_args && call.args.size() > *spec->max_args)) {
        return err(ErrorKind::Value);
    }
    std::vector<Value> args;
    args.reserve(call.args.size());
    for (const auto& a : call.args) args.push_back(evaluate_value(*a, ctx));
    try {
        return spec->impl(args, ctx);
    } catch (const std::exception&) {
        return err(ErrorKind::Value);
    }
}

}  // namespace

Value evaluate_value(const Expr& ast, const EvalContext& ctx) {
    return std::visit(
        [&](const auto& n) -> Value {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NumberLit>) {
                return num(n.value);
            } else if constexpr (std::is_same_v<T, TextLit>) {
                return CellValue::text(n.value);
            } else if constexpr (std::is_same_v<T, BoolLit>) {
                return CellValue::boolean(n.value);
            } else if constexpr (std::is_same_v<T, ErrorLit>) {
                return err(n.kind);
            } else if constexpr (std::is_same_v<T, RefExpr>) {
                Matrix m = make_matrix(1, 1, {ctx.grid.cell_at(n.ref)});
                m.origin = RangeRef::single(n.ref);
                return m;
            } else if constexpr (std::is_same_v<T, RangeExpr>) {
                Matrix m = make_matrix(static_cast<std::size_t>(n.range.rows()), static_cast<std::size_t>(n.range.cols()),
                                       ctx.grid.resolve_range(n.range));
                m.origin = n.range;
                return m;
            } else if constexpr (std::is_same_v<T, UnaryExpr>) {
                Value operand = evaluate_value(*n.operand, ctx);
                const UnaryOp op = n.op;
                return lift(std::span<const Value>(&operand, 1), [op](std::span<const CellValue> c) -> CellValue {
                    auto x = to_number(c[0]);
                    if (failed(x)) return err(std::get<ErrorKind>(x));
                    double v = std::get<double>(x);
                    return num(op == UnaryOp::Neg ? -v : v / 100.0);
                });
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                Value pair[2] = {evaluate_value(*n.lhs, ctx), evaluate_value(*n.rhs, ctx)};
                const BinaryOp op = n.op;
                return lift(pair, [op](std::span<const CellValue> c) { return arithmetic(op, c[0], c[1]); });
            } else {
                return call_builtin(n, ctx);
            }
        },
        ast.node);
}

namespace {

CellValue top_level(const CellValue& v) { return v.is_blank() ? CellValue::number(0) : v; }

}  // namespace

EvalOutcome evaluate(const Expr& ast, const Grid& grid, const FunctionRegistry& registry, std::optional<CellRef> host) {
    EvalContext ctx{grid, registry, host};
    Value v = evaluate_value(ast, ctx);
    if (auto s = as_scalar(v)) return EvalOutcome::plain(top_level(*s));
    const Matrix& m = std::get<Matrix>(v);
    if (m.cells.empty()) return EvalOutcome::plain(err(ErrorKind::Value));
    ArrayValue a;
    a.rows = m.rows;
    a.cols = m.cols;
    a.values.reserve(m.cells.size());
    for (const auto& c : m.cells) a.values.push_back(top_level(c));
    return EvalOutcome::array(std::move(a));
}

EvalOutcome evaluate_formula(std::string_view formula, const Grid& grid, const FunctionRegistry& registry) {
    return evaluate(*parse_formula(formula), grid, registry);
}

}  // namespace xlsynth
