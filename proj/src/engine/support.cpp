#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "xlsynth/text.hpp"

namespace xlsynth::detail {

CellValue num(double v) {
    if (!std::isfinite(v)) return err(ErrorKind::Num);
    return CellValue::number(v);
}

Result<double> to_number(const CellValue& v) {
    if (v.is_number()) return v.as_number();
    if (v.is_blank()) return 0.0;
    if (v.is_bool()) return v.as_bool() ? 1.0 : 0.0;
    if (v.is_error()) return v.as_error();
    if (auto n = text::coerce_number(v.as_text())) return *n;
    return ErrorKind::Value;
}

Result<std::string> to_text(const CellValue& v) {
    if (v.is_error()) return v.as_error();
    return value_to_text(v);
}

Result<bool> to_bool(const CellValue& v) {
    if (v.is_bool()) return v.as_bool();
    if (v.is_number()) return v.as_number() != 0;
    if (v.is_blank()) return false;
    if (v.is_error()) return v.as_error();
    if (text::iequals(v.as_text(), "TRUE")) return true;
    if (text::iequals(v.as_text(), "FALSE")) return false;
    return ErrorKind::Value;
}

namespace {

int type_rank(const CellValue& v) {
    if (v.is_number()) return 0;
    if (v.is_text()) return 1;
    return 2;
}

CellValue blank_as(const CellValue& other) {
    if (other.is_text()) return CellValue::text("");
    if (other.is_bool()) return CellValue::boolean(false);
    return CellValue::number(0);
}

}  // namespace

int compare_values(const CellValue& a0, const CellValue& b0) {
    if (a0.is_blank() && b0.is_blank()) return 0;
    const CellValue a = a0.is_blank() ? blank_as(b0) : a0;
    const CellValue b = b0.is_blank() ? blank_as(a0) : b0;
    const int ra = type_rank(a);
    const int rb = type_rank(b);
    if (ra != rb) return ra < rb ? -1 : 1;
    if (a.is_number()) {
        double x = a.as_number(), y = b.as_number();
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (a.is_text()) {
        const std::string x = text::casefold(a.as_text());
        const std::string y = text::casefold(b.as_text());
        return x < y ? -1 : (x > y ? 1 : 0);
    }
    bool x = a.as_bool(), y = b.as_bool();
    return x == y ? 0 : (x ? 1 : -1);
}

std::optional<CellValue> as_scalar(const Value& v) {
    if (auto c = std::get_if<CellValue>(&v)) return *c;
    const auto& m = std::get<Matrix>(v);
    if (m.is_single()) return m.cells[0];
    return std::nullopt;
}

Matrix make_matrix(std::size_t rows, std::size_t cols, std::vector<CellValue> cells) {
    Matrix m;
    m.rows = rows;
    m.cols = cols;
    m.cells = std::move(cells);
    return m;
}

Matrix to_matrix(const Value& v) {
    if (auto m = std::get_if<Matrix>(&v)) return *m;
    return make_matrix(1, 1, {std::get<CellValue>(v)});
}

const Matrix* matrix_of(const Value& v) { return std::get_if<Matrix>(&v); }

std::optional<ErrorKind> first_error(std::span<const CellValue> cells) {
    for (const auto& c : cells) {
        if (c.is_error()) return c.as_error();
    }
    return std::nullopt;
}

Value lift(std::span<const Value> args, const ScalarFn& fn) {
    std::size_t rows = 1, cols = 1;
    bool any_array = false;
    for (const auto& a : args) {
        if (auto m = matrix_of(a); m && !m->is_single()) {
            any_array = true;
            rows = std::max(rows, m->rows);
            cols = std::max(cols, m->cols);
        }
    }
    std::vector<CellValue> scalars(args.size());
    if (!any_array) {
        for (std::size_t i = 0; i < args.size(); ++i) scalars[i] = *as_scalar(args[i]);
        return fn(scalars);
    }
    std::vector<CellValue> out;
    out.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            bool out_of_bounds = false;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (auto m = matrix_of(args[i]); m && !m->is_single()) {
                    std::size_t rr = m->rows == 1 ? 0 : r;
                    std::size_t cc = m->cols == 1 ? 0 : c;
                    if (rr >= m->rows || cc >= m->cols) {
                        out_of_bounds = true;
                        break;
                    }
                    scalars[i] = m->at(rr, cc);
                } else {
                    scalars[i] = *as_scalar(args[i]);
                }
            }
            out.push_back(out_of_bounds ? err(ErrorKind::NA) : fn(scalars));
        }
    }
    return make_matrix(rows, cols, std::move(out));
}

BuiltinSpec scalar_builtin(std::string name, std::size_t min_args, std::optional<std::size_t> max_args, ScalarFn fn,
                           bool propagate_errors) {
    BuiltinSpec spec;
    spec.name = std::move(name);
    spec.min_args = min_args;
    spec.max_args = max_args;
    spec.impl = [fn = std::move(fn), propagate_errors](std::span<const Value> args, const EvalContext&) -> Value {
        return lift(args, [&](std::span<const CellValue> cells) -> CellValue {
            if (propagate_errors) {
                if (auto e = first_error(cells)) return err(*e);
            }
            return fn(cells);
        });
    };
    return spec;
}

Result<std::vector<double>> collect_numbers(std::span<const Value> args) {
    std::vector<double> out;
    for (const auto& a : args) {
        if (auto m = matrix_of(a)) {
            for (const auto& c : m->cells) {
                if (c.is_error()) return c.as_error();
                if (c.is_number()) out.push_back(c.as_number());
            }
            continue;
        }
        auto n = to_number(std::get<CellValue>(a));
        if (failed(n)) return std::get<ErrorKind>(n);
        out.push_back(std::get<double>(n));
    }
    return out;
}

double round_half_away(double x, int digits) {
    if (digits > 15) return x;
    double scaled;
    double factor = std::pow(10.0, std::abs(digits));
    scaled = digits >= 0 ? x * factor : x / factor;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", scaled);
    scaled = std::strtod(buf, nullptr);
    double r = scaled < 0 ? -std::floor(-scaled + 0.5) : std::floor(scaled + 0.5);
    double out = digits >= 0 ? r / factor : r * factor;
    return out == 0 ? 0.0 : out;
}

double trunc_arg(double x) { return std::trunc(x); }

Result<Criterion> parse_criterion(const CellValue& raw) {
    Criterion c;
    if (raw.is_error()) return raw.as_error();
    if (raw.is_number()) {
        c.kind = Criterion::Kind::Number;
        c.number = raw.as_number();
        return c;
    }
    if (raw.is_bool()) {
        c.kind = Criterion::Kind::Bool;
        c.boolean = raw.as_bool();
        return c;
    }
    if (raw.is_blank()) {
        c.kind = Criterion::Kind::Empty;
        return c;
    }
    std::string_view s = raw.as_text();
    static constexpr std::pair<std::string_view, Criterion::Op> kOps[] = {
        {">=", Criterion::Op::Ge}, {"<=", Criterion::Op::Le}, {"<>", Criterion::Op::Ne},
        {">", Criterion::Op::Gt},  {"<", Criterion::Op::Lt},  {"=", Criterion::Op::Eq},
    };
    for (auto [prefix, op] : kOps) {
        if (s.substr(0, prefix.size()) == prefix) {
            c.op = op;
            s.remove_prefix(prefix.size());
            break;
        }
    }
    if (s.empty()) {
        c.kind = Criterion::Kind::Empty;
        return c;
    }
    if (auto n = text::coerce_number(s)) {
        c.kind = Criterion::Kind::Number;
        c.number = *n;
        return c;
    }
    if (text::iequals(s, "TRUE") || text::iequals(s, "FALSE")) {
        c.kind = Criterion::Kind::Bool;
        c.boolean = text::iequals(s, "TRUE");
        return c;
    }
    c.kind = Criterion::Kind::Text;
    c.text = std::string(s);
    return c;
}

namespace {

bool apply_op(Criterion::Op op, int cmp) {
    switch (op) {
        case Criterion::Op::Eq: return cmp == 0;
        case Criterion::Op::Ne: return cmp != 0;
        case Criterion::Op::Lt: return cmp < 0;
        case Criterion::Op::Le: return cmp <= 0;
        case Criterion::Op::Gt: return cmp > 0;
        case Criterion::Op::Ge: return cmp >= 0;
    }
    return false;
}

}  // namespace

bool criterion_matches(const Criterion& c, const CellValue& cell) {
    using Kind = Criterion::Kind;
    using Op = Criterion::Op;
    switch (c.kind) {
        case Kind::Empty: {
            bool empty = cell.is_blank() || (cell.is_text() && cell.as_text().empty());
            if (c.op == Op::Eq) return empty;
            if (c.op == Op::Ne) return !empty;
            return false;
        }
        case Kind::Number: {
            if (cell.is_number()) return apply_op(c.op, compare_values(cell, CellValue::number(c.number)));
            if (c.op == Op::Eq && cell.is_text()) {
                auto n = text::coerce_number(cell.as_text());
                return n && *n == c.number;
            }
            if (c.op == Op::Ne) {
                if (cell.is_text()) {
                    auto n = text::coerce_number(cell.as_text());
                    return !(n && *n == c.number);
                }
                return true;
            }
            return false;
        }
        case Kind::Bool: {
            if (cell.is_bool()) return apply_op(c.op, compare_values(cell, CellValue::boolean(c.boolean)));
            return c.op == Op::Ne;
        }
        case Kind::Text: {
            if (c.op == Op::Eq || c.op == Op::Ne) {
                bool hit = cell.is_text() && text::wildcard_match(c.text, cell.as_text());
                return c.op == Op::Eq ? hit : !hit;
            }
            if (!cell.is_text()) return false;
            return apply_op(c.op, compare_values(cell, CellValue::text(c.text)));
        }
    }
    return false;
}

std::optional<Matrix> conform_range(const Matrix& m, std::size_t rows, std::size_t cols, const Grid& grid) {
    if (m.rows == rows && m.cols == cols) return m;
    if (!m.origin) return std::nullopt;
    CellRef start = m.origin->start;
    CellRef end{start.col + static_cast<int>(cols) - 1, start.row + static_cast<int>(rows) - 1};
    RangeRef range = RangeRef::of(start, end);
    Matrix out = make_matrix(rows, cols, grid.resolve_range(range));
    out.origin = range;
    return out;
}

}  // namespace xlsynth::detail
