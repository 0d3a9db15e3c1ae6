#include <algorithm>
#include <cmath>

#include "support.hpp"

namespace xlsynth::detail {

namespace {

using Numbers = std::vector<double>;

// Fills `out` from collect_numbers; returns the error cell on failure.
std::optional<CellValue> gather(std::span<const Value> args, Numbers& out) {
    auto r = collect_numbers(args);
    if (failed(r)) return err(std::get<ErrorKind>(r));
    out = std::move(std::get<Numbers>(r));
    return std::nullopt;
}

Value average(std::span<const Value> args, const EvalContext&) {
    Numbers v;
    if (auto e = gather(args, v)) return *e;
    if (v.empty()) return err(ErrorKind::Div0);
    double total = 0;
    for (double x : v) total += x;
    return num(total / static_cast<double>(v.size()));
}

Value extreme(std::span<const Value> args, bool want_max) {
    Numbers v;
    if (auto e = gather(args, v)) return *e;
    if (v.empty()) return num(0);
    return num(want_max ? *std::max_element(v.begin(), v.end()) : *std::min_element(v.begin(), v.end()));
}

Value median(std::span<const Value> args, const EvalContext&) {
    Numbers v;
    if (auto e = gather(args, v)) return *e;
    if (v.empty()) return err(ErrorKind::Num);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return num(n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2);
}

// Direct scalar arguments count when numeric or numeric-looking; range
// cells only when they hold a Number.
Value count(std::span<const Value> args, const EvalContext&) {
    double n = 0;
    for (const auto& a : args) {
        if (auto m = matrix_of(a)) {
            for (const auto& c : m->cells) n += c.is_number();
            continue;
        }
        const auto& c = std::get<CellValue>(a);
        if (c.is_number() || c.is_bool() || (c.is_text() && !failed(to_number(c)))) ++n;
    }
    return num(n);
}

Value counta(std::span<const Value> args, const EvalContext&) {
    double n = 0;
    for (const auto& a : args) {
        for (const auto& c : to_matrix(a).cells) n += !c.is_blank();
    }
    return num(n);
}

Value countblank(std::span<const Value> args, const EvalContext&) {
    const Matrix* m = matrix_of(args[0]);
    if (!m) return err(ErrorKind::Value);
    double n = 0;
    for (const auto& c : m->cells) n += c.is_blank() || (c.is_text() && c.as_text().empty());
    return num(n);
}

Result<Criterion> criterion_arg(const Value& v) {
    auto s = as_scalar(v);
    if (!s) return ErrorKind::Value;
    return parse_criterion(*s);
}

// Mask of positions satisfying every (range, criterion) pair; ranges must
// share one shape.
Result<std::vector<bool>> match_mask(std::span<const Value> pairs, std::size_t& rows, std::size_t& cols) {
    std::vector<bool> mask;
    for (std::size_t i = 0; i + 1 < pairs.size(); i += 2) {
        const Matrix* m = matrix_of(pairs[i]);
        if (!m) return ErrorKind::Value;
        if (i == 0) {
            rows = m->rows;
            cols = m->cols;
            mask.assign(m->size(), true);
        } else if (m->rows != rows || m->cols != cols) {
            return ErrorKind::Value;
        }
        auto crit = criterion_arg(pairs[i + 1]);
        if (failed(crit)) return std::get<ErrorKind>(crit);
        const auto& c = std::get<Criterion>(crit);
        for (std::size_t k = 0; k < m->size(); ++k) {
            if (mask[k] && !criterion_matches(c, m->cells[k])) mask[k] = false;
        }
    }
    return mask;
}

struct Selection {
    double sum = 0;
    double count = 0;
    std::optional<double> min;
    std::optional<double> max;
};

// Aggregates the Number cells of `target` at masked positions; an error
// cell at a selected position propagates.
Result<Selection> select_numbers(const Matrix& target, const std::vector<bool>& mask) {
    Selection s;
    for (std::size_t k = 0; k < mask.size(); ++k) {
        if (!mask[k]) continue;
        const CellValue& c = target.cells[k];
        if (c.is_error()) return c.as_error();
        if (!c.is_number()) continue;
        const double x = c.as_number();
        s.sum += x;
        s.count += 1;
        s.min = s.min ? std::min(*s.min, x) : x;
        s.max = s.max ? std::max(*s.max, x) : x;
    }
    return s;
}

enum class Agg { Sum, Average, Min, Max };

Value finish(const Selection& s, Agg agg) {
    switch (agg) {
        case Agg::Sum: return num(s.sum);
        case Agg::Average:
            if (s.count == 0) return err(ErrorKind::Div0);
            return num(s.sum / s.count);
        case Agg::Min: return num(s.min.value_or(0));
        case Agg::Max: return num(s.max.value_or(0));
    }
    return err(ErrorKind::Value);
}

// SUMIF/AVERAGEIF: (range, criterion[, target]).
Value single_criterion(std::span<const Value> args, const EvalContext& ctx, Agg agg) {
    std::size_t rows = 0, cols = 0;
    auto mask = match_mask(args.subspan(0, 2), rows, cols);
    if (failed(mask)) return err(std::get<ErrorKind>(mask));
    Matrix target = *matrix_of(args[0]);
    if (args.size() > 2) {
        const Matrix* t = matrix_of(args[2]);
        if (!t) return err(ErrorKind::Value);
        auto conformed = conform_range(*t, rows, cols, ctx.grid);
        if (!conformed) return err(ErrorKind::Value);
        target = std::move(*conformed);
    }
    auto sel = select_numbers(target, std::get<std::vector<bool>>(mask));
    if (failed(sel)) return err(std::get<ErrorKind>(sel));
    return finish(std::get<Selection>(sel), agg);
}

// SUMIFS family: (target, range1, criterion1, ...).
Value multi_criteria(std::span<const Value> args, Agg agg) {
    if (args.size() % 2 == 0) return err(ErrorKind::Value);
    const Matrix* target = matrix_of(args[0]);
    if (!target) return err(ErrorKind::Value);
    std::size_t rows = 0, cols = 0;
    auto mask = match_mask(args.subspan(1), rows, cols);
    if (failed(mask)) return err(std::get<ErrorKind>(mask));
    if (target->rows != rows || target->cols != cols) return err(ErrorKind::Value);
    auto sel = select_numbers(*target, std::get<std::vector<bool>>(mask));
    if (failed(sel)) return err(std::get<ErrorKind>(sel));
    return finish(std::get<Selection>(sel), agg);
}

Value countifs(std::span<const Value> args, const EvalContext&) {
    if (args.size() % 2 != 0) return err(ErrorKind::Value);
    std::size_t rows = 0, cols = 0;
    auto mask = match_mask(args, rows, cols);
    if (failed(mask)) return err(std::get<ErrorKind>(mask));
    const auto& m = std::get<std::vector<bool>>(mask);
    return num(static_cast<double>(std::count(m.begin(), m.end(), true)));
}

Value kth(std::span<const Value> args, bool largest) {
    Numbers v;
    if (auto e = gather(args.subspan(0, 1), v)) return *e;
    auto k_cell = as_scalar(args[1]);
    if (!k_cell) return err(ErrorKind::Value);
    XL_NUM_OR_RETURN(k_raw, *k_cell);
    const double k = std::ceil(k_raw);
    if (k < 1 || k > static_cast<double>(v.size())) return err(ErrorKind::Num);
    if (largest) {
        std::sort(v.begin(), v.end(), std::greater<>());
    } else {
        std::sort(v.begin(), v.end());
    }
    return num(v[static_cast<std::size_t>(k) - 1]);
}

// Competition ranking; order 0 (default) ranks the largest value first.
Value rank(std::span<const Value> args, const EvalContext&) {
    auto x_cell = as_scalar(args[0]);
    if (!x_cell) return err(ErrorKind::Value);
    XL_NUM_OR_RETURN(x, *x_cell);
    const Matrix* ref = matrix_of(args[1]);
    if (!ref) return err(ErrorKind::Value);
    bool ascending = false;
    if (args.size() > 2) {
        auto o = as_scalar(args[2]);
        if (!o) return err(ErrorKind::Value);
        XL_NUM_OR_RETURN(order, *o);
        ascending = order != 0;
    }
    bool found = false;
    double ahead = 0;
    for (const auto& c : ref->cells) {
        if (c.is_error()) return c;
        if (!c.is_number()) continue;
        const double y = c.as_number();
        if (y == x) found = true;
        if (ascending ? y < x : y > x) ++ahead;
    }
    if (!found) return err(ErrorKind::NA);
    return num(ahead + 1);
}

}  // namespace

void register_stats(FunctionRegistry& reg) {
    reg.register_builtin({"AVERAGE", 1, std::nullopt, average});
    reg.register_builtin({"MIN", 1, std::nullopt, [](auto a, const auto&) { return extreme(a, false); }});
    reg.register_builtin({"MAX", 1, std::nullopt, [](auto a, const auto&) { return extreme(a, true); }});
    reg.register_builtin({"MEDIAN", 1, std::nullopt, median});
    reg.register_builtin({"COUNT", 1, std::nullopt, count});
    reg.register_builtin({"COUNTA", 1, std::nullopt, counta});
    reg.register_builtin({"COUNTBLANK", 1, 1, countblank});
    reg.register_builtin({"COUNTIF", 2, 2, countifs});
    reg.register_builtin({"COUNTIFS", 2, std::nullopt, countifs});
    reg.register_builtin({"SUMIF", 2, 3, [](auto a, const auto& ctx) { return single_criterion(a, ctx, Agg::Sum); }});
    reg.register_builtin(
        {"AVERAGEIF", 2, 3, [](auto a, const auto& ctx) { return single_criterion(a, ctx, Agg::Average); }});
    reg.register_builtin({"SUMIFS", 3, std::nullopt, [](auto a, const auto&) { return multi_criteria(a, Agg::Sum); }});
    reg.register_builtin(
        {"AVERAGEIFS", 3, std::nullopt, [](auto a, const auto&) { return multi_criteria(a, Agg::Average); }});
    reg.register_builtin({"MINIFS", 3, std::nullopt, [](auto a, const auto&) { return multi_criteria(a, Agg::Min); }});
    reg.register_builtin({"MAXIFS", 3, std::nullopt, [](auto a, const auto&) { return multi_criteria(a, Agg::Max); }});
    reg.register_builtin({"LARGE", 2, 2, [](auto a, const auto&) { return kth(a, true); }});
    reg.register_builtin({"SMALL", 2, 2, [](auto a, const auto&) { return kth(a, false); }});
    reg.register_builtin({"RANK", 2, 3, rank});
}

}  // namespace xlsynth::detail
