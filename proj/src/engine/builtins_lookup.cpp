#include <cmath>

#include "support.hpp"
#include "xlsynth/text.hpp"

namespace xlsynth::detail {

namespace {

int type_class(const CellValue& v) {
    if (v.is_number()) return 0;
    if (v.is_text()) return 1;
    if (v.is_bool()) return 2;
    return -1;
}

bool exact_equal(const CellValue& needle, const CellValue& cell) {
    if (type_class(needle) != type_class(cell)) return false;
    if (needle.is_text() && text::has_wildcards(needle.as_text())) {
        return text::wildcard_match(needle.as_text(), cell.as_text());
    }
    return compare_values(needle, cell) == 0;
}

// Position of `needle` in `items`; mode 0 exact (first hit), 1 largest
// value <= needle, -1 smallest value >= needle. Modes 1 and -1 binary
// search over cells of the needle's type assuming ascending (resp.
// descending) order, without verifying it.
std::optional<std::size_t> locate(const CellValue& needle, const std::vector<CellValue>& items, int mode) {
    if (mode == 0) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (exact_equal(needle, items[i])) return i;
        }
        return std::nullopt;
    }
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (type_class(items[i]) == type_class(needle)) pos.push_back(i);
    }
    std::size_t lo = 0, hi = pos.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        const int c = compare_values(items[pos[mid]], needle);
        const bool keep_right = mode > 0 ? c <= 0 : c >= 0;
        if (keep_right) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    if (lo == 0) return std::nullopt;
    return pos[lo - 1];
}

Result<int> match_mode(const Value& v) {
    auto s = as_scalar(v);
    if (!s) return ErrorKind::Value;
    auto n = to_number(*s);
    if (failed(n)) return std::get<ErrorKind>(n);
    const double x = std::get<double>(n);
    return x > 0 ? 1 : (x < 0 ? -1 : 0);
}

Value match(std::span<const Value> args, const EvalContext&) {
    auto needle = as_scalar(args[0]);
    if (!needle) return err(ErrorKind::Value);
    if (needle->is_error()) return *needle;
    if (needle->is_blank()) return err(ErrorKind::NA);
    const Matrix hay = to_matrix(args[1]);
    if (hay.rows != 1 && hay.cols != 1) return err(ErrorKind::NA);
    int mode = 1;
    if (args.size() > 2) {
        auto m = match_mode(args[2]);
        if (failed(m)) return err(std::get<ErrorKind>(m));
        mode = std::get<int>(m);
    }
    auto hit = locate(*needle, hay.cells, mode);
    if (!hit) return err(ErrorKind::NA);
    return num(static_cast<double>(*hit + 1));
}

// VLOOKUP (vertical) and HLOOKUP share one implementation.
Value table_lookup(std::span<const Value> args, bool vertical) {
    auto needle = as_scalar(args[0]);
    if (!needle) return err(ErrorKind::Value);
    if (needle->is_error()) return *needle;
    const Matrix table = to_matrix(args[1]);
    auto idx_cell = as_scalar(args[2]);
    if (!idx_cell) return err(ErrorKind::Value);
    XL_NUM_OR_RETURN(idx_raw, *idx_cell);
    const double idx = std::trunc(idx_raw);
    const std::size_t extent = vertical ? table.cols : table.rows;
    if (idx < 1) return err(ErrorKind::Value);
    if (idx > static_cast<double>(extent)) return err(ErrorKind::Ref);
    bool approximate = true;
    if (args.size() > 3) {
        auto r = as_scalar(args[3]);
        if (!r) return err(ErrorKind::Value);
        auto b = to_bool(*r);
        if (failed(b)) return err(std::get<ErrorKind>(b));
        approximate = std::get<bool>(b);
    }
    const std::size_t n = vertical ? table.rows : table.cols;
    std::vector<CellValue> keys;
    keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) keys.push_back(vertical ? table.at(i, 0) : table.at(0, i));
    if (needle->is_blank()) return err(ErrorKind::NA);
    auto hit = locate(*needle, keys, approximate ? 1 : 0);
    if (!hit) return err(ErrorKind::NA);
    const std::size_t k = static_cast<std::size_t>(idx) - 1;
    return vertical ? table.at(*hit, k) : table.at(k, *hit);
}

Result<double> index_arg(const Value& v) {
    auto s = as_scalar(v);
    if (!s) return ErrorKind::Value;
    auto n = to_number(*s);
    if (failed(n)) return n;
    return std::trunc(std::get<double>(n));
}

Matrix slice(const Matrix& m, std::size_t r0, std::size_t c0, std::size_t rows, std::size_t cols) {
    std::vector<CellValue> cells;
    cells.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) cells.push_back(m.at(r0 + r, c0 + c));
    }
    Matrix out = make_matrix(rows, cols, std::move(cells));
    if (m.origin) {
        CellRef a{m.origin->start.col + static_cast<int>(c0), m.origin->start.row + static_cast<int>(r0)};
        CellRef b{a.col + static_cast<int>(cols) - 1, a.row + static_cast<int>(rows) - 1};
        out.origin = RangeRef::of(a, b);
    }
    return out;
}

// INDEX(array, row[, col]). A single index into a one-row array selects a
// column. Zero selects the whole row or column. The result keeps its
// reference origin so ROW/COLUMN can be applied to it.
Value index(std::span<const Value> args, const EvalContext&) {
    const Matrix m = to_matrix(args[0]);
    auto r = index_arg(args[1]);
    if (failed(r)) return err(std::get<ErrorKind>(r));
    double row = std::get<double>(r);
    double col = 0;
    if (args.size() > 2) {
        auto c = index_arg(args[2]);
        if (failed(c)) return err(std::get<ErrorKind>(c));
        col = std::get<double>(c);
    } else if (m.rows == 1) {
        col = row;
        row = 1;
    } else if (m.cols == 1) {
        col = 1;
    }
    if (row < 0 || col < 0) return err(ErrorKind::Value);
    if (row > static_cast<double>(m.rows) || col > static_cast<double>(m.cols)) return err(ErrorKind::Ref);
    const auto ri = static_cast<std::size_t>(row);
    const auto ci = static_cast<std::size_t>(col);
    if (ri == 0 && ci == 0) return m;
    if (ri == 0) return slice(m, 0, ci - 1, m.rows, 1);
    if (ci == 0) return slice(m, ri - 1, 0, 1, m.cols);
    return slice(m, ri - 1, ci - 1, 1, 1);
}

// ROW/COLUMN: reference row/column numbers; a multi-cell reference yields
// a vector. Without arguments the host cell is used.
Value position(std::span<const Value> args, const EvalContext& ctx, bool rows) {
    if (args.empty()) {
        if (!ctx.host) return err(ErrorKind::Value);
        return num(rows ? ctx.host->row : ctx.host->col);
    }
    const Matrix* m = matrix_of(args[0]);
    if (!m || !m->origin) return err(ErrorKind::Value);
    const RangeRef& range = *m->origin;
    const int first = rows ? range.start.row : range.start.col;
    const int n = rows ? range.rows() : range.cols();
    if (n == 1) return num(first);
    std::vector<CellValue> cells;
    for (int i = 0; i < n; ++i) cells.push_back(CellValue::number(first + i));
    return rows ? make_matrix(static_cast<std::size_t>(n), 1, std::move(cells))
                : make_matrix(1, static_cast<std::size_t>(n), std::move(cells));
}

}  // namespace

void register_lookup(FunctionRegistry& reg) {
    reg.register_builtin({"MATCH", 2, 3, match});
    reg.register_builtin({"VLOOKUP", 3, 4, [](auto a, const auto&) { return table_lookup(a, true); }});
    reg.register_builtin({"HLOOKUP", 3, 4, [](auto a, const auto&) { return table_lookup(a, false); }});
    reg.register_builtin({"INDEX", 2, 3, index});
    reg.register_builtin({"ROW", 0, 1, [](auto a, const auto& ctx) { return position(a, ctx, true); }});
    reg.register_builtin({"COLUMN", 0, 1, [](auto a, const auto& ctx) { return position(a, ctx, false); }});
    reg.register_builtin({"ROWS", 1, 1, [](auto a, const auto&) -> Value {
        return num(static_cast<double>(to_matrix(a[0]).rows));
    }});
    reg.register_builtin({"COLUMNS", 1, 1, [](auto a, const auto&) -> Value {
        return num(static_cast<double>(to_matrix(a[0]).cols));
    }});
}

}  // namespace xlsynth::detail
