#include <algorithm>
#include <cmath>

#include "support.hpp"

namespace xlsynth::detail {

namespace {

CellValue round_with(std::span<const CellValue> a, int mode) {
    XL_NUM_OR_RETURN(x, a[0]);
    double digits = 0;
    if (a.size() > 1) {
        XL_NUM_OR_RETURN(d, a[1]);
        digits = trunc_arg(d);
    }
    const int n = static_cast<int>(std::clamp(digits, -308.0, 308.0));
    if (mode == 0) return num(round_half_away(x, n));
    // ROUNDUP away from zero, ROUNDDOWN toward zero, on the stabilized value.
    const double factor = std::pow(10.0, std::abs(n));
    double scaled = n >= 0 ? x * factor : x / factor;
    scaled = round_half_away(scaled, 9);
    double r = mode > 0 ? (scaled < 0 ? -std::ceil(-scaled) : std::ceil(scaled)) : std::trunc(scaled);
    return num(n >= 0 ? r / factor : r * factor);
}

Value sum(std::span<const Value> args, const EvalContext&) {
    auto nums = collect_numbers(args);
    if (failed(nums)) return err(std::get<ErrorKind>(nums));
    double total = 0;
    for (double v : std::get<std::vector<double>>(nums)) total += v;
    return num(total);
}

Value product(std::span<const Value> args, const EvalContext&) {
    auto nums = collect_numbers(args);
    if (failed(nums)) return err(std::get<ErrorKind>(nums));
    const auto& v = std::get<std::vector<double>>(nums);
    if (v.empty()) return num(0);
    double p = 1;
    for (double x : v) p *= x;
    return num(p);
}

// Arrays must agree in shape; non-numeric entries count as zero.
Value sumproduct(std::span<const Value> args, const EvalContext&) {
    std::vector<Matrix> ms;
    for (const auto& a : args) ms.push_back(to_matrix(a));
    for (const auto& m : ms) {
        if (m.rows != ms[0].rows || m.cols != ms[0].cols) return err(ErrorKind::Value);
    }
    double total = 0;
    for (std::size_t i = 0; i < ms[0].size(); ++i) {
        double p = 1;
        for (const auto& m : ms) {
            const CellValue& c = m.cells[i];
            if (c.is_error()) return c;
            p *= c.is_number() ? c.as_number() : 0.0;
        }
        total += p;
    }
    return num(total);
}

}  // namespace

void register_math(FunctionRegistry& reg) {
    reg.register_builtin({"SUM", 1, std::nullopt, sum});
    reg.register_builtin({"PRODUCT", 1, std::nullopt, product});
    reg.register_builtin({"SUMPRODUCT", 1, std::nullopt, sumproduct});

    reg.register_builtin(scalar_builtin("ABS", 1, 1, [](std::span<const CellValue> a) -> CellValue {
        XL_NUM_OR_RETURN(x, a[0]);
        return num(std::fabs(x));
    }));
    reg.register_builtin(scalar_builtin("ROUND", 2, 2, [](auto a) { return round_with(a, 0); }));
    reg.register_builtin(scalar_builtin("ROUNDUP", 2, 2, [](auto a) { return round_with(a, 1); }));
    reg.register_builtin(scalar_builtin("ROUNDDOWN", 2, 2, [](auto a) { return round_with(a, -1); }));
    reg.register_builtin(scalar_builtin("INT", 1, 1, [](std::span<const CellValue> a) -> CellValue {
        XL_NUM_OR_RETURN(x, a[0]);
        return num(std::floor(x));
    }));
    reg.register_builtin(scalar_builtin("MOD", 2, 2, [](std::span<const CellValue> a) -> CellValue {
        XL_NUM_OR_RETURN(n, a[0]);
        XL_NUM_OR_RETURN(d, a[1]);
        if (d == 0) return err(ErrorKind::Div0);
        return num(n - d * std::floor(n / d));
    }));
    reg.register_builtin(scalar_builtin("SQRT", 1, 1, [](std::span<const CellValue> a) -> CellValue {
        XL_NUM_OR_RETURN(x, a[0]);
        if (x < 0) return err(ErrorKind::Num);
        return num(std::sqrt(x));
    }));
    reg.register_builtin(scalar_builtin("POWER", 2, 2, [](std::span<const CellValue> a) -> CellValue {
        XL_NUM_OR_RETURN(b, a[0]);
        XL_NUM_OR_RETURN(e, a[1]);
        if (b == 0 && e == 0) return err(ErrorKind::Num);
        if (b == 0 && e < 0) return err(ErrorKind::Div0);
        if (b < 0 && std::trunc(e) != e) return err(ErrorKind::Num);
        return num(std::pow(b, e));
    }));
    reg.register_builtin(scalar_builtin("SIGN", 1, 1, [](std::span<const CellValue> a) -> CellValue {
        XL_NUM_OR_RETURN(x, a[0]);
        return num(x > 0 ? 1 : (x < 0 ? -1 : 0));
    }));
}

}  // namespace xlsynth::detail
