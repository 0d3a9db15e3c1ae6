#include <cmath>
#include <cstdio>

#include "support.hpp"
#include "xlsynth/text.hpp"

namespace xlsynth::detail {

namespace {

constexpr std::size_t kMaxTextLength = 32767;

using Cells = std::span<const CellValue>;

// Binds `var` to the text form of a scalar argument.
#define XL_TEXT_OR_RETURN(var, expr)               \
    auto var##_t = to_text(expr);                  \
    if (failed(var##_t)) return err(std::get<ErrorKind>(var##_t)); \
    const std::string var = std::get<std::string>(var##_t)

CellValue make_text(std::u32string_view s) { return CellValue::text(text::utf8_encode(s)); }

CellValue left_right(Cells a, bool left) {
    XL_TEXT_OR_RETURN(s, a[0]);
    double n = 1;
    if (a.size() > 1) {
        XL_NUM_OR_RETURN(k, a[1]);
        n = std::trunc(k);
    }
    if (n < 0) return err(ErrorKind::Value);
    const std::u32string cps = text::utf8_decode(s);
    const std::size_t take = n >= static_cast<double>(cps.size()) ? cps.size() : static_cast<std::size_t>(n);
    return make_text(left ? std::u32string_view(cps).substr(0, take)
                          : std::u32string_view(cps).substr(cps.size() - take));
}

CellValue mid(Cells a) {
    XL_TEXT_OR_RETURN(s, a[0]);
    XL_NUM_OR_RETURN(start_raw, a[1]);
    XL_NUM_OR_RETURN(len_raw, a[2]);
    const double start = std::trunc(start_raw);
    const double len = std::trunc(len_raw);
    if (start < 1 || len < 0) return err(ErrorKind::Value);
    const std::u32string cps = text::utf8_decode(s);
    if (start > static_cast<double>(cps.size())) return CellValue::text("");
    const auto from = static_cast<std::size_t>(start) - 1;
    const std::size_t take = std::min<double>(len, static_cast<double>(cps.size() - from));
    return make_text(std::u32string_view(cps).substr(from, take));
}

// FIND is case-sensitive and literal; SEARCH folds case and honours
// wildcards. Positions are 1-based code points.
CellValue find_text(Cells a, bool fold) {
    XL_TEXT_OR_RETURN(needle, a[0]);
    XL_TEXT_OR_RETURN(hay, a[1]);
    double start = 1;
    if (a.size() > 2) {
        XL_NUM_OR_RETURN(s, a[2]);
        start = std::trunc(s);
    }
    const std::u32string h = text::utf8_decode(fold ? text::casefold(hay) : hay);
    const std::u32string n = text::utf8_decode(fold ? text::casefold(needle) : needle);
    if (start < 1 || start > static_cast<double>(h.size()) + 1) return err(ErrorKind::Value);
    const auto from = static_cast<std::size_t>(start) - 1;
    if (fold && text::has_wildcards(needle)) {
        const std::string pattern = text::utf8_encode(n) + "*";
        for (std::size_t i = from; i <= h.size(); ++i) {
            if (text::wildcard_match(pattern, text::utf8_encode(std::u32string_view(h).substr(i)))) {
                return num(static_cast<double>(i + 1));
            }
        }
        return err(ErrorKind::Value);
    }
    const auto pos = h.find(n, from);
    if (pos == std::u32string::npos) return err(ErrorKind::Value);
    return num(static_cast<double>(pos + 1));
}

// Strips leading and trailing spaces and collapses inner runs to one.
CellValue trim_spaces(Cells a) {
    XL_TEXT_OR_RETURN(s, a[0]);
    std::string out;
    bool pending = false;
    for (char ch : s) {
        if (ch == ' ') {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(ch);
    }
    return CellValue::text(out);
}

CellValue substitute(Cells a) {
    XL_TEXT_OR_RETURN(s, a[0]);
    XL_TEXT_OR_RETURN(from, a[1]);
    XL_TEXT_OR_RETURN(to, a[2]);
    std::optional<double> instance;
    if (a.size() > 3) {
        XL_NUM_OR_RETURN(k, a[3]);
        if (std::trunc(k) < 1) return err(ErrorKind::Value);
        instance = std::trunc(k);
    }
    if (from.empty()) return CellValue::text(s);
    std::string out;
    std::size_t pos = 0;
    double seen = 0;
    while (true) {
        const auto hit = s.find(from, pos);
        if (hit == std::string::npos) break;
        ++seen;
        out.append(s, pos, hit - pos);
        out += (!instance || *instance == seen) ? to : from;
        pos = hit + from.size();
    }
    out.append(s, pos, std::string::npos);
    return CellValue::text(out);
}

Value concat_flat(std::span<const Value> args) {
    std::string out;
    for (const auto& a : args) {
        for (const auto& c : to_matrix(a).cells) {
            if (c.is_error()) return c;
            out += value_to_text(c);
        }
    }
    if (text::utf8_length(out) > kMaxTextLength) return err(ErrorKind::Value);
    return CellValue::text(out);
}

Value textjoin(std::span<const Value> args, const EvalContext&) {
    auto d = as_scalar(args[0]);
    auto ig = as_scalar(args[1]);
    if (!d || !ig) return err(ErrorKind::Value);
    XL_TEXT_OR_RETURN(delim, *d);
    auto skip = to_bool(*ig);
    if (failed(skip)) return err(std::get<ErrorKind>(skip));
    std::vector<std::string> parts;
    for (const auto& a : args.subspan(2)) {
        for (const auto& c : to_matrix(a).cells) {
            if (c.is_error()) return c;
            std::string t = value_to_text(c);
            if (t.empty() && std::get<bool>(skip)) continue;
            parts.push_back(std::move(t));
        }
    }
    std::string out = text::join(parts, delim);
    if (text::utf8_length(out) > kMaxTextLength) return err(ErrorKind::Value);
    return CellValue::text(out);
}

CellValue value_fn(Cells a) {
    const CellValue& v = a[0];
    if (v.is_number()) return v;
    if (v.is_blank()) return num(0);
    if (v.is_text()) {
        if (auto n = text::coerce_number(v.as_text())) return num(*n);
    }
    return err(ErrorKind::Value);
}

std::string group_thousands(const std::string& digits) {
    std::string out;
    const std::size_t n = digits.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && (n - i) % 3 == 0) out.push_back(',');
        out.push_back(digits[i]);
    }
    return out;
}

std::string fixed(double x, int decimals) {
    const double r = round_half_away(x, decimals);
    char buf[400];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, std::fabs(r));
    return (r < 0 ? "-" : "") + std::string(buf);
}

// Supported format codes: "0", "0.00", "#,##0", "0%", "@". Text that does
// not look numeric passes through unchanged.
CellValue text_fn(Cells a) {
    XL_TEXT_OR_RETURN(fmt, a[1]);
    const CellValue& v = a[0];
    if (fmt == "@") return CellValue::text(value_to_text(v));
    if (fmt != "0" && fmt != "0.00" && fmt != "#,##0" && fmt != "0%") return err(ErrorKind::Value);
    double x = 0;
    if (v.is_number()) {
        x = v.as_number();
    } else if (v.is_blank()) {
        x = 0;
    } else if (v.is_text() && text::coerce_number(v.as_text())) {
        x = *text::coerce_number(v.as_text());
    } else {
        return CellValue::text(value_to_text(v));
    }
    if (fmt == "0") return CellValue::text(fixed(x, 0));
    if (fmt == "0.00") return CellValue::text(fixed(x, 2));
    if (fmt == "0%") return CellValue::text(fixed(x * 100, 0) + "%");
    std::string s = fixed(x, 0);
    const bool neg = !s.empty() && s[0] == '-';
    return CellValue::text((neg ? "-" : "") + group_thousands(neg ? s.substr(1) : s));
}

CellValue rept(Cells a) {
    XL_TEXT_OR_RETURN(s, a[0]);
    XL_NUM_OR_RETURN(k, a[1]);
    const double n = std::trunc(k);
    if (n < 0) return err(ErrorKind::Value);
    if (n * static_cast<double>(text::utf8_length(s)) > kMaxTextLength) return err(ErrorKind::Value);
    std::string out;
    for (double i = 0; i < n; ++i) out += s;
    return CellValue::text(out);
}

}  // namespace

void register_text(FunctionRegistry& reg) {
    reg.register_builtin(scalar_builtin("LEFT", 1, 2, [](Cells a) { return left_right(a, true); }));
    reg.register_builtin(scalar_builtin("RIGHT", 1, 2, [](Cells a) { return left_right(a, false); }));
    reg.register_builtin(scalar_builtin("MID", 3, 3, mid));
    reg.register_builtin(scalar_builtin("LEN", 1, 1, [](Cells a) -> CellValue {
        XL_TEXT_OR_RETURN(s, a[0]);
        return num(static_cast<double>(text::utf8_length(s)));
    }));
    reg.register_builtin(scalar_builtin("FIND", 2, 3, [](Cells a) { return find_text(a, false); }));
    reg.register_builtin(scalar_builtin("SEARCH", 2, 3, [](Cells a) { return find_text(a, true); }));
    reg.register_builtin(scalar_builtin("TRIM", 1, 1, trim_spaces));
    reg.register_builtin(scalar_builtin("UPPER", 1, 1, [](Cells a) -> CellValue {
        XL_TEXT_OR_RETURN(s, a[0]);
        return CellValue::text(text::to_upper(s));
    }));
    reg.register_builtin(scalar_builtin("LOWER", 1, 1, [](Cells a) -> CellValue {
        XL_TEXT_OR_RETURN(s, a[0]);
        return CellValue::text(text::to_lower(s));
    }));
    reg.register_builtin(scalar_builtin("SUBSTITUTE", 3, 4, substitute));
    reg.register_builtin(scalar_builtin("CONCATENATE", 1, std::nullopt, [](Cells a) -> CellValue {
        std::string out;
        for (const auto& c : a) out += value_to_text(c);
        if (text::utf8_length(out) > kMaxTextLength) return err(ErrorKind::Value);
        return CellValue::text(out);
    }));
    reg.register_builtin({"CONCAT", 1, std::nullopt, [](auto a, const auto&) { return concat_flat(a); }});
    reg.register_builtin({"TEXTJOIN", 3, std::nullopt, textjoin});
    reg.register_builtin(scalar_builtin("VALUE", 1, 1, value_fn));
    reg.register_builtin(scalar_builtin("TEXT", 2, 2, text_fn));
    reg.register_builtin(scalar_builtin("EXACT", 2, 2, [](Cells a) -> CellValue {
        XL_TEXT_OR_RETURN(x, a[0]);
        XL_TEXT_OR_RETURN(y, a[1]);
        return CellValue::boolean(x == y);
    }));
    reg.register_builtin(scalar_builtin("REPT", 2, 2, rept));
}

}  // namespace xlsynth::detail
