#include "xlsynth/text.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace xlsynth::text {

std::u32string utf8_decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        std::size_t extra = 0;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0) {
            cp = c & 0x1F;
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            cp = c & 0x0F;
            extra = 2;
        } else if ((c & 0xF8) == 0xF0) {
            cp = c & 0x07;
            extra = 3;
        } else {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        bool ok = true;
        for (std::size_t k = 1; k <= extra; ++k) {
            if (i + k >= s.size()) {
                ok = false;
                break;
            }
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += extra + 1;
    }
    return out;
}

std::string utf8_encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char32_t cp : s) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }
    return out;
}

std::size_t utf8_length(std::string_view s) { return utf8_decode(s).size(); }

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

char32_t fold_cp(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 32;
    // Latin-1 upper range, skipping the multiplication sign.
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 32;
    return cp;
}

char32_t upper_cp(char32_t cp) {
    if (cp >= U'a' && cp <= U'z') return cp - 32;
    if (cp >= 0xE0 && cp <= 0xFE && cp != 0xF7) return cp - 32;
    return cp;
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_upper(std::string_view s) {
    auto cps = utf8_decode(s);
    for (auto& cp : cps) cp = upper_cp(cp);
    return utf8_encode(cps);
}

std::string to_lower(std::string_view s) {
    auto cps = utf8_decode(s);
    for (auto& cp : cps) cp = fold_cp(cp);
    return utf8_encode(cps);
}

std::string casefold(std::string_view s) { return to_lower(s); }

bool iequals(std::string_view a, std::string_view b) { return casefold(a) == casefold(b); }

bool starts_with_icase(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    return iequals(s.substr(0, prefix.size()), prefix);
}

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < s.size()) out.emplace_back(s.substr(start));
            break;
        }
        std::string_view line = s.substr(start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        start = nl + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

namespace {

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    if (!std::isfinite(v)) return std::nullopt;
    return v == 0 ? 0.0 : v;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Validates "d{1,3}(,ddd)+" or plain digits, returning the digits only.
std::optional<std::string> strip_grouping(std::string_view s) {
    if (s.find(',') == std::string_view::npos) {
        if (!all_digits(s)) return std::nullopt;
        return std::string(s);
    }
    std::string out;
    std::size_t first_comma = s.find(',');
    auto lead = s.substr(0, first_comma);
    if (lead.empty() || lead.size() > 3 || !all_digits(lead)) return std::nullopt;
    out += lead;
    std::size_t pos = first_comma;
    while (pos < s.size()) {
        if (s[pos] != ',') return std::nullopt;
        auto group = s.substr(pos + 1, 3);
        if (group.size() != 3 || !all_digits(group)) return std::nullopt;
        out += group;
        pos += 4;
    }
    return out;
}

}  // namespace

std::optional<double> parse_plain_number(std::string_view raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    bool percent = false;
    if (s.back() == '%') {
        percent = true;
        s.pop_back();
    }
    std::string_view body = s;
    std::string sign;
    if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
        if (body.front() == '-') sign = "-";
        body.remove_prefix(1);
    }
    std::string_view int_part = body;
    std::string_view frac_part;
    bool has_dot = false;
    if (auto dot = body.find('.'); dot != std::string_view::npos) {
        has_dot = true;
        int_part = body.substr(0, dot);
        frac_part = body.substr(dot + 1);
        if (!all_digits(frac_part)) return std::nullopt;
    }
    auto digits = strip_grouping(int_part);
    if (!digits) return std::nullopt;
    std::string normalized = sign + *digits;
    if (has_dot) normalized += "." + std::string(frac_part);
    auto v = parse_double(normalized);
    if (!v) return std::nullopt;
    return percent ? *v / 100.0 : *v;
}

std::optional<double> coerce_number(std::string_view raw) {
    std::string s = trim(raw);
    if (s.empty()) return std::nullopt;
    bool negative = false;
    if (s.front() == '(' && s.back() == ')') {
        negative = true;
        s = trim(s.substr(1, s.size() - 2));
    }
    bool percent = false;
    if (!s.empty() && s.back() == '%') {
        percent = true;
        s = trim(std::string_view(s).substr(0, s.size() - 1));
    }
    std::string sign;
    if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
        if (s.front() == '-') sign = "-";
        s = trim(std::string_view(s).substr(1));
    }
    for (std::string_view cur : {"$", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5"}) {
        if (s.rfind(cur, 0) == 0) {
            s = trim(std::string_view(s).substr(cur.size()));
            break;
        }
    }
    if (sign.empty() && !s.empty() && (s.front() == '+' || s.front() == '-')) {
        if (s.front() == '-') sign = "-";
        s = s.substr(1);
    }
    if (s.empty()) return std::nullopt;
    // Split off an exponent before validating grouping.
    std::string_view body = s;
    std::string exponent;
    if (auto e = body.find_first_of("eE"); e != std::string_view::npos) {
        auto exp = body.substr(e + 1);
        std::string_view digits = exp;
        if (!digits.empty() && (digits.front() == '+' || digits.front() == '-')) digits.remove_prefix(1);
        if (!all_digits(digits)) return std::nullopt;
        exponent = "e" + std::string(exp);
        body = body.substr(0, e);
    }
    std::string_view int_part = body;
    std::string frac;
    if (auto dot = body.find('.'); dot != std::string_view::npos) {
        int_part = body.substr(0, dot);
        auto f = body.substr(dot + 1);
        if (!f.empty() && !all_digits(f)) return std::nullopt;
        frac = "." + std::string(f);
        if (int_part.empty() && f.empty()) return std::nullopt;
    }
    std::string digits;
    if (int_part.empty()) {
        digits = "0";
    } else {
        auto d = strip_grouping(int_part);
        if (!d) return std::nullopt;
        digits = *d;
    }
    if (frac == ".") frac.clear();
    auto v = parse_double(sign + digits + frac + exponent);
    if (!v) return std::nullopt;
    double out = *v;
    if (percent) out /= 100.0;
    if (negative) out = -out;
    return out == 0 ? 0.0 : out;
}

std::string format_number(double v) {
    if (v == 0) return "0";
    if (std::nearbyint(v) == v && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    char buf[400];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    if (ec != std::errc{}) {
        auto r = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, r.ptr);
    }
    return std::string(buf, ptr);
}

std::string format_general(double v) {
    if (v == 0) return "0";
    const double a = std::fabs(v);
    char buf[64];
    if (a >= 1e15 || a < 1e-9) {
        std::snprintf(buf, sizeof buf, "%.14E", v);
        std::string s = buf;
        auto e = s.find('E');
        std::string mant = s.substr(0, e);
        std::string exp = s.substr(e + 1);
        if (mant.find('.') != std::string::npos) {
            while (mant.back() == '0') mant.pop_back();
            if (mant.back() == '.') mant.pop_back();
        }
        char sign = exp[0];
        std::string digits = exp.substr(1);
        while (digits.size() > 2 && digits[0] == '0') digits.erase(0, 1);
        return mant + "E" + sign + digits;
    }
    std::snprintf(buf, sizeof buf, "%.15g", v);
    std::string s = buf;
    if (s.find_first_of("eE") == std::string::npos) return s;
    // %g chose exponent form for a value in fixed range; expand it.
    int magnitude = static_cast<int>(std::floor(std::log10(a)));
    int decimals = std::max(0, 14 - magnitude);
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    s = buf;
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    return s;
}

bool has_wildcards(std::string_view pattern) {
    return pattern.find_first_of("*?~") != std::string_view::npos;
}

bool wildcard_match(std::string_view pattern_raw, std::string_view s_raw) {
    auto p = utf8_decode(casefold(pattern_raw));
    auto s = utf8_decode(casefold(s_raw));
    // Tokenize pattern into (char, kind) where kind: 0 literal, 1 '?', 2 '*'.
    std::vector<std::pair<char32_t, int>> toks;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == U'~' && i + 1 < p.size() && (p[i + 1] == U'*' || p[i + 1] == U'?' || p[i + 1] == U'~')) {
            toks.emplace_back(p[i + 1], 0);
            ++i;
        } else if (p[i] == U'*') {
            toks.emplace_back(0, 2);
        } else if (p[i] == U'?') {
            toks.emplace_back(0, 1);
        } else {
            toks.emplace_back(p[i], 0);
        }
    }
    std::size_t ti = 0, si = 0;
    std::size_t star = std::string::npos, star_s = 0;
    while (si < s.size()) {
        if (ti < toks.size() && (toks[ti].second == 1 || (toks[ti].second == 0 && toks[ti].first == s[si]))) {
            ++ti;
            ++si;
        } else if (ti < toks.size() && toks[ti].second == 2) {
            star = ti++;
            star_s = si;
        } else if (star != std::string::npos) {
            ti = star + 1;
            si = ++star_s;
        } else {
            return false;
        }
    }
    while (ti < toks.size() && toks[ti].second == 2) ++ti;
    return ti == toks.size();
}

}  // namespace xlsynth::text
