#include "xlsynth/formula.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

#include "xlsynth/text.hpp"

namespace xlsynth {

std::string_view binary_op_text(BinaryOp op) {
    switch (op) {
        case BinaryOp::Add: return "+";
        case BinaryOp::Sub: return "-";
        case BinaryOp::Mul: return "*";
        case BinaryOp::Div: return "/";
        case BinaryOp::Pow: return "^";
        case BinaryOp::Concat: return "&";
        case BinaryOp::Eq: return "=";
        case BinaryOp::Ne: return "<>";
        case BinaryOp::Lt: return "<";
        case BinaryOp::Le: return "<=";
        case BinaryOp::Gt: return ">";
        case BinaryOp::Ge: return ">=";
    }
    return "?";
}

namespace {

struct EqualVisitor {
    const Expr::Node& other;

    bool operator()(const NumberLit& a) const { return std::get<NumberLit>(other).value == a.value; }
    bool operator()(const TextLit& a) const { return std::get<TextLit>(other).value == a.value; }
    bool operator()(const BoolLit& a) const { return std::get<BoolLit>(other).value == a.value; }
    bool operator()(const ErrorLit& a) const { return std::get<ErrorLit>(other).kind == a.kind; }
    bool operator()(const RefExpr& a) const { return std::get<RefExpr>(other).ref == a.ref; }
    bool operator()(const RangeExpr& a) const { return std::get<RangeExpr>(other).range == a.range; }
    bool operator()(const UnaryExpr& a) const {
        const auto& b = std::get<UnaryExpr>(other);
        return a.op == b.op && *a.operand == *b.operand;
    }
    bool operator()(const BinaryExpr& a) const {
        const auto& b = std::get<BinaryExpr>(other);
        return a.op == b.op && *a.lhs == *b.lhs && *a.rhs == *b.rhs;
    }
    bool operator()(const CallExpr& a) const {
        const auto& b = std::get<CallExpr>(other);
        if (a.name != b.name || a.args.size() != b.args.size()) return false;
        for (std::size_t i = 0; i < a.args.size(); ++i) {
            if (!(*a.args[i] == *b.args[i])) return false;
        }
        return true;
    }
};

}  // namespace

bool operator==(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(EqualVisitor{b.node}, a.node);
}

ExprPtr make_number(double v) { return std::make_shared<const Expr>(Expr{NumberLit{v}}); }
ExprPtr make_text(std::string v) { return std::make_shared<const Expr>(Expr{TextLit{std::move(v)}}); }
ExprPtr make_bool(bool v) { return std::make_shared<const Expr>(Expr{BoolLit{v}}); }
ExprPtr make_error(ErrorKind k) { return std::make_shared<const Expr>(Expr{ErrorLit{k}}); }
ExprPtr make_ref(CellRef r) { return std::make_shared<const Expr>(Expr{RefExpr{r}}); }
ExprPtr make_range(RangeRef r) { return std::make_shared<const Expr>(Expr{RangeExpr{r}}); }
ExprPtr make_unary(UnaryOp op, ExprPtr operand) {
    return std::make_shared<const Expr>(Expr{UnaryExpr{op, std::move(operand)}});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
    return std::make_shared<const Expr>(Expr{BinaryExpr{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr make_call(std::string name, std::vector<ExprPtr> args) {
    return std::make_shared<const Expr>(Expr{CallExpr{text::to_upper(name), std::move(args)}});
}

SyntaxError::SyntaxError(std::size_t pos, std::string expected, const std::string& detail)
    : std::runtime_error("syntax error at offset " + std::to_string(pos) + ": " + detail +
                         (expected.empty() ? "" : " (expected " + expected + ")")),
      pos_(pos),
      expected_(std::move(expected)) {}

// ---------------------------------------------------------------------------
// Lexer

namespace {

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

std::vector<Token> tokenize(std::string_view s) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const char c = s[i];
        const std::size_t start = i;
        if (is_ws(c)) {
            ++i;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            if (i < s.size() && s[i] == '.') {
                ++i;
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            }
            if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
                if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
                    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
                    i = j;
                }
            }
            out.push_back({TokenKind::Number, std::string(s.substr(start, i - start)), start});
            continue;
        }
        if (c == '"') {
            ++i;
            bool closed = false;
            while (i < s.size()) {
                if (s[i] == '"') {
                    if (i + 1 < s.size() && s[i + 1] == '"') {
                        i += 2;
                        continue;
                    }
                    ++i;
                    closed = true;
                    break;
                }
                ++i;
            }
            if (!closed) throw SyntaxError(start, "closing '\"'", "unterminated string literal");
            out.push_back({TokenKind::String, std::string(s.substr(start, i - start)), start});
            continue;
        }
        if (c == '#') {
            static constexpr std::string_view kErrors[] = {"#DIV/0!", "#N/A", "#VALUE!", "#REF!", "#NAME?", "#NUM!"};
            bool matched = false;
            for (auto e : kErrors) {
                if (s.size() - i >= e.size() && text::iequals(s.substr(i, e.size()), e)) {
                    out.push_back({TokenKind::Error, std::string(s.substr(i, e.size())), start});
                    i += e.size();
                    matched = true;
                    break;
                }
            }
            if (!matched) throw SyntaxError(start, "error literal", "unknown error literal");
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
            while (i < s.size() && is_word_char(s[i])) ++i;
            std::string word(s.substr(start, i - start));
            bool call = i < s.size() && s[i] == '(';
            TokenKind kind = (!call && CellRef::parse(word)) ? TokenKind::CellRef : TokenKind::Ident;
            out.push_back({kind, std::move(word), start});
            continue;
        }
        switch (c) {
            case '(':
            case ')':
            case ',':
            case ':':
                out.push_back({TokenKind::Punct, std::string(1, c), start});
                ++i;
                continue;
            case '+':
            case '-':
            case '*':
            case '/':
            case '^':
            case '&':
            case '=':
            case '%':
                out.push_back({TokenKind::Op, std::string(1, c), start});
                ++i;
                continue;
            case '<':
                if (i + 1 < s.size() && (s[i + 1] == '>' || s[i + 1] == '=')) {
                    out.push_back({TokenKind::Op, std::string(s.substr(i, 2)), start});
                    i += 2;
                } else {
                    out.push_back({TokenKind::Op, "<", start});
                    ++i;
                }
                continue;
            case '>':
                if (i + 1 < s.size() && s[i + 1] == '=') {
                    out.push_back({TokenKind::Op, ">=", start});
                    i += 2;
                } else {
                    out.push_back({TokenKind::Op, ">", start});
                    ++i;
                }
                continue;
            default:
                break;
        }
        throw SyntaxError(start, "", "unexpected character");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parser
//
// Precedence, loosest first: comparison, &, + -, * /, ^, postfix %,
// prefix - +. Prefix negation binds tighter than ^, as in spreadsheets
// (-2^2 is 4). All binary operators are left-associative.

namespace {

constexpr int kMaxDepth = 200;
constexpr std::size_t kMaxFormulaLength = 8192;

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    ExprPtr parse() {
        if (!toks_.empty() && toks_[0].kind == TokenKind::Op && toks_[0].text == "=") pos_ = 1;
        if (at_end()) throw SyntaxError(end_pos(), "expression", "empty formula");
        ExprPtr e = comparison();
        if (!at_end()) throw SyntaxError(peek().pos, "end of formula", "unexpected '" + peek().text + "'");
        return e;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    int depth_ = 0;

    struct DepthGuard {
        Parser& p;
        explicit DepthGuard(Parser& parser, std::size_t where) : p(parser) {
            if (++p.depth_ > kMaxDepth) throw SyntaxError(where, "", "formula nested too deeply");
        }
        ~DepthGuard() { --p.depth_; }
    };

    bool at_end() const { return pos_ >= toks_.size(); }
    const Token& peek() const { return toks_[pos_]; }
    // Unexpected end of input is reported at the last token consumed.
    std::size_t end_pos() const { return toks_.empty() ? 0 : toks_.back().pos; }

    bool peek_op(std::string_view op) const {
        return !at_end() && peek().kind == TokenKind::Op && peek().text == op;
    }
    bool peek_punct(char p) const {
        return !at_end() && peek().kind == TokenKind::Punct && peek().text[0] == p;
    }

    ExprPtr comparison() {
        ExprPtr lhs = concat();
        while (!at_end() && peek().kind == TokenKind::Op) {
            const std::string& t = peek().text;
            BinaryOp op;
            if (t == "=") op = BinaryOp::Eq;
            else if (t == "<>") op = BinaryOp::Ne;
            else if (t == "<") op = BinaryOp::Lt;
            else if (t == "<=") op = BinaryOp::Le;
            else if (t == ">") op = BinaryOp::Gt;
            else if (t == ">=") op = BinaryOp::Ge;
            else break;
            ++pos_;
            lhs = make_binary(op, lhs, concat());
        }
        return lhs;
    }

    ExprPtr concat() {
        ExprPtr lhs = additive();
        while (peek_op("&")) {
            ++pos_;
            lhs = make_binary(BinaryOp::Concat, lhs, additive());
        }
        return lhs;
    }

    ExprPtr additive() {
        ExprPtr lhs = multiplicative();
        while (peek_op("+") || peek_op("-")) {
            BinaryOp op = peek().text == "+" ? BinaryOp::Add : BinaryOp::Sub;
            ++pos_;
            lhs = make_binary(op, lhs, multiplicative());
        }
        return lhs;
    }

    ExprPtr multiplicative() {
        ExprPtr lhs = power();
        while (peek_op("*") || peek_op("/")) {
            BinaryOp op = peek().text == "*" ? BinaryOp::Mul : BinaryOp::Div;
            ++pos_;
            lhs = make_binary(op, lhs, power());
        }
        return lhs;
    }

    ExprPtr power() {
        ExprPtr lhs = percent();
        while (peek_op("^")) {
            ++pos_;
            lhs = make_binary(BinaryOp::Pow, lhs, percent());
        }
        return lhs;
    }

    ExprPtr percent() {
        ExprPtr e = unary();
        while (peek_op("%")) {
            ++pos_;
            e = make_unary(UnaryOp::Percent, e);
        }
        return e;
    }

    ExprPtr unary() {
        if (peek_op("-") || peek_op("+")) {
            DepthGuard guard(*this, peek().pos);
            bool neg = peek().text == "-";
            ++pos_;
            ExprPtr operand = unary();
            return neg ? make_unary(UnaryOp::Neg, operand) : operand;
        }
        return primary();
    }

    ExprPtr primary() {
        if (at_end()) throw SyntaxError(end_pos(), "operand", "unexpected end of formula");
        const Token tok = peek();
        switch (tok.kind) {
            case TokenKind::Number: {
                ++pos_;
                double v = 0;
                auto [p, ec] = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
                if (ec != std::errc{} || p != tok.text.data() + tok.text.size() || !std::isfinite(v)) {
                    throw SyntaxError(tok.pos, "number", "number literal out of range");
                }
                return make_number(v);
            }
            case TokenKind::String: {
                ++pos_;
                std::string v;
                for (std::size_t i = 1; i + 1 < tok.text.size(); ++i) {
                    v += tok.text[i];
                    if (tok.text[i] == '"') ++i;
                }
                return make_text(std::move(v));
            }
            case TokenKind::Error:
                ++pos_;
                return make_error(*parse_error_kind(tok.text));
            case TokenKind::CellRef: {
                ++pos_;
                CellRef a = *CellRef::parse(tok.text);
                if (peek_punct(':')) {
                    ++pos_;
                    if (at_end() || peek().kind != TokenKind::CellRef) {
                        throw SyntaxError(at_end() ? end_pos() : peek().pos, "cell reference", "incomplete range");
                    }
                    CellRef b = *CellRef::parse(peek().text);
                    ++pos_;
                    return make_range(RangeRef::of(a, b));
                }
                return make_ref(a);
            }
            case TokenKind::Ident: return identifier(tok);
            case TokenKind::Punct:
                if (tok.text == "(") {
                    DepthGuard guard(*this, tok.pos);
                    ++pos_;
                    ExprPtr inner = comparison();
                    expect_punct(')');
                    return inner;
                }
                throw SyntaxError(tok.pos, "operand", "unexpected '" + tok.text + "'");
            case TokenKind::Op: throw SyntaxError(tok.pos, "operand", "unexpected operator '" + tok.text + "'");
        }
        throw SyntaxError(tok.pos, "operand", "unexpected token");
    }

    ExprPtr identifier(const Token& tok) {
        ++pos_;
        const std::string name = text::to_upper(tok.text);
        if (peek_punct('(')) {
            DepthGuard guard(*this, tok.pos);
            validate_function_name(tok, name);
            ++pos_;
            std::vector<ExprPtr> args;
            if (peek_punct(')')) {
                ++pos_;
                return make_call(name, std::move(args));
            }
            while (true) {
                if (peek_punct(',') || peek_punct(')')) {
                    throw SyntaxError(peek().pos, "argument", "empty argument");
                }
                args.push_back(comparison());
                if (peek_punct(',')) {
                    ++pos_;
                    continue;
                }
                expect_punct(')');
                break;
            }
            return make_call(name, std::move(args));
        }
        if (name == "TRUE") return make_bool(true);
        if (name == "FALSE") return make_bool(false);
        throw SyntaxError(tok.pos, "cell reference or function call", "unknown name '" + tok.text + "'");
    }

    static void validate_function_name(const Token& tok, const std::string& name) {
        bool ok = !name.empty() && name[0] >= 'A' && name[0] <= 'Z';
        for (char c : name) ok = ok && ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.');
        if (!ok) throw SyntaxError(tok.pos, "function name", "invalid function name '" + tok.text + "'");
    }

    void expect_punct(char p) {
        if (at_end()) throw SyntaxError(end_pos(), std::string("'") + p + "'", "unexpected end of formula");
        if (!peek_punct(p)) throw SyntaxError(peek().pos, std::string("'") + p + "'", "unexpected '" + peek().text + "'");
        ++pos_;
    }
};

}  // namespace

ExprPtr parse_formula(std::string_view text) {
    if (text.size() > kMaxFormulaLength) throw SyntaxError(kMaxFormulaLength, "", "formula longer than 8192 characters");
    return Parser(tokenize(text)).parse();
}

ExprPtr try_parse_formula(std::string_view text) {
    try {
        return parse_formula(text);
    } catch (const SyntaxError&) {
        return nullptr;
    }
}

// ---------------------------------------------------------------------------
// Printer

namespace {

enum Prec { kCompare = 1, kConcat, kAdd, kMul, kPow, kPercent, kNeg, kAtom };

int binary_prec(BinaryOp op) {
    switch (op) {
        case BinaryOp::Eq:
        case BinaryOp::Ne:
        case BinaryOp::Lt:
        case BinaryOp::Le:
        case BinaryOp::Gt:
        case BinaryOp::Ge: return kCompare;
        case BinaryOp::Concat: return kConcat;
        case BinaryOp::Add:
        case BinaryOp::Sub: return kAdd;
        case BinaryOp::Mul:
        case BinaryOp::Div: return kMul;
        case BinaryOp::Pow: return kPow;
    }
    return kAtom;
}

int prec_of(const Expr& e) {
    if (auto* b = std::get_if<BinaryExpr>(&e.node)) return binary_prec(b->op);
    if (auto* u = std::get_if<UnaryExpr>(&e.node)) return u->op == UnaryOp::Neg ? kNeg : kPercent;
    if (auto* n = std::get_if<NumberLit>(&e.node)) return n->value < 0 ? kNeg : kAtom;
    return kAtom;
}

std::string print_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, p);
    for (auto& c : s) {
        if (c == 'e') c = 'E';
    }
    return s;
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& e, bool parens, std::string& out) {
    if (parens) out += '(';
    print(e, out);
    if (parens) out += ')';
}

void print(const Expr& e, std::string& out) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, NumberLit>) {
                out += print_number(n.value);
            } else if constexpr (std::is_same_v<T, TextLit>) {
                out += '"';
                for (char c : n.value) {
                    out += c;
                    if (c == '"') out += '"';
                }
                out += '"';
            } else if constexpr (std::is_same_v<T, BoolLit>) {
                out += n.value ? "TRUE" : "FALSE";
            } else if constexpr (std::is_same_v<T, ErrorLit>) {
                out += error_display(n.kind);
            } else if constexpr (std::is_same_v<T, RefExpr>) {
                out += n.ref.to_string();
            } else if constexpr (std::is_same_v<T, RangeExpr>) {
                out += n.range.to_string();
            } else if constexpr (std::is_same_v<T, UnaryExpr>) {
                if (n.op == UnaryOp::Neg) {
                    out += '-';
                    print_child(*n.operand, prec_of(*n.operand) < kNeg, out);
                } else {
                    print_child(*n.operand, prec_of(*n.operand) < kPercent, out);
                    out += '%';
                }
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                const int p = binary_prec(n.op);
                print_child(*n.lhs, prec_of(*n.lhs) < p, out);
                out += binary_op_text(n.op);
                print_child(*n.rhs, prec_of(*n.rhs) <= p, out);
            } else if constexpr (std::is_same_v<T, CallExpr>) {
                out += n.name;
                out += '(';
                for (std::size_t i = 0; i < n.args.size(); ++i) {
                    if (i) out += ',';
                    print(*n.args[i], out);
                }
                out += ')';
            }
        },
        e.node);
}

void collect_calls(const Expr& e, std::set<std::string>* names, std::size_t* count) {
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, UnaryExpr>) {
                collect_calls(*n.operand, names, count);
            } else if constexpr (std::is_same_v<T, BinaryExpr>) {
                collect_calls(*n.lhs, names, count);
                collect_calls(*n.rhs, names, count);
            } else if constexpr (std::is_same_v<T, CallExpr>) {
                if (names) names->insert(n.name);
                if (count) ++*count;
                for (const auto& a : n.args) collect_calls(*a, names, count);
            }
        },
        e.node);
}

}  // namespace

std::string print_formula(const Expr& ast) {
    std::string out = "=";
    print(ast, out);
    return out;
}

std::set<std::string> extract_functions(const Expr& ast) {
    std::set<std::string> names;
    collect_calls(ast, &names, nullptr);
    return names;
}

std::size_t count_calls(const Expr& ast) {
    std::size_t n = 0;
    collect_calls(ast, nullptr, &n);
    return n;
}

bool is_single_function(const Expr& ast) { return count_calls(ast) == 1; }

}  // namespace xlsynth
