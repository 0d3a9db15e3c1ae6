#pragma once

#include <cstddef>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "xlsynth/grid.hpp"

namespace xlsynth {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class UnaryOp { Neg, Percent };
enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };

std::string_view binary_op_text(BinaryOp op);

struct NumberLit {
    double value;
};
struct TextLit {
    std::string value;
};
struct BoolLit {
    bool value;
};
struct ErrorLit {
    ErrorKind kind;
};
struct RefExpr {
    CellRef ref;
};
struct RangeExpr {
    RangeRef range;
};
struct UnaryExpr {
    UnaryOp op;
    ExprPtr operand;
};
struct BinaryExpr {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};
struct CallExpr {
    std::string name;  // upper case
    std::vector<ExprPtr> args;
};

/// Immutable formula syntax tree. Children are shared, so copies are cheap.
struct Expr {
    using Node = std::variant<NumberLit, TextLit, BoolLit, ErrorLit, RefExpr, RangeExpr, UnaryExpr, BinaryExpr, CallExpr>;
    Node node;
};

bool operator==(const Expr& a, const Expr& b);

ExprPtr make_number(double v);
ExprPtr make_text(std::string v);
ExprPtr make_bool(bool v);
ExprPtr make_error(ErrorKind k);
ExprPtr make_ref(CellRef r);
ExprPtr make_range(RangeRef r);
ExprPtr make_unary(UnaryOp op, ExprPtr operand);
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_call(std::string name, std::vector<ExprPtr> args);

enum class TokenKind { Number, String, Ident, CellRef, Punct, Op, Error };

struct Token {
    TokenKind kind;
    std::string text;  // exact source slice
    std::size_t pos;   // byte offset
};

class SyntaxError : public std::runtime_error {
public:
    SyntaxError(std::size_t pos, std::string expected, const std::string& detail);

    std::size_t position() const { return pos_; }
    const std::string& expected() const { return expected_; }

private:
    std::size_t pos_;
    std::string expected_;
};

// Splits the input (including a leading '=') into tokens; whitespace is
// skipped. Throws SyntaxError on characters outside the grammar.
std::vector<Token> tokenize(std::string_view text);

// Parses an optionally '='-prefixed formula. Never throws anything but
// SyntaxError.
ExprPtr parse_formula(std::string_view text);

// Canonical text: leading '=', no spaces, minimal parentheses.
std::string print_formula(const Expr& ast);

std::set<std::string> extract_functions(const Expr& ast);
std::size_t count_calls(const Expr& ast);
bool is_single_function(const Expr& ast);

// Convenience: parse, returning nullptr on SyntaxError.
ExprPtr try_parse_formula(std::string_view text);

}  // namespace xlsynth
