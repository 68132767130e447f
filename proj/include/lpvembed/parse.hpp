#pragma once

// Recursive-descent parser for the expression grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names resolve, in order, to: user aliases, declared constants, the
// built-in constant `pi`, positional variables x1..xn / u1..um, `t` (when
// enabled) and `lambda` (only inside integral(...)).

#include <cctype>
#include <charconv>
#include <map>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "lpvembed/expr.hpp"

namespace lpvembed {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

struct ParseOptions {
    /// Number of admissible state/input variables. Negative means unbounded.
    int nx = -1;
    int nu = -1;
    bool allow_time = false;
    std::map<std::string, double, std::less<>> constants;
    /// Alternative names for positional variables, e.g. {"theta", "x1"}.
    std::map<std::string, std::string, std::less<>> aliases;
};

namespace detail {

inline std::optional<int> positional_index(std::string_view name, char prefix) {
    if (name.size() < 2 || name[0] != prefix) return std::nullopt;
    int idx = 0;
    auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
    if (ec != std::errc{} || p != name.data() + name.size() || idx < 1 || name[1] == '0')
        return std::nullopt;
    return idx;
}

class Parser {
public:
    Parser(std::string_view text, const ParseOptions& opts) : s_(text), opts_(opts) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }
    [[noreturn]] void fail_at(const std::string& msg, std::size_t at) const { throw ParseError(msg, at); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            if (pos_ >= s_.size()) fail(std::string("expected '") + c + "' but reached end of input");
            fail(std::string("expected '") + c + "'");
        }
    }

    Expr expr() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) lhs = lhs + term();
            else if (accept('-')) lhs = lhs - term();
            else return lhs;
        }
    }

    Expr term() {
        Expr lhs = unary_expr();
        for (;;) {
            if (accept('*')) lhs = lhs * unary_expr();
            else if (accept('/')) lhs = lhs / unary_expr();
            else return lhs;
        }
    }

    Expr unary_expr() {
        if (accept('-')) {
            Expr a = unary_expr();
            if (a.is_const()) return constant(-a.value());
            return -a;
        }
        if (accept('+')) return unary_expr();
        return power();
    }

    Expr power() {
        Expr base = primary();
        if (accept('^')) return pow(base, unary_expr());
        return base;
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name_or_call();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr number() {
        std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '.')) ++pos_;
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            } else {
                pos_ = save;
            }
        }
        double v = 0.0;
        auto [p, ec] = std::from_chars(s_.data() + start, s_.data() + pos_, v);
        if (ec != std::errc{} || p != s_.data() + pos_) fail_at("malformed number", start);
        return constant(v);
    }

    Expr name_or_call() {
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        std::string_view name = s_.substr(start, pos_ - start);
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '(') {
            ++pos_;
            return call(name, start);
        }
        return symbol(name, start);
    }

    Expr call(std::string_view name, std::size_t at) {
        static constexpr Op kFunctions[] = {Op::Sin,  Op::Cos,    Op::Tan,   Op::Tanh,    Op::Exp,
                                            Op::Ln,   Op::Sqrt,   Op::Abs,   Op::Sinc,    Op::Expm1c,
                                            Op::DSinc, Op::DExpm1c, Op::Integral};
        for (Op op : kFunctions) {
            if (function_name(op) != name) continue;
            if (op == Op::Integral) {
                if (in_integral_) fail_at("nested integral", at);
                in_integral_ = true;
                Expr body = expr();
                in_integral_ = false;
                expect(')');
                return integral(body);
            }
            Expr a = expr();
            expect(')');
            return unary(op, a);
        }
        if (name == "log") {
            Expr a = expr();
            expect(')');
            return ln(a);
        }
        fail_at("unknown function '" + std::string(name) + "'", at);
    }

    Expr symbol(std::string_view name, std::size_t at) {
        if (auto it = opts_.aliases.find(name); it != opts_.aliases.end()) return symbol(it->second, at);
        if (auto it = opts_.constants.find(name); it != opts_.constants.end()) return constant(it->second);
        if (name == "pi") return constant(std::numbers::pi);
        if (name == "lambda") {
            if (!in_integral_) fail_at("'lambda' is only valid inside integral(...)", at);
            return lambda_var();
        }
        if (name == "t" && opts_.allow_time) return variable("t");
        if (auto i = positional_index(name, 'x'); i && (opts_.nx < 0 || *i <= opts_.nx))
            return variable(std::string(name));
        if (auto i = positional_index(name, 'u'); i && (opts_.nu < 0 || *i <= opts_.nu))
            return variable(std::string(name));
        fail_at("unknown variable '" + std::string(name) + "'", at);
    }

    std::string_view s_;
    const ParseOptions& opts_;
    std::size_t pos_ = 0;
    bool in_integral_ = false;
};

}  // namespace detail

inline Expr parse_expr(std::string_view text, const ParseOptions& opts = {}) {
    return detail::Parser(text, opts).parse();
}

}  // namespace lpvembed
