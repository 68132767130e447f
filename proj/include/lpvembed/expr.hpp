#pragma once

// Immutable symbolic scalar expressions over state, input, time and
// integration variables.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lpvembed {

enum class Op : std::uint8_t {
    Const,
    Var,
    Lambda,  // integration variable of the FTC line integral
    // unary
    Neg,
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sinc,     // sin(a)/a, 1 at a = 0
    Expm1c,   // (exp(a)-1)/a, 1 at a = 0
    DSinc,    // d/da sinc(a), 0 at a = 0
    DExpm1c,  // d/da expm1c(a), 1/2 at a = 0
    Integral, // deferred quadrature of the child over lambda in [0, 1]
    // binary
    Add,
    Sub,
    Mul,
    Div,
    Pow,
};

constexpr bool is_unary(Op op) { return op >= Op::Neg && op <= Op::Integral; }
constexpr bool is_binary(Op op) { return op >= Op::Add; }
constexpr bool is_leaf(Op op) { return op <= Op::Lambda; }

/// Function-call spelling of a unary primitive, or empty for operators.
inline std::string_view function_name(Op op) {
    switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Tan: return "tan";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Ln: return "ln";
    case Op::Sqrt: return "sqrt";
    case Op::Abs: return "abs";
    case Op::Sinc: return "sinc";
    case Op::Expm1c: return "expm1c";
    case Op::DSinc: return "dsinc";
    case Op::DExpm1c: return "dexpm1c";
    case Op::Integral: return "integral";
    default: return {};
    }
}

struct Node;

/// Shared handle to an immutable expression tree. Copying is cheap.
class Expr {
public:
    Expr() = default;
    explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

    const Node& operator*() const { return *node_; }
    const Node* operator->() const { return node_.get(); }
    const Node* get() const { return node_.get(); }
    explicit operator bool() const { return static_cast<bool>(node_); }

    Op op() const;
    bool is_const() const { return node_ && op() == Op::Const; }
    bool is_const(double v) const;
    double value() const;
    const std::string& name() const;
    const Expr& arg() const;
    const Expr& lhs() const;
    const Expr& rhs() const;

private:
    std::shared_ptr<const Node> node_;
};

struct Node {
    Op op = Op::Const;
    double value = 0.0;
    std::string name;
    Expr a;
    Expr b;
};

inline Op Expr::op() const { return node_->op; }
inline bool Expr::is_const(double v) const { return is_const() && node_->value == v; }
inline double Expr::value() const { return node_->value; }
inline const std::string& Expr::name() const { return node_->name; }
inline const Expr& Expr::arg() const { return node_->a; }
inline const Expr& Expr::lhs() const { return node_->a; }
inline const Expr& Expr::rhs() const { return node_->b; }

// ---------------------------------------------------------------------------
// Raw constructors. These never simplify.
// ---------------------------------------------------------------------------

inline Expr constant(double v) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->value = v;
    return Expr(std::move(n));
}

inline Expr variable(std::string name) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->name = std::move(name);
    return Expr(std::move(n));
}

inline Expr lambda_var() {
    static const Expr lam = [] {
        auto n = std::make_shared<Node>();
        n->op = Op::Lambda;
        n->name = "lambda";
        return Expr(std::move(n));
    }();
    return lam;
}

inline Expr unary(Op op, Expr a) {
    if (!is_unary(op)) throw std::invalid_argument("unary: not a unary operator");
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    return Expr(std::move(n));
}

inline Expr binary(Op op, Expr a, Expr b) {
    if (!is_binary(op)) throw std::invalid_argument("binary: not a binary operator");
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return Expr(std::move(n));
}

inline Expr operator+(Expr a, Expr b) { return binary(Op::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return binary(Op::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return binary(Op::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return binary(Op::Div, std::move(a), std::move(b)); }
inline Expr operator-(Expr a) { return unary(Op::Neg, std::move(a)); }
inline Expr pow(Expr a, Expr b) { return binary(Op::Pow, std::move(a), std::move(b)); }
inline Expr sin(Expr a) { return unary(Op::Sin, std::move(a)); }
inline Expr cos(Expr a) { return unary(Op::Cos, std::move(a)); }
inline Expr tan(Expr a) { return unary(Op::Tan, std::move(a)); }
inline Expr tanh(Expr a) { return unary(Op::Tanh, std::move(a)); }
inline Expr exp(Expr a) { return unary(Op::Exp, std::move(a)); }
inline Expr ln(Expr a) { return unary(Op::Ln, std::move(a)); }
inline Expr sqrt(Expr a) { return unary(Op::Sqrt, std::move(a)); }
inline Expr abs(Expr a) { return unary(Op::Abs, std::move(a)); }
inline Expr sinc(Expr a) { return unary(Op::Sinc, std::move(a)); }
inline Expr expm1c(Expr a) { return unary(Op::Expm1c, std::move(a)); }
inline Expr integral(Expr integrand) { return unary(Op::Integral, std::move(integrand)); }

// ---------------------------------------------------------------------------
// Structural queries
// ---------------------------------------------------------------------------

/// Exact tree equality; constants compare by value.
inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.get() == b.get()) return true;
    if (!a || !b || a.op() != b.op()) return false;
    switch (a.op()) {
    case Op::Const: return a.value() == b.value();
    case Op::Var: return a.name() == b.name();
    case Op::Lambda: return true;
    default: break;
    }
    if (is_unary(a.op())) return structurally_equal(a.arg(), b.arg());
    return structurally_equal(a.lhs(), b.lhs()) && structurally_equal(a.rhs(), b.rhs());
}

namespace detail {
inline void collect_vars(const Expr& e, std::set<std::string>& out) {
    switch (e.op()) {
    case Op::Const:
    case Op::Lambda: return;
    case Op::Var: out.insert(e.name()); return;
    default: break;
    }
    collect_vars(e.lhs(), out);
    if (is_binary(e.op())) collect_vars(e.rhs(), out);
}
}  // namespace detail

/// Free (x, u, t, ...) symbols. The integration variable is not reported.
inline std::set<std::string> free_vars(const Expr& e) {
    std::set<std::string> out;
    detail::collect_vars(e, out);
    return out;
}

inline bool depends_on(const Expr& e, std::string_view var) {
    switch (e.op()) {
    case Op::Const:
    case Op::Lambda: return false;
    case Op::Var: return e.name() == var;
    default: break;
    }
    if (depends_on(e.lhs(), var)) return true;
    return is_binary(e.op()) && depends_on(e.rhs(), var);
}

/// True if the integration variable occurs outside any Integral node.
inline bool contains_lambda(const Expr& e) {
    switch (e.op()) {
    case Op::Const:
    case Op::Var: return false;
    case Op::Lambda: return true;
    case Op::Integral: return false;
    default: break;
    }
    if (contains_lambda(e.lhs())) return true;
    return is_binary(e.op()) && contains_lambda(e.rhs());
}

inline bool contains_op(const Expr& e, Op op) {
    if (e.op() == op) return true;
    if (is_leaf(e.op())) return false;
    if (contains_op(e.lhs(), op)) return true;
    return is_binary(e.op()) && contains_op(e.rhs(), op);
}

inline std::size_t node_count(const Expr& e) {
    if (is_leaf(e.op())) return 1;
    std::size_t n = 1 + node_count(e.lhs());
    if (is_binary(e.op())) n += node_count(e.rhs());
    return n;
}

/// Replace every variable for which `fn` returns a non-null expression.
template <typename Fn>
Expr substitute(const Expr& e, Fn&& fn) {
    switch (e.op()) {
    case Op::Const:
    case Op::Lambda: return e;
    case Op::Var: {
        Expr r = fn(e.name());
        return r ? r : e;
    }
    default: break;
    }
    if (is_unary(e.op())) {
        Expr a = substitute(e.arg(), fn);
        return a.get() == e.arg().get() ? e : unary(e.op(), std::move(a));
    }
    Expr a = substitute(e.lhs(), fn);
    Expr b = substitute(e.rhs(), fn);
    if (a.get() == e.lhs().get() && b.get() == e.rhs().get()) return e;
    return binary(e.op(), std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Printing. Emits the grammar accepted by parse_expr; literals use the
// shortest representation that round-trips to the same double.
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, end);
}

namespace detail {

inline int precedence(const Expr& e) {
    switch (e.op()) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return (e.value() < 0 || std::signbit(e.value())) ? 3 : 5;
    default: return 5;
    }
}

inline void print_to(const Expr& e, std::string& out);

inline void print_wrapped(const Expr& e, bool parens, std::string& out) {
    if (parens) out += '(';
    print_to(e, out);
    if (parens) out += ')';
}

inline void print_to(const Expr& e, std::string& out) {
    switch (e.op()) {
    case Op::Const: out += format_number(e.value()); return;
    case Op::Var: out += e.name(); return;
    case Op::Lambda: out += "lambda"; return;
    case Op::Neg:
        out += '-';
        print_wrapped(e.arg(), precedence(e.arg()) < 4, out);
        return;
    case Op::Add:
    case Op::Sub:
        print_wrapped(e.lhs(), precedence(e.lhs()) < 1, out);
        out += e.op() == Op::Add ? " + " : " - ";
        print_wrapped(e.rhs(), precedence(e.rhs()) <= 1, out);
        return;
    case Op::Mul:
    case Op::Div:
        print_wrapped(e.lhs(), precedence(e.lhs()) < 2, out);
        out += e.op() == Op::Mul ? '*' : '/';
        print_wrapped(e.rhs(), precedence(e.rhs()) <= 2, out);
        return;
    case Op::Pow:
        print_wrapped(e.lhs(), precedence(e.lhs()) <= 4, out);
        out += '^';
        print_wrapped(e.rhs(), precedence(e.rhs()) < 3, out);
        return;
    default:
        out += function_name(e.op());
        out += '(';
        print_to(e.arg(), out);
        out += ')';
        return;
    }
}

}  // namespace detail

inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print_to(e, out);
    return out;
}

}  // namespace lpvembed
