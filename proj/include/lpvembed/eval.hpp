#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lpvembed/expr.hpp"
#include "lpvembed/quadrature.hpp"

namespace lpvembed {

class EvalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Symbol -> value bindings. Small and flat: models rarely bind more than a
/// handful of symbols, so lookup is a linear scan.
class VarBinding {
public:
    VarBinding() = default;
    VarBinding(std::initializer_list<std::pair<std::string, double>> init) {
        for (const auto& [k, v] : init) set(k, v);
    }

    void set(std::string_view name, double value) {
        for (auto& [k, v] : entries_)
            if (k == name) {
                v = value;
                return;
            }
        entries_.emplace_back(std::string(name), value);
    }

    const double* find(std::string_view name) const {
        for (const auto& [k, v] : entries_)
            if (k == name) return &v;
        return nullptr;
    }

    const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

private:
    std::vector<std::pair<std::string, double>> entries_;
};

// Removable-singularity primitives. Series branches keep them accurate
// near zero where the closed forms cancel catastrophically.

inline double sinc_value(double a) { return a == 0.0 ? 1.0 : std::sin(a) / a; }

inline double expm1c_value(double a) { return a == 0.0 ? 1.0 : std::expm1(a) / a; }

inline double dsinc_value(double a) {
    if (std::abs(a) < 0.5) {
        // sum_{k>=1} (-1)^k 2k a^(2k-1) / (2k+1)!
        double sum = 0.0, a2 = a * a, pw = a, fact = 6.0;  // a^(2k-1), (2k+1)!
        for (int k = 1; k <= 12; ++k) {
            sum += ((k % 2) ? -1.0 : 1.0) * 2.0 * k * pw / fact;
            pw *= a2;
            fact *= (2.0 * k + 2.0) * (2.0 * k + 3.0);
        }
        return sum;
    }
    return (a * std::cos(a) - std::sin(a)) / (a * a);
}

inline double dexpm1c_value(double a) {
    if (std::abs(a) < 0.5) {
        // sum_{k>=1} k a^(k-1) / (k+1)!
        double sum = 0.0, pw = 1.0, fact = 2.0;
        for (int k = 1; k <= 20; ++k) {
            sum += k * pw / fact;
            pw *= a;
            fact *= (k + 2.0);
        }
        return sum;
    }
    return ((a - 1.0) * std::exp(a) + 1.0) / (a * a);
}

/// Per-evaluation-pass state: memoizes deferred quadratures on
/// (node, bound values). Not shared between threads.
class EvalContext {
public:
    explicit EvalContext(QuadOptions quad = {}) : quad_(quad) {}

    const QuadOptions& quad_options() const { return quad_; }
    void clear() { memo_.clear(); }
    std::size_t memo_size() const { return memo_.size(); }

    const double* lookup(const Node* node, const VarBinding& b) const {
        auto it = memo_.find(key(node, b));
        return it == memo_.end() ? nullptr : &it->second;
    }
    void store(const Node* node, const VarBinding& b, double value) { memo_[key(node, b)] = value; }

private:
    using Key = std::pair<const Node*, std::vector<double>>;
    static Key key(const Node* node, const VarBinding& b) {
        Key k{node, {}};
        k.second.reserve(b.entries().size());
        for (const auto& [_, v] : b.entries()) k.second.push_back(v);
        return k;
    }

    QuadOptions quad_;
    std::map<Key, double> memo_;
};

namespace detail {

double eval_node(const Expr& e, const VarBinding& b, double lambda, EvalContext* ctx);

inline double eval_integral(const Expr& e, const VarBinding& b, EvalContext* ctx) {
    if (ctx)
        if (const double* hit = ctx->lookup(e.get(), b)) return *hit;
    const Expr& body = e.arg();
    double value;
    if (!contains_lambda(body)) {
        value = eval_node(body, b, std::numeric_limits<double>::quiet_NaN(), ctx);
    } else {
        QuadOptions opts = ctx ? ctx->quad_options() : QuadOptions{};
        value = integrate_gk15([&](double lam) { return eval_node(body, b, lam, nullptr); }, 0.0, 1.0, opts).value;
    }
    if (ctx) ctx->store(e.get(), b, value);
    return value;
}

inline double eval_node(const Expr& e, const VarBinding& b, double lambda, EvalContext* ctx) {
    switch (e.op()) {
    case Op::Const: return e.value();
    case Op::Var: {
        if (const double* v = b.find(e.name())) return *v;
        throw EvalError("unbound variable '" + e.name() + "'");
    }
    case Op::Lambda:
        if (std::isnan(lambda)) throw EvalError("integration variable outside integral(...)");
        return lambda;
    case Op::Integral: return eval_integral(e, b, ctx);
    default: break;
    }

    const double a = eval_node(e.lhs(), b, lambda, ctx);
    switch (e.op()) {
    case Op::Neg: return -a;
    case Op::Sin: return std::sin(a);
    case Op::Cos: return std::cos(a);
    case Op::Tan: return std::tan(a);
    case Op::Tanh: return std::tanh(a);
    case Op::Exp: return std::exp(a);
    case Op::Ln:
        if (!(a > 0.0)) throw EvalError("ln of non-positive value " + format_number(a));
        return std::log(a);
    case Op::Sqrt:
        if (a < 0.0) throw EvalError("sqrt of negative value " + format_number(a));
        return std::sqrt(a);
    case Op::Abs: return std::abs(a);
    case Op::Sinc: return sinc_value(a);
    case Op::Expm1c: return expm1c_value(a);
    case Op::DSinc: return dsinc_value(a);
    case Op::DExpm1c: return dexpm1c_value(a);
    default: break;
    }

    const double c = eval_node(e.rhs(), b, lambda, ctx);
    switch (e.op()) {
    case Op::Add: return a + c;
    case Op::Sub: return a - c;
    case Op::Mul: return a * c;
    case Op::Div:
        if (c == 0.0) throw EvalError("division by zero");
        return a / c;
    case Op::Pow: {
        if (a < 0.0 && c != std::floor(c))
            throw EvalError("negative base " + format_number(a) + " raised to non-integer power");
        if (a == 0.0 && c < 0.0) throw EvalError("zero raised to negative power");
        return std::pow(a, c);
    }
    default: break;
    }
    throw EvalError("malformed expression node");
}

}  // namespace detail

/// IEEE double evaluation. Throws EvalError on unbound symbols and domain
/// violations (division by zero, ln of non-positive, ...).
inline double evaluate(const Expr& e, const VarBinding& b) {
    return detail::eval_node(e, b, std::numeric_limits<double>::quiet_NaN(), nullptr);
}

inline double evaluate(const Expr& e, const VarBinding& b, EvalContext& ctx) {
    return detail::eval_node(e, b, std::numeric_limits<double>::quiet_NaN(), &ctx);
}

/// Evaluate an integrand in lambda at a fixed point.
inline double evaluate_at_lambda(const Expr& e, const VarBinding& b, double lambda) {
    return detail::eval_node(e, b, lambda, nullptr);
}

/// Adaptive GK15 estimate of the integral of `e` over lambda in [0, 1] at
/// `point`. Lambda-free integrands are returned exactly.
inline double integrate_numeric(const Expr& e, const VarBinding& point, const QuadOptions& opts = {}) {
    if (!contains_lambda(e)) return evaluate(e, point);
    return integrate_gk15([&](double lam) { return evaluate_at_lambda(e, point, lam); }, 0.0, 1.0, opts).value;
}

}  // namespace lpvembed
