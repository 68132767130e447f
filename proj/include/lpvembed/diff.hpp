#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "lpvembed/expr.hpp"
#include "lpvembed/simplify.hpp"

namespace lpvembed {

class DiffError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Expr diff_raw(const Expr& e, std::string_view var) {
    if (!depends_on(e, var)) return constant(0.0);
    switch (e.op()) {
    case Op::Var: return constant(1.0);
    case Op::Neg: return -diff_raw(e.arg(), var);
    case Op::Add: return diff_raw(e.lhs(), var) + diff_raw(e.rhs(), var);
    case Op::Sub: return diff_raw(e.lhs(), var) - diff_raw(e.rhs(), var);
    case Op::Mul: {
        const Expr &a = e.lhs(), &b = e.rhs();
        return diff_raw(a, var) * b + a * diff_raw(b, var);
    }
    case Op::Div: {
        const Expr &a = e.lhs(), &b = e.rhs();
        if (!depends_on(b, var)) return diff_raw(a, var) / b;
        return (diff_raw(a, var) * b - a * diff_raw(b, var)) / (b * b);
    }
    case Op::Pow: {
        const Expr &a = e.lhs(), &b = e.rhs();
        if (!depends_on(b, var)) {
            Expr lowered = b.is_const() ? constant(b.value() - 1.0) : b - constant(1.0);
            return b * pow(a, lowered) * diff_raw(a, var);
        }
        return e * (diff_raw(b, var) * ln(a) + b * diff_raw(a, var) / a);
    }
    case Op::Integral:
        // Leibniz rule: the integration variable is independent of x and u.
        return integral(diff_raw(e.arg(), var));
    default: break;
    }

    const Expr& a = e.arg();
    const Expr da = diff_raw(a, var);
    switch (e.op()) {
    case Op::Sin: return cos(a) * da;
    case Op::Cos: return -sin(a) * da;
    case Op::Tan: return (constant(1.0) + pow(tan(a), constant(2.0))) * da;
    case Op::Tanh: return (constant(1.0) - pow(tanh(a), constant(2.0))) * da;
    case Op::Exp: return exp(a) * da;
    case Op::Ln: return da / a;
    case Op::Sqrt: return da / (constant(2.0) * sqrt(a));
    case Op::Sinc: return unary(Op::DSinc, a) * da;
    case Op::Expm1c: return unary(Op::DExpm1c, a) * da;
    case Op::Abs: throw DiffError("abs is not differentiable");
    case Op::DSinc:
    case Op::DExpm1c:
        throw DiffError(std::string(function_name(e.op())) + " has no derivative rule");
    default: break;
    }
    throw DiffError("malformed expression node");
}

}  // namespace detail

/// Simplified symbolic partial derivative of `e` with respect to `var`.
/// Throws DiffError for non-differentiable primitives that depend on `var`.
inline Expr differentiate(const Expr& e, std::string_view var) {
    return simplify(detail::diff_raw(e, var));
}

}  // namespace lpvembed
