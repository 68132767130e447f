#pragma once

// Lightweight algebraic normalization: constant folding, identity
// elimination, zero annihilation, flattening of sums and products and
// merging of structurally identical terms. No trigonometric identities, no
// polynomial expansion.

#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lpvembed/eval.hpp"
#include "lpvembed/expr.hpp"

namespace lpvembed {

/// coef * factors[0] * factors[1] * ...; factors are non-constant.
struct Monomial {
    double coef = 1.0;
    std::vector<Expr> factors;
};

inline Expr simplify(const Expr& e);

namespace detail {

inline void flatten_product(const Expr& e, Monomial& m) {
    switch (e.op()) {
    case Op::Const: m.coef *= e.value(); return;
    case Op::Neg:
        m.coef = -m.coef;
        flatten_product(e.arg(), m);
        return;
    case Op::Mul:
        flatten_product(e.lhs(), m);
        flatten_product(e.rhs(), m);
        return;
    case Op::Div:
        if (e.rhs().is_const() && e.rhs().value() != 0.0) {
            flatten_product(e.lhs(), m);
            m.coef /= e.rhs().value();
            return;
        }
        break;
    default: break;
    }
    m.factors.push_back(e);
}

// Terms with no factors are constants. Sign is folded into coef.
inline void flatten_sum(const Expr& e, double sign, std::vector<Monomial>& terms) {
    switch (e.op()) {
    case Op::Add:
        flatten_sum(e.lhs(), sign, terms);
        flatten_sum(e.rhs(), sign, terms);
        return;
    case Op::Sub:
        flatten_sum(e.lhs(), sign, terms);
        flatten_sum(e.rhs(), -sign, terms);
        return;
    case Op::Neg: flatten_sum(e.arg(), -sign, terms); return;
    default: break;
    }
    Monomial m;
    m.coef = sign;
    flatten_product(e, m);
    terms.push_back(std::move(m));
}

inline bool same_factors(const Monomial& a, const Monomial& b) {
    if (a.factors.size() != b.factors.size()) return false;
    for (std::size_t i = 0; i < a.factors.size(); ++i)
        if (!structurally_equal(a.factors[i], b.factors[i])) return false;
    return true;
}

inline Expr product_of(const std::vector<Expr>& factors) {
    if (factors.empty()) return constant(1.0);
    Expr acc = factors.front();
    for (std::size_t i = 1; i < factors.size(); ++i) acc = acc * factors[i];
    return acc;
}

inline Expr monomial_expr(double coef, const std::vector<Expr>& factors) {
    if (factors.empty() || coef == 0.0) return constant(coef);
    Expr p = product_of(factors);
    if (coef == 1.0) return p;
    if (coef == -1.0) return -p;
    return constant(coef) * p;
}

inline Expr build_sum(std::vector<Monomial> terms) {
    // Merge like terms and all constants, keeping first-seen order.
    std::vector<Monomial> merged;
    for (auto& t : terms) {
        if (t.coef == 0.0) continue;
        bool placed = false;
        for (auto& m : merged)
            if (same_factors(m, t)) {
                m.coef += t.coef;
                placed = true;
                break;
            }
        if (!placed) merged.push_back(std::move(t));
    }
    std::erase_if(merged, [](const Monomial& m) { return m.coef == 0.0; });
    if (merged.empty()) return constant(0.0);

    Expr acc = monomial_expr(merged.front().coef, merged.front().factors);
    for (std::size_t i = 1; i < merged.size(); ++i) {
        const Monomial& m = merged[i];
        if (m.coef < 0.0) acc = acc - monomial_expr(-m.coef, m.factors);
        else acc = acc + monomial_expr(m.coef, m.factors);
    }
    return acc;
}

inline Expr fold_unary(Op op, const Expr& a) {
    if (a.is_const()) {
        try {
            return constant(evaluate(unary(op, a), VarBinding{}));
        } catch (const EvalError&) {
        }
    }
    return unary(op, a);
}

}  // namespace detail

/// Semantics-preserving normalization (up to floating-point reassociation).
inline Expr simplify(const Expr& e) {
    using namespace detail;
    switch (e.op()) {
    case Op::Const:
    case Op::Var:
    case Op::Lambda: return e;
    case Op::Integral: {
        Expr body = simplify(e.arg());
        if (!contains_lambda(body)) return body;
        return integral(body);
    }
    case Op::Neg:
    case Op::Add:
    case Op::Sub: {
        std::vector<Monomial> terms;
        if (e.op() == Op::Neg) {
            flatten_sum(simplify(e.arg()), -1.0, terms);
        } else {
            flatten_sum(simplify(e.lhs()), 1.0, terms);
            flatten_sum(simplify(e.rhs()), e.op() == Op::Add ? 1.0 : -1.0, terms);
        }
        return build_sum(std::move(terms));
    }
    case Op::Mul: {
        Monomial m;
        flatten_product(simplify(e.lhs()), m);
        flatten_product(simplify(e.rhs()), m);
        return monomial_expr(m.coef, m.factors);
    }
    case Op::Div: {
        Expr num = simplify(e.lhs());
        Expr den = simplify(e.rhs());
        if (den.is_const()) {
            if (den.value() == 0.0) return num / den;
            Monomial m;
            flatten_product(num, m);
            m.coef /= den.value();
            return monomial_expr(m.coef, m.factors);
        }
        if (num.is_const(0.0)) return constant(0.0);
        Monomial n, d;
        flatten_product(num, n);
        flatten_product(den, d);
        Expr quotient = product_of(n.factors) / product_of(d.factors);
        return monomial_expr(n.coef / d.coef, {quotient});
    }
    case Op::Pow: {
        Expr base = simplify(e.lhs());
        Expr ex = simplify(e.rhs());
        if (ex.is_const(0.0)) return constant(1.0);
        if (ex.is_const(1.0)) return base;
        if (base.is_const(1.0)) return constant(1.0);
        if (base.is_const() && ex.is_const()) {
            try {
                return constant(evaluate(pow(base, ex), VarBinding{}));
            } catch (const EvalError&) {
            }
        }
        return pow(base, ex);
    }
    default: return fold_unary(e.op(), simplify(e.arg()));
    }
}

/// True iff no symbol of `vars` appears in simplify(e).
inline bool is_constant_in(const Expr& e, const std::set<std::string>& vars) {
    for (const auto& v : free_vars(simplify(e)))
        if (vars.count(v)) return false;
    return true;
}

}  // namespace lpvembed
