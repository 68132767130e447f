#pragma once

// Exact factorization of f and h along the line from the anchor (xb, ub) to
// (x, u):
//
//   f(x,u) - f(xb,ub) = Abar(x,u) (x - xb) + Bbar(x,u) (u - ub)
//   h(x,u) - h(xb,ub) = Cbar(x,u) (x - xb) + Dbar(x,u) (u - ub)
//
// with Abar = int_0^1 df/dx(xb + l (x - xb), ub + l (u - ub)) dl etc.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "lpvembed/diff.hpp"
#include "lpvembed/eval.hpp"
#include "lpvembed/expr.hpp"
#include "lpvembed/model.hpp"
#include "lpvembed/simplify.hpp"

namespace lpvembed {

enum class IntegrationMode { Analytic, Numeric };

inline const char* to_string(IntegrationMode m) { return m == IntegrationMode::Analytic ? "analytic" : "numeric"; }

using ExprMatrix = std::vector<std::vector<Expr>>;

/// Entry (i, j) = simplify(d fvec[i] / d wrt[j]).
inline ExprMatrix jacobian(const std::vector<Expr>& fvec, const std::vector<std::string>& wrt) {
    ExprMatrix J(fvec.size(), std::vector<Expr>(wrt.size()));
    for (std::size_t i = 0; i < fvec.size(); ++i)
        for (std::size_t j = 0; j < wrt.size(); ++j) J[i][j] = differentiate(fvec[i], wrt[j]);
    return J;
}

/// Substitute x_j <- xb_j + lambda (x_j - xb_j) and u_j likewise.
inline Expr line_substitute(const Expr& e, const Anchor& anchor) {
    auto line = [](const std::string& name, double base) {
        Expr v = variable(name);
        if (base == 0.0) return lambda_var() * v;
        return constant(base) + lambda_var() * (v - constant(base));
    };
    return substitute(e, [&](const std::string& name) -> Expr {
        if (auto i = detail::positional_index(name, 'x'); i && *i <= anchor.x_bar.size())
            return line(name, anchor.x_bar[*i - 1]);
        if (auto i = detail::positional_index(name, 'u'); i && *i <= anchor.u_bar.size())
            return line(name, anchor.u_bar[*i - 1]);
        return Expr{};
    });
}

// ---------------------------------------------------------------------------
// Analytic integration over lambda in [0, 1]
// ---------------------------------------------------------------------------

namespace detail {

using Poly = std::vector<Expr>;  // coefficients of lambda^k, lambda-free

inline Poly poly_add(const Poly& a, const Poly& b, double sign = 1.0) {
    Poly r(std::max(a.size(), b.size()), constant(0.0));
    for (std::size_t k = 0; k < a.size(); ++k) r[k] = a[k];
    for (std::size_t k = 0; k < b.size(); ++k)
        r[k] = simplify(sign > 0 ? r[k] + b[k] : r[k] - b[k]);
    return r;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    Poly r(a.size() + b.size() - 1, constant(0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = simplify(r[i + j] + a[i] * b[j]);
    return r;
}

inline constexpr std::size_t kMaxPolyDegree = 24;

/// Coefficients of e as a polynomial in lambda, or nullopt.
inline std::optional<Poly> as_lambda_poly(const Expr& e) {
    if (!contains_lambda(e)) return Poly{e};
    switch (e.op()) {
    case Op::Lambda: return Poly{constant(0.0), constant(1.0)};
    case Op::Neg: {
        auto a = as_lambda_poly(e.arg());
        if (!a) return std::nullopt;
        for (auto& c : *a) c = simplify(-c);
        return a;
    }
    case Op::Add:
    case Op::Sub: {
        auto a = as_lambda_poly(e.lhs());
        auto b = as_lambda_poly(e.rhs());
        if (!a || !b) return std::nullopt;
        return poly_add(*a, *b, e.op() == Op::Add ? 1.0 : -1.0);
    }
    case Op::Mul: {
        auto a = as_lambda_poly(e.lhs());
        auto b = as_lambda_poly(e.rhs());
        if (!a || !b || a->size() + b->size() - 2 > kMaxPolyDegree) return std::nullopt;
        return poly_mul(*a, *b);
    }
    case Op::Div: {
        if (contains_lambda(e.rhs())) return std::nullopt;
        auto a = as_lambda_poly(e.lhs());
        if (!a) return std::nullopt;
        for (auto& c : *a) c = simplify(c / e.rhs());
        return a;
    }
    case Op::Pow: {
        const Expr& ex = e.rhs();
        if (!ex.is_const() || ex.value() < 0 || ex.value() != std::floor(ex.value())) return std::nullopt;
        auto base = as_lambda_poly(e.lhs());
        if (!base) return std::nullopt;
        const auto n = static_cast<std::size_t>(ex.value());
        if (n * (base->size() - 1) > kMaxPolyDegree) return std::nullopt;
        Poly r{constant(1.0)};
        for (std::size_t k = 0; k < n; ++k) r = poly_mul(r, *base);
        return r;
    }
    default: return std::nullopt;
    }
}

inline Expr half(const Expr& e) { return simplify(constant(0.5) * e); }

/// Rules for a single transcendental factor with argument beta + alpha*lambda.
inline std::optional<Expr> integrate_transcendental(const Expr& e) {
    if (e.op() != Op::Sin && e.op() != Op::Cos && e.op() != Op::Exp) return std::nullopt;
    auto arg = as_lambda_poly(e.arg());
    if (!arg || arg->size() != 2) return std::nullopt;
    const Expr beta = (*arg)[0];
    const Expr alpha = (*arg)[1];
    const bool centred = beta.is_const(0.0);
    switch (e.op()) {
    case Op::Cos:
        // (sin(b + a) - sin(b)) / a = cos(b + a/2) sinc(a/2)
        if (centred) return sinc(alpha);
        return simplify(cos(beta + half(alpha)) * sinc(half(alpha)));
    case Op::Sin:
        // (cos(b) - cos(b + a)) / a = sin(b + a/2) sinc(a/2)
        return simplify(sin(simplify(beta + half(alpha))) * sinc(half(alpha)));
    case Op::Exp:
        if (centred) return expm1c(alpha);
        return simplify(exp(beta) * expm1c(alpha));
    default: return std::nullopt;
    }
}

inline std::optional<Expr> integrate_rules(const Expr& e) {
    if (!contains_lambda(e)) return e;
    if (contains_op(e, Op::Integral)) return std::nullopt;

    if (auto poly = as_lambda_poly(e)) {
        Expr acc = constant(0.0);
        for (std::size_t k = 0; k < poly->size(); ++k)
            acc = acc + constant(1.0 / static_cast<double>(k + 1)) * (*poly)[k];
        return simplify(acc);
    }

    switch (e.op()) {
    case Op::Add:
    case Op::Sub: {
        auto a = integrate_rules(e.lhs());
        auto b = integrate_rules(e.rhs());
        if (!a || !b) return std::nullopt;
        return simplify(e.op() == Op::Add ? *a + *b : *a - *b);
    }
    case Op::Neg: {
        auto a = integrate_rules(e.arg());
        if (!a) return std::nullopt;
        return simplify(-*a);
    }
    case Op::Mul: {
        Monomial m;
        flatten_product(e, m);
        std::vector<Expr> free, bound;
        for (const auto& f : m.factors) (contains_lambda(f) ? bound : free).push_back(f);
        if (bound.size() != 1) return std::nullopt;
        auto inner = integrate_rules(bound.front());
        if (!inner) return std::nullopt;
        free.push_back(*inner);
        return simplify(monomial_expr(m.coef, free));
    }
    case Op::Div: {
        if (contains_lambda(e.rhs())) return std::nullopt;
        auto a = integrate_rules(e.lhs());
        if (!a) return std::nullopt;
        return simplify(*a / e.rhs());
    }
    default: return integrate_transcendental(e);
    }
}

}  // namespace detail

/// Closed-form integral over lambda in [0, 1] from a fixed rule table, or
/// nullopt (not integrable by the table). The result contains no lambda.
inline std::optional<Expr> integrate_analytic(const Expr& e) { return detail::integrate_rules(simplify(e)); }

/// Wrap `e` into one deferred-quadrature node. A single-term integrand keeps
/// its numeric coefficient outside the node.
inline Expr defer_integration(const Expr& e) {
    Expr s = simplify(e);
    if (!contains_lambda(s)) return s;
    std::vector<Monomial> terms;
    detail::flatten_sum(s, 1.0, terms);
    if (terms.size() == 1) return detail::monomial_expr(terms[0].coef, {integral(detail::product_of(terms[0].factors))});
    return integral(s);
}

// ---------------------------------------------------------------------------

enum class MatrixTag { A, B, C, D };

inline const char* to_string(MatrixTag t) {
    switch (t) {
    case MatrixTag::A: return "A";
    case MatrixTag::B: return "B";
    case MatrixTag::C: return "C";
    default: return "D";
    }
}

/// Matrix of expressions in (x, u). Deferred entries hold integral(...) nodes.
struct MatrixFunction {
    MatrixTag tag = MatrixTag::A;
    IntegrationMode mode = IntegrationMode::Analytic;
    QuadOptions quad;
    int rows = 0;
    int cols = 0;
    std::vector<Expr> entries;  // row-major

    const Expr& operator()(int i, int j) const { return entries[static_cast<std::size_t>(i * cols + j)]; }
    Expr& operator()(int i, int j) { return entries[static_cast<std::size_t>(i * cols + j)]; }

    bool is_deferred(int i, int j) const { return contains_op((*this)(i, j), Op::Integral); }

    Eigen::MatrixXd evaluate(const VarBinding& b, EvalContext& ctx) const {
        Eigen::MatrixXd M(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) M(i, j) = lpvembed::evaluate((*this)(i, j), b, ctx);
        return M;
    }
    Eigen::MatrixXd evaluate(const VarBinding& b) const {
        EvalContext ctx(quad);
        return evaluate(b, ctx);
    }
};

struct FactorizeWarning {
    MatrixTag tag;
    int row;
    int col;
    std::string integrand;

    std::string message() const {
        return std::string(to_string(tag)) + "(" + std::to_string(row + 1) + "," + std::to_string(col + 1) +
               "): no closed form for integral of '" + integrand + "', using quadrature";
    }
};

struct FactorizedSystem {
    MatrixFunction A_bar, B_bar, C_bar, D_bar;
    Eigen::VectorXd V;  // f(xb, ub)
    Eigen::VectorXd W;  // h(xb, ub)
    Anchor anchor;
    std::vector<FactorizeWarning> warnings;

    const MatrixFunction& matrix(MatrixTag t) const {
        switch (t) {
        case MatrixTag::A: return A_bar;
        case MatrixTag::B: return B_bar;
        case MatrixTag::C: return C_bar;
        default: return D_bar;
        }
    }

    /// Abar (x - xb) + Bbar (u - ub) + V, the reconstruction of f.
    Eigen::VectorXd reconstruct_f(const Eigen::VectorXd& x, const Eigen::VectorXd& u, EvalContext& ctx) const {
        VarBinding b = bind_xu(x, u);
        return A_bar.evaluate(b, ctx) * (x - anchor.x_bar) + B_bar.evaluate(b, ctx) * (u - anchor.u_bar) + V;
    }
    Eigen::VectorXd reconstruct_h(const Eigen::VectorXd& x, const Eigen::VectorXd& u, EvalContext& ctx) const {
        VarBinding b = bind_xu(x, u);
        return C_bar.evaluate(b, ctx) * (x - anchor.x_bar) + D_bar.evaluate(b, ctx) * (u - anchor.u_bar) + W;
    }
};

struct FactorizeOptions {
    IntegrationMode mode = IntegrationMode::Analytic;
    QuadOptions quad;
};

namespace detail {

inline MatrixFunction factor_block(const std::vector<Expr>& fvec, const std::vector<std::string>& wrt,
                                   const Anchor& anchor, MatrixTag tag, const FactorizeOptions& opts,
                                   std::vector<FactorizeWarning>& warnings) {
    MatrixFunction mf;
    mf.tag = tag;
    mf.mode = opts.mode;
    mf.quad = opts.quad;
    mf.rows = static_cast<int>(fvec.size());
    mf.cols = static_cast<int>(wrt.size());
    const ExprMatrix J = jacobian(fvec, wrt);
    for (int i = 0; i < mf.rows; ++i) {
        for (int j = 0; j < mf.cols; ++j) {
            Expr on_line = simplify(line_substitute(J[i][j], anchor));
            if (opts.mode == IntegrationMode::Analytic) {
                if (auto closed = integrate_analytic(on_line)) {
                    mf.entries.push_back(*closed);
                    continue;
                }
                warnings.push_back({tag, i, j, to_string(on_line)});
            }
            mf.entries.push_back(defer_integration(on_line));
        }
    }
    return mf;
}

}  // namespace detail

/// Throws ModelError (via validate) for non-differentiable entries.
inline FactorizedSystem factorize(const NlssModel& model, const Anchor& anchor, const FactorizeOptions& opts = {}) {
    model.validate();
    if (anchor.x_bar.size() != model.nx || anchor.u_bar.size() != model.nu)
        throw ModelError("anchor dimensions do not match the model");
    if (!anchor.x_bar.allFinite() || !anchor.u_bar.allFinite()) throw ModelError("anchor must be finite");

    FactorizedSystem fs;
    fs.anchor = anchor;
    const auto xs = model.state_names();
    const auto us = model.input_names();
    fs.A_bar = detail::factor_block(model.f, xs, anchor, MatrixTag::A, opts, fs.warnings);
    fs.B_bar = detail::factor_block(model.f, us, anchor, MatrixTag::B, opts, fs.warnings);
    fs.C_bar = detail::factor_block(model.h, xs, anchor, MatrixTag::C, opts, fs.warnings);
    fs.D_bar = detail::factor_block(model.h, us, anchor, MatrixTag::D, opts, fs.warnings);
    fs.V = model.eval_f(anchor.x_bar, anchor.u_bar);
    fs.W = model.eval_h(anchor.x_bar, anchor.u_bar);
    return fs;
}

inline FactorizedSystem factorize(const NlssModel& model, const FactorizeOptions& opts = {}) {
    return factorize(model, model.anchor.value_or(Anchor::origin(model.nx, model.nu)), opts);
}

}  // namespace lpvembed
