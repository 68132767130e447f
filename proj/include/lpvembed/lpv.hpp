#pragma once

// Affine LPV state-space models  xi x = A(p) x + B(p) u + V,
// y = C(p) x + D(p) u + W  with  p = eta(x, u), built from a factorized
// system by 'element' or 'factor' extraction.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvembed/eval.hpp"
#include "lpvembed/expr.hpp"
#include "lpvembed/factorize.hpp"
#include "lpvembed/model.hpp"
#include "lpvembed/simplify.hpp"

namespace lpvembed {

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class Extraction { Element, Factor };

inline const char* to_string(Extraction e) { return e == Extraction::Element ? "element" : "factor"; }

/// p = eta(x, u); one expression per scheduling variable.
struct SchedulingMap {
    std::vector<Expr> entries;
    QuadOptions quad;

    int np() const { return static_cast<int>(entries.size()); }

    /// (x, u) symbols each p_i actually depends on.
    std::vector<std::vector<std::string>> footprint() const {
        std::vector<std::vector<std::string>> out;
        for (const auto& e : entries) {
            auto vars = free_vars(e);
            out.emplace_back(vars.begin(), vars.end());
        }
        return out;
    }

    Eigen::VectorXd eval(const VarBinding& b, EvalContext& ctx) const {
        Eigen::VectorXd p(np());
        for (int i = 0; i < np(); ++i) {
            try {
                p[i] = evaluate(entries[static_cast<std::size_t>(i)], b, ctx);
            } catch (const EvalError& e) {
                throw EvalError("scheduling variable p" + std::to_string(i + 1) + ": " + e.what());
            }
        }
        return p;
    }
};

/// Affine matrix family M(p) = M0 + sum_i p_i M_i.
struct AffineMatrix {
    std::vector<Eigen::MatrixXd> coeffs;  // coeffs[0] = M0, coeffs[i] = M_i

    Eigen::MatrixXd at(const Eigen::VectorXd& p) const {
        if (p.size() + 1 != static_cast<Eigen::Index>(coeffs.size()))
            throw DimensionError("scheduling vector has length " + std::to_string(p.size()) + ", expected " +
                                 std::to_string(coeffs.size() - 1));
        Eigen::MatrixXd M = coeffs.front();
        for (Eigen::Index i = 0; i < p.size(); ++i) M += p[i] * coeffs[static_cast<std::size_t>(i + 1)];
        return M;
    }
};

struct LtiMatrices {
    Eigen::MatrixXd A, B, C, D;
};

struct RangeBox {
    std::vector<Interval> raw;      // grid min / max
    std::vector<Interval> widened;  // reported, with safety margin
    int grid_per_dim = 0;
    Box sampled_box;
};

struct Provenance {
    std::string source;
    IntegrationMode integration = IntegrationMode::Analytic;
    Extraction extraction = Extraction::Factor;
    Anchor anchor;
    std::vector<std::string> warnings;
};

struct LpvssModel {
    int nx = 0, nu = 0, ny = 0, np = 0;
    AffineMatrix A, B, C, D;
    Eigen::VectorXd V, W;
    /// Operating point; the model acts on deviations x - x_bar, u - u_bar.
    Anchor anchor;
    TimeDomain time;
    std::optional<RangeBox> range;
    Provenance provenance;

    Eigen::VectorXd state_eq(const LtiMatrices& M, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return M.A * (x - anchor.x_bar) + M.B * (u - anchor.u_bar) + V;
    }
    Eigen::VectorXd output_eq(const LtiMatrices& M, const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        return M.C * (x - anchor.x_bar) + M.D * (u - anchor.u_bar) + W;
    }

    void check() const {
        auto dims = [&](const AffineMatrix& M, int r, int c, const char* tag) {
            if (static_cast<int>(M.coeffs.size()) != np + 1)
                throw DimensionError(std::string(tag) + " has " + std::to_string(M.coeffs.size()) +
                                     " coefficient matrices, expected np + 1");
            for (const auto& m : M.coeffs)
                if (m.rows() != r || m.cols() != c) throw DimensionError(std::string(tag) + " coefficient has wrong shape");
        };
        dims(A, nx, nx, "A");
        dims(B, nx, nu, "B");
        dims(C, ny, nx, "C");
        dims(D, ny, nu, "D");
        if (V.size() != nx || W.size() != ny) throw DimensionError("offset length mismatch");
        if (anchor.x_bar.size() != nx || anchor.u_bar.size() != nu) throw DimensionError("anchor length mismatch");
    }
};

inline LtiMatrices eval_lpvss(const LpvssModel& m, const Eigen::VectorXd& p) {
    if (p.size() != m.np)
        throw DimensionError("p has length " + std::to_string(p.size()) + ", model has np = " + std::to_string(m.np));
    return {m.A.at(p), m.B.at(p), m.C.at(p), m.D.at(p)};
}

inline Eigen::VectorXd eval_sched(const SchedulingMap& sm, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    EvalContext ctx(sm.quad);
    return sm.eval(bind_xu(x, u), ctx);
}

struct LpvEmbedding {
    LpvssModel model;
    SchedulingMap map;
};

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

namespace detail {

class SchedulingBuilder {
public:
    /// Index (1-based) of `e` among the scheduling entries, adding it if new.
    int index_of(const Expr& e) {
        for (std::size_t i = 0; i < entries_.size(); ++i)
            if (structurally_equal(entries_[i], e)) return static_cast<int>(i) + 1;
        entries_.push_back(e);
        return static_cast<int>(entries_.size());
    }
    const std::vector<Expr>& entries() const { return entries_; }

private:
    std::vector<Expr> entries_;
};

struct Contribution {
    MatrixTag tag;
    int row, col;
    int p;  // 0 = constant part
    double coef;
};

inline bool is_xu_constant(const Expr& e) { return free_vars(e).empty(); }

}  // namespace detail

inline LpvEmbedding extract(const FactorizedSystem& fs, Extraction mode, const TimeDomain& time = {}) {
    detail::SchedulingBuilder sched;
    std::vector<detail::Contribution> contribs;

    for (MatrixTag tag : {MatrixTag::A, MatrixTag::B, MatrixTag::C, MatrixTag::D}) {
        const MatrixFunction& mf = fs.matrix(tag);
        for (int i = 0; i < mf.rows; ++i) {
            for (int j = 0; j < mf.cols; ++j) {
                const Expr e = simplify(mf(i, j));
                if (detail::is_xu_constant(e)) {
                    EvalContext ctx(mf.quad);
                    contribs.push_back({tag, i, j, 0, evaluate(e, VarBinding{}, ctx)});
                    continue;
                }
                if (mode == Extraction::Element) {
                    contribs.push_back({tag, i, j, sched.index_of(e), 1.0});
                    continue;
                }
                std::vector<Monomial> terms;
                detail::flatten_sum(e, 1.0, terms);
                for (const auto& t : terms) {
                    if (t.factors.empty()) {
                        contribs.push_back({tag, i, j, 0, t.coef});
                        continue;
                    }
                    Expr factor = detail::product_of(t.factors);
                    if (detail::is_xu_constant(factor)) {
                        EvalContext ctx(mf.quad);
                        contribs.push_back({tag, i, j, 0, t.coef * evaluate(factor, VarBinding{}, ctx)});
                    } else {
                        contribs.push_back({tag, i, j, sched.index_of(factor), t.coef});
                    }
                }
            }
        }
    }

    LpvEmbedding out;
    out.map.entries = sched.entries();
    out.map.quad = fs.A_bar.quad;
    LpvssModel& m = out.model;
    m.nx = fs.A_bar.rows;
    m.nu = fs.B_bar.cols;
    m.ny = fs.C_bar.rows;
    m.np = out.map.np();
    m.time = time;
    m.V = fs.V;
    m.W = fs.W;
    m.provenance.integration = fs.A_bar.mode;
    m.provenance.extraction = mode;
    m.anchor = fs.anchor;
    m.provenance.anchor = fs.anchor;
    for (const auto& w : fs.warnings) m.provenance.warnings.push_back(w.message());

    auto family = [&](AffineMatrix& M, int r, int c) {
        M.coeffs.assign(static_cast<std::size_t>(m.np + 1), Eigen::MatrixXd::Zero(r, c));
    };
    family(m.A, m.nx, m.nx);
    family(m.B, m.nx, m.nu);
    family(m.C, m.ny, m.nx);
    family(m.D, m.ny, m.nu);
    for (const auto& c : contribs) {
        AffineMatrix& M = c.tag == MatrixTag::A ? m.A : c.tag == MatrixTag::B ? m.B : c.tag == MatrixTag::C ? m.C : m.D;
        M.coeffs[static_cast<std::size_t>(c.p)](c.row, c.col) += c.coef;
    }
    return out;
}

/// One scheduling variable per non-constant matrix entry.
inline LpvEmbedding extract_element(const FactorizedSystem& fs, const TimeDomain& time = {}) {
    return extract(fs, Extraction::Element, time);
}

/// Entries split into (constant coefficient) x (nonlinear factor) terms;
/// identical factors share a scheduling variable.
inline LpvEmbedding extract_factor(const FactorizedSystem& fs, const TimeDomain& time = {}) {
    return extract(fs, Extraction::Factor, time);
}

// ---------------------------------------------------------------------------
// Scheduling range estimation
// ---------------------------------------------------------------------------

struct RangeOptions {
    int grid_per_dim = 10001;
    double grid_budget = 1e7;
    /// Relative widening applied to each endpoint's magnitude.
    double widening = 0.005;
};

inline Interval widen(const Interval& iv, double rel) {
    return {iv.lo - rel * std::abs(iv.lo), iv.hi + rel * std::abs(iv.hi)};
}

namespace detail {

/// Interval of the (x, u) symbol `name` in `box`.
inline Interval box_interval(const Box& box, const std::string& name) {
    if (auto i = positional_index(name, 'x'); i && *i <= static_cast<int>(box.x.size())) return box.x[*i - 1];
    if (auto i = positional_index(name, 'u'); i && *i <= static_cast<int>(box.u.size())) return box.u[*i - 1];
    throw DimensionError("box does not cover symbol '" + name + "'");
}

inline VarBinding box_midpoint(const Box& box) {
    VarBinding b;
    for (std::size_t i = 0; i < box.x.size(); ++i) b.set(state_name(static_cast<int>(i)), box.x[i].mid());
    for (std::size_t i = 0; i < box.u.size(); ++i) b.set(input_name(static_cast<int>(i)), box.u[i].mid());
    return b;
}

}  // namespace detail

/// Dense-grid min/max of each p_i over its dependency footprint; the other
/// components stay at the box midpoint.
inline RangeBox estimate_range(const SchedulingMap& sm, const Box& box, const RangeOptions& opts = {}) {
    if (opts.grid_per_dim < 2) throw std::invalid_argument("grid_per_dim must be at least 2");
    for (const auto& iv : box.x)
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) throw std::invalid_argument("invalid box");
    for (const auto& iv : box.u)
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi) throw std::invalid_argument("invalid box");

    RangeBox rb;
    rb.grid_per_dim = opts.grid_per_dim;
    rb.sampled_box = box;
    const auto footprint = sm.footprint();
    const int n = opts.grid_per_dim;

    for (int k = 0; k < sm.np(); ++k) {
        const auto& vars = footprint[static_cast<std::size_t>(k)];
        const double points = std::pow(static_cast<double>(n), static_cast<double>(vars.size()));
        if (points > opts.grid_budget)
            throw std::invalid_argument("p" + std::to_string(k + 1) + " depends on " + std::to_string(vars.size()) +
                                        " variables; a grid of " + std::to_string(n) + " per dimension needs " +
                                        format_number(points) + " points (budget " + format_number(opts.grid_budget) +
                                        "), use a coarser grid");
        std::vector<Interval> ivs;
        for (const auto& v : vars) ivs.push_back(detail::box_interval(box, v));

        VarBinding b = detail::box_midpoint(box);
        EvalContext ctx(sm.quad);
        const Expr& e = sm.entries[static_cast<std::size_t>(k)];
        Interval out{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        std::vector<int> idx(vars.size(), 0);
        for (;;) {
            for (std::size_t d = 0; d < vars.size(); ++d) {
                const double s = static_cast<double>(idx[d]) / (n - 1);
                b.set(vars[d], idx[d] == n - 1 ? ivs[d].hi : ivs[d].lo + s * (ivs[d].hi - ivs[d].lo));
            }
            double v;
            try {
                v = evaluate(e, b, ctx);
            } catch (const EvalError& err) {
                throw EvalError("scheduling variable p" + std::to_string(k + 1) + ": " + err.what());
            }
            ctx.clear();
            out.lo = std::min(out.lo, v);
            out.hi = std::max(out.hi, v);
            std::size_t d = 0;
            while (d < idx.size() && ++idx[d] == n) idx[d++] = 0;
            if (d == idx.size()) break;
        }
        rb.raw.push_back(out);
        rb.widened.push_back(widen(out, opts.widening));
    }
    return rb;
}

// ---------------------------------------------------------------------------
// Embedding verification
// ---------------------------------------------------------------------------

struct EmbeddingReport {
    int samples = 0;
    double state_residual = 0.0;
    double output_residual = 0.0;
    Eigen::VectorXd worst_state_x, worst_state_u;
    Eigen::VectorXd worst_output_x, worst_output_u;

    double max_residual() const { return std::max(state_residual, output_residual); }
};

/// Max over random samples of |A(eta)(x-xb) + B(eta)(u-ub) + V - f(x,u)|_inf and the
/// output analogue. The box midpoint is always the first sample.
inline EmbeddingReport verify_embedding(const NlssModel& model, const LpvssModel& m, const SchedulingMap& sm,
                                        int samples, const Box& box, std::uint64_t seed = 0x5eed) {
    if (m.nx != model.nx || m.nu != model.nu || m.ny != model.ny || m.np != sm.np())
        throw DimensionError("LPV model, scheduling map and nonlinear model dimensions disagree");
    if (static_cast<int>(box.x.size()) != model.nx || static_cast<int>(box.u.size()) != model.nu)
        throw DimensionError("box dimensions do not match the model");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto draw = [&](const std::vector<Interval>& ivs, bool mid) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(ivs.size()));
        for (std::size_t i = 0; i < ivs.size(); ++i)
            v[static_cast<Eigen::Index>(i)] = mid ? ivs[i].mid() : ivs[i].lo + unit(rng) * (ivs[i].hi - ivs[i].lo);
        return v;
    };

    EmbeddingReport rep;
    rep.samples = samples;
    EvalContext ctx(sm.quad);
    for (int s = 0; s < samples; ++s) {
        const Eigen::VectorXd x = draw(box.x, s == 0);
        const Eigen::VectorXd u = draw(box.u, s == 0);
        ctx.clear();
        const Eigen::VectorXd p = sm.eval(bind_xu(x, u), ctx);
        const LtiMatrices M = eval_lpvss(m, p);
        const double rs = (m.state_eq(M, x, u) - model.eval_f(x, u)).lpNorm<Eigen::Infinity>();
        const double ro = (m.output_eq(M, x, u) - model.eval_h(x, u)).lpNorm<Eigen::Infinity>();
        if (s == 0 || rs > rep.state_residual) {
            rep.state_residual = rs;
            rep.worst_state_x = x;
            rep.worst_state_u = u;
        }
        if (s == 0 || ro > rep.output_residual) {
            rep.output_residual = ro;
            rep.worst_output_x = x;
            rep.worst_output_u = u;
        }
    }
    return rep;
}

}  // namespace lpvembed
