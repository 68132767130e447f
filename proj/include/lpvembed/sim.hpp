#pragma once

// Time-domain simulation of nonlinear models and self-scheduled LPV models.
//
// Continuous time: Dormand-Prince 5(4) with standard step-size control and
// 4th-order dense output, or classic fixed-step RK4. Discrete time: direct
// iteration of the state map.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "lpvembed/eval.hpp"
#include "lpvembed/expr.hpp"
#include "lpvembed/lpv.hpp"
#include "lpvembed/model.hpp"

namespace lpvembed {

class SimulationError : public std::runtime_error {
public:
    SimulationError(const std::string& msg, double t)
        : std::runtime_error(msg + " at t = " + format_number(t)), time_(t) {}
    double time() const { return time_; }

private:
    double time_;
};

enum class SolverMethod { DormandPrince45, RK4, Discrete };

inline const char* to_string(SolverMethod m) {
    switch (m) {
    case SolverMethod::DormandPrince45: return "rk45";
    case SolverMethod::RK4: return "rk4";
    default: return "discrete";
    }
}

struct SolverConfig {
    SolverMethod method = SolverMethod::DormandPrince45;
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    /// Spacing of the recorded time grid (continuous time).
    double output_dt = 0.01;
    /// RK4 step; 0 means one step per output interval.
    double fixed_step = 0.0;
    long max_steps = 10'000'000;

    void check() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("solver tolerances must be positive");
        if (!(output_dt > 0.0)) throw std::invalid_argument("output grid spacing must be positive");
        if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
        if (fixed_step < 0.0) throw std::invalid_argument("fixed_step must be non-negative");
    }
};

/// Input u(t): zero, closed-form expressions in t, or a zero-order-hold table.
class InputSignal {
public:
    static InputSignal zero(int nu) {
        InputSignal s;
        s.nu_ = nu;
        return s;
    }

    static InputSignal expressions(std::vector<Expr> exprs) {
        for (const auto& e : exprs)
            for (const auto& v : free_vars(e))
                if (v != "t") throw std::invalid_argument("input expression may only depend on t, found '" + v + "'");
        InputSignal s;
        s.nu_ = static_cast<int>(exprs.size());
        s.exprs_ = std::move(exprs);
        return s;
    }

    /// values: one row per sample time. Held constant until the next sample.
    static InputSignal zoh(std::vector<double> times, Eigen::MatrixXd values) {
        if (times.empty() || static_cast<Eigen::Index>(times.size()) != values.rows())
            throw std::invalid_argument("ZOH table needs one row per sample time");
        if (!std::is_sorted(times.begin(), times.end()) ||
            std::adjacent_find(times.begin(), times.end()) != times.end())
            throw std::invalid_argument("ZOH sample times must be strictly increasing");
        InputSignal s;
        s.nu_ = static_cast<int>(values.cols());
        s.times_ = std::move(times);
        s.values_ = std::move(values);
        return s;
    }

    int nu() const { return nu_; }

    Eigen::VectorXd at(double t) const {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(nu_);
        if (!exprs_.empty()) {
            VarBinding b{{"t", t}};
            for (int i = 0; i < nu_; ++i) u[i] = evaluate(exprs_[static_cast<std::size_t>(i)], b);
        } else if (!times_.empty()) {
            auto it = std::upper_bound(times_.begin(), times_.end(), t);
            const auto row = it == times_.begin() ? 0 : std::distance(times_.begin(), it) - 1;
            u = values_.row(row).transpose();
        }
        return u;
    }

private:
    int nu_ = 0;
    std::vector<Expr> exprs_;
    std::vector<double> times_;
    Eigen::MatrixXd values_;
};

/// Sampled signals on a shared, strictly increasing time grid. One row per
/// time sample.
struct Trajectory {
    std::vector<double> t;
    Eigen::MatrixXd x, y, u, p;

    std::size_t size() const { return t.size(); }
};

// ---------------------------------------------------------------------------
// Integrators
// ---------------------------------------------------------------------------

using Rhs = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;
using Recorder = std::function<void(double, const Eigen::VectorXd&)>;

inline std::vector<double> output_grid(double t_end, double dt) {
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be finite and non-negative");
    std::vector<double> grid;
    const auto n = static_cast<long>(std::floor(t_end / dt + 1e-9));
    for (long k = 0; k <= n; ++k) grid.push_back(std::min(static_cast<double>(k) * dt, t_end));
    if (t_end - grid.back() > 1e-12 * std::max(1.0, t_end)) grid.push_back(t_end);
    else grid.back() = t_end;
    return grid;
}

namespace detail {

inline Eigen::VectorXd checked(const Rhs& rhs, double t, const Eigen::VectorXd& x) {
    Eigen::VectorXd d = rhs(t, x);
    if (!d.allFinite()) throw SimulationError("non-finite derivative", t);
    return d;
}

struct Dopri5 {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                            a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                            d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                            d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

inline double scaled_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                          const SolverConfig& cfg) {
    if (v.size() == 0) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
        sum += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(sum / static_cast<double>(v.size()));
}

inline double initial_step(const Rhs& rhs, const Eigen::VectorXd& x0, const Eigen::VectorXd& f0, double span,
                           const SolverConfig& cfg) {
    const double d0 = scaled_norm(x0, x0, x0, cfg);
    const double d1 = scaled_norm(f0, x0, x0, cfg);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min({h0, span, cfg.max_step});
    const Eigen::VectorXd f1 = checked(rhs, h0, x0 + h0 * f0);
    const double d2 = scaled_norm(f1 - f0, x0, x0, cfg) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
    return std::min({100.0 * h0, h1, span, cfg.max_step});
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4); `record` is called at every grid time with
/// the dense-output state.
inline void integrate_dopri45(const Rhs& rhs, const Eigen::VectorXd& x0, const std::vector<double>& grid,
                              const SolverConfig& cfg, const Recorder& record) {
    using K = detail::Dopri5;
    double t = grid.front();
    const double t_end = grid.back();
    Eigen::VectorXd x = x0;
    std::size_t next = 0;
    record(grid[next++], x);
    if (next == grid.size()) return;

    Eigen::VectorXd k1 = detail::checked(rhs, t, x);
    double h = detail::initial_step(rhs, x, k1, t_end - t, cfg);
    bool rejected = false;
    long steps = 0;

    while (next < grid.size()) {
        if (++steps > cfg.max_steps) throw SimulationError("maximum number of steps exceeded", t);
        if (h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t)))
            throw SimulationError("step size underflow", t);
        const bool last = t + h >= t_end;
        const double hs = last ? t_end - t : h;

        const Eigen::VectorXd k2 = detail::checked(rhs, t + K::c2 * hs, x + hs * (K::a21 * k1));
        const Eigen::VectorXd k3 = detail::checked(rhs, t + K::c3 * hs, x + hs * (K::a31 * k1 + K::a32 * k2));
        const Eigen::VectorXd k4 =
            detail::checked(rhs, t + K::c4 * hs, x + hs * (K::a41 * k1 + K::a42 * k2 + K::a43 * k3));
        const Eigen::VectorXd k5 =
            detail::checked(rhs, t + K::c5 * hs, x + hs * (K::a51 * k1 + K::a52 * k2 + K::a53 * k3 + K::a54 * k4));
        const Eigen::VectorXd k6 = detail::checked(
            rhs, t + hs, x + hs * (K::a61 * k1 + K::a62 * k2 + K::a63 * k3 + K::a64 * k4 + K::a65 * k5));
        const Eigen::VectorXd x_new =
            x + hs * (K::a71 * k1 + K::a73 * k3 + K::a74 * k4 + K::a75 * k5 + K::a76 * k6);
        const double t_new = last ? t_end : t + hs;
        const Eigen::VectorXd k7 = detail::checked(rhs, t_new, x_new);

        const Eigen::VectorXd err = hs * (K::e1 * k1 + K::e3 * k3 + K::e4 * k4 + K::e5 * k5 + K::e6 * k6 + K::e7 * k7);
        const double en = detail::scaled_norm(err, x, x_new, cfg);

        if (en <= 1.0) {
            // Dense output on [t, t_new].
            const Eigen::VectorXd ydiff = x_new - x;
            const Eigen::VectorXd bspl = hs * k1 - ydiff;
            const Eigen::VectorXd r4 = ydiff - hs * k7 - bspl;
            const Eigen::VectorXd r5 =
                hs * (K::d1 * k1 + K::d3 * k3 + K::d4 * k4 + K::d5 * k5 + K::d6 * k6 + K::d7 * k7);
            while (next < grid.size() && (grid[next] <= t_new || last)) {
                const double tg = grid[next];
                if (tg == t_new) {
                    record(tg, x_new);
                } else {
                    const double th = (tg - t) / hs;
                    const double th1 = 1.0 - th;
                    record(tg, x + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5))));
                }
                ++next;
            }
            t = t_new;
            x = x_new;
            k1 = k7;
            double fac = en == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 10.0);
            if (rejected) fac = std::min(fac, 1.0);
            h = std::min(hs * fac, cfg.max_step);
            rejected = false;
        } else {
            h = hs * std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
            rejected = true;
        }
    }
}

/// Classic RK4; each output interval is split into equal steps no longer
/// than the configured step.
inline void integrate_rk4(const Rhs& rhs, const Eigen::VectorXd& x0, const std::vector<double>& grid,
                          const SolverConfig& cfg, const Recorder& record) {
    Eigen::VectorXd x = x0;
    record(grid.front(), x);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double t0 = grid[k - 1];
        const double span = grid[k] - t0;
        const double target = cfg.fixed_step > 0.0 ? cfg.fixed_step : span;
        const long n = std::max(1L, static_cast<long>(std::ceil(span / target - 1e-9)));
        const double h = span / static_cast<double>(n);
        for (long s = 0; s < n; ++s) {
            const double t = t0 + static_cast<double>(s) * h;
            const Eigen::VectorXd k1 = detail::checked(rhs, t, x);
            const Eigen::VectorXd k2 = detail::checked(rhs, t + 0.5 * h, x + 0.5 * h * k1);
            const Eigen::VectorXd k3 = detail::checked(rhs, t + 0.5 * h, x + 0.5 * h * k2);
            const Eigen::VectorXd k4 = detail::checked(rhs, t + h, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        record(grid[k], x);
    }
}

namespace detail {

/// state_map(t, x) -> next state; output(t, x) records. Steps of ts.
inline void iterate_discrete(const Rhs& state_map, const Eigen::VectorXd& x0, double t_end, double ts,
                             const Recorder& record) {
    const auto n = static_cast<long>(std::floor(t_end / ts + 1e-9));
    Eigen::VectorXd x = x0;
    for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * ts;
        record(t, x);
        if (k < n) {
            x = state_map(t, x);
            if (!x.allFinite()) throw SimulationError("non-finite state", t + ts);
        }
    }
}

struct Sampler {
    Trajectory traj;
    std::vector<Eigen::VectorXd> xs, ys, us, ps;

    void push(double t, Eigen::VectorXd x, Eigen::VectorXd y, Eigen::VectorXd u, Eigen::VectorXd p) {
        traj.t.push_back(t);
        xs.push_back(std::move(x));
        ys.push_back(std::move(y));
        us.push_back(std::move(u));
        ps.push_back(std::move(p));
    }

    static Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& rows, Eigen::Index cols) {
        Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) M.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        return M;
    }

    Trajectory finish(int nx, int ny, int nu, int np) {
        traj.x = stack(xs, nx);
        traj.y = stack(ys, ny);
        traj.u = stack(us, nu);
        traj.p = stack(ps, np);
        return std::move(traj);
    }
};

inline void run(bool discrete, double ts, const Rhs& rhs, const Eigen::VectorXd& x0, double t_end,
                const SolverConfig& cfg, const Recorder& record) {
    cfg.check();
    if (discrete) {
        if (cfg.method != SolverMethod::Discrete)
            throw std::invalid_argument("discrete-time model requires the discrete solver");
        if (!(t_end >= 0.0)) throw std::invalid_argument("t_end must be non-negative");
        iterate_discrete(rhs, x0, t_end, ts, record);
        return;
    }
    const auto grid = output_grid(t_end, cfg.output_dt);
    switch (cfg.method) {
    case SolverMethod::DormandPrince45: integrate_dopri45(rhs, x0, grid, cfg, record); return;
    case SolverMethod::RK4: integrate_rk4(rhs, x0, grid, cfg, record); return;
    default: throw std::invalid_argument("the discrete solver needs a discrete-time model");
    }
}

}  // namespace detail

/// Simulate xi x = f(x, u), y = h(x, u).
inline Trajectory simulate_nl(const NlssModel& model, const Eigen::VectorXd& x0, const InputSignal& input,
                              double t_end, const SolverConfig& cfg = {}) {
    if (x0.size() != model.nx) throw DimensionError("x0 has length " + std::to_string(x0.size()));
    if (input.nu() != model.nu) throw DimensionError("input has " + std::to_string(input.nu()) + " channels");
    auto rhs = [&](double t, const Eigen::VectorXd& x) {
        const Eigen::VectorXd u = input.at(t);
        try {
            return model.eval_f(x, u);
        } catch (const EvalError& e) {
            throw SimulationError(e.what(), t);
        }
    };
    detail::Sampler s;
    auto record = [&](double t, const Eigen::VectorXd& x) {
        const Eigen::VectorXd u = input.at(t);
        s.push(t, x, model.eval_h(x, u), u, Eigen::VectorXd(0));
    };
    detail::run(model.time.is_discrete(), model.time.step(), rhs, x0, t_end, cfg, record);
    return s.finish(model.nx, model.ny, model.nu, 0);
}

/// Self-scheduled LPV simulation: p = eta(x, u(t)) is recomputed at every
/// right-hand-side evaluation.
inline Trajectory simulate_lpv_self_scheduled(const LpvssModel& m, const SchedulingMap& sm, const Eigen::VectorXd& x0,
                                              const InputSignal& input, double t_end, const SolverConfig& cfg = {}) {
    m.check();
    if (sm.np() != m.np) throw DimensionError("scheduling map and model disagree on np");
    if (x0.size() != m.nx) throw DimensionError("x0 has length " + std::to_string(x0.size()));
    if (input.nu() != m.nu) throw DimensionError("input has " + std::to_string(input.nu()) + " channels");
    EvalContext ctx(sm.quad);
    auto schedule = [&](double t, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
        ctx.clear();
        try {
            return sm.eval(bind_xu(x, u), ctx);
        } catch (const EvalError& e) {
            throw SimulationError(e.what(), t);
        }
    };
    auto rhs = [&](double t, const Eigen::VectorXd& x) {
        const Eigen::VectorXd u = input.at(t);
        const Eigen::VectorXd p = schedule(t, x, u);
        return Eigen::VectorXd(m.state_eq(eval_lpvss(m, p), x, u));
    };
    detail::Sampler s;
    auto record = [&](double t, const Eigen::VectorXd& x) {
        const Eigen::VectorXd u = input.at(t);
        const Eigen::VectorXd p = schedule(t, x, u);
        s.push(t, x, m.output_eq(eval_lpvss(m, p), x, u), u, p);
    };
    detail::run(m.time.is_discrete(), m.time.step(), rhs, x0, t_end, cfg, record);
    return s.finish(m.nx, m.ny, m.nu, m.np);
}

// ---------------------------------------------------------------------------
// Metrics and export
// ---------------------------------------------------------------------------

enum class Channel { State, Output, Input, Scheduling };

/// Per-channel root-mean-square difference. Time grids must be identical.
inline std::vector<double> rmse(const Trajectory& a, const Trajectory& b, Channel channel = Channel::State) {
    if (a.t != b.t) throw DimensionError("trajectories are sampled on different time grids");
    auto pick = [channel](const Trajectory& tr) -> const Eigen::MatrixXd& {
        switch (channel) {
        case Channel::State: return tr.x;
        case Channel::Output: return tr.y;
        case Channel::Input: return tr.u;
        default: return tr.p;
        }
    };
    const Eigen::MatrixXd& A = pick(a);
    const Eigen::MatrixXd& B = pick(b);
    if (A.cols() != B.cols()) throw DimensionError("trajectories have different channel counts");
    std::vector<double> out;
    if (A.rows() == 0) return std::vector<double>(static_cast<std::size_t>(A.cols()), 0.0);
    for (Eigen::Index c = 0; c < A.cols(); ++c)
        out.push_back(std::sqrt((A.col(c) - B.col(c)).squaredNorm() / static_cast<double>(A.rows())));
    return out;
}

inline constexpr int kTrajectoryFormatVersion = 1;

/// CSV: a `# format_version: 1` line, then `t,x1..,y1..,u1..,p1..`.
inline void write_csv(std::ostream& os, const Trajectory& tr) {
    os << "# format_version: " << kTrajectoryFormatVersion << "\n";
    os << "t";
    auto header = [&](const char* prefix, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) os << ',' << prefix << (i + 1);
    };
    header("x", tr.x.cols());
    header("y", tr.y.cols());
    header("u", tr.u.cols());
    header("p", tr.p.cols());
    os << "\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        const auto r = static_cast<Eigen::Index>(k);
        os << format_number(tr.t[k]);
        for (const Eigen::MatrixXd* M : {&tr.x, &tr.y, &tr.u, &tr.p})
            for (Eigen::Index c = 0; c < M->cols(); ++c) os << ',' << format_number((*M)(r, c));
        os << "\n";
    }
}

/// Reads a ZOH input table: header `t,u1,...`, one row per sample. Lines
/// starting with '#' are skipped.
inline InputSignal read_input_csv(std::istream& is) {
    std::string line;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    bool header = false;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            if (line.find_first_of("tTuU") != std::string::npos) continue;
        }
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw std::invalid_argument("bad number '" + cell + "' in input table");
            }
        }
        if (vals.size() < 2) throw std::invalid_argument("input table rows need a time and at least one value");
        if (width == 0) width = vals.size();
        if (vals.size() != width) throw std::invalid_argument("ragged input table");
        times.push_back(vals[0]);
        rows.emplace_back(vals.begin() + 1, vals.end());
    }
    if (rows.empty()) throw std::invalid_argument("empty input table");
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width - 1));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j + 1 < width; ++j)
            M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return InputSignal::zoh(std::move(times), std::move(M));
}

}  // namespace lpvembed
