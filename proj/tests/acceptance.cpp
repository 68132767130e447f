// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lpvembed/cli.hpp"
#include "support.hpp"

using namespace lpvembed;
namespace cli = lpvembed::cli;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.ok = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    if (o.ok && secs > budget_s) {
        o.ok = false;
        o.detail = "runtime over " + cli::fmt(budget_s) + " s";
    }
    if (!o.ok) ++failures;
    std::printf("%s %d %s (%.3f s)%s%s\n", o.ok ? "PASS" : "FAIL", id, name, secs, o.detail.empty() ? "" : ": ",
                o.detail.c_str());
    std::fflush(stdout);
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double sinc_ref(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

double sech2_oracle(double x) {
    return testing::simpson([x](double s) { return 1.0 - std::tanh(s * x) * std::tanh(s * x); }, 0.0, 1.0, 200'000);
}

Box disk_box() {
    Box b = corpus::bundled_model("unbalanced_disk").box.value();
    return b;
}

RangeOptions grid(int n) {
    RangeOptions o;
    o.grid_per_dim = n;
    return o;
}

InputSignal disk_input() {
    ParseOptions o;
    o.allow_time = true;
    o.nx = 0;
    o.nu = 0;
    return InputSignal::expressions({parse_expr("2*sin(0.2*pi*t)", o)});
}

Outcome criterion1() {
    Outcome o;
    NlssModel m = corpus::bundled_model("unbalanced_disk");
    LpvEmbedding e = extract(factorize(m), Extraction::Factor, m.time);
    o.require(e.model.np == 1, "np = " + std::to_string(e.model.np));
    o.require(structurally_equal(e.map.entries[0], sinc(variable("x1"))), "p1 = " + to_string(e.map.entries[0]));
    const Eigen::MatrixXd& A0 = e.model.A.coeffs[0];
    const Eigen::MatrixXd& A1 = e.model.A.coeffs[1];
    o.require(A0(0, 0) == 0.0 && A0(0, 1) == 1.0 && A0(1, 0) == 0.0, "A0 structure");
    o.require(near(A0(1, 1), -1.0 / testing::kTau, 1e-12), "A0(2,2) != -1/tau");
    o.require(A1(0, 0) == 0.0 && A1(0, 1) == 0.0 && A1(1, 1) == 0.0, "A1 structure");
    o.require(near(A1(1, 0), 130.9636, 1e-4) && near(A1(1, 0), testing::disk_gain(), 1e-6),
              "Mgl/J = " + cli::fmt(A1(1, 0)));
    return o;
}

Outcome criterion2() {
    Outcome o;
    NlssModel m = corpus::bundled_model("unbalanced_disk");
    LpvEmbedding e = extract(factorize(m), Extraction::Element, m.time);
    o.require(e.model.np == 1, "np = " + std::to_string(e.model.np));
    const double g = testing::disk_gain();
    for (double x : {-2.0, 0.0, 0.7, 4.0}) {
        const double p = eval_sched(e.map, Eigen::Vector2d(x, 0.0), Eigen::VectorXd::Zero(1))[0];
        o.require(near(p, g * sinc_ref(x), 1e-10 * g), "p1 != (Mgl/J) sinc(x1) at " + cli::fmt(x));
    }
    const RangeBox rb = estimate_range(e.map, disk_box(), grid(10'000));
    const Interval r = rb.raw[0];
    o.require(near(r.lo, -28.45, 0.005 * 28.45) && near(r.hi, 130.96, 0.005 * 130.96),
              "range " + cli::interval_text(r));
    return o;
}

Outcome criterion3() {
    Outcome o;
    NlssModel m = corpus::bundled_model("unbalanced_disk");
    LpvEmbedding e = extract(factorize(m), Extraction::Factor, m.time);
    const Interval r = estimate_range(e.map, disk_box(), grid(10'001)).raw[0];
    o.require(near(r.lo, -0.2172, 0.005) && near(r.hi, 1.0, 0.005), "range " + cli::interval_text(r));
    return o;
}

Outcome criterion4() {
    Outcome o;
    NlssModel m = corpus::bundled_model("unbalanced_disk");
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
    const InputSignal u = disk_input();
    const SolverConfig cfg;
    Trajectory nl = simulate_nl(m, x0, u, 15.0, cfg);
    for (IntegrationMode mode : {IntegrationMode::Analytic, IntegrationMode::Numeric}) {
        LpvEmbedding e = extract(factorize(m, {mode, {}}), Extraction::Factor, m.time);
        Trajectory lpv = simulate_lpv_self_scheduled(e.model, e.map, x0, u, 15.0, cfg);
        const auto r = rmse(nl, lpv, Channel::State);
        for (std::size_t i = 0; i < r.size(); ++i)
            o.require(r[i] <= 1e-8, std::string(to_string(mode)) + " RMSE x" + std::to_string(i + 1) + " = " + cli::sci(r[i]));
    }
    return o;
}

Outcome criterion5() {
    Outcome o;
    std::mt19937_64 rng(2024);
    const corpus::Family families[] = {corpus::Family::Polynomial, corpus::Family::Trigonometric,
                                       corpus::Family::Saturating, corpus::Family::Mixed};
    double worst_num = 0.0, worst_an = 0.0;
    for (int k = 0; k < 50; ++k) {
        NlssModel m = corpus::random_model(rng, families[k % 4]);
        o.require(m.nx <= 4 && m.nu <= 4, "generator exceeded dimension limits");
        FactorizedSystem an = factorize(m, {IntegrationMode::Analytic, {}});
        FactorizedSystem nu = factorize(m, {IntegrationMode::Numeric, {}});
        for (int s = 0; s < 100; ++s) {
            const Eigen::VectorXd x = testing::random_vector(rng, m.nx);
            const Eigen::VectorXd u = testing::random_vector(rng, m.nu);
            const Eigen::VectorXd f = m.eval_f(x, u), h = m.eval_h(x, u);
            for (const FactorizedSystem* fs : {&an, &nu}) {
                EvalContext ctx;
                const double r = std::max((fs->reconstruct_f(x, u, ctx) - f).lpNorm<Eigen::Infinity>(),
                                          (fs->reconstruct_h(x, u, ctx) - h).lpNorm<Eigen::Infinity>());
                // Analytic artifacts that fell back to quadrature carry the numeric bound.
                const bool exact = fs == &an && an.warnings.empty();
                (exact ? worst_an : worst_num) = std::max(exact ? worst_an : worst_num, r);
                o.require(r <= (exact ? 1e-10 : 1e-8),
                          "model " + std::to_string(k) + " residual " + cli::sci(r));
            }
        }
    }
    if (o.ok) o.detail = "max analytic " + cli::sci(worst_an) + ", max numeric " + cli::sci(worst_num);
    return o;
}

Outcome criterion6() {
    Outcome o;
    for (const auto& m : corpus::example_corpus()) {
        FactorizedSystem fs = factorize(m);
        const VarBinding zero = bind_xu(Eigen::VectorXd::Zero(m.nx), Eigen::VectorXd::Zero(m.nu));
        const ExprMatrix fx = jacobian(m.f, m.state_names()), fu = jacobian(m.f, m.input_names());
        const ExprMatrix hx = jacobian(m.h, m.state_names()), hu = jacobian(m.h, m.input_names());
        const std::pair<MatrixTag, const ExprMatrix*> pairs[] = {
            {MatrixTag::A, &fx}, {MatrixTag::B, &fu}, {MatrixTag::C, &hx}, {MatrixTag::D, &hu}};
        for (const auto& [tag, J] : pairs) {
            const Eigen::MatrixXd M = fs.matrix(tag).evaluate(zero);
            o.require(M.allFinite(), m.name + " " + to_string(tag) + " not finite at the origin");
            for (Eigen::Index i = 0; i < M.rows(); ++i)
                for (Eigen::Index j = 0; j < M.cols(); ++j) {
                    const double ref =
                        evaluate((*J)[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], zero);
                    o.require(near(M(i, j), ref, 1e-12 * std::max(1.0, std::abs(ref))),
                              m.name + " " + to_string(tag) + " differs from the Jacobian");
                }
        }
    }
    return o;
}

Outcome criterion7() {
    Outcome o;
    cli::ConvertArgs a;
    a.model = "builtin:tanh_example";
    a.json = true;
    std::ostringstream out, err;
    o.require(cli::cmd_convert(a, out, err) == cli::kOk, "convert failed: " + err.str());
    if (!o.ok) return o;
    LpvEmbedding e = embedding_from_json(json::parse(out.str()));
    o.require(e.model.np == 1, "np = " + std::to_string(e.model.np));
    auto p = [&](double x) { return eval_sched(e.map, Eigen::VectorXd::Constant(1, x), Eigen::VectorXd::Zero(1))[0]; };
    for (double x : {-3.0, -1.0, 0.5, 2.0}) {
        const double oracle = sech2_oracle(x);
        o.require(near(p(x), oracle, 1e-9), "x = " + cli::fmt(x) + ": " + cli::fmt(p(x)) + " vs " + cli::fmt(oracle));
    }
    o.require(p(0.0) == 1.0, "p(0) = " + cli::fmt(p(0.0)));
    return o;
}

Outcome criterion8() {
    Outcome o;
    NlssModel m = parse_model("format_version 1\nname decay\nnx 1\nnu 1\nny 1\ntime continuous\nf1 = -x1\nh1 = x1\n");
    auto endpoint_error = [&](const SolverConfig& cfg) {
        Trajectory tr = simulate_nl(m, Eigen::VectorXd::Ones(1), InputSignal::zero(1), 1.0, cfg);
        return std::abs(tr.x(static_cast<Eigen::Index>(tr.size()) - 1, 0) - std::exp(-1.0));
    };
    const double e_default = endpoint_error({});
    o.require(e_default <= 1e-7, "default endpoint error " + cli::sci(e_default));
    SolverConfig rk4;
    rk4.method = SolverMethod::RK4;
    rk4.output_dt = 0.1;
    rk4.fixed_step = 0.1;
    const double e1 = endpoint_error(rk4);
    rk4.fixed_step = 0.05;
    const double e2 = endpoint_error(rk4);
    const double ratio = e1 / e2;
    o.require(ratio >= 12.0 && ratio <= 20.0, "RK4 ratio " + cli::fmt(ratio));
    if (o.ok) o.detail = "endpoint error " + cli::sci(e_default) + ", RK4 ratio " + cli::fmt(ratio);
    return o;
}

Outcome criterion9() {
    Outcome o;
    NlssModel m = corpus::bundled_model("unbalanced_disk");
    LpvEmbedding e = extract(factorize(m), Extraction::Factor, m.time);
    e.model.A.coeffs[1](1, 0) += 0.1;
    const EmbeddingReport rep = verify_embedding(m, e.model, e.map, 1000, disk_box());
    o.require(rep.max_residual() >= 0.09, "verify residual " + cli::sci(rep.max_residual()));

    const auto path = testing::temp_dir("acceptance") / "disk_corrupt.json";
    std::ofstream(path) << to_json(e).dump(2);
    cli::CompareArgs c;
    c.model = "builtin:unbalanced_disk";
    c.artifact = path.string();
    c.scenario.input = "2*sin(0.2*pi*t)";
    c.scenario.t_end = 15.0;
    c.threshold = 1e-3;
    c.json = true;
    std::ostringstream out, err;
    const int code = cli::cmd_compare(c, out, err);
    o.require(code == cli::kCheckFailed, "compare exit code " + std::to_string(code) + " " + err.str());
    if (code == cli::kCheckFailed) {
        const double r = json::parse(out.str())["max_rmse"].get<double>();
        o.require(r > 1e-3, "compare RMSE " + cli::sci(r));
        if (o.ok) o.detail = "verify residual " + cli::sci(rep.max_residual()) + ", compare RMSE " + cli::sci(r);
    }
    return o;
}

}  // namespace

int main() {
    report(1, "disk factor-mode conversion", 1.0, criterion1);
    report(2, "disk element-mode conversion and range", 5.0, criterion2);
    report(3, "disk factor-mode range", 5.0, criterion3);
    report(4, "nonlinear vs self-scheduled LPV simulation", 10.0, criterion4);
    report(5, "FTC exactness on 50 random models", 60.0, criterion5);
    report(6, "origin limit equals the Jacobian", 60.0, criterion6);
    report(7, "tanh scheduling entry vs quadrature oracle", 60.0, criterion7);
    report(8, "solver sanity", 60.0, criterion8);
    report(9, "corrupted coefficient is detected", 60.0, criterion9);
    std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
