#pragma once

// Command implementations behind the lpvembed tool. Each command writes its
// report to `out`, diagnostics to `err`, and returns the process exit code.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lpvembed/corpus.hpp"
#include "lpvembed/factorize.hpp"
#include "lpvembed/lpv.hpp"
#include "lpvembed/model.hpp"
#include "lpvembed/serialize.hpp"
#include "lpvembed/sim.hpp"

namespace lpvembed::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,             // bad flags or values
    kInputError = 2,        // unreadable or malformed model / artifact / table
    kConversionFailed = 3,  // factorization, evaluation or simulation failure
    kCheckFailed = 4,       // residual or RMSE above the requested threshold
};

/// Bad command-line values.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or malformed input files.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Argument structs
// ---------------------------------------------------------------------------

struct ConversionArgs {
    std::string mode = "analytic";    // analytic | numeric
    std::string extract = "factor";   // factor | element
    std::string anchor;               // "x=0.1,0;u=0", empty = model anchor or origin
};

struct ScenarioArgs {
    std::string x0;         // comma list, empty = zeros
    std::string input;      // ';'-separated expressions in t, empty = zero input
    std::string input_csv;  // ZOH table t,u1,...
    double t_end = 10.0;
    double dt = 0.01;
    std::string solver;     // rk45 | rk4 | discrete, empty = by time domain
    double rtol = 1e-8;
    double atol = 1e-10;
    double step = 0.0;      // rk4 step, 0 = output spacing
};

struct ConvertArgs {
    std::string model;
    ConversionArgs conv;
    std::string output;     // artifact path, empty = no file
    int samples = 1000;
    double threshold = 1e-6;
    std::string box;        // overrides the declared box
    int grid = 0;           // range grid per dimension, 0 = automatic
    bool json = false;
};

struct RangeArgs {
    std::string input;      // model or artifact
    ConversionArgs conv;
    std::string box;
    int grid = 10001;
    double widening = 0.005;
    bool json = false;
};

struct SimulateArgs {
    std::string input;      // model or artifact
    ConversionArgs conv;
    bool lpv = false;       // convert a model and simulate its embedding
    ScenarioArgs scenario;
    std::string output;     // empty = stdout
    bool json = false;
};

struct CompareArgs {
    std::string model;
    std::string artifact;   // empty = convert the model with `conv`
    ConversionArgs conv;
    ScenarioArgs scenario;
    double threshold = -1.0;  // negative = report only
    bool json = false;
};

struct InfoArgs {
    std::string input;
    bool list = false;
    bool json = false;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

struct Source {
    std::optional<NlssModel> model;
    std::optional<LpvEmbedding> embedding;
    std::string label;
};

inline bool is_artifact_path(const std::string& spec) {
    return spec.size() > 5 && spec.compare(spec.size() - 5, 5, ".json") == 0;
}

/// `builtin:NAME`, a bundled model name, a `.json` artifact or a model file.
inline Source load_source(const std::string& spec) {
    if (spec.empty()) throw UsageError("no model or artifact given");
    Source s;
    s.label = spec;
    const std::string prefix = "builtin:";
    if (spec.rfind(prefix, 0) == 0) {
        s.model = corpus::bundled_model(spec.substr(prefix.size()));
        return s;
    }
    if (is_artifact_path(spec)) {
        if (!std::filesystem::exists(spec)) throw InputError("cannot open artifact '" + spec + "'");
        s.embedding = load_embedding(spec);
        return s;
    }
    if (std::filesystem::exists(spec)) {
        s.model = load_model(spec);
        return s;
    }
    if (corpus::find_bundled(spec)) {
        s.model = corpus::bundled_model(spec);
        s.label = prefix + spec;
        return s;
    }
    throw InputError("cannot find model '" + spec + "' (not a file or bundled model)");
}

inline NlssModel require_model(const std::string& spec) {
    Source s = load_source(spec);
    if (!s.model) throw UsageError("'" + spec + "' is an artifact; a nonlinear model is required");
    return *s.model;
}

inline double parse_value(const std::string& text, const char* what) {
    try {
        return evaluate(parse_expr(text, ParseOptions{0, 0, false, {}, {}}), VarBinding{});
    } catch (const std::exception& e) {
        throw UsageError(std::string("bad ") + what + " '" + text + "': " + e.what());
    }
}

inline Eigen::VectorXd parse_vector(const std::string& text, int n, const char* what) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    if (text.empty()) return v;
    const auto parts = detail::split(text, ',');
    if (static_cast<int>(parts.size()) != n)
        throw UsageError(std::string(what) + " needs " + std::to_string(n) + " values, got " +
                         std::to_string(parts.size()));
    for (int i = 0; i < n; ++i) v[i] = parse_value(detail::trim(parts[static_cast<std::size_t>(i)]), what);
    return v;
}

/// "x=0.1,0;u=0". Missing parts stay at zero.
inline Anchor parse_anchor(const std::string& text, int nx, int nu) {
    Anchor a = Anchor::origin(nx, nu);
    for (const auto& part : detail::split(text, ';')) {
        const std::string p = detail::trim(part);
        if (p.empty()) continue;
        const auto eq = p.find('=');
        if (eq == std::string::npos) throw UsageError("anchor part '" + p + "' needs the form x=... or u=...");
        const std::string key = detail::trim(p.substr(0, eq));
        const std::string vals = p.substr(eq + 1);
        if (key == "x") a.x_bar = parse_vector(vals, nx, "anchor x");
        else if (key == "u") a.u_bar = parse_vector(vals, nu, "anchor u");
        else throw UsageError("anchor key must be x or u, got '" + key + "'");
    }
    return a;
}

inline Box default_box(int nx, int nu) {
    return {std::vector<Interval>(static_cast<std::size_t>(nx), Interval{-1.0, 1.0}),
            std::vector<Interval>(static_cast<std::size_t>(nu), Interval{-1.0, 1.0})};
}

/// "x1=-1:1,u1=-2*pi:2*pi" applied on top of `base`.
inline Box parse_box(const std::string& text, Box base) {
    for (const auto& part : detail::split(text, ',')) {
        const std::string p = detail::trim(part);
        if (p.empty()) continue;
        const auto eq = p.find('=');
        const auto colon = p.find(':', eq == std::string::npos ? 0 : eq);
        if (eq == std::string::npos || colon == std::string::npos)
            throw UsageError("box entry '" + p + "' needs the form name=lo:hi");
        const std::string name = detail::trim(p.substr(0, eq));
        const Interval iv{parse_value(p.substr(eq + 1, colon - eq - 1), "box bound"),
                          parse_value(p.substr(colon + 1), "box bound")};
        if (!(iv.lo <= iv.hi)) throw UsageError("box entry '" + p + "' has lo > hi");
        std::vector<Interval>* target = nullptr;
        int idx = 0;
        if (auto i = detail::positional_index(name, 'x')) {
            target = &base.x;
            idx = *i;
        } else if (auto k = detail::positional_index(name, 'u')) {
            target = &base.u;
            idx = *k;
        }
        if (!target || idx > static_cast<int>(target->size()))
            throw UsageError("box variable '" + name + "' is not a state or input of the model");
        (*target)[static_cast<std::size_t>(idx - 1)] = iv;
    }
    return base;
}

inline IntegrationMode parse_mode(const std::string& s) {
    if (s == "analytic") return IntegrationMode::Analytic;
    if (s == "numeric") return IntegrationMode::Numeric;
    throw UsageError("--mode must be analytic or numeric, got '" + s + "'");
}

inline Extraction parse_extraction(const std::string& s) {
    if (s == "factor") return Extraction::Factor;
    if (s == "element") return Extraction::Element;
    throw UsageError("--extract must be factor or element, got '" + s + "'");
}

inline LpvEmbedding convert(const NlssModel& model, const ConversionArgs& args, const std::string& label) {
    FactorizeOptions fo;
    fo.mode = parse_mode(args.mode);
    const Extraction ex = parse_extraction(args.extract);
    const Anchor anchor = !args.anchor.empty() ? parse_anchor(args.anchor, model.nx, model.nu)
                          : model.anchor     ? *model.anchor
                                             : Anchor::origin(model.nx, model.nu);
    FactorizedSystem fs = factorize(model, anchor, fo);
    LpvEmbedding emb = extract(fs, ex, model.time);
    emb.model.provenance.source = label;
    return emb;
}

inline SolverConfig solver_config(const ScenarioArgs& sc, const TimeDomain& time) {
    SolverConfig cfg;
    if (sc.solver.empty()) cfg.method = time.is_discrete() ? SolverMethod::Discrete : SolverMethod::DormandPrince45;
    else if (sc.solver == "rk45") cfg.method = SolverMethod::DormandPrince45;
    else if (sc.solver == "rk4") cfg.method = SolverMethod::RK4;
    else if (sc.solver == "discrete") cfg.method = SolverMethod::Discrete;
    else throw UsageError("--solver must be rk45, rk4 or discrete, got '" + sc.solver + "'");
    cfg.rel_tol = sc.rtol;
    cfg.abs_tol = sc.atol;
    cfg.output_dt = sc.dt;
    cfg.fixed_step = sc.step;
    try {
        cfg.check();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (!(sc.t_end >= 0.0)) throw UsageError("--t-end must be non-negative");
    if (time.is_discrete() != (cfg.method == SolverMethod::Discrete))
        throw UsageError(time.is_discrete() ? "discrete-time models need --solver discrete"
                                            : "--solver discrete needs a discrete-time model");
    return cfg;
}

inline InputSignal input_signal(const ScenarioArgs& sc, int nu) {
    if (!sc.input.empty() && !sc.input_csv.empty()) throw UsageError("--input and --input-csv are exclusive");
    if (!sc.input_csv.empty()) {
        std::ifstream in(sc.input_csv);
        if (!in) throw InputError("cannot open input table '" + sc.input_csv + "'");
        InputSignal s;
        try {
            s = read_input_csv(in);
        } catch (const std::invalid_argument& e) {
            throw InputError(sc.input_csv + ": " + e.what());
        }
        if (s.nu() != nu) throw UsageError("input table has " + std::to_string(s.nu()) + " channels, model has " + std::to_string(nu));
        return s;
    }
    if (sc.input.empty()) return InputSignal::zero(nu);
    std::vector<Expr> exprs;
    ParseOptions po{0, 0, true, {}, {}};
    for (const auto& part : detail::split(sc.input, ';')) {
        try {
            exprs.push_back(parse_expr(detail::trim(part), po));
        } catch (const ParseError& e) {
            throw UsageError("bad input expression '" + detail::trim(part) + "': " + e.what());
        }
    }
    if (static_cast<int>(exprs.size()) != nu)
        throw UsageError("--input has " + std::to_string(exprs.size()) + " channels, model has " + std::to_string(nu));
    return InputSignal::expressions(std::move(exprs));
}

inline std::string fmt(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::string sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline std::string interval_text(const Interval& iv) { return "[" + fmt(iv.lo) + ", " + fmt(iv.hi) + "]"; }

inline const char* time_text(const TimeDomain& t) { return t.is_discrete() ? "discrete" : "continuous"; }

/// Range grid that keeps every scheduling variable under `budget` points.
inline int auto_grid(const SchedulingMap& sm, double budget = 1e6) {
    std::size_t d = 1;
    for (const auto& fp : sm.footprint()) d = std::max(d, fp.size());
    const int n = static_cast<int>(std::floor(std::pow(budget, 1.0 / static_cast<double>(d)) + 1e-9));
    return std::clamp(n, 2, 10001);
}

/// Runs `body`, mapping exceptions to exit codes.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const ModelError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const ArtifactError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const SimulationError& e) {
        err << "error: simulation failed: " << e.what() << "\n";
        return kConversionFailed;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kConversionFailed;
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_convert(const ConvertArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.samples < 1) throw UsageError("--samples must be positive");
        const NlssModel model = require_model(args.model);
        LpvEmbedding emb = convert(model, args.conv, args.model);
        LpvssModel& m = emb.model;

        const bool declared = model.box.has_value();
        Box box = declared ? *model.box : default_box(model.nx, model.nu);
        if (!args.box.empty()) box = parse_box(args.box, box);

        RangeOptions ro;
        ro.grid_per_dim = args.grid > 0 ? args.grid : auto_grid(emb.map);
        try {
            m.range = estimate_range(emb.map, box, ro);
        } catch (const std::invalid_argument& e) {
            m.provenance.warnings.push_back(std::string("range not estimated: ") + e.what());
        }
        const EmbeddingReport rep = verify_embedding(model, m, emb.map, args.samples, box);

        json j = to_json(emb);
        j["verification"] = report_json(rep);
        j["verification"]["box"] = box_json(box);
        j["verification"]["threshold"] = args.threshold;
        if (!args.output.empty()) save_embedding(args.output, j);

        if (args.json) {
            out << j.dump(2) << "\n";
        } else {
            out << "model: " << model.name << " (nx=" << model.nx << ", nu=" << model.nu << ", ny=" << model.ny << ", "
                << time_text(model.time) << ")\n";
            out << "conversion: " << to_string(m.provenance.integration) << " integration, "
                << to_string(m.provenance.extraction) << " extraction\n";
            if (!m.anchor.is_origin()) {
                out << "anchor: x = (";
                for (Eigen::Index i = 0; i < m.anchor.x_bar.size(); ++i) out << (i ? ", " : "") << fmt(m.anchor.x_bar[i]);
                out << "), u = (";
                for (Eigen::Index i = 0; i < m.anchor.u_bar.size(); ++i) out << (i ? ", " : "") << fmt(m.anchor.u_bar[i]);
                out << ")\n";
            }
            out << "np = " << m.np << "\n";
            for (int i = 0; i < m.np; ++i) {
                out << "  p" << (i + 1) << " = " << to_string(emb.map.entries[static_cast<std::size_t>(i)]);
                if (m.range)
                    out << "    range " << interval_text(m.range->raw[static_cast<std::size_t>(i)]) << ", widened "
                        << interval_text(m.range->widened[static_cast<std::size_t>(i)]);
                out << "\n";
            }
            if (m.provenance.warnings.empty()) out << "warnings: none\n";
            for (const auto& w : m.provenance.warnings) out << "warning: " << w << "\n";
            out << "verification (" << rep.samples << " samples" << (declared || !args.box.empty() ? "" : ", default box [-1, 1]")
                << "): state residual " << sci(rep.state_residual) << ", output residual "
                << sci(rep.output_residual) << "\n";
            if (!args.output.empty()) out << "artifact: " << args.output << "\n";
        }
        if (!(rep.max_residual() <= args.threshold)) {
            err << "error: embedding residual " << fmt(rep.max_residual(), 3) << " exceeds threshold "
                << fmt(args.threshold, 3) << "\n";
            return int(kCheckFailed);
        }
        return int(kOk);
    });
}

inline int cmd_range(const RangeArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.grid < 2) throw UsageError("--grid must be at least 2");
        Source src = load_source(args.input);
        LpvEmbedding emb = src.embedding ? *src.embedding : convert(*src.model, args.conv, src.label);
        const LpvssModel& m = emb.model;

        std::optional<Box> base;
        if (src.model && src.model->box) base = src.model->box;
        else if (m.range) base = m.range->sampled_box;
        Box box = base ? *base : default_box(m.nx, m.nu);
        if (!args.box.empty()) box = parse_box(args.box, box);
        else if (!base) throw UsageError("no box declared; pass --box");

        RangeOptions ro;
        ro.grid_per_dim = args.grid;
        ro.widening = args.widening;
        RangeBox rb;
        try {
            rb = estimate_range(emb.map, box, ro);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        if (args.json) {
            out << range_json(rb).dump(2) << "\n";
            return int(kOk);
        }
        out << "grid: " << rb.grid_per_dim << " points per dimension\n";
        for (int i = 0; i < emb.map.np(); ++i) {
            const auto k = static_cast<std::size_t>(i);
            out << "p" << (i + 1) << " = " << to_string(emb.map.entries[k]) << "\n";
            out << "  raw      " << interval_text(rb.raw[k]) << "\n";
            out << "  widened  " << interval_text(rb.widened[k]) << "\n";
        }
        return int(kOk);
    });
}

inline int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        Source src = load_source(args.input);
        Trajectory tr;
        if (src.model && !args.lpv) {
            const NlssModel& model = *src.model;
            const SolverConfig cfg = solver_config(args.scenario, model.time);
            tr = simulate_nl(model, parse_vector(args.scenario.x0, model.nx, "x0"), input_signal(args.scenario, model.nu),
                             args.scenario.t_end, cfg);
        } else {
            LpvEmbedding emb = src.embedding ? *src.embedding : convert(*src.model, args.conv, src.label);
            const LpvssModel& m = emb.model;
            const SolverConfig cfg = solver_config(args.scenario, m.time);
            tr = simulate_lpv_self_scheduled(m, emb.map, parse_vector(args.scenario.x0, m.nx, "x0"),
                                             input_signal(args.scenario, m.nu), args.scenario.t_end, cfg);
        }
        std::ofstream file;
        std::ostream* os = &out;
        if (!args.output.empty()) {
            file.open(args.output);
            if (!file) throw InputError("cannot write '" + args.output + "'");
            os = &file;
        }
        if (args.json) *os << trajectory_json(tr).dump() << "\n";
        else write_csv(*os, tr);
        return int(kOk);
    });
}

inline int cmd_compare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const NlssModel model = require_model(args.model);
        LpvEmbedding emb;
        if (args.artifact.empty()) {
            emb = convert(model, args.conv, args.model);
        } else {
            Source s = load_source(args.artifact);
            if (!s.embedding) throw UsageError("'" + args.artifact + "' is not an artifact");
            emb = *s.embedding;
        }
        if (emb.model.nx != model.nx || emb.model.nu != model.nu || emb.model.ny != model.ny)
            throw UsageError("artifact dimensions do not match the model");
        if (emb.model.time.is_discrete() != model.time.is_discrete())
            throw UsageError("artifact and model have different time domains");

        const SolverConfig cfg = solver_config(args.scenario, model.time);
        const Eigen::VectorXd x0 = parse_vector(args.scenario.x0, model.nx, "x0");
        const InputSignal u = input_signal(args.scenario, model.nu);
        const Trajectory a = simulate_nl(model, x0, u, args.scenario.t_end, cfg);
        const Trajectory b = simulate_lpv_self_scheduled(emb.model, emb.map, x0, u, args.scenario.t_end, cfg);
        const auto rx = rmse(a, b, Channel::State);
        const auto ry = rmse(a, b, Channel::Output);
        double worst = 0.0;
        for (double v : rx) worst = std::max(worst, v);
        for (double v : ry) worst = std::max(worst, v);

        if (args.json) {
            json j = {{"solver", to_string(cfg.method)}, {"samples", a.size()}, {"rmse_x", rx}, {"rmse_y", ry},
                      {"max_rmse", worst}};
            if (args.threshold >= 0.0) j["threshold"] = args.threshold;
            out << j.dump(2) << "\n";
        } else {
            out << "solver: " << to_string(cfg.method) << ", " << a.size() << " samples, t_end = "
                << fmt(args.scenario.t_end) << "\n";
            out << "channel  rmse\n";
            for (std::size_t i = 0; i < rx.size(); ++i) out << "x" << (i + 1) << "       " << sci(rx[i]) << "\n";
            for (std::size_t i = 0; i < ry.size(); ++i) out << "y" << (i + 1) << "       " << sci(ry[i]) << "\n";
            out << "max rmse " << sci(worst) << "\n";
        }
        if (args.threshold >= 0.0 && !(worst <= args.threshold)) {
            err << "error: max RMSE " << fmt(worst, 3) << " exceeds threshold " << fmt(args.threshold, 3) << "\n";
            return int(kCheckFailed);
        }
        return int(kOk);
    });
}

inline int cmd_info(const InfoArgs& args, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (args.list || args.input.empty()) {
            for (const auto& b : corpus::kBundled) out << "builtin:" << b.name << "\n";
            return int(kOk);
        }
        Source src = load_source(args.input);
        if (src.model) {
            const NlssModel& m = *src.model;
            if (args.json) {
                json f = json::array(), h = json::array();
                for (const auto& e : m.f) f.push_back(to_string(e));
                for (const auto& e : m.h) h.push_back(to_string(e));
                json j = {{"kind", "nlss"}, {"name", m.name}, {"nx", m.nx}, {"nu", m.nu}, {"ny", m.ny},
                          {"time", time_text(m.time)}, {"f", f}, {"h", h}};
                if (m.box) j["box"] = box_json(*m.box);
                out << j.dump(2) << "\n";
                return int(kOk);
            }
            out << "nonlinear model " << m.name << " (nx=" << m.nx << ", nu=" << m.nu << ", ny=" << m.ny << ", "
                << time_text(m.time);
            if (m.time.is_discrete()) out << ", Ts=" << fmt(m.time.sample_time);
            out << ")\n";
            for (int i = 0; i < m.nx; ++i) out << "  f" << (i + 1) << " = " << to_string(m.f[static_cast<std::size_t>(i)]) << "\n";
            for (int i = 0; i < m.ny; ++i) out << "  h" << (i + 1) << " = " << to_string(m.h[static_cast<std::size_t>(i)]) << "\n";
            if (m.box) {
                out << "box:";
                for (int i = 0; i < m.nx; ++i) out << " x" << (i + 1) << "=" << interval_text(m.box->x[static_cast<std::size_t>(i)]);
                for (int i = 0; i < m.nu; ++i) out << " u" << (i + 1) << "=" << interval_text(m.box->u[static_cast<std::size_t>(i)]);
                out << "\n";
            }
            return int(kOk);
        }
        const LpvEmbedding& emb = *src.embedding;
        const LpvssModel& m = emb.model;
        if (args.json) {
            out << to_json(emb).dump(2) << "\n";
            return int(kOk);
        }
        out << "LPV artifact (nx=" << m.nx << ", nu=" << m.nu << ", ny=" << m.ny << ", np=" << m.np << ", "
            << time_text(m.time) << ")\n";
        out << "source: " << m.provenance.source << ", " << to_string(m.provenance.integration) << " integration, "
            << to_string(m.provenance.extraction) << " extraction\n";
        for (int i = 0; i < m.np; ++i) {
            out << "  p" << (i + 1) << " = " << to_string(emb.map.entries[static_cast<std::size_t>(i)]);
            if (m.range) out << "    " << interval_text(m.range->widened[static_cast<std::size_t>(i)]);
            out << "\n";
        }
        for (const auto& w : m.provenance.warnings) out << "warning: " << w << "\n";
        return int(kOk);
    });
}

}  // namespace lpvembed::cli
