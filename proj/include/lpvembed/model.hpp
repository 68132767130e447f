#pragma once

// Nonlinear state-space model  xi x = f(x, u),  y = h(x, u)  and the
// line-oriented text format it is loaded from.

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvembed/diff.hpp"
#include "lpvembed/eval.hpp"
#include "lpvembed/expr.hpp"
#include "lpvembed/parse.hpp"

namespace lpvembed {

/// Model-file or model-consistency failure. `line` is 1-based, 0 if unknown.
class ModelError : public std::runtime_error {
public:
    ModelError(const std::string& msg, int line = 0)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct TimeDomain {
    enum class Kind { Continuous, Discrete };
    Kind kind = Kind::Continuous;
    /// Discrete only: > 0 specified, -1 unspecified.
    double sample_time = 0.0;

    static TimeDomain continuous() { return {}; }
    static TimeDomain discrete(double ts = -1.0) { return {Kind::Discrete, ts}; }
    bool is_discrete() const { return kind == Kind::Discrete; }
    /// Time advance of one discrete step; 1 when the sample time is unspecified.
    double step() const { return sample_time > 0.0 ? sample_time : 1.0; }
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double mid() const { return 0.5 * (lo + hi); }
};

/// Axis-aligned box over (x, u).
struct Box {
    std::vector<Interval> x;
    std::vector<Interval> u;
};

/// Reference point of the factorization.
struct Anchor {
    Eigen::VectorXd x_bar;
    Eigen::VectorXd u_bar;

    static Anchor origin(int nx, int nu) { return {Eigen::VectorXd::Zero(nx), Eigen::VectorXd::Zero(nu)}; }
    bool is_origin() const { return (x_bar.array() == 0.0).all() && (u_bar.array() == 0.0).all(); }
};

inline std::string state_name(int i) { return "x" + std::to_string(i + 1); }
inline std::string input_name(int i) { return "u" + std::to_string(i + 1); }

/// Bind x1..xn, u1..um.
inline VarBinding bind_xu(const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    VarBinding b;
    for (Eigen::Index i = 0; i < x.size(); ++i) b.set(state_name(static_cast<int>(i)), x[i]);
    for (Eigen::Index i = 0; i < u.size(); ++i) b.set(input_name(static_cast<int>(i)), u[i]);
    return b;
}

struct NlssModel {
    std::string name;
    int nx = 0;
    int nu = 0;
    int ny = 0;
    std::vector<Expr> f;
    std::vector<Expr> h;
    TimeDomain time;
    std::map<std::string, double, std::less<>> constants;
    std::optional<Anchor> anchor;
    std::optional<Box> box;

    std::vector<std::string> state_names() const {
        std::vector<std::string> v;
        for (int i = 0; i < nx; ++i) v.push_back(state_name(i));
        return v;
    }
    std::vector<std::string> input_names() const {
        std::vector<std::string> v;
        for (int i = 0; i < nu; ++i) v.push_back(input_name(i));
        return v;
    }

    Eigen::VectorXd eval_f(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        VarBinding b = bind_xu(x, u);
        Eigen::VectorXd out(nx);
        for (int i = 0; i < nx; ++i) out[i] = evaluate(f[i], b);
        return out;
    }

    Eigen::VectorXd eval_h(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
        VarBinding b = bind_xu(x, u);
        Eigen::VectorXd out(ny);
        for (int i = 0; i < ny; ++i) out[i] = evaluate(h[i], b);
        return out;
    }

    /// Dimensions, variable scope and differentiability of every entry.
    void validate() const {
        if (nx <= 0 || nu <= 0 || ny <= 0) throw ModelError("dimensions nx, nu, ny must be positive");
        if (static_cast<int>(f.size()) != nx) throw ModelError("expected " + std::to_string(nx) + " state equations");
        if (static_cast<int>(h.size()) != ny) throw ModelError("expected " + std::to_string(ny) + " output equations");
        if (time.is_discrete() && !(time.sample_time > 0.0 || time.sample_time == -1.0))
            throw ModelError("discrete sample time must be positive or -1");
        std::set<std::string> allowed;
        for (const auto& s : state_names()) allowed.insert(s);
        for (const auto& s : input_names()) allowed.insert(s);
        auto check = [&](const std::vector<Expr>& eqs, const char* tag) {
            for (std::size_t i = 0; i < eqs.size(); ++i) {
                if (contains_op(eqs[i], Op::Integral) || contains_op(eqs[i], Op::Lambda))
                    throw ModelError(std::string(tag) + std::to_string(i + 1) + " may not use integral(...)");
                for (const auto& v : free_vars(eqs[i]))
                    if (!allowed.count(v))
                        throw ModelError(std::string(tag) + std::to_string(i + 1) + " uses unknown symbol '" + v + "'");
                for (const auto& v : allowed) {
                    try {
                        (void)differentiate(eqs[i], v);
                    } catch (const DiffError& err) {
                        throw ModelError(std::string(tag) + std::to_string(i + 1) + " is not differentiable in " + v +
                                         ": " + err.what());
                    }
                }
            }
        };
        check(f, "f");
        check(h, "h");
        if (anchor && (anchor->x_bar.size() != nx || anchor->u_bar.size() != nu))
            throw ModelError("anchor dimensions do not match the model");
        if (box && (static_cast<int>(box->x.size()) != nx || static_cast<int>(box->u.size()) != nu))
            throw ModelError("box dimensions do not match the model");
    }
};

// ---------------------------------------------------------------------------
// Model text format
//
//   # comment
//   format_version 1
//   name   unbalanced_disk
//   nx 2
//   nu 1
//   ny 1
//   time   continuous | discrete [Ts]      (Ts = -1: unspecified)
//   const  M = 7e-2                        (value may use earlier constants)
//   alias  theta = x1
//   f1 = x2
//   h1 = x1
//   anchor x = 0, 0                        (optional, default origin)
//   anchor u = 0
//   box    x1 = -2*pi, 2*pi                (optional; needs every x and u)
// ---------------------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline double constant_value(const std::string& text, const ParseOptions& opts, int line) {
    ParseOptions o = opts;
    o.nx = 0;
    o.nu = 0;
    try {
        return evaluate(simplify(parse_expr(text, o)), VarBinding{});
    } catch (const ParseError& e) {
        throw ModelError(std::string("in '") + text + "': " + e.what(), line);
    } catch (const EvalError& e) {
        throw ModelError(std::string("in '") + text + "': " + e.what(), line);
    }
}

}  // namespace detail

inline NlssModel parse_model(std::string_view text) {
    using detail::split;
    using detail::trim;
    NlssModel m;
    ParseOptions opts;
    std::map<int, std::string> f_src, h_src;
    std::map<int, int> f_line, h_line;
    std::vector<std::pair<std::string, int>> box_lines;
    std::optional<std::vector<double>> anchor_x, anchor_u;
    bool have_nx = false, have_nu = false, have_ny = false;

    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        std::size_t sp = line.find_first_of(" \t=");
        std::string key = line.substr(0, sp);
        std::string rest = sp == std::string::npos ? "" : trim(line.substr(sp));

        auto int_value = [&](const std::string& s) {
            try {
                std::size_t used = 0;
                int v = std::stoi(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (const std::exception&) {
                throw ModelError("expected an integer, got '" + s + "'", lineno);
            }
        };
        auto assignment = [&](const std::string& body) -> std::pair<std::string, std::string> {
            auto eq = body.find('=');
            if (eq == std::string::npos) throw ModelError("expected 'name = value'", lineno);
            return {trim(body.substr(0, eq)), trim(body.substr(eq + 1))};
        };

        if (key == "format_version") {
            if (int_value(rest) != kModelFormatVersion)
                throw ModelError("unsupported format_version " + rest, lineno);
        } else if (key == "name") {
            m.name = rest;
        } else if (key == "nx" || key == "nu" || key == "ny") {
            if (!rest.empty() && rest[0] == '=') rest = trim(rest.substr(1));
            int v = int_value(rest);
            if (v <= 0) throw ModelError(key + " must be positive", lineno);
            (key == "nx" ? (have_nx = true, m.nx) : key == "nu" ? (have_nu = true, m.nu) : (have_ny = true, m.ny)) = v;
        } else if (key == "time") {
            auto words = split(rest, ' ');
            std::erase_if(words, [](const std::string& w) { return w.empty(); });
            if (words.empty()) throw ModelError("time needs 'continuous' or 'discrete'", lineno);
            if (words[0] == "continuous" && words.size() == 1) {
                m.time = TimeDomain::continuous();
            } else if (words[0] == "discrete" && words.size() <= 2) {
                double ts = words.size() == 2 ? detail::constant_value(words[1], opts, lineno) : -1.0;
                if (!(ts > 0.0 || ts == -1.0)) throw ModelError("sample time must be positive or -1", lineno);
                m.time = TimeDomain::discrete(ts);
            } else {
                throw ModelError("bad time specification '" + rest + "'", lineno);
            }
        } else if (key == "const") {
            auto [name, value] = assignment(rest);
            if (name.empty() || detail::positional_index(name, 'x') || detail::positional_index(name, 'u') ||
                name == "t" || name == "lambda" || name == "pi")
                throw ModelError("invalid constant name '" + name + "'", lineno);
            double v = detail::constant_value(value, opts, lineno);
            opts.constants[name] = v;
            m.constants[name] = v;
        } else if (key == "alias") {
            auto [name, target] = assignment(rest);
            if (!detail::positional_index(target, 'x') && !detail::positional_index(target, 'u'))
                throw ModelError("alias target must be a state or input, got '" + target + "'", lineno);
            opts.aliases[name] = target;
        } else if (key == "anchor") {
            auto [which, values] = assignment(rest);
            std::vector<double> v;
            for (const auto& item : split(values, ',')) v.push_back(detail::constant_value(item, opts, lineno));
            if (which == "x") anchor_x = v;
            else if (which == "u") anchor_u = v;
            else throw ModelError("anchor must be 'x' or 'u'", lineno);
        } else if (key == "box") {
            box_lines.emplace_back(rest, lineno);
        } else if (key.size() >= 2 && (key[0] == 'f' || key[0] == 'h') &&
                   detail::positional_index("x" + key.substr(1), 'x')) {
            auto [lhs, expr] = assignment(line);
            if (lhs != key) throw ModelError("malformed equation", lineno);
            int idx = *detail::positional_index("x" + key.substr(1), 'x');
            auto& src = key[0] == 'f' ? f_src : h_src;
            auto& lines = key[0] == 'f' ? f_line : h_line;
            if (src.count(idx)) throw ModelError("duplicate equation " + key, lineno);
            src[idx] = expr;
            lines[idx] = lineno;
        } else {
            throw ModelError("unknown directive '" + key + "'", lineno);
        }
    }

    if (!have_nx || !have_nu || !have_ny) throw ModelError("model must declare nx, nu and ny");
    opts.nx = m.nx;
    opts.nu = m.nu;
    auto build = [&](std::map<int, std::string>& src, std::map<int, int>& lines, int n, char tag) {
        std::vector<Expr> out;
        for (int i = 1; i <= n; ++i) {
            auto it = src.find(i);
            if (it == src.end()) throw ModelError(std::string("missing equation ") + tag + std::to_string(i));
            try {
                out.push_back(parse_expr(it->second, opts));
            } catch (const ParseError& e) {
                throw ModelError(std::string(1, tag) + std::to_string(i) + ": " + e.what(), lines[i]);
            }
        }
        if (static_cast<int>(src.size()) != n || src.rbegin()->first != n)
            throw ModelError(std::string("too many equations ") + tag + "..");
        return out;
    };
    m.f = build(f_src, f_line, m.nx, 'f');
    m.h = build(h_src, h_line, m.ny, 'h');

    if (anchor_x || anchor_u) {
        Anchor a = Anchor::origin(m.nx, m.nu);
        if (anchor_x) {
            if (static_cast<int>(anchor_x->size()) != m.nx) throw ModelError("anchor x needs nx values");
            a.x_bar = Eigen::Map<const Eigen::VectorXd>(anchor_x->data(), m.nx);
        }
        if (anchor_u) {
            if (static_cast<int>(anchor_u->size()) != m.nu) throw ModelError("anchor u needs nu values");
            a.u_bar = Eigen::Map<const Eigen::VectorXd>(anchor_u->data(), m.nu);
        }
        m.anchor = a;
    }

    if (!box_lines.empty()) {
        std::vector<std::optional<Interval>> bx(m.nx), bu(m.nu);
        for (const auto& [body, ln] : box_lines) {
            auto eq = body.find('=');
            if (eq == std::string::npos) throw ModelError("expected 'box var = lo, hi'", ln);
            std::string var = trim(body.substr(0, eq));
            if (auto it = opts.aliases.find(var); it != opts.aliases.end()) var = it->second;
            auto bounds = split(body.substr(eq + 1), ',');
            if (bounds.size() != 2) throw ModelError("box needs two bounds", ln);
            Interval iv{detail::constant_value(bounds[0], opts, ln), detail::constant_value(bounds[1], opts, ln)};
            if (!(iv.lo <= iv.hi)) throw ModelError("box lower bound exceeds upper bound", ln);
            if (auto i = detail::positional_index(var, 'x'); i && *i <= m.nx) bx[*i - 1] = iv;
            else if (auto j = detail::positional_index(var, 'u'); j && *j <= m.nu) bu[*j - 1] = iv;
            else throw ModelError("box variable '" + var + "' is not a state or input", ln);
        }
        Box box;
        for (int i = 0; i < m.nx; ++i) {
            if (!bx[i]) throw ModelError("box is missing " + state_name(i));
            box.x.push_back(*bx[i]);
        }
        for (int i = 0; i < m.nu; ++i) {
            if (!bu[i]) throw ModelError("box is missing " + input_name(i));
            box.u.push_back(*bu[i]);
        }
        m.box = box;
    }

    m.validate();
    return m;
}

inline NlssModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    NlssModel m = parse_model(ss.str());
    if (m.name.empty()) m.name = path;
    return m;
}

}  // namespace lpvembed
