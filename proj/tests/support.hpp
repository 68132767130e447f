#pragma once

// Test-side generators and independent numerical oracles.

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "lpvembed/lpvembed.hpp"

namespace testing {

using namespace lpvembed;

/// Random expression over the given variables. Every generated tree is
/// smooth and finite for bindings in [-2, 2].
class ExprGen {
public:
    ExprGen(std::uint64_t seed, std::vector<std::string> vars) : rng_(seed), vars_(std::move(vars)) {}

    Expr operator()(int depth = 4) { return gen(depth); }

    std::mt19937_64& rng() { return rng_; }

private:
    int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

    Expr leaf() {
        if (pick(3) == 0) {
            std::uniform_real_distribution<double> d(-3.0, 3.0);
            return constant(std::round(d(rng_) * 100.0) / 100.0);
        }
        return variable(vars_[static_cast<std::size_t>(pick(static_cast<int>(vars_.size())))]);
    }

    // Bounded arguments keep exp / tan / division well conditioned.
    Expr bounded(int depth) { return sin(gen(depth)); }

    static Expr square(const Expr& a) { return a * a; }

    Expr gen(int depth) {
        if (depth <= 0) return leaf();
        switch (pick(16)) {
        case 0: return gen(depth - 1) + gen(depth - 1);
        case 1: return gen(depth - 1) - gen(depth - 1);
        case 2: return gen(depth - 1) * gen(depth - 1);
        case 3: return gen(depth - 1) / (constant(2.0) + square(gen(depth - 1)));
        case 4: return -gen(depth - 1);
        case 5: return sin(gen(depth - 1));
        case 6: return cos(gen(depth - 1));
        case 7: return tan(constant(0.5) * bounded(depth - 1));
        case 8: return tanh(gen(depth - 1));
        case 9: return exp(bounded(depth - 1));
        case 10: return ln(constant(1.5) + bounded(depth - 1));
        case 11: return sqrt(constant(1.0) + square(gen(depth - 1)));
        case 12: return sinc(gen(depth - 1));
        case 13: return pow(gen(depth - 1), constant(static_cast<double>(2 + pick(2))));
        case 14: return expm1c(bounded(depth - 1));
        default: return leaf();
        }
    }

    std::mt19937_64 rng_;
    std::vector<std::string> vars_;
};

inline VarBinding random_binding(std::mt19937_64& rng, const std::vector<std::string>& vars, double lo = -2.0,
                                 double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    VarBinding b;
    for (const auto& v : vars) b.set(v, d(rng));
    return b;
}

/// Sum of |value| over every subtree: first-order scale of the rounding error
/// any re-association of `e` can introduce.
inline double magnitude_sum(const Expr& e, const VarBinding& b) {
    double s = std::abs(evaluate(e, b));
    if (is_unary(e.op())) s += magnitude_sum(e.arg(), b);
    if (is_binary(e.op())) s += magnitude_sum(e.lhs(), b) + magnitude_sum(e.rhs(), b);
    return s;
}

/// Composite Simpson rule with `panels` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

/// Central difference with Richardson extrapolation.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    const double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    const double d2 = (f(x + h / 2) - f(x - h / 2)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

/// Numerical Jacobian of a vector function of (x, u).
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& z, double h = 1e-4) {
    const Eigen::VectorXd f0 = f(z);
    Eigen::MatrixXd J(f0.size(), z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
        auto fj = [&](double v) {
            Eigen::VectorXd zz = z;
            zz[j] = v;
            return f(zz);
        };
        for (Eigen::Index i = 0; i < f0.size(); ++i)
            J(i, j) = central_diff([&](double v) { return fj(v)[i]; }, z[j], h);
    }
    return J;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double lo = -2.0, double hi = 2.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lpvembed_" + name);
    std::filesystem::create_directories(p);
    return p;
}

// Unbalanced disk constants, restated for oracle use.
inline constexpr double kM = 7e-2, kG = 9.8, kL = 4.2e-2, kJ = 2.2e-4, kTau = 5.971e-1, kKm = 1.531e1;
inline double disk_gain() { return kM * kG * kL / kJ; }

}  // namespace testing
