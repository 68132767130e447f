#pragma once

// Bundled example models and random model generators used by the property
// suites.

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lpvembed/model.hpp"

namespace lpvembed::corpus {

inline constexpr std::string_view kUnbalancedDisk = R"(# Unbalanced disk: angle x1 [rad], angular velocity x2 [rad/s],
# motor voltage u1 [V], measured angle y1.
format_version 1
name unbalanced_disk
nx 2
nu 1
ny 1
time continuous

const M   = 7e-2
const g   = 9.8
const l   = 4.2e-2
const J   = 2.2e-4
const tau = 5.971e-1
const Km  = 1.531e1

alias theta = x1
alias omega = x2

f1 = omega
f2 = (M*g*l/J)*sin(theta) - (1/tau)*omega + (Km/tau)*u1
h1 = theta

box theta = -2*pi, 2*pi
box omega = -10, 10
box u1    = -5, 5
)";

inline constexpr std::string_view kTanhExample = R"(# First-order system with a saturating output map.
format_version 1
name tanh_example
nx 1
nu 1
ny 1
time discrete -1

f1 = -x1 + u1
h1 = tanh(x1)

box x1 = -3, 3
box u1 = -1, 1
)";

struct BundledModel {
    std::string_view name;
    std::string_view text;
};

inline constexpr std::array<BundledModel, 2> kBundled = {{
    {"unbalanced_disk", kUnbalancedDisk},
    {"tanh_example", kTanhExample},
}};

inline const BundledModel* find_bundled(std::string_view name) {
    for (const auto& b : kBundled)
        if (b.name == name) return &b;
    return nullptr;
}

inline NlssModel bundled_model(std::string_view name) {
    const BundledModel* b = find_bundled(name);
    if (!b) throw ModelError("no bundled model named '" + std::string(name) + "'");
    return parse_model(b->text);
}

// ---------------------------------------------------------------------------
// Random model generators
// ---------------------------------------------------------------------------

enum class Family {
    Polynomial,     // products and powers of states and inputs
    Trigonometric,  // sin / cos of states and state-input sums
    Saturating,     // tanh nonlinearities
    Mixed,          // any of the above
};

inline const char* to_string(Family f) {
    switch (f) {
    case Family::Polynomial: return "polynomial";
    case Family::Trigonometric: return "trigonometric";
    case Family::Saturating: return "saturating";
    default: return "mixed";
    }
}

struct GeneratorLimits {
    int max_nx = 4;
    int max_nu = 4;
    int max_ny = 2;
    int max_terms = 3;
};

namespace detail {

inline std::string random_term(std::mt19937_64& rng, Family family, int nx, int nu) {
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(1, n)(rng); };
    auto x = [&] { return "x" + std::to_string(pick(nx)); };
    auto u = [&] { return "u" + std::to_string(pick(nu)); };
    if (family == Family::Mixed) family = static_cast<Family>(pick(3) - 1);
    switch (family) {
    case Family::Polynomial:
        switch (pick(5)) {
        case 1: return x() + "*" + x();
        case 2: return x() + "^2";
        case 3: return x() + "*" + u();
        case 4: return x() + "^3";
        default: return u() + "^2*" + x();
        }
    case Family::Trigonometric:
        switch (pick(5)) {
        case 1: return "sin(" + x() + ")";
        case 2: return "cos(" + x() + ")";
        case 3: return "sin(" + x() + " + " + u() + ")";
        case 4: return "cos(" + x() + ")*" + u();
        default: return "sin(" + x() + ")*" + x();
        }
    default:
        switch (pick(4)) {
        case 1: return "tanh(" + x() + ")";
        case 2: return "tanh(" + x() + " + " + u() + ")";
        case 3: return "tanh(" + x() + ")*" + x();
        default: return "tanh(0.5*" + x() + " - " + u() + ")";
        }
    }
}

inline std::string random_coefficient(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    double c = std::round(d(rng) * 100.0) / 100.0;
    if (c == 0.0) c = 0.5;
    std::ostringstream os;
    os << c;
    return os.str();
}

inline std::string random_rhs(std::mt19937_64& rng, Family family, int nx, int nu, int terms, int linear_state) {
    std::string s = random_coefficient(rng) + "*x" + std::to_string(linear_state);
    for (int k = 0; k < terms; ++k)
        s += " + (" + random_coefficient(rng) + ")*" + random_term(rng, family, nx, nu);
    return s;
}

}  // namespace detail

/// Model text with random dimensions and entries of the given family. All
/// states and inputs range over [-2, 2] in the declared box.
inline std::string random_model_text(std::mt19937_64& rng, Family family, const GeneratorLimits& lim = {}) {
    auto dim = [&](int hi) { return std::uniform_int_distribution<int>(1, hi)(rng); };
    const int nx = dim(lim.max_nx), nu = dim(lim.max_nu), ny = dim(lim.max_ny);
    std::ostringstream os;
    os << "format_version 1\nname random_" << to_string(family) << "\n";
    os << "nx " << nx << "\nnu " << nu << "\nny " << ny << "\ntime continuous\n";
    for (int i = 1; i <= nx; ++i)
        os << "f" << i << " = " << detail::random_rhs(rng, family, nx, nu, dim(lim.max_terms), i) << "\n";
    for (int i = 1; i <= ny; ++i)
        os << "h" << i << " = " << detail::random_rhs(rng, family, nx, nu, dim(lim.max_terms) - 1, dim(nx)) << "\n";
    for (int i = 1; i <= nx; ++i) os << "box x" << i << " = -2, 2\n";
    for (int i = 1; i <= nu; ++i) os << "box u" << i << " = -2, 2\n";
    return os.str();
}

inline NlssModel random_model(std::mt19937_64& rng, Family family, const GeneratorLimits& lim = {}) {
    return parse_model(random_model_text(rng, family, lim));
}

/// Bundled models plus one fixed-seed instance of each generator family.
inline std::vector<NlssModel> example_corpus() {
    std::vector<NlssModel> out;
    for (const auto& b : kBundled) out.push_back(parse_model(b.text));
    std::uint64_t seed = 2024;
    for (Family f : {Family::Polynomial, Family::Trigonometric, Family::Saturating}) {
        std::mt19937_64 rng(seed++);
        out.push_back(random_model(rng, f));
    }
    return out;
}

}  // namespace lpvembed::corpus
