#pragma once

// Globally adaptive Gauss-Kronrod 7-15 quadrature with interval bisection.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpvembed {

struct QuadOptions {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    int max_subdivisions = 2000;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    int intervals = 0;
};

/// Tolerance not met within the subdivision budget. Carries the best estimate.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(double estimate, double error_bound)
        : std::runtime_error("quadrature did not converge: estimate " + std::to_string(estimate) +
                             ", error bound " + std::to_string(error_bound)),
          estimate_(estimate),
          error_bound_(error_bound) {}
    double estimate() const { return estimate_; }
    double error_bound() const { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the nodes kKronrodNodes[1], [3], [5] and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

/// One GK15 panel with the QUADPACK error heuristic.
template <typename F>
Segment gk15(F& f, double a, double b) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(centre);
    double resg = fc * kGaussWeights[3];
    double resk = fc * kKronrodWeights[7];
    double resabs = std::abs(resk);
    std::array<double, 7> f1{}, f2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kKronrodNodes[j];
        f1[j] = f(centre - dx);
        f2[j] = f(centre + dx);
        const double sum = f1[j] + f2[j];
        resk += kKronrodWeights[j] * sum;
        resabs += kKronrodWeights[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) resg += kGaussWeights[j / 2] * sum;
    }
    const double mean = resk * 0.5;
    double resasc = kKronrodWeights[7] * std::abs(fc - mean);
    for (int j = 0; j < 7; ++j)
        resasc += kKronrodWeights[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

    const double ahalf = std::abs(half);
    resk *= half;
    resabs *= ahalf;
    resasc *= ahalf;
    double err = std::abs((resk - resg * half));
    if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr double uflow = std::numeric_limits<double>::min();
    if (resabs > uflow / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
    return {a, b, resk, err};
}

}  // namespace detail

/// Integrate `f` over [a, b]. Throws QuadratureError when the tolerance
/// max(abs_tol, rel_tol*|I|) is not reached within the subdivision budget,
/// and std::domain_error on a non-finite integrand value.
template <typename F>
QuadResult integrate_gk15(F&& f, double a, double b, const QuadOptions& opts = {}) {
    if (!(opts.abs_tol > 0.0) && !(opts.rel_tol > 0.0))
        throw std::invalid_argument("integrate_gk15: tolerances must be positive");
    auto checked = [&f](double x) {
        const double v = f(x);
        if (!std::isfinite(v)) throw std::domain_error("integrand is not finite at " + std::to_string(x));
        return v;
    };

    std::priority_queue<detail::Segment> heap;
    detail::Segment first = detail::gk15(checked, a, b);
    double total = first.value;
    double total_err = first.error;
    heap.push(first);
    int intervals = 1;

    while (total_err > std::max(opts.abs_tol, opts.rel_tol * std::abs(total))) {
        if (intervals >= opts.max_subdivisions) throw QuadratureError(total, total_err);
        detail::Segment worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        detail::Segment left = detail::gk15(checked, worst.a, mid);
        detail::Segment right = detail::gk15(checked, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++intervals;
        // Rounding floor reached on every panel: further bisection cannot help.
        if (mid <= worst.a || mid >= worst.b) throw QuadratureError(total, total_err);
    }

    // Re-sum to shed the drift of the incremental updates.
    double value = 0.0, err = 0.0;
    while (!heap.empty()) {
        value += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    return {value, err, intervals};
}

}  // namespace lpvembed
