#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature, plus a panel driver for
// oscillatory integrands whose natural breakpoints are known in advance.

#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <span>
#include <vector>

namespace resq::quad {

struct Result {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
    std::size_t evaluations = 0;
    bool converged = true;
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

// Gauss weights for the odd-indexed Kronrod nodes (the 7-point rule).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment kronrod15(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kKronrodWeights[7];
    double gauss = fc * kGaussWeights[3];
    for (int i = 0; i < 7; ++i) {
        const double dx = half * kKronrodNodes[i];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += kKronrodWeights[i] * sum;
        if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::fabs(kronrod - gauss)};
}

}  // namespace detail

/// Adaptive integral of f over [a, b]. Stops when the summed error estimate is
/// below max(abs_tol, rel_tol·|I|) or after max_segments subdivisions, in
/// which case `converged` is false and `error` is what was achieved.
template <class F>
Result integrate(F&& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                 std::size_t max_segments = 4000) {
    Result out;
    if (a == b) return out;
    std::priority_queue<detail::Segment> heap;
    auto first = detail::kronrod15(f, a, b);
    out.evaluations = 15;
    double total = first.value;
    double error = first.error;
    heap.push(first);
    while (error > std::max(abs_tol, rel_tol * std::fabs(total))) {
        if (heap.size() >= max_segments) {
            out.converged = false;
            break;
        }
        auto worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {  // interval exhausted at double precision
            out.converged = false;
            heap.push(worst);
            break;
        }
        auto left = detail::kronrod15(f, worst.a, mid);
        auto right = detail::kronrod15(f, mid, worst.b);
        out.evaluations += 30;
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    // Re-sum to shed the drift of incremental updates.
    total = 0.0;
    error = 0.0;
    while (!heap.empty()) {
        total += heap.top().value;
        error += heap.top().error;
        heap.pop();
    }
    out.value = total;
    out.error = error;
    return out;
}

/// Integrates over consecutive panels [breaks[i], breaks[i+1]], giving each a
/// share of abs_tol proportional to its width. Panels are summed in order so
/// the result is deterministic.
template <class F>
Result integrate_panels(F&& f, std::span<const double> breaks, double abs_tol) {
    Result out;
    if (breaks.size() < 2) return out;
    const double span_total = breaks.back() - breaks.front();
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double width = breaks[i + 1] - breaks[i];
        const double local_tol = std::max(abs_tol * width / span_total, 1e-300);
        auto piece = integrate(f, breaks[i], breaks[i + 1], local_tol, 1e-15, 200);
        out.value += piece.value;
        out.error += piece.error;
        out.evaluations += piece.evaluations;
        out.converged = out.converged && (piece.converged || piece.error <= local_tol * 10.0);
    }
    return out;
}

}  // namespace resq::quad
