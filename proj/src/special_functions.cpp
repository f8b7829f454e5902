#include "resq/special_functions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "resq/errors.hpp"

namespace resq {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 500;

// -γ_E - ln x - Σ_{n≥1} (-x)^n / (n·n!), accurate for 0 < x < 1.
double e1_series(double x) {
    double sum = 0.0;
    double power = 1.0;  // (-x)^n / n!
    for (int n = 1; n < kMaxIter; ++n) {
        power *= -x / n;
        const double term = power / n;
        sum += term;
        if (std::fabs(term) < kEps * std::fabs(sum)) break;
    }
    return -std::numbers::egamma - std::log(x) - sum;
}

// e^x E₁(x) by modified Lentz on the even contraction
// 1/(x+1- 1²/(x+3- 2²/(x+5- ...))), x >= 1.
double e1_scaled_fraction(double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIter; ++i) {
        const double an = -static_cast<double>(i) * i;
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        const double del = c * d;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) return h;
    }
    throw QuadratureError("incomplete_gamma0: continued fraction did not converge at x = " +
                              std::to_string(x),
                          kEps);
}

void require_positive(double x) {
    if (!(x > 0.0)) {
        throw DomainError("incomplete_gamma0: Γ(0, x) requires x > 0, got " + std::to_string(x));
    }
}

}  // namespace

double incomplete_gamma0(double x) {
    require_positive(x);
    if (x < 1.0) return e1_series(x);
    return e1_scaled_fraction(x) * std::exp(-x);
}

double scaled_incomplete_gamma0(double x) {
    require_positive(x);
    if (x < 1.0) return e1_series(x) * std::exp(x);
    return e1_scaled_fraction(x);
}

}  // namespace resq
