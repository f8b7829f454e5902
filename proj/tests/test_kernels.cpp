#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/expint.hpp>

#include "resq/errors.hpp"
#include "resq/kernels.hpp"

using namespace resq;

namespace {

ReservoirParams params(double eps, double theta = 0.015) {
    return ReservoirParams{5.0, eps, theta, 1.0, 0.0};
}

// (1 − cos ωt)/(ω²t) without cancellation; at ε_dd = 1, ω ~ k² reaches 1e-8 already at k ~ 1e-4.
double one_minus_cos_over(double w, double t) {
    const double s = std::sin(0.5 * w * t);
    return 2.0 * s * s / (w * w * t);
}

// Brute-force k-space integral with Boost's adaptive G-K on equal sub-intervals;
// shares nothing with the library's panel logic or kernel helpers.
template <class G>
double k_integral(const ReservoirParams& p, G g, int pieces = 64) {
    const double k_max = std::sqrt(32.0 * std::log(10.0));
    auto f = [&](double k) {
        if (k == 0.0) return 0.0;
        const double nu = 1.0 - 1.5 * k * k * std::exp(0.5 * k * k) *
                                    boost::math::expint(1, 0.5 * k * k);
        const double rr = k * k + p.eta * (1.0 - p.epsilon_dd * nu);
        const double omega = 0.5 * k * std::sqrt(rr);
        const double w = p.theta * k * k * std::exp(-0.5 * k * k) / omega;
        return w * g(omega);
    };
    double sum = 0.0;
    for (int i = 0; i < pieces; ++i) {
        const double a = k_max * i / pieces;
        const double b = k_max * (i + 1) / pieces;
        sum += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 8, 1e-12);
    }
    return sum;
}

}  // namespace

TEST_CASE("k-space kernels agree with a brute-force oracle") {
    for (double eps : {-1.0, 0.0, 1.0}) {
        const auto p = params(eps);
        for (double t : {0.5, 1.0, 10.0}) {
            const double d = k_integral(p, [t](double w) { return (w * t - std::sin(w * t)) / (w * w * t); });
            const double g = k_integral(p, [t](double w) { return one_minus_cos_over(w, t); });
            CHECK(delta_kernel(t, p) == doctest::Approx(d).epsilon(1e-9));
            CHECK(gamma_kernel(t, p) == doctest::Approx(g).epsilon(1e-9));
        }
    }
}

TEST_CASE("small-t limits") {
    const auto p = params(-1.0);
    const double first = k_integral(p, [](double w) { return w; });
    const double zeroth = k_integral(p, [](double) { return 1.0; });
    const double t = 1e-4;
    CHECK(delta_kernel(t, p) / (t * t) == doctest::Approx(first / 6.0).epsilon(1e-5));
    CHECK(gamma_kernel(t, p) / t == doctest::Approx(zeroth / 2.0).epsilon(1e-5));
}

TEST_CASE("linear in the coupling prefactor") {
    for (double t : {0.7, 30.0, 400.0}) {
        const double d1 = delta_kernel(t, params(-1.0, 0.015));
        const double d2 = delta_kernel(t, params(-1.0, 0.045));
        const double g1 = gamma_kernel(t, params(-1.0, 0.015));
        const double g2 = gamma_kernel(t, params(-1.0, 0.045));
        CHECK(d2 == doctest::Approx(3.0 * d1).epsilon(1e-12));
        CHECK(g2 == doctest::Approx(3.0 * g1).epsilon(1e-12));
    }
    CHECK(delta_infinity(params(0.0, 0.03)) == doctest::Approx(2.0 * delta_infinity(params(0.0))).epsilon(1e-12));
}

TEST_CASE("zero temperature is the T -> 0 limit") {
    auto cold = params(-1.0);
    cold.temperature = 1e-12;
    for (double t : {1.0, 20.0}) {
        CHECK(gamma_kernel(t, cold) == doctest::Approx(gamma_kernel(t, params(-1.0))).epsilon(1e-9));
    }
    auto warm = params(-1.0);
    warm.temperature = 0.5;
    CHECK(gamma_kernel(20.0, warm) > gamma_kernel(20.0, params(-1.0)));
    CHECK(delta_kernel(20.0, warm) == delta_kernel(20.0, params(-1.0)));
}

TEST_CASE("repulsive reservoir: plateau, decreasing gamma, delta above gamma") {
    const auto p = params(-1.0);
    const double d_inf = delta_infinity(p);
    CHECK(d_inf == doctest::Approx(0.0148127177362).epsilon(1e-9));
    CHECK(delta_kernel(1000.0, p) == doctest::Approx(d_inf).epsilon(1e-3));
    CHECK(delta_kernel(1000.0, params(0.0)) == doctest::Approx(delta_infinity(params(0.0))).epsilon(2e-3));

    double prev = gamma_kernel(5.0, p);
    for (double t = 6.0; t <= 50.0; t += 1.0) {
        const double g = gamma_kernel(t, p);
        CHECK(g < prev);
        prev = g;
    }
    for (double t : log_time_grid(5.0, 1000.0, 25)) {
        CHECK(delta_kernel(t, p) > gamma_kernel(t, p));
    }
}

TEST_CASE("no phonon branch at epsilon_dd = 1: delta keeps growing") {
    CHECK_THROWS_AS(delta_infinity(params(1.0)), QuadratureError);
    try {
        delta_infinity(params(1.0));
    } catch (const QuadratureError& e) {
        CHECK(std::isinf(e.achieved_tolerance()));
    }
    CHECK(delta_kernel(1000.0, params(1.0)) > delta_kernel(1000.0, params(-1.0)));
    CHECK(delta_kernel(1000.0, params(1.0)) > 1.5 * delta_kernel(200.0, params(1.0)));
}

TEST_CASE("kernels are non-negative and vanish as t -> 0") {
    for (double eps : {-1.0, 0.0, 1.0}) {
        for (double t : log_time_grid(1e-6, 1e3, 19)) {
            CHECK(delta_kernel(t, params(eps)) >= 0.0);
            CHECK(gamma_kernel(t, params(eps)) >= 0.0);
        }
        CHECK(delta_kernel(1e-8, params(eps)) < 1e-12);
        CHECK(gamma_kernel(1e-8, params(eps)) < 1e-9);
    }
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(delta_kernel(0.0, params(0.0)), DomainError);
    CHECK_THROWS_AS(gamma_kernel(-1.0, params(0.0)), DomainError);
    CHECK_THROWS_AS(delta_kernel(1.0, params(2.0)), DomainError);
}

TEST_CASE("oscillation panels cover [0, k_max] in increasing order") {
    const auto p = params(-1.0);
    for (double t : {0.1, 10.0, 1000.0}) {
        const auto b = oscillation_panels(t, p, 8.0);
        CHECK(b.front() == 0.0);
        CHECK(b.back() == 8.0);
        for (std::size_t i = 1; i < b.size(); ++i) {
            CHECK(b[i] > b[i - 1]);
            const double phase = (bogoliubov_energy(b[i], p) - bogoliubov_energy(b[i - 1], p)) * t;
            CHECK(phase <= 1.5 * std::numbers::pi + 1e-9);
        }
    }
}

TEST_CASE("monotone cubic interpolation") {
    const MonotoneCubic f({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 1.0, 5.0});
    CHECK(f(1.0) == 1.0);
    CHECK(f(2.0) == 1.0);
    CHECK(f(1.5) == doctest::Approx(1.0));  // flat segment stays flat
    double prev = f(0.0);
    for (double x = 0.01; x <= 3.0; x += 0.01) {
        CHECK(f(x) >= prev - 1e-15);
        prev = f(x);
    }
    CHECK_THROWS_AS(MonotoneCubic({0.0, 0.0}, {1.0, 2.0}), DomainError);
}

TEST_CASE("kernel table") {
    const auto p = params(-1.0);
    const auto times = log_time_grid(0.1, 100.0, 24);
    CHECK(times.front() == 0.1);
    CHECK(times.back() == 100.0);
    const auto one = build_kernel_table(p, times, {}, 1);
    const auto four = build_kernel_table(p, times, {}, 4);
    CHECK(one.delta == four.delta);
    CHECK(one.gamma == four.gamma);
    REQUIRE(one.delta_inf.has_value());
    CHECK(one.delta_at(times[5]) == one.delta[5]);
    CHECK(one.delta_at(50.0) == doctest::Approx(delta_kernel(50.0, p)).epsilon(1e-3));
    CHECK_THROWS_AS(one.delta_at(200.0), RangeError);
    CHECK_THROWS_AS(one.gamma_at(0.01), RangeError);

    std::ostringstream os;
    one.write_csv(os);
    CHECK(os.str().rfind("t,delta,gamma\n", 0) == 0);

    const auto plus = build_kernel_table(params(1.0), times);
    CHECK_FALSE(plus.delta_inf.has_value());

    const auto lin = linear_time_grid(1.0, 2.0, 3);
    CHECK(lin[1] == 1.5);
    CHECK_THROWS_AS(log_time_grid(0.0, 1.0, 4), DomainError);
}
