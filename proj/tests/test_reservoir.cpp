#include "doctest.h"

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/expint.hpp>

#include "resq/errors.hpp"
#include "resq/reservoir.hpp"

using namespace resq;

namespace {

// ν̃ straight from the definition, with Boost's E1.
double form_factor_oracle(double k) {
    const double x = 0.5 * k * k;
    return 1.0 - 1.5 * k * k * std::exp(x) * boost::math::expint(1, x);
}

ReservoirParams params(double eps) { return ReservoirParams{5.0, eps, 0.015, 1.0, 0.0}; }

}  // namespace

TEST_CASE("form factor limits and oracle") {
    CHECK(dipole_form_factor(0.0) == 1.0);
    CHECK(dipole_form_factor(1.0) == doctest::Approx(-0.3845).epsilon(1e-3));
    // ν̃ = −2 + 6/k² − 24/k⁴ + O(k⁻⁶): the approach to −2 is algebraic, not exponential.
    CHECK(dipole_form_factor(50.0) + 2.0 == doctest::Approx(6.0 / 2500.0 - 24.0 / 6.25e6).epsilon(1e-3));
    CHECK(std::fabs(dipole_form_factor(100.0) + 2.0) < 1e-3);
    for (double k = 0.05; k < 30.0; k *= 1.3) {
        CHECK(dipole_form_factor(k) == doctest::Approx(form_factor_oracle(k)).epsilon(1e-11));
    }
}

TEST_CASE("form factor is monotone decreasing from 1 to -2") {
    double prev = dipole_form_factor(0.0);
    for (int i = 1; i <= 20000; ++i) {
        const double k = 0.0025 * i;
        const double v = dipole_form_factor(k);
        CHECK(v < prev);
        CHECK(v > -2.0);
        prev = v;
    }
}

TEST_CASE("form factor derivative matches central differences") {
    for (double k : {0.01, 0.3, 1.0, 2.5, 7.0, 20.0}) {
        const double h = 1e-5 * std::max(1.0, k);
        const double fd = (dipole_form_factor(k + h) - dipole_form_factor(k - h)) / (2.0 * h);
        CHECK(dipole_form_factor_derivative(k) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("tilt tuning and the magic angle") {
    CHECK(effective_epsilon_dd(1.0, 0.0) == 1.0);
    CHECK(effective_epsilon_dd(1.0, std::numbers::pi / 2) == doctest::Approx(-0.5));
    CHECK(std::fabs(effective_epsilon_dd(1.0, 54.7356 * std::numbers::pi / 180.0)) < 1e-5);
    // 54.74° is the angle rounded to 0.01°; the residual is set by that rounding.
    CHECK(effective_epsilon_dd(1.0, 54.74 * std::numbers::pi / 180.0) ==
          doctest::Approx(1.0 - 1.5 * std::pow(std::sin(54.74 * std::numbers::pi / 180.0), 2)).epsilon(1e-12));
    CHECK(std::fabs(effective_epsilon_dd(1.0, 54.74 * std::numbers::pi / 180.0)) < 2e-4);
    CHECK(std::sin(magic_angle()) * std::sin(magic_angle()) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    for (double eps : {-1.0, -0.3, 0.5, 1.0, 1.17}) {
        CHECK(std::fabs(effective_epsilon_dd(eps, magic_angle())) < 1e-12);
    }
}

TEST_CASE("Bogoliubov energy values") {
    CHECK(bogoliubov_energy(0.0, params(0.0)) == 0.0);
    CHECK(bogoliubov_energy(1.0, params(0.0)) == doctest::Approx(std::sqrt(6.0) / 2.0).epsilon(1e-15));
    const double expected = 0.5 * std::sqrt(1.0 + 5.0 * (1.0 + form_factor_oracle(1.0)));
    CHECK(bogoliubov_energy(1.0, params(-1.0)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dispersion limits: sound speed and free particle") {
    for (double eps : {-1.0, 0.0, 0.5}) {
        const auto p = params(eps);
        const double c = 0.5 * std::sqrt(p.eta * (1.0 - eps));
        CHECK(bogoliubov_energy(1e-5, p) / 1e-5 == doctest::Approx(c).epsilon(1e-6));
        CHECK(bogoliubov_energy(1e4, p) / 1e8 == doctest::Approx(0.5).epsilon(1e-6));
        CHECK(bogoliubov_slope(1e-7, p) == doctest::Approx(c).epsilon(1e-6));
    }
}

TEST_CASE("slope matches central differences") {
    for (double eps : {-1.0, 0.0, 1.0}) {
        for (double k : {0.2, 1.0, 3.0, 8.0}) {
            const auto p = params(eps);
            const double h = 1e-6;
            const double fd = (bogoliubov_energy(k + h, p) - bogoliubov_energy(k - h, p)) / (2.0 * h);
            CHECK(bogoliubov_slope(k, p) == doctest::Approx(fd).epsilon(1e-7));
        }
    }
}

TEST_CASE("Bogoliubov amplitudes") {
    const auto uv = bogoliubov_uv(1.0, params(0.0));
    const double r = std::sqrt(std::sqrt(6.0) / 2.0 / 0.5);
    CHECK(uv.u == doctest::Approx(0.5 * (r + 1.0 / r)).epsilon(1e-14));
    CHECK(uv.v == doctest::Approx(0.5 * (r - 1.0 / r)).epsilon(1e-14));
    for (double eps : {-1.0, 0.0, 1.0}) {
        for (double k = 0.01; k < 40.0; k *= 1.5) {
            const auto a = bogoliubov_uv(k, params(eps));
            CHECK(a.u * a.u - a.v * a.v == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(a.u >= 1.0);
        }
    }
    const auto far = bogoliubov_uv(200.0, params(0.0));
    CHECK(far.u == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(std::fabs(far.v) < 1e-4);
    CHECK_THROWS_AS(bogoliubov_uv(0.0, params(0.0)), DomainError);
}

TEST_CASE("stability scan") {
    for (double eps : {-1.0, 0.0, 1.0}) {
        const auto r = stability_scan(params(eps), 50.0, 20000);
        CHECK(r.stable);
        CHECK_FALSE(r.first_unstable_k.has_value());
    }
    // Strong attractive tail (ε_dd = −1, large η): 1 + ν̃(k) < 0 beyond k ≈ 1.9 opens a
    // finite-k roton instability.
    ReservoirParams bad = params(-1.0);
    bad.eta = 200.0;
    const auto r = stability_scan(bad, 10.0, 2000);
    REQUIRE_FALSE(r.stable);
    const double k = *r.first_unstable_k;
    CHECK(bogoliubov_radicand(k + 1e-7, bad) < 0.0);
    REQUIRE(k > 1.0);
    CHECK(bogoliubov_radicand(k - 1e-7, bad) >= 0.0);
    CHECK_THROWS_AS(bogoliubov_energy(k + 1e-3, bad), InstabilityError);
}

TEST_CASE("coupling weight") {
    const auto p = params(0.0);
    CHECK(coupling_weight(1.0, p) ==
          doctest::Approx(0.015 * std::exp(-0.5) / (std::sqrt(6.0) / 2.0)).epsilon(1e-14));
    for (double eps : {-1.0, 0.0, 0.5}) {
        const auto q = params(eps);
        const double k = 1e-6;
        CHECK(coupling_weight(k, q) / k ==
              doctest::Approx(q.theta * 2.0 / std::sqrt(q.eta * (1.0 - eps))).epsilon(1e-6));
    }
    CHECK(coupling_weight(40.0, p) < 1e-300);
    CHECK_THROWS_AS(coupling_weight(0.0, p), DomainError);
}

TEST_CASE("parameter validation") {
    CHECK_NOTHROW(params(-1.0).validate());
    CHECK_NOTHROW(params(1.0).validate());
    CHECK_THROWS_AS(params(1.01).validate(), DomainError);
    ReservoirParams p = params(0.0);
    p.theta = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = params(0.0);
    p.temperature = -1.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
}

TEST_CASE("lab units: Rb impurities in a Dy reservoir") {
    using namespace constants;
    LabParams lab;
    lab.n0 = 1e8;
    lab.a_B = 112.0 * kBohrRadius;
    lab.a_AB = 5e-9;
    lab.m_A = 87.0 * kAtomicMassUnit;
    lab.m_B = 162.0 * kAtomicMassUnit;
    lab.omega_perp = 2.0 * std::numbers::pi * 1e3;
    lab.omega_A = lab.omega_perp * lab.m_B / lab.m_A;  // equal oscillator lengths
    lab.mu_m = 9.9;

    const auto out = lab_units_to_dimensionless(lab);
    const double ell = std::sqrt(kHbar / (lab.m_B * lab.omega_perp));
    CHECK(ell == doctest::Approx(2.5e-7).epsilon(0.02));
    CHECK(out.params.ell_ratio == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.params.eta == doctest::Approx(5.0).epsilon(0.10));

    // With ℓ_A = ℓ_B the coupling prefactor reduces to n₀ a_AB² (m_A+m_B)² / (4π m_A² ℓ_B).
    const double mass = (lab.m_A + lab.m_B) / lab.m_A;
    const double theta = lab.n0 * lab.a_AB * lab.a_AB * mass * mass / (4.0 * std::numbers::pi * ell);
    CHECK(out.params.theta == doctest::Approx(theta).epsilon(1e-12));
    CHECK(out.params.theta == doctest::Approx(6.52e-3).epsilon(0.01));

    CHECK(out.a_dd / kBohrRadius == doctest::Approx(128.4).epsilon(0.01));
    CHECK(out.params.epsilon_dd == doctest::Approx(131.0 / 112.0).epsilon(0.03));

    const double m_ab = lab.m_A * lab.m_B / (lab.m_A + lab.m_B);
    const double delta_up = 2.0 * kHbar * lab.a_AB * lab.n0 / (m_ab * 2.0 * ell * ell * lab.omega_perp);
    CHECK(out.delta_up == doctest::Approx(delta_up).epsilon(1e-12));

    lab.tilt_angle = magic_angle();
    CHECK(std::fabs(lab_units_to_dimensionless(lab).params.epsilon_dd) < 1e-12);

    lab.a_dd = 131.0 * kBohrRadius;
    lab.tilt_angle = 0.0;
    CHECK(lab_units_to_dimensionless(lab).params.epsilon_dd == doctest::Approx(131.0 / 112.0));

    lab.n0 = -1.0;
    CHECK_THROWS_AS(lab_units_to_dimensionless(lab), DomainError);
}
