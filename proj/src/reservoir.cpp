#include "resq/reservoir.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "resq/errors.hpp"
#include "resq/special_functions.hpp"

namespace resq {
namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw DomainError(msg);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

void ReservoirParams::validate() const {
    require(finite_positive(eta), "ReservoirParams: eta must be > 0");
    require(finite_positive(theta), "ReservoirParams: theta must be > 0");
    require(finite_positive(ell_ratio), "ReservoirParams: ell_ratio must be > 0");
    require(std::isfinite(temperature) && temperature >= 0.0,
            "ReservoirParams: temperature must be >= 0");
    require(std::isfinite(epsilon_dd) && epsilon_dd >= -1.0 && epsilon_dd <= 1.0,
            "ReservoirParams: epsilon_dd must lie in [-1, 1]");
}

void LabParams::validate() const {
    require(finite_positive(n0), "LabParams: n0 must be > 0");
    require(finite_positive(a_B), "LabParams: a_B must be > 0");
    require(finite_positive(a_AB), "LabParams: a_AB must be > 0");
    require(finite_positive(m_A) && finite_positive(m_B), "LabParams: masses must be > 0");
    require(finite_positive(omega_perp) && finite_positive(omega_A),
            "LabParams: trap frequencies must be > 0");
    if (a_dd) {
        require(finite_positive(*a_dd), "LabParams: a_dd must be > 0");
    } else {
        require(finite_positive(mu_m), "LabParams: mu_m must be > 0 when a_dd is not given");
    }
    require(std::isfinite(temperature) && temperature >= 0.0,
            "LabParams: temperature must be >= 0");
}

double dipolar_length(double mu_m_bohr, double m_B) {
    using namespace constants;
    const double mu = mu_m_bohr * kBohrMagneton;
    return kMu0 * mu * mu * m_B / (12.0 * std::numbers::pi * kHbar * kHbar);
}

LabConversion lab_units_to_dimensionless(const LabParams& lab) {
    using namespace constants;
    lab.validate();
    const double ell_B = std::sqrt(kHbar / (lab.m_B * lab.omega_perp));
    const double ell_A = std::sqrt(kHbar / (lab.m_A * lab.omega_A));
    const double ell_sum = ell_A * ell_A + ell_B * ell_B;
    const double a_dd = lab.a_dd.value_or(dipolar_length(lab.mu_m, lab.m_B));
    const double m_AB = lab.m_A * lab.m_B / (lab.m_A + lab.m_B);
    const double mass_factor = (lab.m_A + lab.m_B) / lab.m_A;

    LabConversion out;
    out.a_dd = a_dd;
    out.params.eta = 8.0 * lab.n0 * lab.a_B;
    out.params.epsilon_dd = effective_epsilon_dd(a_dd / lab.a_B, lab.tilt_angle);
    out.params.theta = lab.n0 * ell_B * ell_B * ell_B * lab.a_AB * lab.a_AB * mass_factor *
                       mass_factor / (std::numbers::pi * ell_sum * ell_sum);
    out.params.ell_ratio = ell_A / ell_B;
    out.params.temperature = kBoltzmann * lab.temperature / (kHbar * lab.omega_perp);
    out.delta_up = 2.0 * kHbar * kHbar * lab.a_AB * lab.n0 / (m_AB * ell_sum) /
                   (kHbar * lab.omega_perp);
    return out;
}

double dipole_form_factor(double k) {
    require(k >= 0.0, "dipole_form_factor: k must be >= 0");
    const double x = 0.5 * k * k;
    if (x == 0.0) return 1.0;
    return 1.0 - 3.0 * x * scaled_incomplete_gamma0(x);
}

double dipole_form_factor_derivative(double k) {
    require(k >= 0.0, "dipole_form_factor_derivative: k must be >= 0");
    const double x = 0.5 * k * k;
    if (x == 0.0) return 0.0;
    const double h = scaled_incomplete_gamma0(x);
    return -3.0 * k * ((1.0 + x) * h - 1.0);
}

double effective_epsilon_dd(double epsilon_dd_bare, double tilt_angle) {
    const double s = std::sin(tilt_angle);
    return epsilon_dd_bare * (1.0 - 1.5 * s * s);
}

double magic_angle() { return std::asin(std::sqrt(2.0 / 3.0)); }

namespace detail {

double reduced_radicand(double k, const ReservoirParams& p) {
    return k * k + p.eta * (1.0 - p.epsilon_dd * dipole_form_factor(k));
}

Mode mode(double k, const ReservoirParams& p) {
    if (k == 0.0) return {};
    const double rr = reduced_radicand(k, p);
    if (rr <= 0.0) {
        throw InstabilityError("non-positive Bogoliubov radicand at k = " + std::to_string(k), k);
    }
    const double root = std::sqrt(rr);
    const double r = p.ell_ratio;
    return {0.5 * k * root, 2.0 * p.theta * k * std::exp(-0.5 * k * k * r * r) / root};
}

double coupling_weight_or_limit(double k, const ReservoirParams& p) { return mode(k, p).weight; }

}  // namespace detail

double bogoliubov_radicand(double k, const ReservoirParams& p) {
    return k * k * detail::reduced_radicand(k, p);
}

double bogoliubov_energy(double k, const ReservoirParams& p) {
    require(k >= 0.0, "bogoliubov_energy: k must be >= 0");
    const double rr = detail::reduced_radicand(k, p);
    if (rr < 0.0) {
        throw InstabilityError("bogoliubov_energy: negative radicand at k = " + std::to_string(k),
                               k);
    }
    return 0.5 * k * std::sqrt(rr);
}

double bogoliubov_slope(double k, const ReservoirParams& p) {
    require(k >= 0.0, "bogoliubov_slope: k must be >= 0");
    const double rr = detail::reduced_radicand(k, p);
    if (rr < 0.0) {
        throw InstabilityError("bogoliubov_slope: negative radicand at k = " + std::to_string(k),
                               k);
    }
    if (rr == 0.0) return 0.0;
    // d/dk [½ k √rr] with rr = k² + η(1 - ε ν̃):
    //   (4k² + 2η(1 - εν̃) - η k ε ν̃') / (4√rr)
    const double nu = dipole_form_factor(k);
    const double dnu = dipole_form_factor_derivative(k);
    const double num =
        4.0 * k * k + 2.0 * p.eta * (1.0 - p.epsilon_dd * nu) - p.eta * k * p.epsilon_dd * dnu;
    return num / (4.0 * std::sqrt(rr));
}

BogoliubovAmplitudes bogoliubov_uv(double k, const ReservoirParams& p) {
    require(k > 0.0, "bogoliubov_uv: k must be > 0 (phonon limit diverges)");
    const double energy = bogoliubov_energy(k, p);
    const double free = 0.5 * k * k;
    const double a = std::sqrt(energy / free);
    return {0.5 * (a + 1.0 / a), 0.5 * (a - 1.0 / a)};
}

StabilityReport stability_scan(const ReservoirParams& p, double k_max, std::size_t n_samples) {
    require(k_max > 0.0, "stability_scan: k_max must be > 0");
    require(n_samples > 0, "stability_scan: need at least one sample");
    StabilityReport report;
    report.k_max = k_max;
    report.samples = n_samples;
    double k_prev = 0.0;
    for (std::size_t i = 1; i <= n_samples; ++i) {
        const double k = k_max * static_cast<double>(i) / static_cast<double>(n_samples);
        if (detail::reduced_radicand(k, p) < 0.0) {
            double lo = k_prev;
            double hi = k;
            while (hi - lo > 1e-8) {
                const double mid = 0.5 * (lo + hi);
                if (detail::reduced_radicand(mid, p) < 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            report.stable = false;
            report.first_unstable_k = hi;
            return report;
        }
        k_prev = k;
    }
    return report;
}

double coupling_weight(double k, const ReservoirParams& p) {
    require(k > 0.0, "coupling_weight: k must be > 0; the k -> 0 limit is 0");
    return detail::coupling_weight_or_limit(k, p);
}

}  // namespace resq
