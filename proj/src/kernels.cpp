#include "resq/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "resq/csv.hpp"
#include "resq/errors.hpp"
#include "resq/parallel.hpp"
#include "resq/quadrature.hpp"

namespace resq {
namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

namespace detail {

double sine_deficit(double x) {
    if (std::fabs(x) < 0.5) {
        const double x2 = x * x;
        return x *
               (1.0 / 6.0 -
                x2 * (1.0 / 120.0 -
                      x2 * (1.0 / 5040.0 -
                            x2 * (1.0 / 362880.0 - x2 * (1.0 / 39916800.0 - x2 / 6227020800.0)))));
    }
    return (x - std::sin(x)) / (x * x);
}

double cosine_deficit(double x) {
    if (x == 0.0) return 0.5;
    const double s = std::sin(0.5 * x) / x;
    return 2.0 * s * s;
}

double thermal_factor(double omega, double temperature) {
    if (temperature <= 0.0) return 1.0;
    return 1.0 / std::tanh(omega / (2.0 * temperature));
}

void require_stable(const ReservoirParams& p, double k_max) {
    const auto report = stability_scan(p, k_max, 2048);
    if (!report.stable) {
        throw InstabilityError("reservoir unstable: negative Bogoliubov radicand near k = " +
                                   std::to_string(*report.first_unstable_k),
                               *report.first_unstable_k);
    }
}

double checked(const quad::Result& r, const QuadratureOptions& opt, const char* what) {
    const double target = std::max(opt.abs_tol, 1e-13 * std::fabs(r.value));
    if (!std::isfinite(r.value) || r.error > target) {
        throw QuadratureError(std::string(what) + ": quadrature did not converge, achieved " +
                                  fmt12(r.error) + " against " + fmt12(target),
                              r.error);
    }
    return r.value;
}

}  // namespace detail

using detail::checked;
using detail::cosine_deficit;
using detail::require_stable;
using detail::sine_deficit;
using detail::thermal_factor;

double k_cutoff(const ReservoirParams& p, const QuadratureOptions& opt) {
    return opt.k_max_sigma / p.ell_ratio;
}

std::vector<double> oscillation_panels(double t, const ReservoirParams& p, double k_max) {
    const double max_step = k_max / 32.0;
    const double min_step = k_max * 1e-7;
    std::vector<double> breaks{0.0};
    double k = 0.0;
    double omega = 0.0;
    while (k < k_max) {
        const double slope = std::fabs(bogoliubov_slope(k, p));
        double step = slope * t > 0.0 ? std::min(max_step, kPi / (slope * t)) : max_step;
        double next_omega = bogoliubov_energy(std::min(k + step, k_max), p);
        while (step > min_step && std::fabs(next_omega - omega) * t > 1.5 * kPi) {
            step *= 0.5;
            next_omega = bogoliubov_energy(std::min(k + step, k_max), p);
        }
        k += step;
        if (k_max - k < 0.25 * step) k = k_max;
        k = std::min(k, k_max);
        omega = bogoliubov_energy(k, p);
        breaks.push_back(k);
    }
    return breaks;
}

double delta_kernel(double t, const ReservoirParams& p, const QuadratureOptions& opt) {
    if (!(t > 0.0)) throw DomainError("delta_kernel: t must be > 0");
    p.validate();
    const double k_max = k_cutoff(p, opt);
    require_stable(p, k_max);
    const auto breaks = oscillation_panels(t, p, k_max);
    auto integrand = [&](double k) {
        const auto m = detail::mode(k, p);
        if (m.weight == 0.0) return 0.0;
        return m.weight * t * sine_deficit(m.omega * t);
    };
    return checked(quad::integrate_panels(integrand, breaks, opt.abs_tol), opt, "delta_kernel");
}

double gamma_kernel(double t, const ReservoirParams& p, const QuadratureOptions& opt) {
    if (!(t > 0.0)) throw DomainError("gamma_kernel: t must be > 0");
    p.validate();
    const double k_max = k_cutoff(p, opt);
    require_stable(p, k_max);
    const auto breaks = oscillation_panels(t, p, k_max);
    auto integrand = [&](double k) {
        const auto m = detail::mode(k, p);
        if (m.weight == 0.0) return 0.0;
        return m.weight * t * cosine_deficit(m.omega * t) * thermal_factor(m.omega, p.temperature);
    };
    return checked(quad::integrate_panels(integrand, breaks, opt.abs_tol), opt, "gamma_kernel");
}

double delta_infinity(const ReservoirParams& p, const QuadratureOptions& opt) {
    p.validate();
    const double k_max = k_cutoff(p, opt);
    require_stable(p, k_max);
    const double phonon = p.eta * (1.0 - p.epsilon_dd);
    if (phonon <= 0.0) {
        throw QuadratureError(
            "delta_infinity: integral diverges at k -> 0 for epsilon_dd >= 1 (no linear phonon "
            "branch); Delta(t) grows without bound",
            INFINITY);
    }
    // w̃/ω = 4Θ e^{-k²r²/2} / (k² + η(1 - ε ν̃)), finite at k = 0.
    auto integrand = [&](double k) {
        const double r = p.ell_ratio;
        return 4.0 * p.theta * std::exp(-0.5 * k * k * r * r) / detail::reduced_radicand(k, p);
    };
    // Resolve the phonon peak (width ~ √(η(1 - ε_dd))) separately from the tail.
    const double scale = std::min(1.0, std::sqrt(phonon));
    std::vector<double> breaks{0.0};
    for (double b = scale / 64.0; b < k_max; b *= 2.0) breaks.push_back(b);
    breaks.push_back(k_max);
    return checked(quad::integrate_panels(integrand, breaks, opt.abs_tol), opt, "delta_infinity");
}

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n) throw DomainError("MonotoneCubic: need >= 2 matching samples");
    std::vector<double> secant(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = x_[i + 1] - x_[i];
        if (!(h > 0.0)) throw DomainError("MonotoneCubic: abscissae must increase strictly");
        secant[i] = (y_[i + 1] - y_[i]) / h;
    }
    slope_.assign(n, 0.0);
    slope_[0] = secant[0];
    slope_[n - 1] = secant[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (secant[i - 1] * secant[i] <= 0.0) continue;
        // Weighted harmonic mean (Fritsch-Butland), keeps monotone data monotone.
        const double h0 = x_[i] - x_[i - 1];
        const double h1 = x_[i + 1] - x_[i];
        const double w0 = 2.0 * h1 + h0;
        const double w1 = h1 + 2.0 * h0;
        slope_[i] = (w0 + w1) / (w0 / secant[i - 1] + w1 / secant[i]);
    }
}

double MonotoneCubic::operator()(double x) const {
    if (x <= x_.front()) return y_.front();
    if (x >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[i + 1] - x_[i];
    const double s = (x - x_[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * slope_[i] +
           (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * slope_[i + 1];
}

void KernelTable::validate() const {
    if (times.empty() || delta.size() != times.size() || gamma.size() != times.size()) {
        throw DomainError("KernelTable: column sizes differ or table is empty");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (i > 0 && !(times[i] > times[i - 1])) {
            throw DomainError("KernelTable: times must increase strictly");
        }
        if (gamma[i] < 0.0) throw DomainError("KernelTable: negative gamma sample");
    }
}

void KernelTable::write_csv(std::ostream& os) const {
    os << "t,delta,gamma\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        os << fmt12(times[i]) << ',' << fmt12(delta[i]) << ',' << fmt12(gamma[i]) << '\n';
    }
}

double KernelTable::delta_at(double t) const {
    if (t < times.front() || t > times.back()) {
        throw RangeError("KernelTable::delta_at: t outside the tabulated range");
    }
    return MonotoneCubic(times, delta)(t);
}

double KernelTable::gamma_at(double t) const {
    if (t < times.front() || t > times.back()) {
        throw RangeError("KernelTable::gamma_at: t outside the tabulated range");
    }
    return MonotoneCubic(times, gamma)(t);
}

KernelTable build_kernel_table(const ReservoirParams& p, std::span<const double> times,
                               const QuadratureOptions& opt, unsigned threads) {
    KernelTable table;
    table.times.assign(times.begin(), times.end());
    table.delta.assign(times.size(), 0.0);
    table.gamma.assign(times.size(), 0.0);
    parallel_for(times.size(), threads, [&](std::size_t i) {
        table.delta[i] = delta_kernel(table.times[i], p, opt);
        table.gamma[i] = gamma_kernel(table.times[i], p, opt);
    });
    try {
        table.delta_inf = delta_infinity(p, opt);
    } catch (const QuadratureError&) {
        table.delta_inf.reset();
    }
    table.validate();
    return table;
}

std::vector<double> log_time_grid(double t_min, double t_max, std::size_t n) {
    if (!(t_min > 0.0) || !(t_max > t_min) || n < 2) {
        throw DomainError("log_time_grid: need 0 < t_min < t_max and n >= 2");
    }
    std::vector<double> out(n);
    const double ratio = std::log(t_max / t_min);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = t_min * std::exp(ratio * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    out.back() = t_max;
    return out;
}

std::vector<double> linear_time_grid(double t_min, double t_max, std::size_t n) {
    if (!(t_min > 0.0) || !(t_max > t_min) || n < 2) {
        throw DomainError("linear_time_grid: need 0 < t_min < t_max and n >= 2");
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = t_min + (t_max - t_min) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    out.back() = t_max;
    return out;
}

}  // namespace resq
