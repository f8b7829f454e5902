#include "resq/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "resq/csv.hpp"
#include "resq/errors.hpp"
#include "resq/quadrature.hpp"

namespace resq {

DispersionInverter::DispersionInverter(const ReservoirParams& p, double k_max, std::size_t grid)
    : params_(p), k_max_(k_max) {
    params_.validate();
    if (!(k_max > 0.0) || grid < 2) throw DomainError("DispersionInverter: bad range");
    detail::require_stable(params_, k_max_);
    bounds_.push_back(0.0);
    double k_prev = 0.0;
    double s_prev = bogoliubov_slope(0.0, params_);
    for (std::size_t i = 1; i <= grid; ++i) {
        const double k = k_max_ * static_cast<double>(i) / static_cast<double>(grid);
        const double s = bogoliubov_slope(k, params_);
        if ((s_prev > 0.0 && s < 0.0) || (s_prev < 0.0 && s > 0.0)) {
            double lo = k_prev;
            double hi = k;
            for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                if ((bogoliubov_slope(mid, params_) > 0.0) == (s_prev > 0.0)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            bounds_.push_back(0.5 * (lo + hi));
        }
        if (s != 0.0) s_prev = s;
        k_prev = k;
    }
    bounds_.push_back(k_max_);
}

double DispersionInverter::omega_at_k_max() const { return bogoliubov_energy(k_max_, params_); }

std::vector<double> DispersionInverter::extremal_frequencies() const {
    std::vector<double> out;
    for (std::size_t i = 1; i + 1 < bounds_.size(); ++i) {
        out.push_back(bogoliubov_energy(bounds_[i], params_));
    }
    return out;
}

double DispersionInverter::refine(double lo, double hi, double omega) const {
    // ε̄ is monotone on [lo, hi] and ε̄ - ω changes sign across it.
    const bool rising = bogoliubov_energy(hi, params_) > bogoliubov_energy(lo, params_);
    double k = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = bogoliubov_energy(k, params_) - omega;
        if (f == 0.0) return k;
        if ((f < 0.0) == rising) {
            lo = k;
        } else {
            hi = k;
        }
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
        const double slope = bogoliubov_slope(k, params_);
        double next = slope != 0.0 ? k - f / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - k) <= 2.0 * std::numeric_limits<double>::epsilon() * k) return next;
        k = next;
    }
    return k;
}

SpectralBranch DispersionInverter::solve(double omega) const {
    SpectralBranch branch;
    branch.omega = omega;
    for (std::size_t i = 0; i + 1 < bounds_.size(); ++i) {
        const double a = bounds_[i];
        const double b = bounds_[i + 1];
        const double fa = bogoliubov_energy(a, params_) - omega;
        const double fb = bogoliubov_energy(b, params_) - omega;
        if ((fa < 0.0) == (fb < 0.0)) continue;
        const double k = refine(a, b, omega);
        const double slope = std::fabs(bogoliubov_slope(k, params_));
        if (slope < 1e-10) {
            throw DomainError("spectral_density: |dε/dk| < 1e-10 at root k = " +
                              std::to_string(k) + " (band-edge singularity)");
        }
        branch.roots.push_back({k, 1.0 / slope});
    }
    return branch;
}

SpectralSample spectral_sample(double omega, const DispersionInverter& inverter) {
    if (!(omega > 0.0)) throw DomainError("spectral_density: omega must be > 0");
    const auto branch = inverter.solve(omega);
    SpectralSample out{omega, 0.0, branch.roots.size()};
    for (const auto& root : branch.roots) {
        out.J += detail::mode(root.k, inverter.params()).weight * root.weight;
    }
    return out;
}

double spectral_density(double omega, const ReservoirParams& p) {
    if (!(omega > 0.0)) throw DomainError("spectral_density: omega must be > 0");
    // ε̄(k) >= ½k√(k² - η) since 1 - ε_dd ν̃ >= -1; this k_hi puts ε̄(k_hi) above ω.
    const double k_hi = std::max(k_cutoff(p), std::sqrt(p.eta + 2.0 * omega) + 1.0);
    return spectral_sample(omega, DispersionInverter(p, k_hi)).J;
}

namespace {

template <class Weight>
double frequency_space_kernel(double t, const ReservoirParams& p, const QuadratureOptions& opt,
                              Weight&& weight, const char* what) {
    if (!(t > 0.0)) throw DomainError(std::string(what) + ": t must be > 0");
    const DispersionInverter inverter(p, k_cutoff(p, opt));
    const double omega_max = inverter.omega_at_k_max();
    const double step = std::min(std::numbers::pi / t, omega_max / 32.0);
    std::vector<double> breaks;
    const auto n_steps = static_cast<std::size_t>(std::ceil(omega_max / step));
    for (std::size_t i = 0; i < n_steps; ++i) breaks.push_back(static_cast<double>(i) * step);
    for (double w : inverter.extremal_frequencies()) breaks.push_back(w);
    breaks.push_back(omega_max);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (omega_max - breaks[breaks.size() - 2] < 1e-9 * step) breaks.erase(breaks.end() - 2);

    auto integrand = [&](double w) {
        if (w <= 0.0) return 0.0;
        return spectral_sample(w, inverter).J * weight(w);
    };
    return detail::checked(quad::integrate_panels(integrand, breaks, opt.abs_tol), opt, what);
}

}  // namespace

double delta_kernel_frequency_space(double t, const ReservoirParams& p,
                                    const QuadratureOptions& opt) {
    return frequency_space_kernel(
        t, p, opt, [t](double w) { return t * detail::sine_deficit(w * t); },
        "delta_kernel_frequency_space");
}

double gamma_kernel_frequency_space(double t, const ReservoirParams& p,
                                    const QuadratureOptions& opt) {
    return frequency_space_kernel(
        t, p, opt,
        [t, &p](double w) {
            return t * detail::cosine_deficit(w * t) * detail::thermal_factor(w, p.temperature);
        },
        "gamma_kernel_frequency_space");
}

void write_spectral_csv(std::ostream& os, std::span<const SpectralSample> samples) {
    os << "omega,J,branch_count\n";
    for (const auto& s : samples) {
        os << fmt12(s.omega) << ',' << fmt12(s.J) << ',' << s.branch_count << '\n';
    }
}

}  // namespace resq
