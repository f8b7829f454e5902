#pragma once

// Dephasing kernels Δ(t) (reservoir-induced twisting rate) and γ(t)
// (decoherence function), evaluated in k-space over the Bogoliubov modes.

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "resq/quadrature.hpp"
#include "resq/reservoir.hpp"

namespace resq {

struct QuadratureOptions {
    double abs_tol = 1e-10;
    // k cutoff in units of ℓ_B/ℓ_A: e^{-σ²/2} = 1e-16.
    double k_max_sigma = std::sqrt(32.0 * std::log(10.0));
};

/// Upper wavenumber of every k-space integral.
double k_cutoff(const ReservoirParams& p, const QuadratureOptions& opt = {});

/// Δ(t) = (1/t) ∫ dk w̃(k) (ω_k t - sin ω_k t) / ω_k². Throws DomainError
/// for t <= 0 and QuadratureError when the tolerance is not met.
double delta_kernel(double t, const ReservoirParams& p, const QuadratureOptions& opt = {});

/// γ(t) = (1/t) ∫ dk w̃(k) coth(ω_k / 2T) (1 - cos ω_k t) / ω_k².
double gamma_kernel(double t, const ReservoirParams& p, const QuadratureOptions& opt = {});

/// Δ(∞) = ∫ dk w̃(k) / ω_k. Diverges (QuadratureError) when ε_dd >= 1, where
/// the phonon branch loses its linear slope.
double delta_infinity(const ReservoirParams& p, const QuadratureOptions& opt = {});

/// Panel breakpoints on [0, k_max] such that ω_k t advances by at most about
/// one half period per panel.
std::vector<double> oscillation_panels(double t, const ReservoirParams& p, double k_max);

/// Monotone piecewise-cubic (Fritsch-Carlson) interpolant.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    double operator()(double x) const;
    double front() const { return x_.front(); }
    double back() const { return x_.back(); }

private:
    std::vector<double> x_, y_, slope_;
};

struct KernelTable {
    std::vector<double> times;  // ω⊥ t, strictly increasing
    std::vector<double> delta;  // Δ(t) in ω⊥
    std::vector<double> gamma;  // γ(t) in ω⊥
    std::optional<double> delta_inf;

    std::size_t size() const { return times.size(); }

    /// Throws DomainError if the grid is not increasing or a γ sample is negative.
    void validate() const;

    /// `t,delta,gamma` with 12 significant digits.
    void write_csv(std::ostream& os) const;

    /// Monotone interpolation of Δ in t; only valid inside the grid.
    double delta_at(double t) const;
    double gamma_at(double t) const;
};

/// Evaluates both kernels at each grid time. Work is split across `threads`
/// workers; each sample is written to its own slot so the output does not
/// depend on the thread count.
KernelTable build_kernel_table(const ReservoirParams& p, std::span<const double> times,
                               const QuadratureOptions& opt = {}, unsigned threads = 1);

namespace detail {
/// (x - sin x) / x², series near 0.
double sine_deficit(double x);
/// (1 - cos x) / x².
double cosine_deficit(double x);
/// coth(ω / 2T), 1 at T = 0.
double thermal_factor(double omega, double temperature);
/// Throws InstabilityError if any sampled k in (0, k_max] is unstable.
void require_stable(const ReservoirParams& p, double k_max);
/// Value of r, or QuadratureError when its error estimate misses the target.
double checked(const quad::Result& r, const QuadratureOptions& opt, const char* what);
}  // namespace detail

std::vector<double> log_time_grid(double t_min, double t_max, std::size_t n);
std::vector<double> linear_time_grid(double t_min, double t_max, std::size_t n);

}  // namespace resq
