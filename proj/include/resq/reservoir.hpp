#pragma once

// Quasi-1D dipolar Bose gas reservoir: effective interaction, Bogoliubov
// spectrum and the coupling weight that feeds the dephasing kernels.
//
// Everything here is dimensionless: energies in ħω⊥, times in 1/ω⊥,
// wavenumbers in 1/ℓ_B. LabParams is the only place SI units appear.

#include <cstddef>
#include <optional>

namespace resq {

struct ReservoirParams {
    double eta = 5.0;          // 8 n₀ a_B
    double epsilon_dd = 0.0;   // effective a_dd / a_B after tilt tuning, in [-1, 1]
    double theta = 0.015;      // coupling prefactor Θ
    double ell_ratio = 1.0;    // ℓ_A / ℓ_B
    double temperature = 0.0;  // k_B T / ħω⊥

    /// Throws DomainError when a field violates its range.
    void validate() const;
};

/// Laboratory description of the impurity + reservoir setup, SI units.
struct LabParams {
    double n0 = 0.0;          // condensate linear density, 1/m
    double a_B = 0.0;         // reservoir s-wave scattering length, m
    double a_AB = 0.0;        // impurity-reservoir scattering length, m
    std::optional<double> a_dd;  // dipolar length, m; derived from mu_m when absent
    double m_A = 0.0;         // impurity mass, kg
    double m_B = 0.0;         // reservoir atom mass, kg
    double omega_perp = 0.0;  // reservoir transverse trap, rad/s
    double omega_A = 0.0;     // impurity trap, rad/s
    double mu_m = 0.0;        // magnetic moment in Bohr magnetons
    double tilt_angle = 0.0;  // dipole tilt from the axis, rad
    double temperature = 0.0; // K

    void validate() const;
};

struct LabConversion {
    ReservoirParams params;
    double delta_up = 0.0;  // mean-field level shift δ↑ in units of ħω⊥
    double a_dd = 0.0;      // dipolar length actually used, m
};

namespace constants {
inline constexpr double kHbar = 1.054571817e-34;
inline constexpr double kBoltzmann = 1.380649e-23;
inline constexpr double kMu0 = 1.25663706212e-6;
inline constexpr double kBohrMagneton = 9.2740100783e-24;
inline constexpr double kBohrRadius = 5.29177210903e-11;
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;
}  // namespace constants

/// a_dd = μ₀ μ_m² m_B / (12π ħ²), μ_m given in Bohr magnetons.
double dipolar_length(double mu_m_bohr, double m_B);

/// Converts lab parameters to the dimensionless reservoir description.
LabConversion lab_units_to_dimensionless(const LabParams& lab);

/// ν̃(k) = 1 - (3/2) k² e^{k²/2} Γ(0, k²/2). ν̃(0) = 1, ν̃(∞) = -2.
double dipole_form_factor(double k);

/// dν̃/dk, analytic.
double dipole_form_factor_derivative(double k);

/// ε_dd (1 - 3/2 sin²φ): tilt-angle tuning of the dipolar strength.
double effective_epsilon_dd(double epsilon_dd_bare, double tilt_angle);

/// Tilt at which the effective 1D dipolar interaction vanishes, sin²φ = 2/3.
double magic_angle();

/// k⁴ + η k² [1 - ε_dd ν̃(k)]; negative means a dynamically unstable mode.
double bogoliubov_radicand(double k, const ReservoirParams& p);

/// ε̄(k) = ½ √radicand, in ħω⊥. Throws InstabilityError on a negative radicand.
double bogoliubov_energy(double k, const ReservoirParams& p);

/// dε̄/dk, analytic. Requires k > 0.
double bogoliubov_slope(double k, const ReservoirParams& p);

struct BogoliubovAmplitudes {
    double u = 1.0;
    double v = 0.0;
};

/// Quasiparticle amplitudes with E_k = k²/2. u² - v² = 1. v turns negative
/// where the effective interaction at that k is attractive (ε̄ < E_k).
BogoliubovAmplitudes bogoliubov_uv(double k, const ReservoirParams& p);

struct StabilityReport {
    bool stable = true;
    std::optional<double> first_unstable_k;  // bisected to 1e-8
    double k_max = 0.0;
    std::size_t samples = 0;
};

/// Samples the radicand on (0, k_max]; reports the smallest unstable k.
StabilityReport stability_scan(const ReservoirParams& p, double k_max, std::size_t n_samples);

/// w̃(k) = Θ k² e^{-k² (ℓ_A/ℓ_B)²/2} / ε̄(k), normalised so that
/// ∫ w̃(k) g(ε̄(k)) dk = ∫ J(ω) g(ω) dω. Throws DomainError at k <= 0.
double coupling_weight(double k, const ReservoirParams& p);

namespace detail {
/// k² + η[1 - ε_dd ν̃(k)], i.e. radicand / k². Bounded as k → 0.
double reduced_radicand(double k, const ReservoirParams& p);
/// coupling_weight with its k → 0 limit (0) filled in.
double coupling_weight_or_limit(double k, const ReservoirParams& p);

struct Mode {
    double omega = 0.0;   // ε̄(k)
    double weight = 0.0;  // w̃(k)
};
/// ε̄ and w̃ together, sharing one form-factor evaluation. k >= 0.
Mode mode(double k, const ReservoirParams& p);
}  // namespace detail

}  // namespace resq
