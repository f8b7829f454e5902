#pragma once

// Figures of merit of the collective spin: Wineland squeezing ξ_R², the QFI
// matrix and its maximal direction, and the cat-state fidelity. Closed forms
// used as oracles live next to the numerical routes they check.

#include <complex>
#include <iosfwd>
#include <optional>

#include <Eigen/Dense>

#include "resq/dicke.hpp"
#include "resq/kernels.hpp"

namespace resq {

struct SqueezingResult {
    double xi_squared = 0.0;
    // Angle ψ ∈ [0, π) of the minimum-variance axis cos ψ n̂₁ + sin ψ n̂₂, where
    // n̂₁ = (−sin φ, cos φ, 0) and n̂₂ = (cos ϑ cos φ, cos ϑ sin φ, −sin ϑ).
    double phi_opt = 0.0;
    double mean_theta = 0.0;  // ϑ of ⟨J⟩
    double mean_phi = 0.0;    // φ of ⟨J⟩
    double mean_spin = 0.0;   // |⟨J⟩|
    double min_variance = 0.0;
    double a = 0.0, b = 0.0, c = 0.0;  // frame coefficients, min variance = (C − √(A²+B²))/2
};

/// Moments from the trace-normalized ρ. Requires N >= 2; throws DomainError
/// when |⟨J⟩| <= 1e-12 (no mean-spin direction).
SqueezingResult squeezing_parameter(const DickeState& rho);

struct ClosedFormSqueezing {
    double xi_squared = 0.0;
    double phi_opt = 0.0;  // same convention as SqueezingResult::phi_opt
    double a_tilde = 0.0;
    double b_tilde = 0.0;
};

/// Lossless one-axis-twisting result for the +x coherent state:
/// ξ² = [4 + (N−1)(Ã − √(Ã²+B̃²))] / [4 e^{−2tγ} cos^{2N−2}(tΔ)].
/// Throws DomainError when the mean spin j e^{−tγ}|cos tΔ|^{N−1} <= 1e-12.
ClosedFormSqueezing squeezing_closed_form(double t, double delta_t, double gamma_t, int n_atoms);

/// Unnormalized expectation values tr(Oρ(t)) for ρ(0) the +x coherent state.
struct LossyMoments {
    std::complex<double> jp;       // ⟨J₊⟩
    std::complex<double> jp2;      // ⟨J₊²⟩
    double jz = 0.0;               // ⟨J_z⟩
    double jz2 = 0.0;              // ⟨J_z²⟩
    std::complex<double> jp_2jz1;  // ⟨J₊(2J_z + 1)⟩
};

LossyMoments lossy_moments_oracle(double t, double delta_t, double gamma_t, double gamma_loss,
                                  double lambda_prime, int n_atoms);

/// C_kl = Σ_{i≠j} (p_i − p_j)²/(p_i + p_j) (⟨i|J_k|j⟩⟨j|J_l|i⟩ + ⟨i|J_l|j⟩⟨j|J_k|i⟩),
/// k, l ∈ {x, y, z}. Pairs with p_i + p_j <= eigen_cutoff are skipped.
/// Requires |tr ρ − 1| <= 1e-8; eigenvalues in [−1e-10, 0) are clipped, more
/// negative ones are an error.
Eigen::Matrix3d qfi_matrix(const DickeState& rho, double eigen_cutoff = 1e-12);

struct QfiMax {
    double value = 0.0;
    Eigen::Vector3d direction = Eigen::Vector3d::UnitX();
};

/// Largest eigenvalue of C and its unit eigenvector. Within a degenerate top
/// eigenspace the lexicographically largest unit vector is returned.
QfiMax qfi_max(const Eigen::Matrix3d& c);
QfiMax qfi_max(const DickeState& rho, double eigen_cutoff = 1e-12);

struct QfiN2 {
    double c_xx = 0.0;
    double c_yy = 0.0;
    double c_zz = 0.0;
    double c_yz = 0.0;
    double c_perp = 0.0;  // larger eigenvalue of the yz block
    double f_q_max = 0.0;
};

/// Closed-form QFI for N = 2, λ' = 0, Γ_loss = 0, starting from the +x
/// coherent state.
QfiN2 qfi_n2_analytic(double t, double delta_t, double gamma_t);

/// Root of t·Δ(t) = π/2 on the table, Δ interpolated monotonically.
/// Throws RangeError when t·Δ(t) − π/2 does not change sign on the grid.
double optimal_time(const KernelTable& kernels);

/// Walks a log grid upward, evaluating Δ only until t·Δ(t) first reaches
/// π/2, then polishes the root against the exact kernel. Cheaper than a full
/// table when t_opt sits well below t_max. Throws RangeError if there is no
/// crossing on [t_min, t_max].
double scan_optimal_time(const ReservoirParams& p, const QuadratureOptions& opt, double t_min = 1e-2,
                         double t_max = 1e3, std::size_t n_points = 400);

/// Polishes a table estimate of t_opt against the exact kernel, bracketing
/// within ±`rel_bracket`·t_guess.
double refine_optimal_time(double t_guess, const ReservoirParams& p, const QuadratureOptions& opt = {},
                           double rel_bracket = 0.05);

/// √⟨Ψ_cat|ρ|Ψ_cat⟩ for normalized ρ (the pure-state form of the Uhlmann fidelity).
double cat_fidelity(const DickeState& rho, CatPhase phase = CatPhase::kMatchedToEvolution);
/// Same with precomputed cat amplitudes.
double cat_fidelity(const DickeState& rho, const Eigen::VectorXcd& cat);

struct MetrologyReport {
    double t = 0.0;
    double xi_squared = 0.0;
    double phi_opt = 0.0;
    Eigen::Matrix3d qfi_matrix = Eigen::Matrix3d::Zero();
    double qfi_max = 0.0;
    Eigen::Vector3d qfi_direction = Eigen::Vector3d::UnitX();
    double cat_fidelity = 0.0;
    double survival_trace = 1.0;
};

struct ReportOptions {
    bool squeezing = true;
    bool qfi = true;
    bool fidelity = true;
    CatPhase phase = CatPhase::kMatchedToEvolution;
    const Eigen::VectorXcd* cat = nullptr;  // overrides `phase` when set
};

/// Figures of merit for one (possibly trace-decayed) evolved state; fields
/// not requested are NaN, as are ξ² and φ_opt when the mean spin vanishes.
MetrologyReport metrology_report(const DickeState& evolved, double t, const ReportOptions& what = {});

void write_report_header(std::ostream& os);
/// `t,xi2,phi_opt,fq_max,nx,ny,nz,fidelity,trace`, 12 significant digits.
void write_report_row(std::ostream& os, const MetrologyReport& r);

}  // namespace resq
