#pragma once

// Collective spin of N two-level impurities in the symmetric (j = N/2) sector.
// Basis index i = m + j, m ascending from -j to j.

#include <complex>
#include <iosfwd>

#include <Eigen/Dense>

namespace resq {

using Complex = std::complex<double>;

class DickeState {
public:
    /// Checks dimensions (N+1)², Hermiticity to 1e-12 (relative to the largest
    /// entry) and 0 < trace <= 1 + 1e-12. Throws DomainError otherwise.
    DickeState(int n_atoms, Eigen::MatrixXcd rho);

    int n_atoms() const { return n_atoms_; }
    double j() const { return 0.5 * n_atoms_; }
    Eigen::Index dim() const { return rho_.rows(); }
    const Eigen::MatrixXcd& rho() const { return rho_; }
    double trace() const { return trace_; }

    /// tr(ρ²) / tr(ρ)².
    double purity() const;
    /// Smallest eigenvalue of ρ / tr ρ.
    double min_eigenvalue() const;

private:
    int n_atoms_;
    Eigen::MatrixXcd rho_;
    double trace_;
};

/// |ψ⟩⟨ψ| for a normalized amplitude vector of length N + 1.
DickeState pure_state(int n_atoms, const Eigen::VectorXcd& psi);

/// Amplitudes c_m = 2^{-j} √C(2j, j+m) of the coherent state along +x.
Eigen::VectorXcd css_plus_x_amplitudes(int n_atoms);
DickeState css_plus_x(int n_atoms);

/// exp(iθ₀(J_x sin φ₀ - J_y cos φ₀)) |j, j⟩.
Eigen::VectorXcd css_amplitudes(int n_atoms, double theta0, double phi0);
DickeState css_general(int n_atoms, double theta0, double phi0);

enum class CatPhase {
    // (|π/2,0⟩ - e^{+iπ(N+1)/2}|π/2,π⟩)/√2: the cat reached by the twisting
    // map in evolve() at tΔ = π/2.
    kMatchedToEvolution,
    // (|π/2,0⟩ - e^{-iπ(N+1)/2}|π/2,π⟩)/√2: the complex conjugate of the above,
    // which is the cat reached with the opposite twisting sign.
    kOppositeTwist,
};

Eigen::VectorXcd cat_amplitudes(int n_atoms, CatPhase phase = CatPhase::kMatchedToEvolution);
DickeState cat_state(int n_atoms, CatPhase phase = CatPhase::kMatchedToEvolution);

struct EvolutionInputs {
    double lambda_prime = 0.0;  // λ' in ω⊥
    double delta_t = 0.0;       // Δ(t)
    double gamma_t = 0.0;       // γ(t) >= 0
    double gamma_loss = 0.0;    // Γ_loss >= 0
    double t = 0.0;             // > 0

    void validate() const;
};

/// ρ_mn(t) = ρ_mn(0) exp(-itλ'(m-n) + itΔ(m²-n²) - Γt(m+n+N) - t(m-n)²γ).
DickeState evolve(const DickeState& rho0, const EvolutionInputs& in);

/// ρ / tr ρ. Throws DomainError if tr ρ <= 1e-300.
DickeState normalize(const DickeState& rho);

enum class SpinComponent { kJx, kJy, kJz, kJplus, kJminus };

Eigen::MatrixXcd collective_operator(int n_atoms, SpinComponent which);

/// tr(O ρ), divided by tr ρ when `normalized`. Throws DomainError on a
/// dimension mismatch.
Complex expectation(const DickeState& rho, const Eigen::MatrixXcd& op, bool normalized = true);

/// `m,n,re,im` rows (m, n as half-integers) after a `#` header carrying N, t
/// and the evolution inputs.
void write_state_csv(std::ostream& os, const DickeState& rho, const EvolutionInputs& in);

}  // namespace resq
