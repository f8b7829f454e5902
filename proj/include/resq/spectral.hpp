#pragma once

// Reservoir spectral density J(ω) by inversion of the Bogoliubov dispersion,
// and the frequency-space route to the kernels. The k-space kernels in
// kernels.hpp are the production path; this module exists for diagnostics
// and as an independent cross-check.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "resq/kernels.hpp"
#include "resq/reservoir.hpp"

namespace resq {

struct SpectralRoot {
    double k = 0.0;
    double weight = 0.0;  // 1 / |dε̄/dk| at k
};

/// All solutions k_i of ε̄(k) = ω on the inverter's range.
struct SpectralBranch {
    double omega = 0.0;
    std::vector<SpectralRoot> roots;
};

struct SpectralSample {
    double omega = 0.0;
    double J = 0.0;
    std::size_t branch_count = 0;
};

/// Splits [0, k_max] into segments on which ε̄ is monotone, then solves
/// ε̄(k) = ω on each by bracketed Newton iteration.
class DispersionInverter {
public:
    DispersionInverter(const ReservoirParams& p, double k_max, std::size_t grid = 4096);

    /// Throws DomainError on |dε̄/dk| < 1e-10 at a root (band-edge singularity).
    SpectralBranch solve(double omega) const;

    const ReservoirParams& params() const { return params_; }
    double k_max() const { return k_max_; }
    double omega_at_k_max() const;
    /// Segment end points in k; size() - 1 monotone segments.
    const std::vector<double>& segment_bounds() const { return bounds_; }
    /// ε̄ at interior extrema (where J(ω) has band-edge singularities).
    std::vector<double> extremal_frequencies() const;

private:
    double refine(double lo, double hi, double omega) const;

    ReservoirParams params_;
    double k_max_;
    std::vector<double> bounds_;
};

/// J(ω) = Σ_i w̃(k_i) / |dε̄/dk|_{k_i} (dimensionless). Zero, with a zero branch
/// count, when no mode has energy ω.
SpectralSample spectral_sample(double omega, const DispersionInverter& inverter);

/// Convenience wrapper building an inverter that covers ω.
double spectral_density(double omega, const ReservoirParams& p);

/// Δ(t) from ∫ dω J(ω) (ωt - sin ωt)/(ω² t), integrated up to ε̄(k_max) so the
/// truncation matches the k-space route.
double delta_kernel_frequency_space(double t, const ReservoirParams& p,
                                    const QuadratureOptions& opt = {});

/// γ(t) from ∫ dω J(ω) coth(ω/2T) (1 - cos ωt)/(ω² t).
double gamma_kernel_frequency_space(double t, const ReservoirParams& p,
                                    const QuadratureOptions& opt = {});

/// `omega,J,branch_count` dump with 12 significant digits.
void write_spectral_csv(std::ostream& os, std::span<const SpectralSample> samples);

}  // namespace resq
