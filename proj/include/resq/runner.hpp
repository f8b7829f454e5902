#pragma once

// Batch scenarios: a strict key=value config, the sweep over reservoirs and
// atom numbers, and the CSV datasets behind each figure preset.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "resq/dicke.hpp"
#include "resq/kernels.hpp"
#include "resq/metrology.hpp"
#include "resq/reservoir.hpp"
#include "resq/spectral.hpp"

namespace resq {

std::string_view version();

enum class Spacing { kLinear, kLog };

struct TimeGrid {
    double t_min = 0.1;
    double t_max = 100.0;
    std::size_t n_points = 100;
    Spacing spacing = Spacing::kLinear;
    // Grid values are multiples of t_opt (root of tΔ(t) = π/2) of each reservoir.
    bool relative_to_t_opt = false;

    void validate() const;
    std::vector<double> points() const;
};

enum class SweepParameter { kEpsilonDd, kTheta, kEta, kNAtoms, kGammaLossRel };

std::string_view to_string(SweepParameter p);

struct SweepAxis {
    SweepParameter parameter = SweepParameter::kEpsilonDd;
    std::vector<double> values;
};

enum class OutputKind { kXi2, kQfi, kFidelity, kKernels, kSpectralDensity };

std::string_view to_string(OutputKind k);

struct ScenarioConfig {
    std::string name = "scenario";
    ReservoirParams reservoir;
    std::optional<LabParams> lab;  // when set, reservoir is derived from it
    int n_atoms = 10;
    double gamma_loss_rel = 0.0;  // Γ_loss / Δ(∞)
    std::optional<double> gamma_loss_abs;  // Γ_loss in ω⊥, overrides gamma_loss_rel
    double lambda_prime = 0.0;
    bool force_gamma_zero = false;
    CatPhase cat_phase = CatPhase::kMatchedToEvolution;
    TimeGrid time_grid;
    // Outer and inner sweep; rows are ordered by (outer, inner, t).
    std::optional<SweepAxis> sweep;
    std::optional<SweepAxis> inner_sweep;
    std::vector<OutputKind> outputs{OutputKind::kXi2};
    QuadratureOptions quadrature;
    // Table used to locate t_opt; 400 log points on [1e-2, 1e3] by default.
    double table_t_min = 1e-2;
    double table_t_max = 1e3;
    std::size_t table_points = 400;
    double spectral_omega_max = 5.0;
    std::size_t spectral_points = 400;

    /// Throws ConfigError on any inconsistency.
    void validate() const;
    bool wants(OutputKind k) const;
    /// Reservoir before sweep overrides (lab conversion applied).
    ReservoirParams base_reservoir() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys,
/// malformed values and schema violations throw ConfigError.
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::filesystem::path& path);

/// Canonical key=value rendering: every key, fixed order, 17 significant
/// digits. parse_config(canonical_config(c)) reproduces c.
std::string canonical_config(const ScenarioConfig& c);
/// 16 hex digits of FNV-1a over canonical_config.
std::string config_hash(const ScenarioConfig& c);

/// `# resq <version>`, `# config_hash=<hash>`, then the canonical config as
/// comment lines.
void write_provenance(std::ostream& os, const ScenarioConfig& c);

struct ReservoirRun {
    std::string label;  // file suffix, empty when the reservoir is not swept
    ReservoirParams params;
    std::optional<double> delta_inf;
    std::optional<double> t_opt;
    KernelTable kernels;  // Δ, γ on this reservoir's time grid
    std::vector<SpectralSample> spectrum;
};

struct DatasetRow {
    double outer = 0.0;  // sweep values, 0 when absent
    double inner = 0.0;
    int n_atoms = 0;
    double gamma_loss = 0.0;
    double t = 0.0;
    double t_over_t_opt = 0.0;  // 0 unless the grid is relative
    double delta = 0.0;
    double gamma = 0.0;
    MetrologyReport report;
    std::optional<double> fq_n2_analytic;
};

struct Dataset {
    ScenarioConfig config;
    std::vector<ReservoirRun> reservoirs;
    std::vector<DatasetRow> rows;  // sorted by (outer, inner, t)
};

/// Kernels are computed once per distinct reservoir and shared by every atom
/// number and loss rate. Results do not depend on `threads`.
Dataset compute_scenario(const ScenarioConfig& config, unsigned threads = 1);

struct QfiSummaryRow {
    double outer = 0.0;
    double inner = 0.0;
    int n_atoms = 0;
    double fq_max = 0.0;  // grid maximum
    double t_at_max = 0.0;
    double fq_over_n = 0.0;
    double fq_over_n2 = 0.0;
    double trace_at_max = 1.0;  // survival weight tr ρ at t_at_max
    // Vertex of the parabola through the grid maximum and its neighbours
    // (equal to the grid values at an end point).
    double fq_fit = 0.0;
    double t_fit = 0.0;
};

/// One row per sweep point: maximum of F_Q over the time grid.
std::vector<QfiSummaryRow> qfi_amplification_summary(const Dataset& d);

/// Writes metrology.csv, qfi_summary.csv, kernels*.csv and spectral*.csv as
/// requested by the outputs list; returns the paths in write order.
std::vector<std::filesystem::path> write_dataset(const Dataset& d, const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> run_scenario(const ScenarioConfig& config,
                                                const std::filesystem::path& out_dir,
                                                unsigned threads = 1);

const std::vector<std::string>& preset_names();
/// Throws ConfigError for an unknown name.
ScenarioConfig figure_preset(std::string_view name);

}  // namespace resq
