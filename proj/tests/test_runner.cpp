#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "resq/errors.hpp"
#include "resq/runner.hpp"

using namespace resq;

namespace {

constexpr double kPi = std::numbers::pi;

const char* kSmall = R"(
# small lossless run
name = small
n_atoms = 4
outputs = xi2, qfi, fidelity
reservoir.eta = 5
reservoir.epsilon_dd = -1
reservoir.theta = 0.015
time_grid.t_min = 1
time_grid.t_max = 20
time_grid.n_points = 5
time_grid.spacing = linear
)";

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("resq_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

bool same_rows(const Dataset& a, const Dataset& b) {
    if (a.rows.size() != b.rows.size()) return false;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        const auto& x = a.rows[i];
        const auto& y = b.rows[i];
        const bool same_nan = std::isnan(x.report.xi_squared) && std::isnan(y.report.xi_squared);
        if (x.t != y.t || x.delta != y.delta || x.gamma != y.gamma || x.n_atoms != y.n_atoms ||
            x.gamma_loss != y.gamma_loss || x.report.qfi_max != y.report.qfi_max ||
            x.report.cat_fidelity != y.report.cat_fidelity ||
            (!same_nan && x.report.xi_squared != y.report.xi_squared)) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("config parsing: defaults, comments, lists") {
    const auto c = parse_config(kSmall);
    CHECK(c.name == "small");
    CHECK(c.n_atoms == 4);
    CHECK(c.outputs.size() == 3);
    CHECK(c.wants(OutputKind::kQfi));
    CHECK_FALSE(c.wants(OutputKind::kKernels));
    CHECK(c.reservoir.epsilon_dd == -1.0);
    CHECK(c.reservoir.ell_ratio == 1.0);
    CHECK(c.lambda_prime == 0.0);
    CHECK(c.time_grid.points().size() == 5);
    CHECK(c.time_grid.points().back() == 20.0);
    CHECK_FALSE(c.sweep.has_value());

    const auto s = parse_config(std::string(kSmall) + "sweep.parameter = n_atoms\nsweep.values = 2, 3,4\n");
    REQUIRE(s.sweep.has_value());
    CHECK(s.sweep->parameter == SweepParameter::kNAtoms);
    CHECK(s.sweep->values == std::vector<double>{2, 3, 4});
}

TEST_CASE("config parsing is strict") {
    const std::string base = kSmall;
    CHECK_THROWS_AS(parse_config(base + "reservoir.etaa = 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "n_atoms = 5\n"), ConfigError);  // duplicate
    CHECK_THROWS_AS(parse_config(base + "lambda_prime = 0.1x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "lambda_prime = nan\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "force_gamma_zero = yes\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "cat_phase = literal\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "just some words\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "lab.n0 = 1e8\n"), ConfigError);  // lab and reservoir keys mixed
    CHECK_THROWS_AS(parse_config(base + "sweep.values = 1, 2\n"), ConfigError);  // values without parameter
    CHECK_THROWS_AS(parse_config(base + "sweep.parameter = temperature\nsweep.values = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "sweep.inner_parameter = eta\nsweep.inner_values = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "sweep.parameter = eta\nsweep.values = 1, 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "sweep.parameter = n_atoms\nsweep.values = 2.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "sweep.parameter = epsilon_dd\nsweep.values = -1, 1.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "gamma_loss_rel = -0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config(base + "gamma_loss_abs = 1e-4\nsweep.parameter = gamma_loss_rel\nsweep.values = 0\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config("n_atoms = 1\noutputs = xi2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("outputs = qfi, qfi\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("time_grid.t_min = 5\ntime_grid.t_max = 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("time_grid.t_min = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("time_grid.n_points = 0\n"), ConfigError);
    CHECK_NOTHROW(parse_config("time_grid.t_min = 5\ntime_grid.t_max = 5\ntime_grid.n_points = 1\n"));
    CHECK_THROWS_AS(load_config("/nonexistent/resq.cfg"), ConfigError);
}

TEST_CASE("canonical form round-trips and drives the hash") {
    for (const auto& name : preset_names()) {
        const auto c = figure_preset(name);
        const auto text = canonical_config(c);
        CHECK(canonical_config(parse_config(text)) == text);
        CHECK(config_hash(parse_config(text)) == config_hash(c));
        CHECK(config_hash(c).size() == 16);
    }
    auto a = parse_config(kSmall);
    auto b = a;
    b.reservoir.theta = 0.0150000001;
    CHECK(config_hash(a) != config_hash(b));

    LabParams lab;
    lab.n0 = 1e8;
    lab.a_B = 5.0 * constants::kBohrRadius * 100;
    lab.a_AB = 5e-9;
    lab.m_A = 87 * constants::kAtomicMassUnit;
    lab.m_B = 162 * constants::kAtomicMassUnit;
    lab.omega_perp = 2 * kPi * 1e3;
    lab.omega_A = lab.omega_perp * 162.0 / 87.0;
    lab.mu_m = 9.9;
    ScenarioConfig l;
    l.lab = lab;
    const auto text = canonical_config(l);
    CHECK(text.find("lab.a_dd") == std::string::npos);
    CHECK(canonical_config(parse_config(text)) == text);
}

TEST_CASE("time grids") {
    TimeGrid g{1.0, 100.0, 3, Spacing::kLog, false};
    const auto p = g.points();
    CHECK(p[1] == doctest::Approx(10.0).epsilon(1e-14));
    g.t_max = 0.5;
    CHECK_THROWS_AS(g.points(), ConfigError);
}

TEST_CASE("rows: ordering, caching and thread independence") {
    auto c = parse_config(std::string(kSmall) + "sweep.parameter = n_atoms\nsweep.values = 6, 2, 4\n");
    const auto d = compute_scenario(c, 1);
    REQUIRE(d.rows.size() == 15);
    CHECK(d.reservoirs.size() == 1);  // one reservoir shared by every N
    for (std::size_t i = 1; i < d.rows.size(); ++i) {
        const auto& a = d.rows[i - 1];
        const auto& b = d.rows[i];
        CHECK((a.outer < b.outer || (a.outer == b.outer && a.t < b.t)));
    }
    CHECK(d.rows.front().n_atoms == 2);
    CHECK(d.rows.back().n_atoms == 6);
    CHECK(d.rows[0].delta == delta_kernel(1.0, c.reservoir, c.quadrature));
    CHECK(d.rows[0].gamma == gamma_kernel(1.0, c.reservoir, c.quadrature));

    CHECK(same_rows(d, compute_scenario(c, 3)));

    // Uncached: one scenario per N gives the same rows.
    for (int n : {2, 4, 6}) {
        auto single = parse_config(kSmall);
        single.n_atoms = n;
        const auto s = compute_scenario(single, 1);
        Dataset slice;
        for (const auto& r : d.rows) {
            if (r.n_atoms == n) slice.rows.push_back(r);
        }
        CHECK(same_rows(slice, s));
    }
}

TEST_CASE("empty sweep equals a sweep of one") {
    const auto plain = compute_scenario(parse_config(kSmall), 1);
    const auto one = compute_scenario(parse_config(std::string(kSmall) + "sweep.parameter = eta\nsweep.values = 5\n"), 1);
    CHECK(same_rows(plain, one));
}

TEST_CASE("two sweep axes share reservoirs across the atom axis") {
    auto c = parse_config(std::string(kSmall) +
                          "sweep.parameter = n_atoms\nsweep.values = 2, 4\n"
                          "sweep.inner_parameter = epsilon_dd\nsweep.inner_values = 0, -1\n");
    const auto d = compute_scenario(c, 2);
    CHECK(d.reservoirs.size() == 2);
    REQUIRE(d.rows.size() == 20);
    CHECK(d.rows[0].outer == 2.0);
    CHECK(d.rows[0].inner == -1.0);
    CHECK(d.rows[5].inner == 0.0);
    CHECK(d.rows[10].outer == 4.0);
}

TEST_CASE("loss is relative to delta(inf) unless given absolutely") {
    auto c = parse_config(std::string(kSmall) + "gamma_loss_rel = 0.01\n");
    const auto d = compute_scenario(c, 1);
    REQUIRE(d.reservoirs.front().delta_inf.has_value());
    const double dinf = delta_infinity(c.reservoir, c.quadrature);
    CHECK(*d.reservoirs.front().delta_inf == dinf);
    CHECK(d.rows[0].gamma_loss == doctest::Approx(0.01 * dinf).epsilon(1e-15));
    // x-polarized CSS: tr = e^{-NΓt} ⟨e^{-2Γt J_z}⟩ = e^{-NΓt} cosh(Γt)^N.
    const double gt = 0.01 * dinf * 20.0;
    CHECK(d.rows.back().report.survival_trace ==
          doctest::Approx(std::exp(-4 * gt) * std::pow(std::cosh(gt), 4)).epsilon(1e-12));

    c.gamma_loss_abs = 2e-4;
    const auto e = compute_scenario(c, 1);
    CHECK(e.rows[0].gamma_loss == 2e-4);
    CHECK_FALSE(e.reservoirs.front().delta_inf.has_value());

    // Δ(∞) diverges at ε_dd = 1, so a relative loss rate is meaningless there.
    auto bad = parse_config(std::string(kSmall) + "gamma_loss_rel = 0.01\n");
    bad.reservoir.epsilon_dd = 1.0;
    CHECK_THROWS_AS(compute_scenario(bad, 1), QuadratureError);
}

TEST_CASE("summary: N = 2 with gamma forced to zero reaches N^2 at t_opt") {
    auto c = parse_config(
        "n_atoms = 2\noutputs = qfi\nforce_gamma_zero = true\n"
        "time_grid.t_min = 1\ntime_grid.t_max = 1\ntime_grid.n_points = 1\ntime_grid.relative_to_t_opt = true\n");
    const auto d = compute_scenario(c, 1);
    REQUIRE(d.rows.size() == 1);
    CHECK(d.rows[0].t * d.rows[0].delta == doctest::Approx(kPi / 2).epsilon(1e-12));
    const auto s = qfi_amplification_summary(d);
    REQUIRE(s.size() == 1);
    CHECK(s[0].fq_over_n2 == doctest::Approx(1.0).epsilon(1e-10));
    REQUIRE(d.rows[0].fq_n2_analytic.has_value());
    CHECK(*d.rows[0].fq_n2_analytic == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("summary: grid max <= true max <= parabolic estimate") {
    auto coarse = parse_config(
        "n_atoms = 6\noutputs = qfi\n"
        "time_grid.t_min = 0.9\ntime_grid.t_max = 1.1\ntime_grid.n_points = 9\ntime_grid.relative_to_t_opt = true\n");
    auto fine = coarse;
    fine.time_grid.n_points = 401;
    const auto s = qfi_amplification_summary(compute_scenario(coarse, 1)).front();
    const auto f = qfi_amplification_summary(compute_scenario(fine, 1)).front();
    CHECK(s.fq_max <= f.fq_max);
    CHECK(s.fq_fit >= s.fq_max);
    CHECK(f.fq_max <= s.fq_fit * (1.0 + 1e-6));
    CHECK(s.fq_over_n == doctest::Approx(s.fq_max / 6.0));
}

TEST_CASE("instability aborts the run") {
    auto c = parse_config(std::string(kSmall));
    c.reservoir.eta = 200.0;  // roton instability at finite k for ε_dd = −1
    CHECK_THROWS_AS(compute_scenario(c, 1), InstabilityError);
}

TEST_CASE("dataset files: kernels per reservoir, provenance, determinism") {
    auto c = parse_config(
        "outputs = kernels, spectral_density\nspectral.n_points = 20\n"
        "time_grid.t_min = 0.5\ntime_grid.t_max = 5\ntime_grid.n_points = 4\n"
        "sweep.parameter = epsilon_dd\nsweep.values = -1, 0, 1\n");
    const auto dir1 = scratch_dir("kernels1");
    const auto dir2 = scratch_dir("kernels2");
    const auto files = run_scenario(c, dir1, 1);
    REQUIRE(files.size() == 6);
    CHECK(files[0].filename() == "kernels_epsilon_dd_-1.csv");
    CHECK(files[3].filename() == "spectral_epsilon_dd_-1.csv");
    const auto text = slurp(files[0]);
    CHECK(text.rfind("# resq " + std::string(version()) + "\n# config_hash=" + config_hash(c) + "\n", 0) == 0);
    CHECK(text.find("\nt,delta,gamma\n") != std::string::npos);

    const auto again = run_scenario(c, dir2, 3);
    REQUIRE(again.size() == files.size());
    for (std::size_t i = 0; i < files.size(); ++i) CHECK(slurp(files[i]) == slurp(again[i]));
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

TEST_CASE("metrology CSV columns follow the outputs") {
    const auto dir = scratch_dir("metrology");
    auto c = parse_config(std::string(kSmall) + "gamma_loss_rel = 0.002\n");
    const auto files = run_scenario(c, dir, 1);
    REQUIRE(files.size() == 2);
    const auto text = slurp(dir / "metrology.csv");
    CHECK(text.find("\nN,gamma_loss,t,delta,gamma,trace,xi2,phi_opt,xi2_unnormalized,fq_max,nx,ny,nz,fq_over_n,"
                    "fq_over_n2,fq_max_unnormalized,fidelity\n") != std::string::npos);
    CHECK(slurp(dir / "qfi_summary.csv").find("\nN,fq_max,t_at_max,fq_over_n,fq_over_n2,fq_fit,t_fit,trace_at_max\n") !=
          std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("figure presets") {
    CHECK(preset_names().size() == 11);
    CHECK_THROWS_AS(figure_preset("fig7"), ConfigError);
    const auto f2 = figure_preset("fig2");
    CHECK(f2.outputs == std::vector<OutputKind>{OutputKind::kKernels});
    CHECK(f2.sweep->values == std::vector<double>{-1.0, 0.0, 1.0});
    CHECK(f2.reservoir.eta == 5.0);
    CHECK(f2.reservoir.theta == 0.015);
    const auto f5 = figure_preset("fig5a");
    CHECK(f5.n_atoms == 2);
    CHECK(f5.sweep->values == std::vector<double>{0.0, 0.001, 0.002, 0.005});
    const auto f6 = figure_preset("fig6a");
    CHECK(f6.sweep->values == std::vector<double>{10, 30, 50});
    CHECK(f6.inner_sweep->parameter == SweepParameter::kEpsilonDd);
    CHECK(f6.gamma_loss_rel == 0.0);
    CHECK(figure_preset("fig3b").sweep->values == std::vector<double>{0.0, 0.002, 0.01});
}
