// resq: batch driver for reservoir-engineered spin squeezing scenarios.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure
// (instability, unconverged quadrature, no t_opt in range), 1 anything else.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "resq/errors.hpp"
#include "resq/runner.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericalExit = 3;

struct ReservoirFlags {
    resq::ReservoirParams p{5.0, -1.0, 0.015, 1.0, 0.0};

    void attach(CLI::App* cmd) {
        cmd->add_option("--eta", p.eta, "8 n0 a_B")->capture_default_str();
        cmd->add_option("--epsilon-dd", p.epsilon_dd, "effective a_dd / a_B in [-1, 1]")->capture_default_str();
        cmd->add_option("--theta", p.theta, "coupling prefactor")->capture_default_str();
        cmd->add_option("--ell-ratio", p.ell_ratio, "l_A / l_B")->capture_default_str();
        cmd->add_option("--temperature", p.temperature, "k_B T / hbar omega_perp")->capture_default_str();
    }
};

// Writes to `path`, or to stdout when it is empty.
template <class Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    fn(os);
}

void print_written(const std::vector<std::filesystem::path>& files) {
    for (const auto& f : files) std::cout << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin squeezing and QFI of impurity atoms in a dipolar Bose gas reservoir"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(resq::version()));

    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::optional<double> tol;
    app.add_option("--threads", threads, "worker threads (output does not depend on it)")->check(CLI::PositiveNumber);
    app.add_option("--tol", tol, "absolute quadrature tolerance, overrides the config")->check(CLI::PositiveNumber);

    auto apply_tol = [&](resq::ScenarioConfig& c) {
        if (tol) c.quadrature.abs_tol = *tol;
    };

    std::string config_path;
    std::string out_dir = ".";
    auto* run = app.add_subcommand("run", "run a scenario config file");
    run->add_option("config", config_path, "key = value config")->required();
    run->add_option("--out", out_dir, "output directory")->capture_default_str();

    std::string preset_name;
    bool list_presets = false;
    bool print_config = false;
    auto* preset = app.add_subcommand("preset", "run a built-in figure preset");
    preset->add_option("name", preset_name, "fig2, fig3a, ..., fig6b");
    preset->add_option("--out", out_dir, "output directory")->capture_default_str();
    preset->add_flag("--list", list_presets, "list preset names");
    preset->add_flag("--print-config", print_config, "print the preset config instead of running it");

    ReservoirFlags kernel_res;
    resq::TimeGrid kernel_grid{0.1, 1000.0, 200, resq::Spacing::kLog, false};
    std::string spacing = "log";
    std::string out_file;
    auto* kernels = app.add_subcommand("kernels", "tabulate Delta(t) and gamma(t)");
    kernel_res.attach(kernels);
    kernels->add_option("--t-min", kernel_grid.t_min)->capture_default_str();
    kernels->add_option("--t-max", kernel_grid.t_max)->capture_default_str();
    kernels->add_option("--n-points", kernel_grid.n_points)->capture_default_str();
    kernels->add_option("--spacing", spacing)->check(CLI::IsMember({"linear", "log"}))->capture_default_str();
    kernels->add_option("--out", out_file, "CSV file (stdout if omitted)");

    ReservoirFlags spectral_res;
    double omega_max = 5.0;
    std::size_t omega_points = 400;
    auto* spectral = app.add_subcommand("spectral", "tabulate the spectral density J(omega)");
    spectral_res.attach(spectral);
    spectral->add_option("--omega-max", omega_max)->capture_default_str();
    spectral->add_option("--n-points", omega_points)->capture_default_str();
    spectral->add_option("--out", out_file, "CSV file (stdout if omitted)");

    ReservoirFlags stability_res;
    std::optional<double> k_max;
    std::size_t samples = 20000;
    auto* stability = app.add_subcommand("stability", "scan the Bogoliubov radicand for instabilities");
    stability_res.attach(stability);
    stability->add_option("--k-max", k_max, "scan range (default: quadrature cutoff)");
    stability->add_option("--samples", samples)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (run->parsed()) {
            auto c = resq::load_config(config_path);
            apply_tol(c);
            print_written(resq::run_scenario(c, out_dir, threads));
        } else if (preset->parsed()) {
            if (list_presets) {
                for (const auto& n : resq::preset_names()) std::cout << n << '\n';
                return 0;
            }
            if (preset_name.empty()) throw resq::ConfigError("preset: missing name (use --list)");
            auto c = resq::figure_preset(preset_name);
            apply_tol(c);
            if (print_config) {
                std::cout << resq::canonical_config(c);
                return 0;
            }
            print_written(resq::run_scenario(c, out_dir, threads));
        } else if (kernels->parsed() || spectral->parsed()) {
            const bool k = kernels->parsed();
            resq::ScenarioConfig c;
            c.name = k ? "kernels" : "spectral";
            c.reservoir = k ? kernel_res.p : spectral_res.p;
            c.outputs = {k ? resq::OutputKind::kKernels : resq::OutputKind::kSpectralDensity};
            if (k) {
                kernel_grid.spacing = spacing == "log" ? resq::Spacing::kLog : resq::Spacing::kLinear;
                c.time_grid = kernel_grid;
            } else {
                // Kernels are not written by this subcommand; one sample keeps the run cheap.
                c.time_grid = resq::TimeGrid{1.0, 1.0, 1, resq::Spacing::kLinear, false};
                c.spectral_omega_max = omega_max;
                c.spectral_points = omega_points;
            }
            apply_tol(c);
            const auto d = resq::compute_scenario(c, threads);
            const auto& r = d.reservoirs.front();
            emit(out_file, [&](std::ostream& os) {
                resq::write_provenance(os, c);
                if (k) {
                    r.kernels.write_csv(os);
                } else {
                    resq::write_spectral_csv(os, r.spectrum);
                }
            });
        } else if (stability->parsed()) {
            auto p = stability_res.p;
            resq::QuadratureOptions q;
            if (tol) q.abs_tol = *tol;
            const auto report = resq::stability_scan(p, k_max ? *k_max : resq::k_cutoff(p, q), samples);
            std::cout << "stable=" << (report.stable ? "true" : "false") << " k_max=" << report.k_max
                      << " samples=" << report.samples;
            if (report.first_unstable_k) std::cout << " first_unstable_k=" << *report.first_unstable_k;
            std::cout << '\n';
            return report.stable ? 0 : kNumericalExit;
        }
    } catch (const resq::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigExit;
    } catch (const resq::InstabilityError& e) {
        std::cerr << "instability: " << e.what() << '\n';
        return kNumericalExit;
    } catch (const resq::QuadratureError& e) {
        std::cerr << "quadrature: " << e.what() << " (achieved " << e.achieved_tolerance() << ")\n";
        return kNumericalExit;
    } catch (const resq::RangeError& e) {
        std::cerr << "range: " << e.what() << '\n';
        return kNumericalExit;
    } catch (const resq::DomainError& e) {
        std::cerr << "domain: " << e.what() << '\n';
        return kNumericalExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
