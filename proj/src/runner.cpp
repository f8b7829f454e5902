#include "resq/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "resq/csv.hpp"
#include "resq/errors.hpp"
#include "resq/parallel.hpp"

#ifndef RESQ_VERSION
#define RESQ_VERSION "0.0.0"
#endif

namespace resq {
namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
    return buf;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    for (;;) {
        const auto comma = s.find(',');
        out.push_back(trim(s.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

// Key/value store that remembers which keys were read, so leftovers can be
// reported as unknown.
class Fields {
public:
    explicit Fields(std::string_view text) {
        int line_no = 0;
        while (!text.empty()) {
            const auto nl = text.find('\n');
            std::string_view line = text.substr(0, nl);
            text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
            }
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
            if (value.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value for " + key);
            if (!entries_.emplace(key, Entry{value, line_no}).second) {
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + key);
            }
        }
    }

    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    bool has_prefix(std::string_view prefix) const {
        return std::any_of(entries_.begin(), entries_.end(),
                           [&](const auto& e) { return e.first.starts_with(prefix); });
    }

    std::optional<std::string> take(const std::string& key) {
        const auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        used_.insert(key);
        return it->second.value;
    }

    double number(const std::string& key, double fallback) {
        const auto v = take(key);
        return v ? parse_number(key, *v) : fallback;
    }

    std::optional<double> optional_number(const std::string& key) {
        const auto v = take(key);
        if (!v) return std::nullopt;
        return parse_number(key, *v);
    }

    long integer(const std::string& key, long fallback) {
        const auto v = take(key);
        return v ? parse_integer(key, *v) : fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto v = take(key);
        if (!v) return fallback;
        if (*v == "true") return true;
        if (*v == "false") return false;
        throw ConfigError(key + ": expected true or false, got '" + *v + "'");
    }

    std::vector<double> numbers(const std::string& key) {
        const auto v = take(key);
        if (!v) return {};
        std::vector<double> out;
        for (auto item : split_list(*v)) out.push_back(parse_number(key, std::string(item)));
        return out;
    }

    void reject_unused() const {
        for (const auto& [key, entry] : entries_) {
            if (!used_.count(key)) {
                throw ConfigError("line " + std::to_string(entry.line) + ": unknown key " + key);
            }
        }
    }

    static double parse_number(const std::string& key, const std::string& s) {
        double x = 0.0;
        const char* end = s.data() + s.size();
        const auto [ptr, ec] = std::from_chars(s.data(), end, x);
        if (ec != std::errc{} || ptr != end || !std::isfinite(x)) {
            throw ConfigError(key + ": '" + s + "' is not a finite number");
        }
        return x;
    }

    static long parse_integer(const std::string& key, const std::string& s) {
        long x = 0;
        const char* end = s.data() + s.size();
        const auto [ptr, ec] = std::from_chars(s.data(), end, x);
        if (ec != std::errc{} || ptr != end) throw ConfigError(key + ": '" + s + "' is not an integer");
        return x;
    }

private:
    struct Entry {
        std::string value;
        int line;
    };
    std::map<std::string, Entry> entries_;
    std::set<std::string> used_;
};

template <class Enum, std::size_t M>
Enum enum_from(const std::string& key, const std::string& value,
               const std::pair<std::string_view, Enum> (&table)[M]) {
    for (const auto& [name, e] : table) {
        if (value == name) return e;
    }
    std::string allowed;
    for (const auto& [name, e] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw ConfigError(key + ": '" + value + "' is not one of {" + allowed + "}");
}

constexpr std::pair<std::string_view, SweepParameter> kSweepNames[] = {
    {"epsilon_dd", SweepParameter::kEpsilonDd}, {"theta", SweepParameter::kTheta},
    {"eta", SweepParameter::kEta},               {"n_atoms", SweepParameter::kNAtoms},
    {"gamma_loss_rel", SweepParameter::kGammaLossRel},
};

constexpr std::pair<std::string_view, OutputKind> kOutputNames[] = {
    {"xi2", OutputKind::kXi2},
    {"qfi", OutputKind::kQfi},
    {"fidelity", OutputKind::kFidelity},
    {"kernels", OutputKind::kKernels},
    {"spectral_density", OutputKind::kSpectralDensity},
};

constexpr std::pair<std::string_view, Spacing> kSpacingNames[] = {
    {"linear", Spacing::kLinear},
    {"log", Spacing::kLog},
};

constexpr std::pair<std::string_view, CatPhase> kPhaseNames[] = {
    {"matched", CatPhase::kMatchedToEvolution},
    {"opposite", CatPhase::kOppositeTwist},
};

std::string_view phase_name(CatPhase p) {
    return p == CatPhase::kMatchedToEvolution ? "matched" : "opposite";
}

bool affects_reservoir(SweepParameter p) {
    return p == SweepParameter::kEpsilonDd || p == SweepParameter::kTheta || p == SweepParameter::kEta;
}

void validate_axis(const SweepAxis& axis, const char* which) {
    const std::string name(to_string(axis.parameter));
    if (axis.values.empty()) throw ConfigError(std::string(which) + ": no values for " + name);
    std::vector<double> sorted = axis.values;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw ConfigError(std::string(which) + ": repeated value for " + name);
    }
    for (double v : axis.values) {
        if (!std::isfinite(v)) throw ConfigError(std::string(which) + ": non-finite value for " + name);
        if (axis.parameter == SweepParameter::kNAtoms && (v < 1.0 || v != std::floor(v))) {
            throw ConfigError(std::string(which) + ": n_atoms values must be positive integers");
        }
        if (axis.parameter == SweepParameter::kGammaLossRel && v < 0.0) {
            throw ConfigError(std::string(which) + ": gamma_loss_rel values must be >= 0");
        }
    }
}

struct SweepPoint {
    double outer = 0.0;
    double inner = 0.0;
    ReservoirParams params;
    int n_atoms = 0;
    double gamma_loss_rel = 0.0;
    std::size_t reservoir = 0;
};

void apply(SweepParameter p, double v, SweepPoint& pt) {
    switch (p) {
        case SweepParameter::kEpsilonDd: pt.params.epsilon_dd = v; break;
        case SweepParameter::kTheta: pt.params.theta = v; break;
        case SweepParameter::kEta: pt.params.eta = v; break;
        case SweepParameter::kNAtoms: pt.n_atoms = static_cast<int>(v); break;
        case SweepParameter::kGammaLossRel: pt.gamma_loss_rel = v; break;
    }
}

bool same_reservoir(const ReservoirParams& a, const ReservoirParams& b) {
    return std::tie(a.eta, a.epsilon_dd, a.theta, a.ell_ratio, a.temperature) ==
           std::tie(b.eta, b.epsilon_dd, b.theta, b.ell_ratio, b.temperature);
}

std::vector<SweepPoint> enumerate(const ScenarioConfig& c, const ReservoirParams& base) {
    const std::vector<double> none{0.0};
    const auto& outer = c.sweep ? c.sweep->values : none;
    const auto& inner = c.inner_sweep ? c.inner_sweep->values : none;
    std::vector<SweepPoint> points;
    for (double o : outer) {
        for (double i : inner) {
            SweepPoint pt{o, i, base, c.n_atoms, c.gamma_loss_rel, 0};
            if (c.sweep) apply(c.sweep->parameter, o, pt);
            if (c.inner_sweep) apply(c.inner_sweep->parameter, i, pt);
            points.push_back(pt);
        }
    }
    return points;
}

std::string reservoir_label(const ScenarioConfig& c, const SweepPoint& pt) {
    std::string label;
    if (c.sweep && affects_reservoir(c.sweep->parameter)) {
        label += "_" + std::string(to_string(c.sweep->parameter)) + "_" + fmt12(pt.outer);
    }
    if (c.inner_sweep && affects_reservoir(c.inner_sweep->parameter)) {
        label += "_" + std::string(to_string(c.inner_sweep->parameter)) + "_" + fmt12(pt.inner);
    }
    return label;
}

void require_stable_reservoir(const ReservoirParams& p, const QuadratureOptions& q) {
    const auto report = stability_scan(p, k_cutoff(p, q), 20000);
    if (!report.stable) {
        throw InstabilityError("reservoir eta=" + fmt12(p.eta) + " epsilon_dd=" + fmt12(p.epsilon_dd) +
                                   " is unstable from k=" + fmt12(*report.first_unstable_k) +
                                   " (scan to k_max=" + fmt12(report.k_max) + ", " +
                                   std::to_string(report.samples) + " samples)",
                               *report.first_unstable_k);
    }
}

std::vector<double> spectral_grid(const ScenarioConfig& c) {
    std::vector<double> w(c.spectral_points);
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = c.spectral_omega_max * static_cast<double>(i + 1) / static_cast<double>(w.size());
    }
    return w;
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return os;
}

}  // namespace

std::string_view version() { return RESQ_VERSION; }

std::string_view to_string(SweepParameter p) {
    for (const auto& [name, e] : kSweepNames) {
        if (e == p) return name;
    }
    return "?";
}

std::string_view to_string(OutputKind k) {
    for (const auto& [name, e] : kOutputNames) {
        if (e == k) return name;
    }
    return "?";
}

void TimeGrid::validate() const {
    if (!(t_min > 0.0) || !std::isfinite(t_max)) throw ConfigError("time_grid: t_min must be > 0");
    if (n_points == 0) throw ConfigError("time_grid: n_points must be >= 1");
    if (n_points == 1 && t_max != t_min) throw ConfigError("time_grid: one point needs t_min = t_max");
    if (n_points > 1 && !(t_max > t_min)) throw ConfigError("time_grid: t_max must exceed t_min");
}

std::vector<double> TimeGrid::points() const {
    validate();
    if (n_points == 1) return {t_min};
    return spacing == Spacing::kLog ? log_time_grid(t_min, t_max, n_points)
                                    : linear_time_grid(t_min, t_max, n_points);
}

bool ScenarioConfig::wants(OutputKind k) const {
    return std::find(outputs.begin(), outputs.end(), k) != outputs.end();
}

ReservoirParams ScenarioConfig::base_reservoir() const {
    if (!lab) return reservoir;
    try {
        return lab_units_to_dimensionless(*lab).params;
    } catch (const DomainError& e) {
        throw ConfigError(std::string("lab: ") + e.what());
    }
}

void ScenarioConfig::validate() const {
    if (name.empty()) throw ConfigError("name must not be empty");
    if (n_atoms < 1) throw ConfigError("n_atoms must be >= 1");
    if (!(gamma_loss_rel >= 0.0)) throw ConfigError("gamma_loss_rel must be >= 0");
    if (gamma_loss_abs && !(*gamma_loss_abs >= 0.0)) throw ConfigError("gamma_loss_abs must be >= 0");
    if (!std::isfinite(lambda_prime)) throw ConfigError("lambda_prime must be finite");
    time_grid.validate();
    if (outputs.empty()) throw ConfigError("outputs must list at least one of xi2, qfi, fidelity, kernels, spectral_density");
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        for (std::size_t j = i + 1; j < outputs.size(); ++j) {
            if (outputs[i] == outputs[j]) throw ConfigError("outputs: repeated entry " + std::string(to_string(outputs[i])));
        }
    }
    if (inner_sweep && !sweep) throw ConfigError("sweep.inner_parameter needs sweep.parameter");
    if (sweep) validate_axis(*sweep, "sweep");
    if (inner_sweep) {
        validate_axis(*inner_sweep, "sweep.inner");
        if (inner_sweep->parameter == sweep->parameter) {
            throw ConfigError("sweep: inner and outer parameter are both " + std::string(to_string(sweep->parameter)));
        }
    }
    const auto sweeps = [&](SweepParameter p) {
        return (sweep && sweep->parameter == p) || (inner_sweep && inner_sweep->parameter == p);
    };
    if (gamma_loss_abs && sweeps(SweepParameter::kGammaLossRel)) {
        throw ConfigError("gamma_loss_abs overrides gamma_loss_rel; it cannot be combined with a gamma_loss_rel sweep");
    }
    if (!(quadrature.abs_tol > 0.0) || !(quadrature.k_max_sigma > 0.0)) {
        throw ConfigError("quadrature: abs_tol and k_max_sigma must be > 0");
    }
    if (!(table_t_min > 0.0) || !(table_t_max > table_t_min) || table_points < 8) {
        throw ConfigError("kernel_table: need 0 < t_min < t_max and n_points >= 8");
    }
    if (!(spectral_omega_max > 0.0) || spectral_points == 0) {
        throw ConfigError("spectral: need omega_max > 0 and n_points >= 1");
    }

    const ReservoirParams base = base_reservoir();
    for (const auto& pt : enumerate(*this, base)) {
        try {
            pt.params.validate();
        } catch (const DomainError& e) {
            throw ConfigError(std::string("reservoir: ") + e.what());
        }
        if (wants(OutputKind::kXi2) && pt.n_atoms < 2) throw ConfigError("xi2 output needs n_atoms >= 2");
    }
}

ScenarioConfig parse_config(std::string_view text) {
    Fields f(text);
    ScenarioConfig c;
    if (auto v = f.take("name")) c.name = *v;
    c.n_atoms = static_cast<int>(f.integer("n_atoms", c.n_atoms));
    c.lambda_prime = f.number("lambda_prime", c.lambda_prime);
    c.gamma_loss_rel = f.number("gamma_loss_rel", c.gamma_loss_rel);
    c.gamma_loss_abs = f.optional_number("gamma_loss_abs");
    c.force_gamma_zero = f.boolean("force_gamma_zero", c.force_gamma_zero);
    if (auto v = f.take("cat_phase")) c.cat_phase = enum_from("cat_phase", *v, kPhaseNames);
    if (auto v = f.take("outputs")) {
        c.outputs.clear();
        for (auto item : split_list(*v)) c.outputs.push_back(enum_from("outputs", std::string(item), kOutputNames));
    }

    const bool lab = f.has_prefix("lab.");
    if (lab && f.has_prefix("reservoir.")) throw ConfigError("give either reservoir.* or lab.* keys, not both");
    if (lab) {
        LabParams p;
        p.n0 = f.number("lab.n0", p.n0);
        p.a_B = f.number("lab.a_B", p.a_B);
        p.a_AB = f.number("lab.a_AB", p.a_AB);
        p.a_dd = f.optional_number("lab.a_dd");
        p.m_A = f.number("lab.m_A", p.m_A);
        p.m_B = f.number("lab.m_B", p.m_B);
        p.omega_perp = f.number("lab.omega_perp", p.omega_perp);
        p.omega_A = f.number("lab.omega_A", p.omega_A);
        p.mu_m = f.number("lab.mu_m", p.mu_m);
        p.tilt_angle = f.number("lab.tilt_angle", p.tilt_angle);
        p.temperature = f.number("lab.temperature", p.temperature);
        c.lab = p;
    } else {
        auto& r = c.reservoir;
        r.eta = f.number("reservoir.eta", r.eta);
        r.epsilon_dd = f.number("reservoir.epsilon_dd", r.epsilon_dd);
        r.theta = f.number("reservoir.theta", r.theta);
        r.ell_ratio = f.number("reservoir.ell_ratio", r.ell_ratio);
        r.temperature = f.number("reservoir.temperature", r.temperature);
    }

    auto& g = c.time_grid;
    g.t_min = f.number("time_grid.t_min", g.t_min);
    g.t_max = f.number("time_grid.t_max", g.t_max);
    const long n_points = f.integer("time_grid.n_points", static_cast<long>(g.n_points));
    if (n_points < 1) throw ConfigError("time_grid.n_points must be >= 1");
    g.n_points = static_cast<std::size_t>(n_points);
    if (auto v = f.take("time_grid.spacing")) g.spacing = enum_from("time_grid.spacing", *v, kSpacingNames);
    g.relative_to_t_opt = f.boolean("time_grid.relative_to_t_opt", g.relative_to_t_opt);

    if (auto v = f.take("sweep.parameter")) {
        c.sweep = SweepAxis{enum_from("sweep.parameter", *v, kSweepNames), f.numbers("sweep.values")};
    }
    if (auto v = f.take("sweep.inner_parameter")) {
        c.inner_sweep = SweepAxis{enum_from("sweep.inner_parameter", *v, kSweepNames), f.numbers("sweep.inner_values")};
    }

    c.quadrature.abs_tol = f.number("quadrature.abs_tol", c.quadrature.abs_tol);
    c.quadrature.k_max_sigma = f.number("quadrature.k_max_sigma", c.quadrature.k_max_sigma);
    c.table_t_min = f.number("kernel_table.t_min", c.table_t_min);
    c.table_t_max = f.number("kernel_table.t_max", c.table_t_max);
    const long table_points = f.integer("kernel_table.n_points", static_cast<long>(c.table_points));
    if (table_points < 1) throw ConfigError("kernel_table.n_points must be >= 1");
    c.table_points = static_cast<std::size_t>(table_points);
    c.spectral_omega_max = f.number("spectral.omega_max", c.spectral_omega_max);
    const long spectral_points = f.integer("spectral.n_points", static_cast<long>(c.spectral_points));
    if (spectral_points < 1) throw ConfigError("spectral.n_points must be >= 1");
    c.spectral_points = static_cast<std::size_t>(spectral_points);

    // sweep.values without sweep.parameter is left unread and reported here.
    f.reject_unused();
    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string canonical_config(const ScenarioConfig& c) {
    std::ostringstream os;
    const auto list = [](const std::vector<double>& v) {
        std::string s;
        for (double x : v) s += (s.empty() ? "" : ", ") + fmt17(x);
        return s;
    };
    os << "name = " << c.name << '\n';
    os << "n_atoms = " << c.n_atoms << '\n';
    os << "lambda_prime = " << fmt17(c.lambda_prime) << '\n';
    os << "gamma_loss_rel = " << fmt17(c.gamma_loss_rel) << '\n';
    if (c.gamma_loss_abs) os << "gamma_loss_abs = " << fmt17(*c.gamma_loss_abs) << '\n';
    os << "force_gamma_zero = " << (c.force_gamma_zero ? "true" : "false") << '\n';
    os << "cat_phase = " << phase_name(c.cat_phase) << '\n';
    os << "outputs = ";
    for (std::size_t i = 0; i < c.outputs.size(); ++i) os << (i ? ", " : "") << to_string(c.outputs[i]);
    os << '\n';
    if (c.lab) {
        const auto& p = *c.lab;
        os << "lab.n0 = " << fmt17(p.n0) << '\n'
           << "lab.a_B = " << fmt17(p.a_B) << '\n'
           << "lab.a_AB = " << fmt17(p.a_AB) << '\n';
        if (p.a_dd) os << "lab.a_dd = " << fmt17(*p.a_dd) << '\n';
        os << "lab.m_A = " << fmt17(p.m_A) << '\n'
           << "lab.m_B = " << fmt17(p.m_B) << '\n'
           << "lab.omega_perp = " << fmt17(p.omega_perp) << '\n'
           << "lab.omega_A = " << fmt17(p.omega_A) << '\n'
           << "lab.mu_m = " << fmt17(p.mu_m) << '\n'
           << "lab.tilt_angle = " << fmt17(p.tilt_angle) << '\n'
           << "lab.temperature = " << fmt17(p.temperature) << '\n';
    } else {
        const auto& r = c.reservoir;
        os << "reservoir.eta = " << fmt17(r.eta) << '\n'
           << "reservoir.epsilon_dd = " << fmt17(r.epsilon_dd) << '\n'
           << "reservoir.theta = " << fmt17(r.theta) << '\n'
           << "reservoir.ell_ratio = " << fmt17(r.ell_ratio) << '\n'
           << "reservoir.temperature = " << fmt17(r.temperature) << '\n';
    }
    const auto& g = c.time_grid;
    os << "time_grid.t_min = " << fmt17(g.t_min) << '\n'
       << "time_grid.t_max = " << fmt17(g.t_max) << '\n'
       << "time_grid.n_points = " << g.n_points << '\n'
       << "time_grid.spacing = " << (g.spacing == Spacing::kLog ? "log" : "linear") << '\n'
       << "time_grid.relative_to_t_opt = " << (g.relative_to_t_opt ? "true" : "false") << '\n';
    if (c.sweep) {
        os << "sweep.parameter = " << to_string(c.sweep->parameter) << '\n'
           << "sweep.values = " << list(c.sweep->values) << '\n';
    }
    if (c.inner_sweep) {
        os << "sweep.inner_parameter = " << to_string(c.inner_sweep->parameter) << '\n'
           << "sweep.inner_values = " << list(c.inner_sweep->values) << '\n';
    }
    os << "quadrature.abs_tol = " << fmt17(c.quadrature.abs_tol) << '\n'
       << "quadrature.k_max_sigma = " << fmt17(c.quadrature.k_max_sigma) << '\n'
       << "kernel_table.t_min = " << fmt17(c.table_t_min) << '\n'
       << "kernel_table.t_max = " << fmt17(c.table_t_max) << '\n'
       << "kernel_table.n_points = " << c.table_points << '\n'
       << "spectral.omega_max = " << fmt17(c.spectral_omega_max) << '\n'
       << "spectral.n_points = " << c.spectral_points << '\n';
    return os.str();
}

std::string config_hash(const ScenarioConfig& c) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : canonical_config(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_provenance(std::ostream& os, const ScenarioConfig& c) {
    os << "# resq " << version() << '\n' << "# config_hash=" << config_hash(c) << '\n';
    std::istringstream lines(canonical_config(c));
    for (std::string line; std::getline(lines, line);) os << "# " << line << '\n';
}

Dataset compute_scenario(const ScenarioConfig& config, unsigned threads) {
    config.validate();
    Dataset d;
    d.config = config;
    const ReservoirParams base = config.base_reservoir();
    std::vector<SweepPoint> points = enumerate(config, base);

    for (auto& pt : points) {
        auto it = std::find_if(d.reservoirs.begin(), d.reservoirs.end(),
                               [&](const ReservoirRun& r) { return same_reservoir(r.params, pt.params); });
        if (it == d.reservoirs.end()) {
            ReservoirRun run;
            run.label = reservoir_label(config, pt);
            run.params = pt.params;
            d.reservoirs.push_back(std::move(run));
            it = std::prev(d.reservoirs.end());
        }
        pt.reservoir = static_cast<std::size_t>(it - d.reservoirs.begin());
    }

    const bool metrology = config.wants(OutputKind::kXi2) || config.wants(OutputKind::kQfi) ||
                           config.wants(OutputKind::kFidelity);
    std::vector<bool> needs_delta_inf(d.reservoirs.size(), false);
    if (metrology && !config.gamma_loss_abs) {
        for (const auto& pt : points) {
            if (pt.gamma_loss_rel > 0.0) needs_delta_inf[pt.reservoir] = true;
        }
    }

    const auto& q = config.quadrature;
    const std::vector<double> grid = config.time_grid.points();

    // Per reservoir: stability, Δ(∞) when loss is relative, t_opt when the grid is.
    parallel_for(d.reservoirs.size(), threads, [&](std::size_t r) {
        auto& run = d.reservoirs[r];
        require_stable_reservoir(run.params, q);
        if (needs_delta_inf[r]) run.delta_inf = delta_infinity(run.params, q);
        if (config.time_grid.relative_to_t_opt) {
            run.t_opt = scan_optimal_time(run.params, q, config.table_t_min, config.table_t_max, config.table_points);
        }
        run.kernels.times = grid;
        if (run.t_opt) {
            for (double& t : run.kernels.times) t *= *run.t_opt;
        }
        run.kernels.delta.assign(grid.size(), 0.0);
        run.kernels.gamma.assign(grid.size(), 0.0);
        run.kernels.delta_inf = run.delta_inf;
    });

    // Kernel samples, flattened over (reservoir, time).
    const std::size_t n_t = grid.size();
    parallel_for(d.reservoirs.size() * n_t, threads, [&](std::size_t idx) {
        auto& k = d.reservoirs[idx / n_t].kernels;
        const std::size_t i = idx % n_t;
        k.delta[i] = delta_kernel(k.times[i], d.reservoirs[idx / n_t].params, q);
        k.gamma[i] = gamma_kernel(k.times[i], d.reservoirs[idx / n_t].params, q);
    });
    for (const auto& run : d.reservoirs) run.kernels.validate();

    if (config.wants(OutputKind::kSpectralDensity)) {
        const auto omegas = spectral_grid(config);
        parallel_for(d.reservoirs.size(), threads, [&](std::size_t r) {
            auto& run = d.reservoirs[r];
            const DispersionInverter inverter(run.params, k_cutoff(run.params, q));
            run.spectrum.reserve(omegas.size());
            for (double w : omegas) run.spectrum.push_back(spectral_sample(w, inverter));
        });
    }

    if (!metrology) return d;

    const bool analytic = config.wants(OutputKind::kQfi);
    ReportOptions base_options;
    base_options.squeezing = config.wants(OutputKind::kXi2);
    base_options.qfi = config.wants(OutputKind::kQfi);
    base_options.fidelity = config.wants(OutputKind::kFidelity);
    base_options.phase = config.cat_phase;
    // Initial and cat states depend only on N; build them once.
    std::map<int, std::pair<DickeState, Eigen::VectorXcd>> per_n;
    for (const auto& pt : points) {
        if (!per_n.count(pt.n_atoms)) {
            per_n.emplace(pt.n_atoms, std::pair{css_plus_x(pt.n_atoms),
                                                base_options.fidelity ? cat_amplitudes(pt.n_atoms, config.cat_phase)
                                                                      : Eigen::VectorXcd()});
        }
    }
    d.rows.resize(points.size() * n_t);
    parallel_for(d.rows.size(), threads, [&](std::size_t idx) {
        const SweepPoint& pt = points[idx / n_t];
        const std::size_t i = idx % n_t;
        const ReservoirRun& run = d.reservoirs[pt.reservoir];
        DatasetRow& row = d.rows[idx];
        row.outer = pt.outer;
        row.inner = pt.inner;
        row.n_atoms = pt.n_atoms;
        row.gamma_loss = config.gamma_loss_abs ? *config.gamma_loss_abs
                         : pt.gamma_loss_rel > 0.0 ? pt.gamma_loss_rel * *run.delta_inf
                                                   : 0.0;
        row.t = run.kernels.times[i];
        row.t_over_t_opt = run.t_opt ? grid[i] : 0.0;
        row.delta = run.kernels.delta[i];
        row.gamma = config.force_gamma_zero ? 0.0 : run.kernels.gamma[i];

        EvolutionInputs in;
        in.t = row.t;
        in.delta_t = row.delta;
        in.gamma_t = row.gamma;
        in.gamma_loss = row.gamma_loss;
        in.lambda_prime = config.lambda_prime;
        const auto& [css, cat] = per_n.at(pt.n_atoms);
        ReportOptions options = base_options;
        if (options.fidelity) options.cat = &cat;
        row.report = metrology_report(evolve(css, in), row.t, options);
        if (analytic && pt.n_atoms == 2) row.fq_n2_analytic = qfi_n2_analytic(row.t, row.delta, row.gamma).f_q_max;
    });

    std::stable_sort(d.rows.begin(), d.rows.end(), [](const DatasetRow& a, const DatasetRow& b) {
        return std::tie(a.outer, a.inner, a.t) < std::tie(b.outer, b.inner, b.t);
    });
    return d;
}

std::vector<QfiSummaryRow> qfi_amplification_summary(const Dataset& d) {
    std::vector<QfiSummaryRow> out;
    std::size_t begin = 0;
    while (begin < d.rows.size()) {
        std::size_t end = begin;
        while (end < d.rows.size() && d.rows[end].outer == d.rows[begin].outer &&
               d.rows[end].inner == d.rows[begin].inner) {
            ++end;
        }
        std::size_t best = begin;
        for (std::size_t i = begin; i < end; ++i) {
            if (d.rows[i].report.qfi_max > d.rows[best].report.qfi_max) best = i;
        }
        const DatasetRow& top = d.rows[best];
        QfiSummaryRow s;
        s.outer = top.outer;
        s.inner = top.inner;
        s.n_atoms = top.n_atoms;
        s.fq_max = top.report.qfi_max;
        s.trace_at_max = top.report.survival_trace;
        s.t_at_max = top.t;
        s.fq_over_n = s.fq_max / top.n_atoms;
        s.fq_over_n2 = s.fq_max / (static_cast<double>(top.n_atoms) * top.n_atoms);
        s.fq_fit = s.fq_max;
        s.t_fit = s.t_at_max;
        if (best > begin && best + 1 < end) {
            const double t0 = d.rows[best - 1].t, t1 = top.t, t2 = d.rows[best + 1].t;
            const double f0 = d.rows[best - 1].report.qfi_max, f1 = s.fq_max, f2 = d.rows[best + 1].report.qfi_max;
            // Vertex of the interpolating parabola (divided differences).
            const double d01 = (f1 - f0) / (t1 - t0);
            const double d12 = (f2 - f1) / (t2 - t1);
            const double curv = (d12 - d01) / (t2 - t0);
            if (curv < 0.0) {
                const double tv = 0.5 * (t0 + t1) - d01 / (2.0 * curv);
                if (tv > t0 && tv < t2) {
                    s.t_fit = tv;
                    s.fq_fit = f1 + d01 * (tv - t1) + curv * (tv - t0) * (tv - t1);
                }
            }
        }
        out.push_back(s);
        begin = end;
    }
    return out;
}

std::vector<std::filesystem::path> write_dataset(const Dataset& d, const std::filesystem::path& out_dir) {
    const ScenarioConfig& c = d.config;
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> written;

    const auto sweep_header = [&](std::ostream& os) {
        if (c.sweep) os << to_string(c.sweep->parameter) << ',';
        if (c.inner_sweep) os << to_string(c.inner_sweep->parameter) << ',';
    };
    const auto sweep_values = [&](std::ostream& os, double outer, double inner) {
        if (c.sweep) os << fmt12(outer) << ',';
        if (c.inner_sweep) os << fmt12(inner) << ',';
    };

    const bool xi2 = c.wants(OutputKind::kXi2);
    const bool qfi = c.wants(OutputKind::kQfi);
    const bool fidelity = c.wants(OutputKind::kFidelity);
    // With loss, also the survival-weighted values: ξ²/tr ρ and tr ρ·F_Q are what the
    // unnormalized ρ gives (the squeezing variance and the QFI are homogeneous in ρ).
    const bool lossy = c.gamma_loss_abs.value_or(0.0) > 0.0 || c.gamma_loss_rel > 0.0 ||
                       (c.sweep && c.sweep->parameter == SweepParameter::kGammaLossRel) ||
                       (c.inner_sweep && c.inner_sweep->parameter == SweepParameter::kGammaLossRel);
    if (xi2 || qfi || fidelity) {
        const bool relative = c.time_grid.relative_to_t_opt;
        const bool analytic = qfi && std::all_of(d.rows.begin(), d.rows.end(),
                                                 [](const DatasetRow& r) { return r.fq_n2_analytic.has_value(); });
        const auto path = out_dir / "metrology.csv";
        auto os = open_csv(path);
        write_provenance(os, c);
        sweep_header(os);
        os << "N,gamma_loss,t," << (relative ? "t_over_t_opt," : "") << "delta,gamma,trace";
        if (xi2) os << ",xi2,phi_opt" << (lossy ? ",xi2_unnormalized" : "");
        if (qfi) {
            os << ",fq_max,nx,ny,nz,fq_over_n,fq_over_n2" << (analytic ? ",fq_n2_analytic" : "")
               << (lossy ? ",fq_max_unnormalized" : "");
        }
        if (fidelity) os << ",fidelity";
        os << '\n';
        for (const auto& r : d.rows) {
            sweep_values(os, r.outer, r.inner);
            os << r.n_atoms << ',' << fmt12(r.gamma_loss) << ',' << fmt12(r.t) << ',';
            if (relative) os << fmt12(r.t_over_t_opt) << ',';
            os << fmt12(r.delta) << ',' << fmt12(r.gamma) << ',' << fmt12(r.report.survival_trace);
            if (xi2) {
                os << ',' << fmt12(r.report.xi_squared) << ',' << fmt12(r.report.phi_opt);
                if (lossy) os << ',' << fmt12(r.report.xi_squared / r.report.survival_trace);
            }
            if (qfi) {
                const double n = r.n_atoms;
                os << ',' << fmt12(r.report.qfi_max) << ',' << fmt12(r.report.qfi_direction.x()) << ','
                   << fmt12(r.report.qfi_direction.y()) << ',' << fmt12(r.report.qfi_direction.z()) << ','
                   << fmt12(r.report.qfi_max / n) << ',' << fmt12(r.report.qfi_max / (n * n));
                if (analytic) os << ',' << fmt12(*r.fq_n2_analytic);
                if (lossy) os << ',' << fmt12(r.report.qfi_max * r.report.survival_trace);
            }
            if (fidelity) os << ',' << fmt12(r.report.cat_fidelity);
            os << '\n';
        }
        written.push_back(path);
    }

    if (qfi) {
        const auto path = out_dir / "qfi_summary.csv";
        auto os = open_csv(path);
        write_provenance(os, c);
        sweep_header(os);
        os << "N,fq_max,t_at_max,fq_over_n,fq_over_n2,fq_fit,t_fit" << (lossy ? ",trace_at_max" : "") << '\n';
        for (const auto& s : qfi_amplification_summary(d)) {
            sweep_values(os, s.outer, s.inner);
            os << s.n_atoms << ',' << fmt12(s.fq_max) << ',' << fmt12(s.t_at_max) << ',' << fmt12(s.fq_over_n)
               << ',' << fmt12(s.fq_over_n2) << ',' << fmt12(s.fq_fit) << ',' << fmt12(s.t_fit);
            if (lossy) os << ',' << fmt12(s.trace_at_max);
            os << '\n';
        }
        written.push_back(path);
    }

    const auto reservoir_comment = [](std::ostream& os, const ReservoirRun& run) {
        const auto& p = run.params;
        os << "# reservoir eta=" << fmt12(p.eta) << " epsilon_dd=" << fmt12(p.epsilon_dd)
           << " theta=" << fmt12(p.theta) << " ell_ratio=" << fmt12(p.ell_ratio)
           << " temperature=" << fmt12(p.temperature);
        if (run.delta_inf) os << " delta_inf=" << fmt12(*run.delta_inf);
        if (run.t_opt) os << " t_opt=" << fmt12(*run.t_opt);
        os << '\n';
    };

    if (c.wants(OutputKind::kKernels)) {
        for (const auto& run : d.reservoirs) {
            const auto path = out_dir / ("kernels" + run.label + ".csv");
            auto os = open_csv(path);
            write_provenance(os, c);
            reservoir_comment(os, run);
            run.kernels.write_csv(os);
            written.push_back(path);
        }
    }
    if (c.wants(OutputKind::kSpectralDensity)) {
        for (const auto& run : d.reservoirs) {
            const auto path = out_dir / ("spectral" + run.label + ".csv");
            auto os = open_csv(path);
            write_provenance(os, c);
            reservoir_comment(os, run);
            write_spectral_csv(os, run.spectrum);
            written.push_back(path);
        }
    }
    return written;
}

std::vector<std::filesystem::path> run_scenario(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                                                unsigned threads) {
    return write_dataset(compute_scenario(config, threads), out_dir);
}

namespace {

ScenarioConfig preset_base(std::string name, std::vector<OutputKind> outputs) {
    ScenarioConfig c;
    c.name = std::move(name);
    c.reservoir = ReservoirParams{5.0, -1.0, 0.015, 1.0, 0.0};
    c.outputs = std::move(outputs);
    return c;
}

const std::vector<double> kEpsilonGrid{-1.0, -0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
const std::vector<double> kLossRates{0.0, 0.001, 0.002, 0.005};
const std::vector<double> kAtomNumbers{2, 5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};

// Narrow window around t_opt for maximal-QFI summaries.
TimeGrid around_t_opt() { return TimeGrid{0.95, 1.05, 41, Spacing::kLinear, true}; }
TimeGrid at_t_opt() { return TimeGrid{1.0, 1.0, 1, Spacing::kLinear, true}; }

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig2",  "fig3a", "fig3b", "fig4a", "fig4b", "fig4c",
                                                "fig5a", "fig5b", "fig5c", "fig6a", "fig6b"};
    return names;
}

ScenarioConfig figure_preset(std::string_view name) {
    ScenarioConfig c;
    if (name == "fig2") {
        // Δ(t), γ(t) for three interaction signs.
        c = preset_base("fig2", {OutputKind::kKernels});
        c.sweep = SweepAxis{SweepParameter::kEpsilonDd, {-1.0, 0.0, 1.0}};
        c.time_grid = TimeGrid{0.1, 1000.0, 200, Spacing::kLog, false};
    } else if (name == "fig3a" || name == "fig3b") {
        c = preset_base(std::string(name), {OutputKind::kXi2});
        c.n_atoms = 100;
        c.time_grid = TimeGrid{0.1, 200.0, 200, Spacing::kLog, false};
        c.sweep = name == "fig3a" ? SweepAxis{SweepParameter::kEpsilonDd, {-1.0, 0.0, 1.0}}
                                  : SweepAxis{SweepParameter::kGammaLossRel, {0.0, 0.002, 0.01}};
    } else if (name == "fig4a") {
        c = preset_base("fig4a", {OutputKind::kQfi});
        c.sweep = SweepAxis{SweepParameter::kNAtoms, {10, 30, 50}};
        c.time_grid = TimeGrid{1.0, 150.0, 150, Spacing::kLinear, false};
    } else if (name == "fig4b") {
        c = preset_base("fig4b", {OutputKind::kQfi});
        c.sweep = SweepAxis{SweepParameter::kNAtoms, kAtomNumbers};
        c.time_grid = around_t_opt();
    } else if (name == "fig4c") {
        // Summary columns give both F_Q^max/N and t_opt against ε_dd.
        c = preset_base("fig4c", {OutputKind::kQfi});
        c.n_atoms = 100;
        c.sweep = SweepAxis{SweepParameter::kEpsilonDd, kEpsilonGrid};
        c.time_grid = around_t_opt();
    } else if (name == "fig5a") {
        c = preset_base("fig5a", {OutputKind::kQfi});
        c.n_atoms = 2;
        c.sweep = SweepAxis{SweepParameter::kGammaLossRel, kLossRates};
        c.time_grid = TimeGrid{0.5, 300.0, 300, Spacing::kLinear, false};
    } else if (name == "fig5b" || name == "fig5c") {
        c = preset_base(std::string(name), {OutputKind::kQfi});
        c.sweep = SweepAxis{SweepParameter::kGammaLossRel, kLossRates};
        c.inner_sweep = SweepAxis{SweepParameter::kNAtoms, kAtomNumbers};
        c.time_grid = around_t_opt();
    } else if (name == "fig6a") {
        c = preset_base("fig6a", {OutputKind::kFidelity});
        c.sweep = SweepAxis{SweepParameter::kNAtoms, {10, 30, 50}};
        c.inner_sweep = SweepAxis{SweepParameter::kEpsilonDd, kEpsilonGrid};
        c.time_grid = at_t_opt();
    } else if (name == "fig6b") {
        c = preset_base("fig6b", {OutputKind::kFidelity});
        c.sweep = SweepAxis{SweepParameter::kGammaLossRel, kLossRates};
        c.inner_sweep = SweepAxis{SweepParameter::kNAtoms, {10, 20, 30, 40, 50, 60, 70, 80, 90, 100}};
        c.time_grid = at_t_opt();
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
    }
    c.validate();
    return c;
}

}  // namespace resq
