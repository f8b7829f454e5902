#include "resq/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "resq/csv.hpp"
#include "resq/errors.hpp"

namespace resq {
namespace {

constexpr double kPi = std::numbers::pi;
using cd = std::complex<double>;

// Integer power by squaring; exact sign handling for negative real bases.
cd ipow(cd z, int n) {
    cd result = 1.0;
    if (n < 0) {
        z = 1.0 / z;
        n = -n;
    }
    while (n > 0) {
        if (n & 1) result *= z;
        z *= z;
        n >>= 1;
    }
    return result;
}

double ipow(double x, int n) { return ipow(cd(x, 0.0), n).real(); }

// ψ of the minimum of V(ψ) = ½(C + A cos 2ψ − B sin 2ψ), folded into [0, π).
double min_variance_angle(double a, double b) {
    double psi = 0.5 * std::atan2(b, -a);
    if (psi < 0.0) psi += kPi;
    if (psi >= kPi) psi -= kPi;
    return psi;
}

void require_unit_trace(const DickeState& rho, const char* what) {
    if (std::fabs(rho.trace() - 1.0) > 1e-8) {
        throw DomainError(std::string(what) + ": state must be trace-normalized (trace " +
                          fmt12(rho.trace()) + ")");
    }
}

}  // namespace

SqueezingResult squeezing_parameter(const DickeState& rho) {
    const int n = rho.n_atoms();
    if (n < 2) throw DomainError("squeezing_parameter: needs N >= 2");
    const auto jp_op = collective_operator(n, SpinComponent::kJplus);
    const auto jz_op = collective_operator(n, SpinComponent::kJz);
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(rho.dim(), rho.dim());

    const cd jp = expectation(rho, jp_op);
    const double jz = expectation(rho, jz_op).real();
    const double jz2 = expectation(rho, jz_op * jz_op).real();
    const cd jp2 = expectation(rho, jp_op * jp_op);
    const cd q_raw = expectation(rho, jp_op * (2.0 * jz_op + id));

    SqueezingResult out;
    out.mean_spin = std::sqrt(std::norm(jp) + jz * jz);
    if (!(out.mean_spin > 1e-12)) {
        throw DomainError("squeezing_parameter: mean spin vanishes, direction undefined");
    }
    out.mean_theta = std::atan2(std::abs(jp), jz);
    out.mean_phi = std::atan2(jp.imag(), jp.real());

    const double th = out.mean_theta;
    const double s = std::sin(th);
    const double c = std::cos(th);
    const double j = rho.j();
    const double jj = j * (j + 1.0);
    const cd p2 = jp2 * std::polar(1.0, -2.0 * out.mean_phi);
    const cd q = q_raw * std::polar(1.0, -out.mean_phi);

    out.a = 0.5 * s * s * (jj - 3.0 * jz2) - 0.5 * (1.0 + c * c) * p2.real() + s * c * q.real();
    out.b = -c * p2.imag() + s * q.imag();
    out.c = jj - jz2 - p2.real() - 0.5 * s * s * (jj - 3.0 * jz2) + 0.5 * (1.0 + c * c) * p2.real() -
            0.5 * std::sin(2.0 * th) * q.real();
    out.min_variance = 0.5 * (out.c - std::hypot(out.a, out.b));
    out.xi_squared = n * out.min_variance / (out.mean_spin * out.mean_spin);
    out.phi_opt = min_variance_angle(out.a, out.b);
    return out;
}

ClosedFormSqueezing squeezing_closed_form(double t, double delta_t, double gamma_t, int n_atoms) {
    if (n_atoms < 2) throw DomainError("squeezing_closed_form: needs N >= 2");
    const int n = n_atoms;
    const double x = t * delta_t;
    const double cos_x = std::cos(x);
    const double denom = 4.0 * std::exp(-2.0 * t * gamma_t) * ipow(cos_x, 2 * n - 2);
    // Same cutoff on |⟨J⟩| = j e^{−tγ} |cos tΔ|^{N−1} as the matrix route.
    const double mean_spin = 0.5 * n * std::exp(-t * gamma_t) * std::pow(std::fabs(cos_x), n - 1);
    if (!(mean_spin > 1e-12) || !(denom > 0.0)) {
        throw DomainError("squeezing_closed_form: cos(t delta) ~ 0, mean spin vanishes");
    }
    ClosedFormSqueezing out;
    out.a_tilde = 1.0 - ipow(std::cos(2.0 * x), n - 2) * std::exp(-4.0 * t * gamma_t);
    out.b_tilde = -4.0 * std::sin(x) * ipow(cos_x, n - 2) * std::exp(-t * gamma_t);
    out.xi_squared =
        (4.0 + (n - 1) * (out.a_tilde - std::hypot(out.a_tilde, out.b_tilde))) / denom;
    // In the mean-spin frame A = N(N−1)Ã/8 and B = σN(N−1)B̃/8, with σ the sign of
    // ⟨J_x⟩ ∝ cos^{N−1}(tΔ): the frame's n̂₁ flips with the mean spin.
    const double sigma = ipow(cos_x, n - 1) < 0.0 ? -1.0 : 1.0;
    out.phi_opt = min_variance_angle(out.a_tilde, sigma * out.b_tilde);
    return out;
}

LossyMoments lossy_moments_oracle(double t, double delta_t, double gamma_t, double gamma_loss,
                                  double lambda_prime, int n_atoms) {
    if (n_atoms < 2) throw DomainError("lossy_moments_oracle: needs N >= 2");
    const int n = n_atoms;
    const double j = 0.5 * n;
    const double x = t * delta_t;
    const double gl = gamma_loss * t;
    const double survival = std::exp(-n * gl);
    const cd twist(std::cos(x) * std::cosh(gl), std::sin(x) * std::sinh(gl));
    const cd twist2(std::cos(2.0 * x) * std::cosh(gl), std::sin(2.0 * x) * std::sinh(gl));
    // sinh(z) for z = -(iΔ + Γ)t; ⟨J₊(2J_z+1)⟩ = d⟨J₊⟩/dz.
    const cd kick(-std::cos(x) * std::sinh(gl), -std::sin(x) * std::cosh(gl));
    const double dephase = std::exp(-t * gamma_t);

    LossyMoments m;
    m.jp = j * std::polar(1.0, t * lambda_prime) * survival * dephase * ipow(twist, n - 1);
    m.jp2 = j * (j - 0.5) * survival * std::exp(-4.0 * t * gamma_t) *
            std::polar(1.0, 2.0 * t * lambda_prime) * ipow(twist2, n - 2);
    m.jz = -j / std::pow(2.0, j) * survival * std::sinh(2.0 * gl) *
           std::pow(1.0 + std::cosh(2.0 * gl), j - 1.0);
    const double e2 = std::exp(2.0 * gl);
    m.jz2 = j * survival / (std::pow(2.0, j) * (1.0 + e2) * (1.0 + e2)) *
            std::pow(1.0 + std::cosh(2.0 * gl), j) * (2.0 * e2 + j * (1.0 - e2) * (1.0 - e2));
    m.jp_2jz1 = 2.0 * j * (j - 0.5) * std::polar(1.0, t * lambda_prime) * survival * dephase *
                ipow(twist, n - 2) * kick;
    return m;
}

Eigen::Matrix3d qfi_matrix(const DickeState& rho, double eigen_cutoff) {
    require_unit_trace(rho, "qfi_matrix");
    const int n = rho.n_atoms();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.rho());
    Eigen::VectorXd p = es.eigenvalues();
    if (p(0) < -1e-10) {
        throw DomainError("qfi_matrix: density matrix has eigenvalue " + fmt12(p(0)) +
                          " below -1e-10");
    }
    p = p.cwiseMax(0.0);
    const Eigen::MatrixXcd& v = es.eigenvectors();

    const Eigen::Index d = rho.dim();
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
            const double sum = p(a) + p(b);
            if (a == b || sum <= eigen_cutoff) continue;
            const double diff = p(a) - p(b);
            w(a, b) = diff * diff / sum;
        }
    }
    const SpinComponent comps[3] = {SpinComponent::kJx, SpinComponent::kJy, SpinComponent::kJz};
    Eigen::MatrixXcd m[3];
    for (int k = 0; k < 3; ++k) m[k] = v.adjoint() * collective_operator(n, comps[k]) * v;

    Eigen::Matrix3d c;
    for (int k = 0; k < 3; ++k) {
        for (int l = k; l < 3; ++l) {
            // ⟨i|J_l|j⟩⟨j|J_k|i⟩ is the conjugate of ⟨i|J_k|j⟩⟨j|J_l|i⟩, so the
            // symmetrized bracket is twice the real part.
            const cd s = (w.cast<cd>().cwiseProduct(m[k]).cwiseProduct(m[l].transpose())).sum();
            c(k, l) = c(l, k) = 2.0 * s.real();
        }
    }
    return c;
}

QfiMax qfi_max(const Eigen::Matrix3d& c) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c);
    const Eigen::Vector3d& lam = es.eigenvalues();
    const double top = lam(2);
    const double tie = 1e-9 * std::max(1.0, std::fabs(top));
    Eigen::Matrix<double, 3, Eigen::Dynamic> basis(3, 0);
    for (int i = 2; i >= 0; --i) {
        if (top - lam(i) > tie) break;
        basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
        basis.col(basis.cols() - 1) = es.eigenvectors().col(i);
    }
    QfiMax out;
    out.value = top;
    // The unit vector of the eigenspace with the largest x component is the
    // normalized projection of x̂; if x̂ is orthogonal to it, move on to ŷ, then ẑ.
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d proj = basis * basis.transpose().col(k);
        if (proj.norm() > 1e-9) {
            out.direction = proj.normalized();
            return out;
        }
    }
    out.direction = basis.col(0);
    return out;
}

QfiMax qfi_max(const DickeState& rho, double eigen_cutoff) {
    return qfi_max(qfi_matrix(rho, eigen_cutoff));
}

QfiN2 qfi_n2_analytic(double t, double delta_t, double gamma_t) {
    const double g = gamma_t * t;
    const double x = delta_t * t;
    const double e4 = std::exp(4.0 * g);
    const double em4 = std::exp(-4.0 * g);
    const double em6 = std::exp(-6.0 * g);

    QfiN2 out;
    const double gap = (1.0 - e4) * (1.0 - e4);
    out.c_xx = (4.0 * std::sinh(2.0 * g) * std::sinh(2.0 * g) + 16.0 * std::exp(2.0 * g)) /
               (1.0 + 3.0 * e4) * (1.0 - 16.0 * std::cos(x) * std::cos(x) / (em6 * gap + 16.0));

    const double p = 0.25 * (1.0 - em4);
    const double xi = std::sqrt(gap + 16.0 * std::exp(6.0 * g));
    // s = +1 pairs p with p₋, s = −1 pairs p with p₊.
    auto p_pm = [&](double s) { return 0.125 * em4 * (1.0 + 3.0 * e4 + s * xi); };
    auto weight = [&](double s) {
        const double q = p_pm(-s);
        if (p + q <= 1e-12) return 0.0;
        return (p - q) * (p - q) / (p + q);
    };
    auto bracket = [&](double s) { return 1.0 - e4 + s * xi; };
    auto norm = [&](double s) { return std::sqrt(16.0 + em6 * bracket(s) * bracket(s)); };
    auto alpha = [&](double s) { return 2.0 * std::sqrt(2.0) / norm(s); };
    auto beta = [&](double s) {
        return -std::polar(1.0, x) * std::exp(-3.0 * g) * bracket(s) / norm(s);
    };

    out.c_yy = 4.0 * (std::norm(beta(1.0)) * weight(1.0) + std::norm(beta(-1.0)) * weight(-1.0));
    out.c_zz = 8.0 * (alpha(1.0) * alpha(1.0) * weight(1.0) + alpha(-1.0) * alpha(-1.0) * weight(-1.0));
    out.c_yz = -4.0 * std::sqrt(2.0) *
               (weight(1.0) * alpha(1.0) * beta(1.0).imag() + weight(-1.0) * alpha(-1.0) * beta(-1.0).imag());
    const double tr = out.c_yy + out.c_zz;
    out.c_perp = 0.5 * (tr + std::hypot(out.c_yy - out.c_zz, 2.0 * out.c_yz));
    out.f_q_max = std::max(out.c_xx, out.c_perp);
    return out;
}

double optimal_time(const KernelTable& kernels) {
    kernels.validate();
    const auto& ts = kernels.times;
    const auto& ds = kernels.delta;
    auto g = [&](std::size_t i) { return ts[i] * ds[i] - 0.5 * kPi; };
    std::size_t hit = ts.size();
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
        if (g(i) < 0.0 && g(i + 1) >= 0.0) {
            hit = i;
            break;
        }
    }
    if (hit == ts.size()) {
        throw RangeError("optimal_time: t*delta(t) does not reach pi/2 on the kernel table");
    }
    const MonotoneCubic delta(ts, ds);
    double lo = ts[hit];
    double hi = ts[hit + 1];
    for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid * delta(mid) - 0.5 * kPi < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double scan_optimal_time(const ReservoirParams& p, const QuadratureOptions& opt, double t_min, double t_max,
                         std::size_t n_points) {
    const auto ts = log_time_grid(t_min, t_max, n_points);
    double prev = ts.front();
    if (prev * delta_kernel(prev, p, opt) - 0.5 * kPi >= 0.0) {
        throw RangeError("scan_optimal_time: t*delta(t) already exceeds pi/2 at t_min");
    }
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] * delta_kernel(ts[i], p, opt) - 0.5 * kPi >= 0.0) {
            // Bracket [prev, ts[i]] expressed as ts[i](1 ± rel).
            const double rel = std::min(0.999, 1.0 - prev / ts[i] + 1e-12);
            return refine_optimal_time(ts[i], p, opt, rel);
        }
        prev = ts[i];
    }
    throw RangeError("scan_optimal_time: t*delta(t) does not reach pi/2 below t_max");
}

double refine_optimal_time(double t_guess, const ReservoirParams& p, const QuadratureOptions& opt,
                           double rel_bracket) {
    if (!(t_guess > 0.0) || !(rel_bracket > 0.0 && rel_bracket < 1.0)) {
        throw DomainError("refine_optimal_time: need t_guess > 0 and 0 < rel_bracket < 1");
    }
    auto f = [&](double t) { return t * delta_kernel(t, p, opt) - 0.5 * kPi; };
    const double lo = t_guess * (1.0 - rel_bracket);
    const double hi = t_guess * (1.0 + rel_bracket);
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    if ((f_lo < 0.0) == (f_hi < 0.0)) {
        throw RangeError("refine_optimal_time: no sign change of t*delta(t) - pi/2 in the bracket");
    }
    std::uintmax_t max_iter = 100;
    const auto root = boost::math::tools::toms748_solve(
        f, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(48), max_iter);
    return 0.5 * (root.first + root.second);
}

double cat_fidelity(const DickeState& rho, CatPhase phase) {
    return cat_fidelity(rho, cat_amplitudes(rho.n_atoms(), phase));
}

double cat_fidelity(const DickeState& rho, const Eigen::VectorXcd& cat) {
    require_unit_trace(rho, "cat_fidelity");
    if (cat.size() != rho.dim()) throw DomainError("cat_fidelity: cat vector does not match the state");
    const double overlap = (cat.adjoint() * rho.rho() * cat)(0, 0).real() / rho.trace();
    return std::sqrt(std::clamp(overlap, 0.0, 1.0));
}

MetrologyReport metrology_report(const DickeState& evolved, double t, const ReportOptions& what) {
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    const DickeState rho = normalize(evolved);
    MetrologyReport r;
    r.t = t;
    r.survival_trace = evolved.trace();
    r.xi_squared = r.phi_opt = kNaN;
    if (what.squeezing) {
        try {
            const auto sq = squeezing_parameter(rho);
            r.xi_squared = sq.xi_squared;
            r.phi_opt = sq.phi_opt;
        } catch (const DomainError&) {
            // No mean spin (for instance exactly at the cat time): ξ² undefined.
        }
    }
    if (what.qfi) {
        r.qfi_matrix = qfi_matrix(rho);
        const auto top = qfi_max(r.qfi_matrix);
        r.qfi_max = top.value;
        r.qfi_direction = top.direction;
    } else {
        r.qfi_matrix.setConstant(kNaN);
        r.qfi_max = kNaN;
        r.qfi_direction.setConstant(kNaN);
    }
    if (!what.fidelity) {
        r.cat_fidelity = kNaN;
    } else {
        r.cat_fidelity = what.cat ? cat_fidelity(rho, *what.cat) : cat_fidelity(rho, what.phase);
    }
    return r;
}

void write_report_header(std::ostream& os) { os << "t,xi2,phi_opt,fq_max,nx,ny,nz,fidelity,trace\n"; }

void write_report_row(std::ostream& os, const MetrologyReport& r) {
    os << fmt12(r.t) << ',' << fmt12(r.xi_squared) << ',' << fmt12(r.phi_opt) << ','
       << fmt12(r.qfi_max) << ',' << fmt12(r.qfi_direction.x()) << ',' << fmt12(r.qfi_direction.y())
       << ',' << fmt12(r.qfi_direction.z()) << ',' << fmt12(r.cat_fidelity) << ','
       << fmt12(r.survival_trace) << '\n';
}

}  // namespace resq
