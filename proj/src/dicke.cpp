#include "resq/dicke.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "resq/csv.hpp"
#include "resq/errors.hpp"

namespace resq {
namespace {

void require_atoms(int n_atoms) {
    if (n_atoms < 1) throw DomainError("Dicke state needs N >= 1 atoms");
}

}  // namespace

DickeState::DickeState(int n_atoms, Eigen::MatrixXcd rho) : n_atoms_(n_atoms), rho_(std::move(rho)) {
    require_atoms(n_atoms);
    if (rho_.rows() != n_atoms + 1 || rho_.cols() != n_atoms + 1) {
        throw DomainError("DickeState: rho must be (N+1)x(N+1)");
    }
    const double scale = std::max(rho_.cwiseAbs().maxCoeff(), 1e-300);
    if ((rho_ - rho_.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw DomainError("DickeState: rho is not Hermitian");
    }
    trace_ = rho_.diagonal().real().sum();
    if (!(trace_ > 0.0) || trace_ > 1.0 + 1e-12) {
        throw DomainError("DickeState: trace " + fmt12(trace_) + " outside (0, 1]");
    }
}

double DickeState::purity() const {
    // tr(ρ²) = Σ |ρ_mn|² for Hermitian ρ.
    return rho_.cwiseAbs2().sum() / (trace_ * trace_);
}

double DickeState::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho_ / trace_, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

DickeState pure_state(int n_atoms, const Eigen::VectorXcd& psi) {
    require_atoms(n_atoms);
    if (psi.size() != n_atoms + 1) throw DomainError("pure_state: amplitude vector must be N+1 long");
    const double norm = psi.norm();
    if (std::fabs(norm - 1.0) > 1e-10) throw DomainError("pure_state: amplitudes not normalized");
    const Eigen::VectorXcd v = psi / norm;
    Eigen::MatrixXcd rho = v * v.adjoint();
    // Exact Hermitian symmetrization removes rounding asymmetry of the outer product.
    rho = 0.5 * (rho + rho.adjoint()).eval();
    return DickeState(n_atoms, std::move(rho));
}

Eigen::VectorXcd css_plus_x_amplitudes(int n_atoms) {
    require_atoms(n_atoms);
    Eigen::VectorXcd c(n_atoms + 1);
    const double log_norm = -n_atoms * std::log(2.0);
    for (int k = 0; k <= n_atoms; ++k) {
        // k = j + m; log C(N, k) via lgamma to stay finite for large N.
        const double log_binom =
            std::lgamma(n_atoms + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n_atoms - k + 1.0);
        c(k) = std::exp(0.5 * (log_norm + log_binom));
    }
    return c;
}

DickeState css_plus_x(int n_atoms) { return pure_state(n_atoms, css_plus_x_amplitudes(n_atoms)); }

Eigen::VectorXcd css_amplitudes(int n_atoms, double theta0, double phi0) {
    require_atoms(n_atoms);
    const Eigen::MatrixXcd g =
        theta0 * (std::sin(phi0) * collective_operator(n_atoms, SpinComponent::kJx) -
                  std::cos(phi0) * collective_operator(n_atoms, SpinComponent::kJy));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (g + g.adjoint()));
    const Eigen::MatrixXcd& v = es.eigenvectors();
    // exp(iG)|j,j⟩ = V e^{iλ} V† e_top.
    Eigen::VectorXcd coeff = v.row(n_atoms).adjoint();
    for (Eigen::Index i = 0; i < coeff.size(); ++i) {
        coeff(i) *= std::polar(1.0, es.eigenvalues()(i));
    }
    Eigen::VectorXcd psi = v * coeff;
    return psi / psi.norm();
}

DickeState css_general(int n_atoms, double theta0, double phi0) {
    return pure_state(n_atoms, css_amplitudes(n_atoms, theta0, phi0));
}

Eigen::VectorXcd cat_amplitudes(int n_atoms, CatPhase phase) {
    const double half_pi = 0.5 * std::numbers::pi;
    const double sign = phase == CatPhase::kMatchedToEvolution ? 1.0 : -1.0;
    const Complex relative = std::polar(1.0, sign * half_pi * (n_atoms + 1));
    const Eigen::VectorXcd plus = css_amplitudes(n_atoms, half_pi, 0.0);
    const Eigen::VectorXcd minus = css_amplitudes(n_atoms, half_pi, std::numbers::pi);
    Eigen::VectorXcd psi = (plus - relative * minus) / std::sqrt(2.0);
    return psi / psi.norm();
}

DickeState cat_state(int n_atoms, CatPhase phase) {
    return pure_state(n_atoms, cat_amplitudes(n_atoms, phase));
}

void EvolutionInputs::validate() const {
    if (!(t > 0.0)) throw DomainError("EvolutionInputs: t must be > 0");
    if (!(gamma_t >= 0.0)) throw DomainError("EvolutionInputs: gamma(t) must be >= 0");
    if (!(gamma_loss >= 0.0)) throw DomainError("EvolutionInputs: gamma_loss must be >= 0");
    if (!std::isfinite(lambda_prime) || !std::isfinite(delta_t)) {
        throw DomainError("EvolutionInputs: non-finite lambda' or delta");
    }
}

DickeState evolve(const DickeState& rho0, const EvolutionInputs& in) {
    in.validate();
    const int n = rho0.n_atoms();
    const double j = rho0.j();
    const double t = in.t;
    Eigen::MatrixXcd rho(rho0.dim(), rho0.dim());
    for (int a = 0; a <= n; ++a) {
        const double m = a - j;
        for (int b = 0; b <= n; ++b) {
            const double nn = b - j;
            const double d = m - nn;
            const double phase = -t * in.lambda_prime * d + t * in.delta_t * (m * m - nn * nn);
            const double decay = -in.gamma_loss * t * (m + nn + n) - t * d * d * in.gamma_t;
            rho(a, b) = rho0.rho()(a, b) * std::exp(Complex(decay, phase));
        }
    }
    return DickeState(n, std::move(rho));
}

DickeState normalize(const DickeState& rho) {
    if (!(rho.trace() > 1e-300)) throw DomainError("normalize: vanishing trace");
    if (rho.trace() == 1.0) return rho;
    return DickeState(rho.n_atoms(), rho.rho() / rho.trace());
}

Eigen::MatrixXcd collective_operator(int n_atoms, SpinComponent which) {
    require_atoms(n_atoms);
    const int d = n_atoms + 1;
    const double j = 0.5 * n_atoms;
    Eigen::MatrixXcd jp = Eigen::MatrixXcd::Zero(d, d);
    for (int a = 0; a + 1 < d; ++a) {
        const double m = a - j;
        jp(a + 1, a) = std::sqrt(j * (j + 1.0) - m * (m + 1.0));
    }
    switch (which) {
        case SpinComponent::kJplus:
            return jp;
        case SpinComponent::kJminus:
            return jp.adjoint();
        case SpinComponent::kJx:
            return 0.5 * (jp + jp.adjoint());
        case SpinComponent::kJy:
            return Complex(0.0, -0.5) * (jp - jp.adjoint());
        case SpinComponent::kJz: {
            Eigen::MatrixXcd jz = Eigen::MatrixXcd::Zero(d, d);
            for (int a = 0; a < d; ++a) jz(a, a) = a - j;
            return jz;
        }
    }
    throw DomainError("collective_operator: unknown component");
}

Complex expectation(const DickeState& rho, const Eigen::MatrixXcd& op, bool normalized) {
    if (op.rows() != rho.dim() || op.cols() != rho.dim()) {
        throw DomainError("expectation: operator dimension does not match the state");
    }
    // tr(Oρ) = Σ_ab O_ab ρ_ba.
    const Complex value = op.cwiseProduct(rho.rho().transpose()).sum();
    return normalized ? value / rho.trace() : value;
}

void write_state_csv(std::ostream& os, const DickeState& rho, const EvolutionInputs& in) {
    os << "# N=" << rho.n_atoms() << " t=" << fmt12(in.t) << " lambda_prime=" << fmt12(in.lambda_prime)
       << " delta=" << fmt12(in.delta_t) << " gamma=" << fmt12(in.gamma_t)
       << " gamma_loss=" << fmt12(in.gamma_loss) << " trace=" << fmt12(rho.trace()) << '\n';
    os << "m,n,re,im\n";
    const double j = rho.j();
    for (Eigen::Index a = 0; a < rho.dim(); ++a) {
        for (Eigen::Index b = 0; b < rho.dim(); ++b) {
            const Complex v = rho.rho()(a, b);
            os << fmt12(static_cast<double>(a) - j) << ',' << fmt12(static_cast<double>(b) - j) << ','
               << fmt12(v.real()) << ',' << fmt12(v.imag()) << '\n';
        }
    }
}

}  // namespace resq
