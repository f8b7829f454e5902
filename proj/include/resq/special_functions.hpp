#pragma once

namespace resq {

/// Upper incomplete gamma function Γ(0, x) = E₁(x) = ∫_x^∞ e^{-u}/u du.
///
/// Power series below x = 1, Lentz continued fraction above. Throws
/// DomainError for x <= 0 (logarithmic divergence at the origin).
double incomplete_gamma0(double x);

/// e^x Γ(0, x). Finite for every x > 0, including arguments where e^{-x}
/// underflows; this is the combination the dipolar form factor needs.
double scaled_incomplete_gamma0(double x);

}  // namespace resq
