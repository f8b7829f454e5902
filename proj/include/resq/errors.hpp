#pragma once

#include <stdexcept>
#include <string>

namespace resq {

/// Argument outside the domain of a function (Γ(0, 0), k = 0 in the phonon
/// limit, N = 0 atoms, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Bogoliubov radicand went negative: the reservoir is dynamically unstable.
class InstabilityError : public std::runtime_error {
public:
    InstabilityError(const std::string& what, double k)
        : std::runtime_error(what), k_(k) {}

    double wavenumber() const noexcept { return k_; }

private:
    double k_;
};

/// Quadrature failed to reach the requested tolerance, or the integral diverges.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}

    double achieved_tolerance() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// Root or bracket search found nothing in the requested range.
class RangeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace resq
